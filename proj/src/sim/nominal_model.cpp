#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ancm/errors.hpp"
#include "ancm/sim.hpp"

namespace ancm {

namespace {

struct Samples {
  Mat X;  // normalized states, one column each
  Vec u;  // normalized by u_max
  Mat Y;  // true x'
};

Samples draw(const CartPole& cp, const Box& domain, const Vec& in_scale, double u_max, int count,
             std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-u_max, u_max);
  Samples s;
  const Eigen::Index n = domain.dim();
  s.X.resize(n, count);
  s.u.resize(count);
  s.Y.resize(n, count);
  for (int k = 0; k < count; ++k) {
    const Vec x = domain.sample(rng);
    const double u = uni(rng);
    s.u(k) = u / u_max;
    s.X.col(k) = x.cwiseQuotient(in_scale);
    s.Y.col(k) = eval_cartpole(cp, x, u);
  }
  return s;
}

// prediction f_hat + b_hat u from the raw network outputs
Mat predict(const Mat& out, const Vec& u, Eigen::Index n) {
  return out.topRows(n) + out.bottomRows(n) * u.asDiagonal();
}

}  // namespace

NominalModel fit_nominal_model(const CartPole& cp, const Box& domain,
                               const NominalModelConfig& cfg) {
  cp.validate();
  if (cfg.samples < 1 || cfg.validation < 1) throw EmptyDataset("nominal model needs samples");
  if (!(cfg.u_max > 0.0)) throw InvalidArgument("u_max must be positive");
  if (cfg.depth < 1 || cfg.width < 1 || cfg.batch_size < 1 || cfg.epochs < 0) {
    throw InvalidArgument("bad nominal model configuration");
  }
  const Eigen::Index n = domain.dim();
  NominalModel nm;
  nm.in_scale = (domain.hi - domain.lo).cwiseAbs() / 2.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (nm.in_scale(i) <= 0.0) nm.in_scale(i) = 1.0;
  }

  std::mt19937_64 rng(cfg.seed);
  const Samples train = draw(cp, domain, nm.in_scale, cfg.u_max, cfg.samples, rng);
  const Samples valid = draw(cp, domain, nm.in_scale, cfg.u_max, cfg.validation, rng);

  // targets are learned in units of their spread, folded back afterwards
  Vec scale(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = train.Y.row(i).mean();
    scale(i) = std::sqrt((train.Y.row(i).array() - mean).square().mean());
    if (!(scale(i) > 1e-12)) scale(i) = 1.0;
  }
  const Mat Yn = scale.cwiseInverse().asDiagonal() * train.Y;

  std::vector<int> sizes(1, static_cast<int>(n));
  for (int l = 0; l < cfg.depth; ++l) sizes.push_back(cfg.width);
  sizes.push_back(static_cast<int>(2 * n));
  nm.net = Mlp(sizes, Activation::kTanh);
  nm.net.init(cfg.seed);

  auto loss_and_grad = [&](const std::vector<int>& idx, Vec* grad) {
    const Eigen::Index B = static_cast<Eigen::Index>(idx.size());
    Mat Z(n, B), Yb(n, B);
    Vec ub(B);
    for (Eigen::Index k = 0; k < B; ++k) {
      Z.col(k) = train.X.col(idx[k]);
      Yb.col(k) = Yn.col(idx[k]);
      ub(k) = train.u(idx[k]);
    }
    Mlp::Tape tape;
    const Mat out = nm.net.forward(Z, grad ? &tape : nullptr);
    const Mat r = predict(out, ub, n) - Yb;
    const double loss = r.squaredNorm() / static_cast<double>(B);
    if (grad) {
      Mat dout(2 * n, B);
      dout.topRows(n) = 2.0 * r / static_cast<double>(B);
      dout.bottomRows(n) = dout.topRows(n) * ub.asDiagonal();
      grad->setZero(nm.net.num_params());
      nm.net.backward(tape, dout, *grad);
    }
    return loss;
  };

  std::vector<int> order(cfg.samples);
  std::iota(order.begin(), order.end(), 0);
  nm.loss_curve.push_back(loss_and_grad(order, nullptr));
  Vec params = nm.net.params(), velocity = Vec::Zero(params.size()), grad;
  double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < cfg.samples; start += cfg.batch_size) {
      const int end = std::min(cfg.samples, start + cfg.batch_size);
      const std::vector<int> batch(order.begin() + start, order.begin() + end);
      loss_and_grad(batch, &grad);
      velocity = cfg.momentum * velocity - lr * grad;
      params += velocity;
      nm.net.set_params(params);
    }
    lr *= cfg.lr_decay;
    const double l = loss_and_grad(order, nullptr);
    if (!std::isfinite(l)) throw DivergedLoss("nominal model loss diverged at epoch " + std::to_string(epoch));
    nm.loss_curve.push_back(l);
  }

  // fold the target spread and the input range into the output layer
  Mat& W = nm.net.weights().back();
  Vec& b = nm.net.biases().back();
  for (Eigen::Index i = 0; i < n; ++i) {
    W.row(i) *= scale(i);
    W.row(n + i) *= scale(i) / cfg.u_max;
    b(i) *= scale(i);
    b(n + i) *= scale(i) / cfg.u_max;
  }

  const Mat pred = predict(nm.net.forward(valid.X), valid.u * cfg.u_max, n) - valid.Y;
  double sq = 0.0, worst = 0.0;
  for (Eigen::Index k = 0; k < pred.cols(); ++k) {
    const double e = pred.col(k).norm();
    sq += e * e;
    worst = std::max(worst, e);
  }
  nm.validation_rms = std::sqrt(sq / static_cast<double>(pred.cols()));
  nm.validation_max = worst;

  // basis: last hidden layer plus a constant, shared by F_hat and B_hat
  const Mlp net = nm.net;
  const Vec in_scale = nm.in_scale;
  auto features = [net, in_scale](const Vec& x) -> Vec {
    Mlp::Tape tape;
    net.forward(Mat(x.cwiseQuotient(in_scale)), &tape);
    const Mat& h = tape.a[tape.a.size() - 2];
    Vec z(h.rows() + 1);
    z << h.col(0), 1.0;
    return z;
  };
  const Eigen::Index q = W.cols() + 1;
  nm.basis.F_hat.resize(n, q);
  nm.basis.F_hat << W.topRows(n), b.head(n);
  Mat Bh(n, q);
  Bh << W.bottomRows(n), b.tail(n);
  nm.basis.B_hat = {Bh};
  nm.basis.phi = features;
  nm.basis.varphi = {features};
  nm.basis.d_M_bar = nm.validation_max;
  return nm;
}

ParametricSystem as_parametric(const SystemModel& model) {
  const int n = model.n(), m = model.m();
  const SystemModel copy = model;
  return ParametricSystem(
      n, m, 0, 0, [copy](const Vec& x) { return copy.f(x); },
      [copy](const Vec& x) { return copy.B(x); },
      [n](const Vec&) -> Mat { return Mat::Zero(n, 0); },
      [n, m](const Vec&) { return std::vector<Mat>(m, Mat::Zero(n, 0)); },
      [](const Vec&) -> Vec { return Vec(0); }, model.domain(), model.bounds());
}

}  // namespace ancm
