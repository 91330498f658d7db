#include <algorithm>
#include <numeric>
#include <random>

#include "ancm/errors.hpp"
#include "ancm/ncm.hpp"

namespace ancm {

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(lr_decay > 0.0)) throw InvalidArgument("lr decay must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidArgument("momentum must be in [0, 1)");
  if (mode == LossMode::kConstraint && system == nullptr) {
    throw InvalidArgument("constraint-loss mode needs the parametric system");
  }
}

namespace {

constexpr int kChunk = 256;

/// Top eigenpair of a small symmetric matrix.
std::pair<double, Vec> top_eig(const Mat& S) {
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  const Eigen::Index k = es.eigenvalues().size() - 1;
  return {es.eigenvalues()(k), es.eigenvectors().col(k)};
}

class LossEvaluator {
 public:
  LossEvaluator(const MetricNet& net, const std::vector<MetricSample>& data,
                const TrainConfig& cfg)
      : net_(net), data_(data), cfg_(cfg) {
    if (cfg.mode != LossMode::kConstraint) return;
    const auto& ps = *cfg.system;
    const Mat R = cfg.synthesis.R_or_identity(ps.m());
    const Mat Rinv = R.inverse();
    const Vec u_d = cfg.synthesis.u_d.size() == 0 ? Vec::Zero(ps.m()) : cfg.synthesis.u_d;
    for (const auto& s : data) {
      const SystemModel sys = ps.at(s.theta_hat);
      A_.push_back(sdc_matrix(sys, s.x, s.x_d, u_d, cfg.synthesis.quad_order));
      const Mat B = sys.B(s.x);
      K_.push_back(B * Rinv * B.transpose());
    }
  }

  /// Mean loss over `idx`; accumulates the gradient of that mean into `grad`.
  double eval(const std::vector<int>& idx, Vec* grad) const {
    const int n = net_.n();
    const Eigen::Index count = static_cast<Eigen::Index>(idx.size());
    Mat Z(net_.mlp().num_inputs(), count);
    for (Eigen::Index c = 0; c < count; ++c) {
      const auto& s = data_[idx[c]];
      Z.col(c) = (net_.input(s.x, s.x_d, s.theta_hat) - net_.in_offset()).cwiseProduct(net_.in_gain());
    }
    Mlp::Tape tape;
    const Mat out = net_.mlp().forward(Z, grad ? &tape : nullptr);
    Mat dout(out.rows(), count);
    const double scale = net_.out_scale();
    double total = 0.0;
    for (Eigen::Index c = 0; c < count; ++c) {
      const auto& s = data_[idx[c]];
      const Mat L = net_.factor(out.col(c));
      const Mat Mn = net_.metric_from_output(out.col(c));
      Mat G;  // d loss_c / d M
      if (cfg_.mode == LossMode::kRegression) {
        const Mat r = (Mn - s.M()) / scale;
        total += r.squaredNorm();
        G = 2.0 * sym(r) / scale;
      } else {
        G = Mat::Zero(n, n);
        total += constraint_term(idx[c], Mn, &G);
      }
      if (!grad) continue;
      const Mat dL = 2.0 * scale * G * L;
      int k = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) dout(k++, c) = dL(i, j) / count;
      }
    }
    if (grad) net_.mlp().backward(tape, dout, *grad);
    return total / count;
  }

  double full(Vec* grad) const {
    const int N = static_cast<int>(data_.size());
    if (grad) *grad = Vec::Zero(net_.mlp().num_params());
    double sum = 0.0;
    for (int b = 0; b < N; b += kChunk) {
      const int e = std::min(N, b + kChunk);
      std::vector<int> idx(e - b);
      std::iota(idx.begin(), idx.end(), b);
      Vec g;
      if (grad) g = Vec::Zero(grad->size());
      sum += eval(idx, grad ? &g : nullptr) * (e - b);
      if (grad) *grad += g * (e - b);
    }
    if (grad) *grad /= N;
    return sum / N;
  }

 private:
  double constraint_term(int i, const Mat& Mn, Mat* G) const {
    const int n = net_.n();
    const double s = net_.out_scale();
    const double rate = cfg_.synthesis.alpha + cfg_.synthesis.margin;
    const Mat& A = A_[i];
    const Mat& K = K_[i];
    double pen = 0.0;
    const Mat C = sym(Mn * A + A.transpose() * Mn - 2.0 * Mn * K * Mn + 2.0 * rate * Mn);
    auto [lc, v] = top_eig(C);
    if (lc > 0.0) {
      pen += lc / (s * s);
      const Vec a = A * v;
      const Vec w = K * Mn * v;
      *G += (v * a.transpose() + a * v.transpose() - 2.0 * (v * w.transpose() + w * v.transpose()) +
             2.0 * rate * v * v.transpose()) /
            (s * s);
    }
    const Mat I = Mat::Identity(n, n);
    if (cfg_.omega_lower > 0.0) {
      auto [lu, vu] = top_eig(Mn - I / cfg_.omega_lower);
      if (lu > 0.0) {
        pen += lu / s;
        *G += vu * vu.transpose() / s;
      }
    }
    if (cfg_.omega_upper > 0.0) {
      auto [ll, vl] = top_eig(I / cfg_.omega_upper - Mn);
      if (ll > 0.0) {
        pen += ll / s;
        *G -= vl * vl.transpose() / s;
      }
    }
    return pen;
  }

  const MetricNet& net_;
  const std::vector<MetricSample>& data_;
  const TrainConfig& cfg_;
  std::vector<Mat> A_, K_;
};

}  // namespace

double dataset_loss(const MetricNet& net, const std::vector<MetricSample>& data,
                    const TrainConfig& cfg, Vec* grad) {
  if (data.empty()) throw EmptyDataset("no samples");
  cfg.validate();
  return LossEvaluator(net, data, cfg).full(grad);
}

double max_relative_error(const Vec& analytic, const Vec& numeric) {
  if (analytic.size() != numeric.size()) throw InvalidArgument("gradient vectors differ in size");
  if (analytic.size() == 0) return 0.0;
  const double floor = std::max(1e-3 * analytic.cwiseAbs().maxCoeff(), 1e-12);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic(i), b = numeric(i);
    const double denom = std::max({std::abs(a), std::abs(b), floor});
    worst = std::max(worst, std::abs(a - b) / denom);
  }
  return worst;
}

GradCheckReport grad_check(const MetricNet& net, const std::vector<MetricSample>& data,
                           const TrainConfig& cfg, int num_params, unsigned seed,
                           double step) {
  GradCheckReport rep;
  Vec full;
  dataset_loss(net, data, cfg, &full);
  const int P = net.mlp().num_params();
  std::vector<int> all(P);
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  rep.indices.assign(all.begin(), all.begin() + std::min(P, std::max(1, num_params)));
  std::sort(rep.indices.begin(), rep.indices.end());

  const Eigen::Index k = static_cast<Eigen::Index>(rep.indices.size());
  rep.analytic = Vec(k);
  rep.numeric = Vec(k);
  MetricNet probe = net;
  const Vec theta = net.mlp().params();
  const double h = step;
  for (Eigen::Index j = 0; j < k; ++j) {
    const int i = rep.indices[j];
    rep.analytic(j) = full(i);
    auto at = [&](double step) {
      Vec t = theta;
      t(i) += step;
      probe.mlp().set_params(t);
      return dataset_loss(probe, data, cfg);
    };
    // Five-point stencil; exact for the quartic loss of an identity network.
    rep.numeric(j) = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
  }
  rep.max_rel_error = max_relative_error(rep.analytic, rep.numeric);
  return rep;
}

TrainResult train(MetricNet& net, const std::vector<MetricSample>& data, const TrainConfig& cfg) {
  if (data.empty()) throw EmptyDataset("training set is empty");
  cfg.validate();
  TrainResult res;
  if (cfg.gate_grad_check) {
    const std::vector<MetricSample> probe(data.begin(),
                                          data.begin() + std::min<size_t>(data.size(), 16));
    res.grad_check_error = grad_check(net, probe, cfg, 40, cfg.seed).max_rel_error;
    if (!(res.grad_check_error <= 1e-5)) {
      throw GradientCheckFailed("backprop disagrees with finite differences (relative error " +
                                std::to_string(res.grad_check_error) + ")");
    }
  }

  const LossEvaluator loss(net, data, cfg);
  res.initial_loss = loss.full(nullptr);
  res.loss_curve.push_back(res.initial_loss);
  if (!std::isfinite(res.initial_loss)) throw DivergedLoss("initial loss is not finite");

  const int N = static_cast<int>(data.size());
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  Vec theta = net.mlp().params();
  Vec velocity = Vec::Zero(theta.size());
  double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int b = 0; b < N; b += cfg.batch_size) {
      const std::vector<int> idx(order.begin() + b, order.begin() + std::min(N, b + cfg.batch_size));
      Vec g = Vec::Zero(theta.size());
      const double l = loss.eval(idx, &g);
      if (!std::isfinite(l) || !g.allFinite()) {
        throw DivergedLoss("loss became non-finite in epoch " + std::to_string(epoch));
      }
      velocity = cfg.momentum * velocity - lr * g;
      theta += velocity;
      net.mlp().set_params(theta);
    }
    const double l = loss.full(nullptr);
    if (!std::isfinite(l)) throw DivergedLoss("loss became non-finite after epoch " + std::to_string(epoch));
    res.loss_curve.push_back(l);
    lr *= cfg.lr_decay;
  }
  res.final_loss = res.loss_curve.back();
  return res;
}

}  // namespace ancm
