#include "ancm/errors.hpp"
#include "ancm/ncm.hpp"

namespace ancm {

MetricNet::MetricNet(int n, int p, int depth, int width, Activation act, unsigned seed,
                     double eps_pd)
    : n_(n), p_(p), seed_(seed), eps_pd_(eps_pd) {
  if (n < 1 || p < 0 || depth < 0 || width < 1) throw InvalidArgument("bad network shape");
  if (!(eps_pd > 0.0)) throw InvalidArgument("eps_pd must be positive");
  std::vector<int> sizes{2 * n + p};
  for (int i = 0; i < depth; ++i) sizes.push_back(width);
  sizes.push_back(n * (n + 1) / 2);
  mlp_ = Mlp(sizes, act);
  mlp_.init(seed);
  in_offset_ = Vec::Zero(2 * n + p);
  in_gain_ = Vec::Ones(2 * n + p);
}

void MetricNet::set_normalization(const Vec& offset, const Vec& gain) {
  if (offset.size() != 2 * n_ + p_ || gain.size() != 2 * n_ + p_) {
    throw InvalidArgument("normalization must have 2n + p entries");
  }
  in_offset_ = offset;
  in_gain_ = gain;
}

void MetricNet::set_out_scale(double s) {
  if (!(s > 0.0)) throw InvalidArgument("output scale must be positive");
  out_scale_ = s;
}

void MetricNet::fit_to_data(const std::vector<MetricSample>& samples) {
  if (samples.empty()) throw EmptyDataset("no samples to fit normalization");
  const int d = 2 * n_ + p_;
  Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  Mat mean = Mat::Zero(n_, n_);
  for (const auto& s : samples) {
    const Vec z = input(s.x, s.x_d, s.theta_hat);
    lo = lo.cwiseMin(z);
    hi = hi.cwiseMax(z);
    mean += s.M();
  }
  mean /= static_cast<double>(samples.size());
  Vec gain(d);
  for (int i = 0; i < d; ++i) {
    const double half = 0.5 * (hi(i) - lo(i));
    gain(i) = half > 1e-12 ? 1.0 / half : 1.0;
  }
  set_normalization(0.5 * (lo + hi), gain);
  set_out_scale(spectral_norm(mean));

  Mat target = (mean - eps_pd_ * Mat::Identity(n_, n_)) / out_scale_;
  Eigen::LLT<Mat> llt(sym(target));
  if (llt.info() != Eigen::Success) return;
  const Mat L = llt.matrixL();
  Vec& bias = mlp_.biases().back();
  int k = 0;
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j <= i; ++j) bias(k++) = L(i, j);
  }
}

Vec MetricNet::input(const Vec& x, const Vec& x_d, const Vec& theta_hat) const {
  if (x.size() != n_ || x_d.size() != n_ || theta_hat.size() != p_) {
    throw InvalidArgument("metric net input has wrong dimension");
  }
  Vec z(2 * n_ + p_);
  z << x, x_d, theta_hat;
  return z;
}

Mat MetricNet::factor(const Vec& out) const {
  Mat L = Mat::Zero(n_, n_);
  int k = 0;
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j <= i; ++j) L(i, j) = out(k++);
  }
  return L;
}

Mat MetricNet::metric_from_output(const Vec& out) const {
  const Mat L = factor(out);
  Mat M = out_scale_ * (L * L.transpose());
  M = sym(M);
  M.diagonal().array() += eps_pd_;
  return M;
}

Mat MetricNet::metric(const Vec& x, const Vec& x_d, const Vec& theta_hat) const {
  const Vec z = (input(x, x_d, theta_hat) - in_offset_).cwiseProduct(in_gain_);
  return metric_from_output(mlp_.forward(z));
}

void MetricNet::zero() {
  for (auto& W : mlp_.weights()) W.setZero();
  for (auto& b : mlp_.biases()) b.setZero();
}

Mat forward_metric(const MetricNet& net, const Vec& x, const Vec& x_d, const Vec& theta_hat) {
  return net.metric(x, x_d, theta_hat);
}

}  // namespace ancm
