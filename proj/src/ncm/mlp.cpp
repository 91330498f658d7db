#include <random>

#include "ancm/errors.hpp"
#include "ancm/ncm.hpp"

namespace ancm {

const char* to_string(Activation a) {
  return a == Activation::kTanh ? "tanh" : "identity";
}

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity" || s == "linear") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + s + "'");
}

Mlp::Mlp(std::vector<int> sizes, Activation act) : sizes_(std::move(sizes)), act_(act) {
  if (sizes_.size() < 2) throw InvalidArgument("network needs at least an input and output layer");
  for (int s : sizes_) {
    if (s < 1) throw InvalidArgument("layer sizes must be positive");
  }
  for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
    W_.push_back(Mat::Zero(sizes_[l + 1], sizes_[l]));
    b_.push_back(Vec::Zero(sizes_[l + 1]));
  }
}

void Mlp::init(unsigned seed) {
  std::mt19937_64 rng(seed);
  for (size_t l = 0; l < W_.size(); ++l) {
    const double r = std::sqrt(6.0 / (W_[l].rows() + W_[l].cols()));
    std::uniform_real_distribution<double> u(-r, r);
    for (Eigen::Index j = 0; j < W_[l].cols(); ++j) {
      for (Eigen::Index i = 0; i < W_[l].rows(); ++i) W_[l](i, j) = u(rng);
    }
    b_[l].setZero();
  }
}

int Mlp::num_params() const {
  int k = 0;
  for (size_t l = 0; l < W_.size(); ++l) k += static_cast<int>(W_[l].size() + b_[l].size());
  return k;
}

Vec Mlp::params() const {
  Vec out(num_params());
  Eigen::Index k = 0;
  for (size_t l = 0; l < W_.size(); ++l) {
    out.segment(k, W_[l].size()) = Eigen::Map<const Vec>(W_[l].data(), W_[l].size());
    k += W_[l].size();
    out.segment(k, b_[l].size()) = b_[l];
    k += b_[l].size();
  }
  return out;
}

void Mlp::set_params(const Vec& theta) {
  if (theta.size() != num_params()) throw InvalidArgument("parameter vector has wrong length");
  Eigen::Index k = 0;
  for (size_t l = 0; l < W_.size(); ++l) {
    W_[l] = Eigen::Map<const Mat>(theta.data() + k, W_[l].rows(), W_[l].cols());
    k += W_[l].size();
    b_[l] = theta.segment(k, b_[l].size());
    k += b_[l].size();
  }
}

Mat Mlp::forward(const Mat& Z, Tape* tape) const {
  if (Z.rows() != num_inputs()) throw InvalidArgument("network input has wrong size");
  if (tape) {
    tape->a.clear();
    tape->a.push_back(Z);
  }
  Mat a = Z;
  const size_t L = W_.size();
  for (size_t l = 0; l < L; ++l) {
    Mat z = W_[l] * a;
    z.colwise() += b_[l];
    if (l + 1 < L && act_ == Activation::kTanh) z = z.array().tanh().matrix();
    a = std::move(z);
    if (tape) tape->a.push_back(a);
  }
  return a;
}

Vec Mlp::forward(const Vec& z) const {
  return forward(Mat(z)).col(0);
}

void Mlp::backward(const Tape& tape, const Mat& dout, Vec& grad) const {
  const size_t L = W_.size();
  if (grad.size() != num_params()) grad = Vec::Zero(num_params());
  std::vector<Eigen::Index> offset(L);
  Eigen::Index k = 0;
  for (size_t l = 0; l < L; ++l) {
    offset[l] = k;
    k += W_[l].size() + b_[l].size();
  }
  Mat delta = dout;
  for (size_t l = L; l-- > 0;) {
    if (l + 1 < L && act_ == Activation::kTanh) {
      delta.array() *= 1.0 - tape.a[l + 1].array().square();
    }
    const Mat gW = delta * tape.a[l].transpose();
    grad.segment(offset[l], gW.size()) += Eigen::Map<const Vec>(gW.data(), gW.size());
    grad.segment(offset[l] + gW.size(), b_[l].size()) += delta.rowwise().sum();
    if (l > 0) delta = W_[l].transpose() * delta;
  }
}

}  // namespace ancm
