#include <cmath>

#include "ancm/dynamics.hpp"
#include "ancm/errors.hpp"

namespace ancm {

Box::Box(Vec lower, Vec upper) : lo(std::move(lower)), hi(std::move(upper)) {
  if (lo.size() != hi.size()) throw InvalidArgument("box bounds differ in size");
  if (lo.size() > 0 && (hi - lo).minCoeff() < 0.0) throw InvalidArgument("box has hi < lo");
}

bool Box::contains(const Vec& x, double slack) const {
  if (x.size() != lo.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x(i) < lo(i) - slack || x(i) > hi(i) + slack) return false;
  }
  return true;
}

Vec Box::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec x(lo.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = lo(i) + unit(rng) * (hi(i) - lo(i));
  return x;
}

SystemModel::SystemModel(int n, int m, DriftFn f, InputFn B, Box domain, ModelBounds bounds)
    : n_(n), m_(m), f_(std::move(f)), B_(std::move(B)), domain_(std::move(domain)),
      bounds_(bounds) {
  if (n < 1 || m < 1) throw InvalidArgument("system needs n >= 1 and m >= 1");
  if (!f_ || !B_) throw InvalidArgument("system needs both f and B");
  if (domain_.dim() != 0 && domain_.dim() != n) {
    throw InvalidArgument("domain dimension differs from state dimension");
  }
}

double sample_input_norm(const SystemModel& sys, int samples, unsigned seed) {
  if (sys.domain().dim() == 0) throw InvalidArgument("system has no declared domain");
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    worst = std::max(worst, spectral_norm(sys.B(sys.domain().sample(rng))));
  }
  return worst;
}

void verify_declared_bounds(const SystemModel& sys, const Mat& R, int samples, unsigned seed) {
  const double b = sample_input_norm(sys, samples, seed);
  if (b > sys.bounds().b_bar) {
    throw InvalidArgument("sampled |B| = " + std::to_string(b) + " exceeds b_bar = " +
                          std::to_string(sys.bounds().b_bar));
  }
  const double rho = spectral_norm(R.inverse());
  if (rho > sys.bounds().rho_bar * (1.0 + 1e-12)) {
    throw InvalidArgument("|R^-1| = " + std::to_string(rho) + " exceeds rho_bar");
  }
}

ParametricSystem::ParametricSystem(int n, int m, int p, int q_z, SystemModel::DriftFn f0,
                                   SystemModel::InputFn B0, RegressorFn Y_f,
                                   InputRegressorFn Y_b, FeatureFn Z, Box domain,
                                   ModelBounds bounds)
    : n_(n), m_(m), p_(p), q_z_(q_z), f0_(std::move(f0)), B0_(std::move(B0)),
      Y_f_(std::move(Y_f)), Y_b_(std::move(Y_b)), Z_(std::move(Z)),
      domain_(std::move(domain)), bounds_(bounds) {
  if (n < 1 || m < 1 || p < 0 || q_z < 0) throw InvalidArgument("bad parametric dimensions");
  if (!f0_ || !B0_) throw InvalidArgument("parametric system needs f0 and B0");
  if (!Y_f_) Y_f_ = [n, q_z](const Vec&) { return Mat::Zero(n, q_z); };
  if (!Y_b_) {
    Y_b_ = [n, m, q_z](const Vec&) { return std::vector<Mat>(m, Mat::Zero(n, q_z)); };
  }
  if (!Z_) {
    if (p != q_z) throw InvalidArgument("Z may only be omitted when p == q_z");
    Z_ = [](const Vec& th) { return th; };
    linear_ = true;
  }
}

std::vector<Mat> ParametricSystem::Y_b_list(const Vec& x) const { return Y_b_(x); }

Mat ParametricSystem::Y_b(const Vec& x, const Vec& u) const {
  const auto list = Y_b_(x);
  Mat out = Mat::Zero(n_, q_z_);
  for (int i = 0; i < m_; ++i) out += list[i] * u(i);
  return out;
}

Vec ParametricSystem::f(const Vec& x, const Vec& theta) const {
  return f0_(x) + Y_f_(x) * Z_(theta);
}

Mat ParametricSystem::B(const Vec& x, const Vec& theta) const {
  Mat b = B0_(x);
  const Vec z = Z_(theta);
  const auto list = Y_b_(x);
  for (int i = 0; i < m_; ++i) b.col(i) += list[i] * z;
  return b;
}

Vec ParametricSystem::xdot(const Vec& x, const Vec& u, const Vec& theta) const {
  return f(x, theta) + B(x, theta) * u;
}

SystemModel ParametricSystem::at(const Vec& theta) const {
  ParametricSystem self = *this;
  return SystemModel(
      n_, m_, [self, theta](const Vec& x) { return self.f(x, theta); },
      [self, theta](const Vec& x) { return self.B(x, theta); }, domain_, bounds_);
}

ParametricSystem ParametricSystem::augment() const {
  if (augmented_) return *this;
  const int n = n_, m = m_, p = p_, q = q_z_;
  const auto Yf = Y_f_;
  const auto Yb = Y_b_;
  ParametricSystem out(
      n, m, p + q, p + q, f0_, B0_,
      [Yf, n, p, q](const Vec& x) {
        Mat y = Mat::Zero(n, p + q);
        y.rightCols(q) = Yf(x);
        return y;
      },
      [Yb, n, p, q](const Vec& x) {
        auto list = Yb(x);
        for (auto& y : list) {
          Mat wide = Mat::Zero(n, p + q);
          wide.rightCols(q) = y;
          y = wide;
        }
        return list;
      },
      nullptr, domain_, bounds_);
  out.augmented_ = true;
  return out;
}

Vec ParametricSystem::augment_parameter(const Vec& theta) const {
  if (augmented_) return theta;
  Vec out(p_ + q_z_);
  out << theta, Z_(theta);
  return out;
}

Mat sdc_matrix(const SystemModel& sys, const Vec& x, const Vec& x_d, const Vec& u_d,
               int quad_order) {
  if (quad_order < 2) throw InvalidArgument("quad_order must be >= 2");
  const int n = sys.n();
  if (x.size() != n || x_d.size() != n || u_d.size() != sys.m()) {
    throw InvalidArgument("sdc_matrix: dimension mismatch");
  }
  auto fbar = [&](const Vec& q) -> Vec {
    Vec v = sys.f(q) + sys.B(q) * u_d;
    if (!v.allFinite()) throw NonFiniteDynamics("f or B not finite on the SDC segment");
    return v;
  };
  const Quadrature quad = gauss_legendre(quad_order);
  Mat A = Mat::Zero(n, n);
  for (int k = 0; k < quad_order; ++k) {
    const double c = quad.nodes(k);
    const Vec q = c * x + (1.0 - c) * x_d;
    A += quad.weights(k) * jacobian_fd(fbar, q);
  }
  return A;
}

Mat pseudo_inverse_phi(const AffineUncertainSystem& sys, const Vec& x, const Vec& x_d,
                       double* residual) {
  const Mat B = sys.base.B(x);
  const Mat D = (sys.Delta(x) - sys.Delta(x_d)).transpose();  // n x p
  const Eigen::CompleteOrthogonalDecomposition<Mat> cod(B);
  const Mat phiT = cod.solve(D);  // m x p
  if (residual != nullptr) *residual = (B * phiT - D).norm();
  return phiT.transpose();
}

Mat matched_phi(const AffineUncertainSystem& sys, const Vec& x, const Vec& x_d) {
  double residual = 0.0;
  const Mat phi = pseudo_inverse_phi(sys, x, x_d, &residual);
  const double scale = 1.0 + (sys.Delta(x) - sys.Delta(x_d)).norm();
  if (residual > 1e-8 * scale) {
    throw Unmatched("(Delta(x)-Delta(x_d))^T not in span B(x); residual " +
                    std::to_string(residual));
  }
  return phi;
}

Mat LagrangianSystem::H_inverse(const Vec& s) const {
  const Mat Hs = H(s);
  const Eigen::JacobiSVD<Mat> svd(Hs);
  const Vec sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin <= 0.0 || sv(0) / smin > condition_cap) {
    throw SingularMass("H(s) is singular or ill-conditioned");
  }
  return Hs.inverse();
}

Vec LagrangianSystem::sdot(const Vec& s, const Vec& tau, const Vec& theta, const Vec& d) const {
  const Mat Hinv = H_inverse(s);
  Vec rhs = tau + d - h(s);
  if (p > 0) rhs -= Delta(s) * theta;
  return Hinv * rhs;
}

}  // namespace ancm
