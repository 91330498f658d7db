#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ancm/linalg.hpp"

namespace ancm {

/// Axis-aligned box, used for the compact domain of states and parameters.
struct Box {
  Vec lo;
  Vec hi;

  Box() = default;
  Box(Vec lower, Vec upper);

  Eigen::Index dim() const { return lo.size(); }
  bool contains(const Vec& x, double slack = 0.0) const;
  Vec center() const { return 0.5 * (lo + hi); }
  /// Uniform random point inside the box.
  Vec sample(std::mt19937_64& rng) const;
};

/// Declared norm bounds over the domain: b_bar >= sup|B|, rho_bar >= sup|R^-1|,
/// d_bar >= sup|d|.
struct ModelBounds {
  double b_bar = 0.0;
  double rho_bar = 0.0;
  double d_bar = 0.0;
};

/// Control-affine model  x' = f(x) + B(x) u  on a compact domain.
class SystemModel {
 public:
  using DriftFn = std::function<Vec(const Vec&)>;
  using InputFn = std::function<Mat(const Vec&)>;

  SystemModel() = default;
  SystemModel(int n, int m, DriftFn f, InputFn B, Box domain = {}, ModelBounds bounds = {});

  int n() const { return n_; }
  int m() const { return m_; }

  Vec f(const Vec& x) const { return f_(x); }
  Mat B(const Vec& x) const { return B_(x); }
  Vec xdot(const Vec& x, const Vec& u) const { return f_(x) + B_(x) * u; }

  const Box& domain() const { return domain_; }
  const ModelBounds& bounds() const { return bounds_; }
  void set_bounds(const ModelBounds& b) { bounds_ = b; }

 private:
  int n_ = 0;
  int m_ = 0;
  DriftFn f_;
  InputFn B_;
  Box domain_;
  ModelBounds bounds_;
};

/// Largest sampled |B(x)| over the domain.
double sample_input_norm(const SystemModel& sys, int samples, unsigned seed);

/// Throws InvalidArgument when a sampled |B(x)| or |R^-1| exceeds the declared
/// bound.
void verify_declared_bounds(const SystemModel& sys, const Mat& R, int samples, unsigned seed);

/// Parametric system that is multiplicatively separable in x and theta:
///
///   f(x, theta) = f0(x) + Y_f(x) Z(theta)
///   b_i(x, theta) = b0_i(x) + Y_b_i(x) Z(theta)
///
/// The known parts f0, B0 correspond to a constant entry of Z; keeping them
/// separate avoids augmenting Z with a 1.
class ParametricSystem {
 public:
  using RegressorFn = std::function<Mat(const Vec&)>;                // n x q_z
  using InputRegressorFn = std::function<std::vector<Mat>(const Vec&)>;  // m of n x q_z
  using FeatureFn = std::function<Vec(const Vec&)>;                  // R^p -> R^q_z

  ParametricSystem() = default;
  ParametricSystem(int n, int m, int p, int q_z, SystemModel::DriftFn f0,
                   SystemModel::InputFn B0, RegressorFn Y_f, InputRegressorFn Y_b,
                   FeatureFn Z, Box domain = {}, ModelBounds bounds = {});

  int n() const { return n_; }
  int m() const { return m_; }
  int p() const { return p_; }
  int q_z() const { return q_z_; }
  bool augmented() const { return augmented_; }
  /// True when Z is the identity, i.e. the parameter enters linearly.
  bool linear_in_parameter() const { return linear_; }
  void mark_linear() { linear_ = (p_ == q_z_); }

  Vec f(const Vec& x, const Vec& theta) const;
  Mat B(const Vec& x, const Vec& theta) const;
  Vec xdot(const Vec& x, const Vec& u, const Vec& theta) const;

  Mat Y_f(const Vec& x) const { return Y_f_(x); }
  std::vector<Mat> Y_b_list(const Vec& x) const;
  /// Y_b(x,u) = sum_i Y_b_i(x) u_i.
  Mat Y_b(const Vec& x, const Vec& u) const;
  Vec Z(const Vec& theta) const { return Z_(theta); }

  /// Model with theta frozen.
  SystemModel at(const Vec& theta) const;

  /// Wrapper in which the adapted parameter is [theta; Z(theta)] and every
  /// regressor acts linearly on it.
  ParametricSystem augment() const;
  Vec augment_parameter(const Vec& theta) const;

  const Box& domain() const { return domain_; }
  const ModelBounds& bounds() const { return bounds_; }
  void set_bounds(const ModelBounds& b) { bounds_ = b; }

 private:
  int n_ = 0, m_ = 0, p_ = 0, q_z_ = 0;
  SystemModel::DriftFn f0_;
  SystemModel::InputFn B0_;
  RegressorFn Y_f_;
  InputRegressorFn Y_b_;
  FeatureFn Z_;
  Box domain_;
  ModelBounds bounds_;
  bool augmented_ = false;
  bool linear_ = false;
};

/// x' = f(x) + B(x) u - Delta(x)^T theta + d(x).
struct AffineUncertainSystem {
  SystemModel base;
  std::function<Mat(const Vec&)> Delta;  // p x n
  int p = 0;
  double theta_bar = 0.0;
  double phi_bar = 0.0;

  Vec xdot(const Vec& x, const Vec& u, const Vec& theta) const {
    return base.xdot(x, u) - Delta(x).transpose() * theta;
  }
};

/// H(s) s' + h(s) + Delta(s) theta = tau + d(s).
struct LagrangianSystem {
  int n = 0;
  int p = 0;
  std::function<Mat(const Vec&)> H;
  std::function<Vec(const Vec&)> h;
  std::function<Mat(const Vec&)> Delta;  // n x p
  double delta_bar = 0.0;
  double condition_cap = 1e8;

  /// s' for the given torque and true parameter. Throws SingularMass.
  Vec sdot(const Vec& s, const Vec& tau, const Vec& theta, const Vec& d) const;
  /// H(s)^{-1}; throws SingularMass when cond(H) exceeds the cap.
  Mat H_inverse(const Vec& s) const;
};

/// Dynamics expressed with basis functions:
///   q' = F phi(q) + sum_i B_i varphi_i(q) u_i  (+ modeling error d_M).
struct BasisFunctionModel {
  Mat F_hat;                                   // n x p
  std::vector<Mat> B_hat;                      // m entries, n x q
  std::function<Vec(const Vec&)> phi;          // R^n -> R^p
  std::vector<std::function<Vec(const Vec&)>> varphi;  // m entries, R^n -> R^q
  double zeta_bar = 0.0;
  double d_M_bar = 0.0;

  int n() const { return static_cast<int>(F_hat.rows()); }
  int m() const { return static_cast<int>(B_hat.size()); }
  Mat B(const Vec& x) const;
  SystemModel as_system(Box domain = {}) const;
};

/// Estimate-side evaluation F phi(x) + sum_i B_i varphi_i(x) u_i.
Vec basis_model_eval(const BasisFunctionModel& bm, const Vec& x, const Vec& u);

/// Gauss-Legendre nodes and weights mapped to [0, 1].
struct Quadrature {
  Vec nodes;
  Vec weights;
};
Quadrature gauss_legendre(int order);

/// Central-difference Jacobian with step 1e-6 * (1 + |x|).
Mat jacobian_fd(const std::function<Vec(const Vec&)>& fn, const Vec& x);

/// SDC matrix A(x, x_d) = int_0^1 dfbar/dx (c x + (1-c) x_d) dc with
/// fbar(q) = f(q) + B(q) u_d, so that A (x - x_d) equals
/// f(x) + B(x) u_d - f(x_d) - B(x_d) u_d.
Mat sdc_matrix(const SystemModel& sys, const Vec& x, const Vec& x_d, const Vec& u_d,
               int quad_order = 8);

/// Matched-uncertainty regressor phi (p x m) with
/// (Delta(x) - Delta(x_d))^T = B(x) phi^T, recovered by least squares.
/// Throws Unmatched when the residual exceeds 1e-8 (1 + |Delta diff|).
Mat matched_phi(const AffineUncertainSystem& sys, const Vec& x, const Vec& x_d);

/// Least-squares phi without the span check; the residual is reported.
Mat pseudo_inverse_phi(const AffineUncertainSystem& sys, const Vec& x, const Vec& x_d,
                       double* residual = nullptr);

/// Cart-pole with viscous cart and pole drag; state (p, theta, p', theta').
struct CartPole {
  double g = 9.8;
  double m_c = 1.0;
  double m = 0.1;
  double mu_c = 0.5;
  double mu_p = 0.002;
  double l = 0.5;

  void validate() const;
};

/// 2x2 mass matrix of the cart-pole at pole angle `angle`.
Eigen::Matrix2d cartpole_mass_matrix(const CartPole& cp, double angle);

/// State derivative; throws SingularMass if det(mass matrix) < 1e-12.
Vec eval_cartpole(const CartPole& cp, const Vec& x, double u);

struct CartPoleRegressors {
  Mat Y_f;    // 4 x 2
  Vec theta;  // (mu_c, mu_p)
};

/// Drag regressors: f(x, theta) = f(x, 0) + Y_f(x) theta.
CartPoleRegressors cartpole_regressors(const CartPole& cp, const Vec& x);

/// Cart-pole as a parametric system in theta = (mu_c, mu_p).
ParametricSystem cartpole_parametric(const CartPole& cp, const Box& domain);

/// Cart-pole with drags fixed at the struct values.
SystemModel cartpole_model(const CartPole& cp, const Box& domain);

/// Cart-pole written in the affine-uncertain form with Delta = -Y_f^T.
AffineUncertainSystem cartpole_affine(const CartPole& cp, const Box& domain);

/// Mechanical energy (kinetic + potential) used for integrator checks.
double cartpole_energy(const CartPole& cp, const Vec& x);

}  // namespace ancm
