#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ancm/dynamics.hpp"
#include "ancm/ncm.hpp"

namespace ancm {

/// Bound constants appearing in the gain conditions and the tracking bound.
struct ControllerBounds {
  double b_bar = 1.0;
  double rho_bar = 1.0;
  double phi_bar = 0.0;     // affine
  double delta_bar = 0.0;   // lagrangian
  double y_bar = 0.0;       // ancm
  double zeta_bar = 0.0;    // basis
  double theta_bar = 0.0;
  double omega_lower = 1.0;
  double omega_upper = 1.0;
  double gamma_lower = 1.0;
  double gamma_upper = 1.0;
  double d_bar = 0.0;       // for lagrangian systems pass b_bar * d_bar_s
};

struct ControllerConfig {
  Mat R;                  // m x m; empty means identity
  Mat Gamma;              // p x p; empty means gamma * I
  double gamma = 1.0;     // scalar gain (tensor case and default Gamma)
  double sigma = 0.0;
  double alpha = 1.0;
  bool leak_on_theta = false;  // lagrangian law: sigma theta_hat instead of sigma s
  ControllerBounds bounds;

  void validate() const;
  Mat R_or_identity(int m) const;
  Mat Gamma_or_scalar(int p) const;
};

struct AdaptiveState {
  Vec theta_hat;
  Mat F_hat;
  std::vector<Mat> B_hat;
  double t = 0.0;
};

struct AdaptiveStep {
  Vec u;
  Vec theta_dot;
};

/// u = u_d - R^-1 B(x)^T M(x, x_d, metric_param) (x - x_d).
Vec robust_ncm_u(const MetricSource& metric, const SystemModel& sys, const Vec& x,
                 const Vec& x_d, const Vec& u_d, const Mat& R,
                 const Vec& metric_param = Vec(0));

/// u = u_d - R^-1 B^T M e + phi^T theta_hat,
/// theta_hat' = -Gamma (phi B^T M e + sigma theta_hat).
/// With `pseudo_inverse` the least-squares phi is used without the span check.
AdaptiveStep affine_adaptive_step(const MetricSource& metric, const AffineUncertainSystem& sys,
                                  const Vec& x, const Vec& x_d, const Vec& u_d,
                                  const Vec& theta_hat, const ControllerConfig& cfg,
                                  const Vec& metric_param = Vec(0), bool pseudo_inverse = false);

/// tau = -R^-1 H^-T M s + Delta theta_hat,
/// theta_hat' = -Gamma (Delta^T H^-T M s + sigma s)   (sigma theta_hat with leak_on_theta).
AdaptiveStep lagrangian_adaptive_step(const MetricSource& metric, const LagrangianSystem& lsys,
                                      const Vec& s, const Vec& theta_hat,
                                      const ControllerConfig& cfg,
                                      const Vec& metric_param = Vec(0));

/// u = u_d - R^-1 B(x; theta_hat)^T M e,
/// theta_hat' = Gamma ((Y^T dM_x + Y_d^T dM_xd + Ytilde^T M) e - sigma theta_hat),
/// with Y = Y_f(x) + Y_b(x, u_prev), Y_d = Y_f(x_d) + Y_b(x_d, u_d).
AdaptiveStep ancm_control_step(const MetricSource& metric, const ParametricSystem& psys,
                               const Vec& x, const Vec& x_d, const Vec& u_d, const Vec& u_prev,
                               const Vec& theta_hat, const ControllerConfig& cfg);

struct BasisWeightRates {
  Mat F_dot;
  std::vector<Mat> B_dot;
};

/// W_hat' = (dM_x e zeta^T + dM_xd e zeta_d^T + M e zetatilde^T - sigma W_hat) / gamma
/// for W = F (zeta = phi(x)) and W = B_i (zeta = varphi_i(x) u_i).
BasisWeightRates basis_weight_step(const MetricSource& metric, const BasisFunctionModel& bm,
                                   const Vec& x, const Vec& x_d, const Vec& u, const Vec& u_d,
                                   const ControllerConfig& cfg,
                                   const Vec& metric_param = Vec(0));

/// u = u_d - R^-1 B_hat(x)^T M e for the basis-function model.
Vec basis_control_u(const MetricSource& metric, const BasisFunctionModel& bm, const Vec& x,
                    const Vec& x_d, const Vec& u_d, const Mat& R,
                    const Vec& metric_param = Vec(0));

enum class GainKind { kAffine, kLagrangian, kAncm, kBasis };

const char* to_string(GainKind k);
GainKind parse_gain_kind(const std::string& s);

struct GainCertificate {
  GainKind kind = GainKind::kAncm;
  double alpha_a = 0.0;
  double alpha_ncm = 0.0;
  double eps_ell = 0.0;
  double sigma = 0.0;
  Mat condition;   // left-hand side
  Mat scaling;     // diag(1/omega_lower, 1/gamma_lower, ...)
  double worst_eig = 0.0;  // max eig of condition + 2 alpha_a scaling
  bool pass = false;
  ControllerBounds bounds;
};

/// Largest alpha_a with  condition + 2 alpha_a scaling <= 0  (bisection).
/// `inputs` is m for the basis kind and ignored otherwise.
GainCertificate check_gain_condition(GainKind kind, const ControllerBounds& bounds, double sigma,
                                     double eps_ell, double alpha_ncm, int inputs = 1);

/// Assembled  condition + 2 alpha scaling.
Mat gain_condition_matrix(const GainCertificate& cert, double alpha);

/// sqrt(omega_upper) (sqrt(V0) e^{-alpha_a t} + d_a / alpha_a (1 - e^{-alpha_a t})),
/// d_a = sigma sqrt(gamma_upper) theta_bar + d_bar / sqrt(omega_lower).
double tracking_error_bound(const GainCertificate& cert, double V0, double t);
double disturbance_gain(const GainCertificate& cert);

void write_certificate(std::ostream& out, const GainCertificate& cert);

struct ClfQpResult {
  Mat K;
  double p = 0.0;
  double objective = 0.0;
};

/// min |K e|^2 + p^2  s.t.  Mdot + 2 sym(M A + M B K) <= -2 alpha M + p I,
/// posed as an LMI with a Schur-complement epigraph.
ClfQpResult clf_qp_gain(const Mat& M, const Mat& A, const Mat& B, const Mat& Mdot, const Vec& e,
                        double alpha);

/// Same, with M from the metric source and A, B from the system at theta_hat.
ClfQpResult clf_qp_gain(const MetricSource& metric, const ParametricSystem& psys, const Vec& x,
                        const Vec& x_d, const Vec& theta_hat, const Vec& u_d, double alpha,
                        const Mat& Mdot = Mat());

/// Replaces Gamma in an adaptation law by the inverse Hessian of psi:
/// returns (d^2 psi(theta_hat))^-1 base, where base is the law evaluated with
/// Gamma = I. Throws SingularHessian.
Vec bregman_adaptation_wrap(const Vec& base, const Vec& theta_hat,
                            const std::function<Mat(const Vec&)>& psi_hessian);

Mat l2_hessian(const Vec& theta);
std::function<Mat(const Vec&)> quadratic_hessian(const Vec& D);
/// psi = sum sqrt(theta_i^2 + eps^2).
std::function<Mat(const Vec&)> smoothed_l1_hessian(double eps);

}  // namespace ancm
