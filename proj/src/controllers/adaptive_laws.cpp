#include "ancm/controllers.hpp"
#include "ancm/errors.hpp"

namespace ancm {

namespace {

Vec feedback(const Mat& M, const Mat& B, const Mat& R, const Vec& e, const Vec& u_d) {
  return u_d - R.llt().solve(B.transpose() * (M * e));
}

void check_input(const Vec& u_d, int m) {
  if (u_d.size() != m) throw InvalidArgument("u_d must have m entries");
}

}  // namespace

Vec robust_ncm_u(const MetricSource& metric, const SystemModel& sys, const Vec& x,
                 const Vec& x_d, const Vec& u_d, const Mat& R, const Vec& metric_param) {
  check_input(u_d, sys.m());
  const Mat Rm = R.size() == 0 ? Mat::Identity(sys.m(), sys.m()) : R;
  const Vec e = x - x_d;
  return feedback(metric.metric(x, x_d, metric_param), sys.B(x), Rm, e, u_d);
}

AdaptiveStep affine_adaptive_step(const MetricSource& metric, const AffineUncertainSystem& sys,
                                  const Vec& x, const Vec& x_d, const Vec& u_d,
                                  const Vec& theta_hat, const ControllerConfig& cfg,
                                  const Vec& metric_param, bool pseudo_inverse) {
  const int m = sys.base.m();
  check_input(u_d, m);
  if (theta_hat.size() != sys.p) throw InvalidArgument("theta_hat must have p entries");
  const Mat phi = pseudo_inverse ? pseudo_inverse_phi(sys, x, x_d) : matched_phi(sys, x, x_d);
  const Vec e = x - x_d;
  const Mat M = metric.metric(x, x_d, metric_param);
  const Mat B = sys.base.B(x);
  AdaptiveStep out;
  out.u = feedback(M, B, cfg.R_or_identity(m), e, u_d) + phi.transpose() * theta_hat;
  out.theta_dot =
      -cfg.Gamma_or_scalar(sys.p) * (phi * (B.transpose() * (M * e)) + cfg.sigma * theta_hat);
  return out;
}

AdaptiveStep lagrangian_adaptive_step(const MetricSource& metric, const LagrangianSystem& lsys,
                                      const Vec& s, const Vec& theta_hat,
                                      const ControllerConfig& cfg, const Vec& metric_param) {
  if (s.size() != lsys.n) throw InvalidArgument("s must have n entries");
  if (theta_hat.size() != lsys.p) throw InvalidArgument("theta_hat must have p entries");
  if (!cfg.leak_on_theta && lsys.p != lsys.n && cfg.sigma != 0.0) {
    throw InvalidArgument("leakage on s needs p == n; set leak_on_theta");
  }
  const Mat Hinv = lsys.H_inverse(s);
  const Mat D = lsys.Delta(s);
  const Mat M = metric.metric(s, Vec::Zero(lsys.n), metric_param);
  const Vec HtMs = Hinv.transpose() * (M * s);
  AdaptiveStep out;
  out.u = -cfg.R_or_identity(lsys.n).llt().solve(HtMs) + D * theta_hat;
  const Vec leak = cfg.leak_on_theta ? Vec(cfg.sigma * theta_hat)
                                     : Vec(cfg.sigma == 0.0 ? Vec::Zero(lsys.p) : Vec(cfg.sigma * s));
  out.theta_dot = -cfg.Gamma_or_scalar(lsys.p) * (D.transpose() * HtMs + leak);
  return out;
}

AdaptiveStep ancm_control_step(const MetricSource& metric, const ParametricSystem& psys,
                               const Vec& x, const Vec& x_d, const Vec& u_d, const Vec& u_prev,
                               const Vec& theta_hat, const ControllerConfig& cfg) {
  const int m = psys.m();
  check_input(u_d, m);
  if (u_prev.size() != m) throw InvalidArgument("u_prev must have m entries");
  if (theta_hat.size() != psys.p()) throw InvalidArgument("theta_hat must have p entries");
  if (psys.p() > 0 && psys.q_z() != psys.p()) {
    throw InvalidArgument("adaptation needs a linear parameterization; augment the system");
  }
  const Vec e = x - x_d;
  const Mat M = metric.metric(x, x_d, theta_hat);
  AdaptiveStep out;
  out.u = feedback(M, psys.B(x, theta_hat), cfg.R_or_identity(m), e, u_d);
  const int p = static_cast<int>(theta_hat.size());
  if (p == 0) {
    out.theta_dot = Vec(0);
    return out;
  }
  const Mat Y = psys.Y_f(x) + psys.Y_b(x, u_prev);
  const Mat Yd = psys.Y_f(x_d) + psys.Y_b(x_d, u_d);
  const bool need_xd = !Yd.isZero(0.0);
  const MetricDerivatives dM = metric_derivatives(metric, x, x_d, theta_hat, e, need_xd);
  Vec drive = Y.transpose() * (dM.dM_x * e) + (Y - Yd).transpose() * (M * e);
  if (need_xd) drive += Yd.transpose() * (dM.dM_xd * e);
  out.theta_dot = cfg.Gamma_or_scalar(p) * (drive - cfg.sigma * theta_hat);
  return out;
}

BasisWeightRates basis_weight_step(const MetricSource& metric, const BasisFunctionModel& bm,
                                   const Vec& x, const Vec& x_d, const Vec& u, const Vec& u_d,
                                   const ControllerConfig& cfg, const Vec& metric_param) {
  const int m = bm.m();
  if (u.size() != m || u_d.size() != m) throw InvalidArgument("inputs must have m entries");
  if (!(cfg.gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  const Vec e = x - x_d;
  const Mat M = metric.metric(x, x_d, metric_param);
  const MetricDerivatives dM = metric_derivatives(metric, x, x_d, metric_param, e);
  const Vec a = dM.dM_x * e, ad = dM.dM_xd * e, b = M * e;
  auto rate = [&](const Vec& z, const Vec& zd, const Mat& W) -> Mat {
    return (a * z.transpose() + ad * zd.transpose() + b * (z - zd).transpose() - cfg.sigma * W) /
           cfg.gamma;
  };
  BasisWeightRates out;
  out.F_dot = rate(bm.phi(x), bm.phi(x_d), bm.F_hat);
  for (int i = 0; i < m; ++i) {
    out.B_dot.push_back(rate(bm.varphi[i](x) * u(i), bm.varphi[i](x_d) * u_d(i), bm.B_hat[i]));
  }
  return out;
}

Vec basis_control_u(const MetricSource& metric, const BasisFunctionModel& bm, const Vec& x,
                    const Vec& x_d, const Vec& u_d, const Mat& R, const Vec& metric_param) {
  check_input(u_d, bm.m());
  const Mat Rm = R.size() == 0 ? Mat::Identity(bm.m(), bm.m()) : R;
  return feedback(metric.metric(x, x_d, metric_param), bm.B(x), Rm, x - x_d, u_d);
}

}  // namespace ancm
