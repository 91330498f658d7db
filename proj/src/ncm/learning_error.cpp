#include <cmath>

#include "ancm/errors.hpp"
#include "ancm/ncm.hpp"

namespace ancm {

double alpha_ncm(double alpha, double rho_bar, double b_bar, double eps_ell, double chi) {
  return alpha - rho_bar * b_bar * b_bar * eps_ell * std::sqrt(chi);
}

LearningErrorReport estimate_learning_error(const MetricSource& approx,
                                            const std::vector<MetricSample>& validation,
                                            const LearningErrorConfig& cfg) {
  if (validation.empty()) throw EmptyDataset("validation set is empty");
  LearningErrorReport rep;
  rep.derivatives_checked = cfg.reference != nullptr;
  for (const auto& s : validation) {
    const Mat diff = approx.metric(s.x, s.x_d, s.theta_hat) - sym(s.M());
    rep.eps_M = std::max(rep.eps_M, spectral_norm(sym(diff)));
    ++rep.count;
    if (!cfg.reference) continue;
    const Vec e = s.x - s.x_d;
    const double ne = e.norm();
    if (ne == 0.0) continue;
    const Vec u = e / ne;
    const auto da = metric_derivatives(approx, s.x, s.x_d, s.theta_hat, u, cfg.include_xd);
    const auto dr = metric_derivatives(*cfg.reference, s.x, s.x_d, s.theta_hat, u, cfg.include_xd);
    rep.eps_dM = std::max(rep.eps_dM, spectral_norm(da.dM_x - dr.dM_x));
    if (cfg.include_xd) rep.eps_dM = std::max(rep.eps_dM, spectral_norm(da.dM_xd - dr.dM_xd));
  }
  rep.eps_ell = std::max(rep.eps_M, rep.eps_dM);
  rep.alpha_ncm = alpha_ncm(cfg.alpha, cfg.rho_bar, cfg.b_bar, rep.eps_ell, cfg.chi);
  rep.pass = rep.alpha_ncm > 0.0;
  return rep;
}

}  // namespace ancm
