#include "ancm/system_config.hpp"

#include "ancm/errors.hpp"

namespace ancm {

SystemDefinition load_system(const KvConfig& cfg) {
  SystemDefinition def;
  def.name = cfg.get_string("model");
  def.bounds.b_bar = cfg.get_double("b_bar", 0.0);
  def.bounds.rho_bar = cfg.get_double("rho_bar", 0.0);
  def.bounds.d_bar = cfg.get_double("d_bar", 0.0);

  if (def.name == "cartpole") {
    CartPole& cp = def.cartpole;
    cp.g = cfg.get_double("g", cp.g);
    cp.m_c = cfg.get_double("m_c", cp.m_c);
    cp.m = cfg.get_double("m", cp.m);
    cp.mu_c = cfg.get_double("mu_c", cp.mu_c);
    cp.mu_p = cfg.get_double("mu_p", cp.mu_p);
    cp.l = cfg.get_double("l", cp.l);
    cp.validate();
    Vec lo(4), hi(4);
    lo << -1.5, -0.6, -1.5, -1.5;
    hi = -lo;
    def.domain = Box(cfg.get_vec("domain_lo", lo), cfg.get_vec("domain_hi", hi));
    def.theta_box = Box(cfg.get_vec("theta_lo", Eigen::Vector2d(0.0, 0.0)),
                        cfg.get_vec("theta_hi", Eigen::Vector2d(5.0, 0.004)));
    def.parametric = cartpole_parametric(cp, def.domain);
    def.theta_true = Eigen::Vector2d(cp.mu_c, cp.mu_p);
  } else if (def.name == "linear") {
    const int n = cfg.get_int("n");
    const int m = cfg.get_int("m");
    const Vec a = cfg.get_vec("A");
    const Vec b = cfg.get_vec("B");
    if (a.size() != n * n || b.size() != n * m) {
      throw ConfigError("linear model: A needs n*n and B needs n*m entries");
    }
    const Mat A = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                 Eigen::RowMajor>>(a.data(), n, n);
    const Mat B = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                 Eigen::RowMajor>>(b.data(), n, m);
    def.domain = Box(cfg.get_vec("domain_lo", Vec::Constant(n, -1.0)),
                     cfg.get_vec("domain_hi", Vec::Constant(n, 1.0)));
    def.parametric = ParametricSystem(
        n, m, 0, 0, [A](const Vec& x) -> Vec { return A * x; },
        [B](const Vec&) { return B; }, nullptr, nullptr, nullptr, def.domain);
    def.theta_true = Vec(0);
    def.theta_box = Box(Vec(0), Vec(0));
  } else {
    throw ConfigError("unknown model '" + def.name + "'");
  }
  if (def.domain.dim() != def.parametric.n()) {
    throw ConfigError("domain dimension does not match the model");
  }
  def.parametric.set_bounds(def.bounds);
  return def;
}

}  // namespace ancm
