#include <cmath>

#include "ancm/errors.hpp"
#include "ancm/sim.hpp"

namespace ancm {

namespace {

Box cartpole_domain() {
  Vec lo(4);
  lo << -1.5, -0.6, -1.5, -1.5;
  return Box(lo, -lo);
}

Box drag_box() {
  Vec lo(2), hi(2);
  lo << 0.3, 0.001;
  hi << 4.5, 0.003;
  return Box(lo, hi);
}

}  // namespace

PipelineConfig default_pipeline_config() {
  PipelineConfig cfg;
  cfg.domain = cartpole_domain();
  cfg.theta_box = drag_box();
  cfg.synthesis.nu_weight = 1.0;
  cfg.train.epochs = 200;
  cfg.train.batch_size = 32;
  cfg.train.learning_rate = 1e-2;
  cfg.train.lr_decay = std::pow(0.01, 1.0 / 200.0);
  return cfg;
}

PipelineConfig pipeline_config_from_kv(const KvConfig& kv) {
  PipelineConfig cfg = default_pipeline_config();
  cfg.cp.mu_c = kv.get_double("mu_c", cfg.cp.mu_c);
  cfg.cp.mu_p = kv.get_double("mu_p", cfg.cp.mu_p);
  cfg.domain.lo = kv.get_vec("domain_lo", cfg.domain.lo);
  cfg.domain.hi = kv.get_vec("domain_hi", cfg.domain.hi);
  cfg.theta_box.lo = kv.get_vec("theta_lo", cfg.theta_box.lo);
  cfg.theta_box.hi = kv.get_vec("theta_hi", cfg.theta_box.hi);
  cfg.synthesis.alpha = kv.get_double("alpha", cfg.synthesis.alpha);
  cfg.synthesis.nu_weight = kv.get_double("nu_weight", cfg.synthesis.nu_weight);
  cfg.synthesis.d_bar = kv.get_double("synthesis_d_bar", cfg.synthesis.d_bar);
  cfg.samples = kv.get_int("samples", cfg.samples);
  cfg.validation = kv.get_int("validation", cfg.validation);
  cfg.derivative_checks = kv.get_int("derivative_checks", cfg.derivative_checks);
  cfg.seed = static_cast<unsigned>(kv.get_int("seed", static_cast<int>(cfg.seed)));
  cfg.threads = kv.get_int("threads", cfg.threads);
  cfg.depth = kv.get_int("depth", cfg.depth);
  cfg.width = kv.get_int("width", cfg.width);
  cfg.train.epochs = kv.get_int("epochs", cfg.train.epochs);
  cfg.train.batch_size = kv.get_int("batch_size", cfg.train.batch_size);
  cfg.train.learning_rate = kv.get_double("learning_rate", cfg.train.learning_rate);
  cfg.train.lr_decay =
      kv.get_double("lr_decay", std::pow(0.01, 1.0 / std::max(1, cfg.train.epochs)));
  cfg.train.momentum = kv.get_double("momentum", cfg.train.momentum);
  cfg.train.seed = cfg.seed;
  if (cfg.domain.dim() != 4 || cfg.theta_box.dim() != 2) {
    throw ConfigError("cart-pole domain needs 4 entries and the drag box 2");
  }
  return cfg;
}

Dataset cartpole_dataset(const PipelineConfig& cfg, int samples, unsigned seed) {
  if (samples < 1) throw EmptyDataset("dataset needs at least one sample");
  const ParametricSystem psys = cartpole_parametric(cfg.cp, cfg.domain);
  SampleGrid grid;
  grid.n = 4;
  grid.p = 2;
  Vec lo(10), hi(10);
  lo << cfg.domain.lo, Vec::Zero(4), cfg.theta_box.lo;
  hi << cfg.domain.hi, Vec::Zero(4), cfg.theta_box.hi;
  grid.box = Box(lo, hi);
  grid.random_samples = samples;
  grid.seed = seed;
  return build_dataset(psys, cfg.synthesis, grid, cfg.threads);
}

TrainedMetric train_cartpole_metric(const PipelineConfig& cfg, const Dataset& train_set,
                                    const Dataset& validation_set) {
  TrainedMetric out;
  auto net = std::make_shared<MetricNet>(4, 2, cfg.depth, cfg.width, Activation::kTanh, cfg.seed);
  net->fit_to_data(train_set.samples);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  out.train = train(*net, train_set.samples, tc);
  out.net = net;

  const ParametricSystem psys = cartpole_parametric(cfg.cp, cfg.domain);
  out.b_bar = sample_input_norm(psys.at(cfg.theta_box.center()), 2000, cfg.seed);
  out.rho_bar =
      1.0 / Eigen::SelfAdjointEigenSolver<Mat>(cfg.synthesis.R_or_identity(1)).eigenvalues().minCoeff();
  const NetMetric approx(net);
  const ExactMetric exact(psys, cfg.synthesis);
  LearningErrorConfig lc;
  lc.alpha = cfg.synthesis.alpha;
  lc.rho_bar = out.rho_bar;
  lc.b_bar = out.b_bar;
  lc.chi = std::max(train_set.summary.chi, validation_set.summary.chi);
  out.error = estimate_learning_error(approx, validation_set.samples, lc);
  // derivative errors on a subset; each needs 1 + 2n exact solves
  if (cfg.derivative_checks > 0) {
    const auto& v = validation_set.samples;
    const size_t k = std::min(v.size(), static_cast<size_t>(cfg.derivative_checks));
    const std::vector<MetricSample> subset(v.begin(), v.begin() + static_cast<long>(k));
    lc.reference = &exact;
    const LearningErrorReport d = estimate_learning_error(approx, subset, lc);
    out.error.eps_dM = d.eps_dM;
    out.error.derivatives_checked = d.derivatives_checked;
    out.error.eps_ell = std::max(out.error.eps_M, d.eps_dM);
    out.error.alpha_ncm = alpha_ncm(lc.alpha, lc.rho_bar, lc.b_bar, out.error.eps_ell, lc.chi);
    out.error.pass = out.error.alpha_ncm > 0.0;
  }
  return out;
}

GainCertificate certify_ancm(const DatasetSummary& bounds, const ControllerConfig& control,
                             double alpha_ncm_value, double eps_ell, double d_bar,
                             double theta_bar, double y_bar) {
  ControllerBounds b = control.bounds;
  b.omega_lower = bounds.omega_lower;
  b.omega_upper = bounds.omega_upper;
  b.d_bar = d_bar;
  b.theta_bar = theta_bar;
  b.y_bar = y_bar;
  if (control.Gamma.size()) {
    const Eigen::SelfAdjointEigenSolver<Mat> es(sym(control.Gamma));
    b.gamma_lower = es.eigenvalues().minCoeff();
    b.gamma_upper = es.eigenvalues().maxCoeff();
  } else {
    b.gamma_lower = b.gamma_upper = control.gamma;
  }
  return check_gain_condition(GainKind::kAncm, b, control.sigma, eps_ell, alpha_ncm_value);
}

}  // namespace ancm
