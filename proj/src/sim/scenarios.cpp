#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <thread>

#include "ancm/errors.hpp"
#include "ancm/sim.hpp"

namespace ancm {

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

bool wanted(const ScenarioConfig& cfg, const std::string& name) {
  return cfg.controllers.empty() ||
         std::find(cfg.controllers.begin(), cfg.controllers.end(), name) != cfg.controllers.end();
}

Regulation regulation(int n, int m) { return {Vec::Zero(n), Vec::Zero(m)}; }

// Independent runs, merged in submission order.
std::vector<TrajectoryLog> run_all(const std::vector<std::function<TrajectoryLog()>>& jobs,
                                   int threads) {
  std::vector<TrajectoryLog> out(jobs.size());
  const size_t workers = std::max<size_t>(1, std::min<size_t>(jobs.size(), threads > 0 ? threads : 1));
  if (workers == 1) {
    for (size_t i = 0; i < jobs.size(); ++i) out[i] = jobs[i]();
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs.size());
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (size_t i = w; i < jobs.size(); i += workers) {
        try {
          out[i] = jobs[i]();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::shared_ptr<const MetricSource> scenario_metric(const ScenarioConfig& cfg,
                                                    const ParametricSystem& psys) {
  if (cfg.metric == "exact") return std::make_shared<ExactMetric>(psys, cfg.synthesis);
  auto net = std::make_shared<MetricNet>(load_checkpoint(cfg.metric));
  if (net->n() != psys.n() || net->p() != psys.p()) {
    throw ConfigError("checkpoint dimensions do not match the scenario");
  }
  return std::make_shared<NetMetric>(net);
}

DatasetSummary metric_bounds(const ScenarioConfig& cfg, const ParametricSystem& psys,
                             const Box& theta_box) {
  SampleGrid grid;
  grid.n = psys.n();
  grid.p = psys.p();
  Vec lo(2 * grid.n + grid.p), hi(2 * grid.n + grid.p);
  lo << cfg.domain.lo, Vec::Zero(grid.n), theta_box.lo;
  hi << cfg.domain.hi, Vec::Zero(grid.n), theta_box.hi;
  grid.box = Box(lo, hi);
  grid.random_samples = cfg.bound_samples;
  grid.seed = cfg.sim.disturbance.seed;
  return build_dataset(psys, cfg.synthesis, grid, cfg.threads).summary;
}

IlqrConfig ilqr_weights(const RecedingHorizonConfig& rh) {
  IlqrConfig c = rh.solver;
  if (c.Q.size() == 0) c.Q = vec({10.0, 10.0, 1.0, 1.0}).asDiagonal();
  if (c.R.size() == 0) c.R = Mat::Constant(1, 1, 0.1);
  if (c.Qf.size() == 0) c.Qf = c.Q;
  return c;
}

}  // namespace

const TrajectoryLog& ScenarioResult::log(const std::string& controller) const {
  for (const auto& l : logs) {
    if (l.controller == controller) return l;
  }
  throw InvalidArgument("no log for controller " + controller);
}

ScenarioConfig default_scenario_config(const std::string& scenario) {
  if (scenario != "drag" && scenario != "unknown-dyn") {
    throw ConfigError("unknown scenario '" + scenario + "' (drag or unknown-dyn)");
  }
  ScenarioConfig cfg;
  cfg.sim.dt = 0.01;
  cfg.sim.T = 15.0;
  cfg.sim.x0 = vec({0.83, -0.32, 0.39, 0.45});
  cfg.sim.disturbance.sup = 0.15;
  cfg.sim.disturbance.channels = {2, 3};  // forces act on the velocity rows
  cfg.sim.divergence = 1e3;
  cfg.domain = Box(vec({-1.5, -0.6, -1.5, -1.5}), vec({1.5, 0.6, 1.5, 1.5}));
  cfg.theta_box = Box(vec({0.3, 0.001}), vec({4.5, 0.003}));
  cfg.theta0 = vec({4.0, 0.0016});
  cfg.sim.theta_bar = cfg.theta_box.hi.norm();
  cfg.synthesis.nu_weight = 1.0;
  cfg.control.Gamma = vec({1.0, 1e-4}).asDiagonal();
  cfg.control.sigma = 1e-3;
  cfg.control.gamma = 1.0;
  cfg.ilqr.solver = ilqr_weights(cfg.ilqr);
  if (scenario == "unknown-dyn") {
    cfg.control.Gamma = Mat();
    cfg.control.gamma = 1e4;
    cfg.control.sigma = 0.0;
  }
  return cfg;
}

ScenarioConfig scenario_config_from_kv(const KvConfig& kv, const std::string& scenario) {
  ScenarioConfig cfg = default_scenario_config(kv.get_string("scenario", scenario));
  cfg.sim.dt = kv.get_double("dt", cfg.sim.dt);
  cfg.sim.T = kv.get_double("T", cfg.sim.T);
  cfg.sim.x0 = kv.get_vec("x0", cfg.sim.x0);
  cfg.sim.disturbance.sup = kv.get_double("disturbance_sup", cfg.sim.disturbance.sup);
  cfg.sim.disturbance.seed =
      static_cast<unsigned>(kv.get_int("seed", static_cast<int>(cfg.sim.disturbance.seed)));
  cfg.sim.disturbance.modes = kv.get_int("disturbance_modes", cfg.sim.disturbance.modes);
  cfg.sim.disturbance.spatial_freq =
      kv.get_double("disturbance_spatial_freq", cfg.sim.disturbance.spatial_freq);
  cfg.sim.disturbance.temporal_freq =
      kv.get_double("disturbance_temporal_freq", cfg.sim.disturbance.temporal_freq);
  if (kv.has("disturbance_channels")) {
    const std::string ch = kv.get_string("disturbance_channels");
    cfg.sim.disturbance.channels = ch == "all" ? std::vector<int>{} : kv.get_ints("disturbance_channels");
  }
  cfg.sim.divergence = kv.get_double("divergence", cfg.sim.divergence);
  cfg.plant.mu_c = kv.get_double("mu_c", cfg.plant.mu_c);
  cfg.plant.mu_p = kv.get_double("mu_p", cfg.plant.mu_p);
  cfg.domain.lo = kv.get_vec("domain_lo", cfg.domain.lo);
  cfg.domain.hi = kv.get_vec("domain_hi", cfg.domain.hi);
  cfg.theta_box.lo = kv.get_vec("theta_lo", cfg.theta_box.lo);
  cfg.theta_box.hi = kv.get_vec("theta_hi", cfg.theta_box.hi);
  cfg.theta0 = kv.get_vec("theta0", cfg.theta0);
  cfg.sim.theta_bar = kv.get_double("theta_bar", cfg.theta_box.hi.cwiseAbs().norm());
  cfg.synthesis.alpha = kv.get_double("alpha", cfg.synthesis.alpha);
  cfg.synthesis.nu_weight = kv.get_double("nu_weight", cfg.synthesis.nu_weight);
  cfg.control.alpha = cfg.synthesis.alpha;
  cfg.control.sigma = kv.get_double("sigma", cfg.control.sigma);
  cfg.control.gamma = kv.get_double("gamma", cfg.control.gamma);
  if (kv.has("Gamma_diag")) cfg.control.Gamma = kv.get_vec("Gamma_diag").asDiagonal();
  cfg.metric = kv.get_string("metric", cfg.metric);
  cfg.eps_ell = kv.get_double("eps_ell", cfg.eps_ell);
  cfg.linearize = kv.get_bool("linearize", cfg.linearize);
  cfg.bound_samples = kv.get_int("bound_samples", cfg.bound_samples);
  cfg.ilqr.dt_plan = kv.get_double("ilqr_dt", cfg.ilqr.dt_plan);
  cfg.ilqr.iters_per_step = kv.get_int("ilqr_iters", cfg.ilqr.iters_per_step);
  cfg.ilqr.solver.horizon = kv.get_int("ilqr_horizon", cfg.ilqr.solver.horizon);
  if (kv.has("ilqr_Q_diag")) {
    cfg.ilqr.solver.Q = kv.get_vec("ilqr_Q_diag").asDiagonal();
    cfg.ilqr.solver.Qf = cfg.ilqr.solver.Q;
  }
  if (kv.has("ilqr_R")) cfg.ilqr.solver.R = Mat::Constant(1, 1, kv.get_double("ilqr_R"));
  cfg.nominal.samples = kv.get_int("nominal_samples", cfg.nominal.samples);
  cfg.nominal.validation = kv.get_int("nominal_validation", cfg.nominal.validation);
  cfg.nominal.epochs = kv.get_int("nominal_epochs", cfg.nominal.epochs);
  cfg.nominal.width = kv.get_int("nominal_width", cfg.nominal.width);
  cfg.nominal.depth = kv.get_int("nominal_depth", cfg.nominal.depth);
  cfg.nominal.u_max = kv.get_double("nominal_u_max", cfg.nominal.u_max);
  cfg.nominal.seed = static_cast<unsigned>(kv.get_int("nominal_seed", static_cast<int>(cfg.nominal.seed)));
  if (kv.has("controllers")) cfg.controllers = split_list(kv.get_string("controllers"));
  cfg.threads = kv.get_int("threads", cfg.threads);
  if (!(cfg.sim.dt > 0.0) || !(cfg.sim.T > 0.0)) throw ConfigError("dt and T must be positive");
  if (cfg.sim.x0.size() != 4 || cfg.domain.dim() != 4) throw ConfigError("cart-pole state has 4 entries");
  if (cfg.theta0.size() != 2 || cfg.theta_box.dim() != 2) throw ConfigError("drag parameter has 2 entries");
  if (cfg.sim.disturbance.sup < 0.0) throw ConfigError("disturbance_sup must be >= 0");
  return cfg;
}

ScenarioResult run_unknown_drag_scenario(const ScenarioConfig& cfg) {
  cfg.plant.validate();
  ScenarioResult res;
  res.scenario = "drag";
  const ParametricSystem psys = cartpole_parametric(cfg.plant, cfg.domain);
  const Vec theta_true = cartpole_regressors(cfg.plant, cfg.sim.x0).theta;
  const auto metric = scenario_metric(cfg, psys);
  const Regulation ref = regulation(4, 1);
  const Plant plant = [cp = cfg.plant](const Vec& x, const Vec& u) { return eval_cartpole(cp, x, u(0)); };

  ControllerConfig control = cfg.control;
  control.alpha = cfg.synthesis.alpha;
  control.bounds.b_bar = sample_input_norm(psys.at(cfg.theta0), 2000, 1);

  res.metric_bounds = metric_bounds(cfg, psys, cfg.theta_box);
  const double a_ncm = alpha_ncm(cfg.synthesis.alpha, control.bounds.rho_bar, control.bounds.b_bar,
                                 cfg.eps_ell, res.metric_bounds.chi);
  res.certificate = certify_ancm(res.metric_bounds, control, a_ncm, cfg.eps_ell,
                                 cfg.sim.disturbance.sup, cfg.theta_box.hi.cwiseAbs().norm());
  control.bounds = res.certificate.bounds;

  CartPole guess = cfg.plant;
  guess.mu_c = cfg.theta0(0);
  guess.mu_p = cfg.theta0(1);
  const SystemModel frozen = cartpole_model(guess, cfg.domain);
  const bool lin = cfg.linearize;

  std::vector<std::function<TrajectoryLog()>> jobs;
  if (wanted(cfg, "ancm")) {
    jobs.push_back([&] {
      auto c = make_ancm_controller(metric, psys, ref, cfg.theta0, control, theta_true, lin);
      return simulate(plant, *c, ref, cfg.sim, &res.certificate);
    });
  }
  if (wanted(cfg, "affine")) {
    jobs.push_back([&] {
      auto c = make_affine_controller(metric, cartpole_affine(cfg.plant, cfg.domain), ref,
                                      cfg.theta0, cfg.theta0, control, theta_true, lin);
      return simulate(plant, *c, ref, cfg.sim);
    });
  }
  if (wanted(cfg, "robust_ncm")) {
    jobs.push_back([&] {
      auto c = make_robust_controller(metric, frozen, ref, cfg.theta0, control.R, lin);
      return simulate(plant, *c, ref, cfg.sim);
    });
  }
  if (wanted(cfg, "ilqr")) {
    jobs.push_back([&] {
      RecedingHorizonConfig rh = cfg.ilqr;
      rh.solver = ilqr_weights(rh);
      auto c = make_ilqr_controller(frozen, ref, rh);
      return simulate(plant, *c, ref, cfg.sim);
    });
  }
  res.logs = run_all(jobs, cfg.threads);
  std::ostringstream notes;
  notes << "b_bar " << control.bounds.b_bar << ", chi " << res.metric_bounds.chi
        << ", alpha_ncm " << a_ncm << ", alpha_a " << res.certificate.alpha_a;
  res.notes = notes.str();
  return res;
}

ScenarioResult run_unknown_dynamics_scenario(const ScenarioConfig& cfg) {
  cfg.plant.validate();
  ScenarioResult res;
  res.scenario = "unknown-dyn";
  const NominalModel nominal = fit_nominal_model(cfg.plant, cfg.domain, cfg.nominal);
  const SystemModel model = nominal.basis.as_system(cfg.domain);
  const ParametricSystem psys = as_parametric(model);
  if (cfg.metric != "exact") throw ConfigError("the unknown-dynamics scenario uses the exact metric");
  const auto metric = std::make_shared<ExactMetric>(psys, cfg.synthesis);
  const Regulation ref = regulation(4, 1);
  const Plant plant = [cp = cfg.plant](const Vec& x, const Vec& u) { return eval_cartpole(cp, x, u(0)); };
  ControllerConfig control = cfg.control;
  control.alpha = cfg.synthesis.alpha;

  res.metric_bounds = metric_bounds(cfg, psys, Box(Vec(0), Vec(0)));
  const bool lin = cfg.linearize;
  std::vector<std::function<TrajectoryLog()>> jobs;
  if (wanted(cfg, "ancm_basis")) {
    jobs.push_back([&] {
      auto c = make_basis_controller(metric, nominal.basis, ref, control, lin);
      return simulate(plant, *c, ref, cfg.sim);
    });
  }
  if (wanted(cfg, "robust_ncm")) {
    jobs.push_back([&] {
      auto c = make_robust_controller(metric, model, ref, Vec(0), control.R, lin);
      return simulate(plant, *c, ref, cfg.sim);
    });
  }
  if (wanted(cfg, "ilqr")) {
    jobs.push_back([&] {
      RecedingHorizonConfig rh = cfg.ilqr;
      rh.solver = ilqr_weights(rh);
      auto c = make_ilqr_controller(model, ref, rh);
      return simulate(plant, *c, ref, cfg.sim);
    });
  }
  res.logs = run_all(jobs, cfg.threads);
  std::ostringstream notes;
  notes << "nominal model validation rms " << nominal.validation_rms << ", max "
        << nominal.validation_max << ", chi " << res.metric_bounds.chi;
  res.notes = notes.str();
  return res;
}

ScenarioResult run_scenario(const std::string& scenario, const ScenarioConfig& cfg) {
  if (scenario == "drag") return run_unknown_drag_scenario(cfg);
  if (scenario == "unknown-dyn") return run_unknown_dynamics_scenario(cfg);
  throw ConfigError("unknown scenario '" + scenario + "' (drag or unknown-dyn)");
}

}  // namespace ancm
