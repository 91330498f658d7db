#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "ancm/errors.hpp"
#include "ancm/sim.hpp"

namespace ancm {
namespace {

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Box cartpole_box() { return Box(vec({-1.5, -0.6, -1.5, -1.5}), vec({1.5, 0.6, 1.5, 1.5})); }

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("ancm_sim_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

// u = -K x on a double integrator
class StaticGain : public SimController {
 public:
  explicit StaticGain(Mat K) : K_(std::move(K)) {}
  std::string name() const override { return "static"; }
  ControlOutput eval(double, const Vec& x, const Vec&) override { return {-K_ * x, Vec(0)}; }
  double lyapunov(const Vec& x, const Vec&) const override { return x.squaredNorm(); }

 private:
  Mat K_;
};

Plant double_integrator() {
  return [](const Vec& x, const Vec& u) { return Vec(vec({x(1), u(0)})); };
}

SimConfig short_sim(double T, double dt) {
  SimConfig c;
  c.dt = dt;
  c.T = T;
  c.x0 = vec({1.0, 0.0});
  return c;
}

Regulation origin(int n, int m) { return {Vec::Zero(n), Vec::Zero(m)}; }

// integrator

TEST(Rk4, ExponentialDecay) {
  const RkTrajectory tr = integrate_rk4([](double, const Vec& z) { return Vec(-z); }, vec({1.0}),
                                        1e-3, 1.0);
  EXPECT_NEAR(tr.z.back()(0), std::exp(-1.0), 1e-6);
  EXPECT_DOUBLE_EQ(tr.t.back(), 1.0);
}

TEST(Rk4, ZeroFieldIsConstant) {
  const Vec z0 = vec({0.3, -2.0, 7.0});
  const RkTrajectory tr =
      integrate_rk4([](double, const Vec& z) { return Vec(Vec::Zero(z.size())); }, z0, 0.1, 5.0);
  for (const Vec& z : tr.z) EXPECT_EQ(z, z0);
}

// The RK4 map of x'' = -x is z -> R(ih) z with the stability polynomial R, so
// the energy after N steps is |R(ih)|^(2N) E0.
double rk4_energy_drift(double h, int steps) {
  const std::complex<double> z(0.0, h);
  const std::complex<double> R = 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
  return std::abs(std::pow(std::norm(R), steps) - 1.0);
}

TEST(Rk4, HarmonicOscillatorEnergyDriftOrder) {
  const double T = 1000.0 * 2.0 * M_PI;
  double drift[2];
  for (int k = 0; k < 2; ++k) {
    const double h = 0.2 / (1 << k);
    const RkTrajectory tr = integrate_rk4(
        [](double, const Vec& z) { return Vec(vec({z(1), -z(0)})); }, vec({1.0, 0.0}), h, T);
    drift[k] = std::abs(tr.z.back().squaredNorm() - 1.0);
    const int steps = step_count(h, T);
    // last step is shortened; compare against the same split
    const double full = T - (steps - 1) * h;
    const std::complex<double> z(0.0, full);
    const std::complex<double> Rl = 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
    const double oracle = (1.0 - rk4_energy_drift(h, steps - 1)) * std::norm(Rl);
    EXPECT_NEAR(tr.z.back().squaredNorm(), oracle, 1e-9);
  }
  // at least fourth order under step halving
  EXPECT_GT(drift[0] / drift[1], 16.0);
}

TEST(Rk4, NonFiniteKeepsPartialTrajectory) {
  RkTrajectory tr;
  EXPECT_THROW(integrate_rk4([](double, const Vec& z) { return Vec(z.array().square()); },
                             vec({1.0}), 0.01, 2.0, tr),
               NonFiniteState);
  ASSERT_GT(tr.t.size(), 10u);
  EXPECT_LT(tr.t.back(), 1.1);
}

TEST(Rk4, StepCount) {
  EXPECT_EQ(step_count(0.01, 1.0), 100);
  EXPECT_EQ(step_count(0.01, 1.005), 101);
  EXPECT_EQ(step_count(0.3, 0.9), 3);
  EXPECT_THROW(step_count(0.0, 1.0), InvalidArgument);
}

// simulate

TEST(Simulate, RowCountAndIncreasingTime) {
  for (double T : {1.0, 1.005, 2.5}) {
    StaticGain c(Mat(Mat::Constant(1, 2, 1.0)));
    const TrajectoryLog log = simulate(double_integrator(), c, origin(2, 1), short_sim(T, 0.01));
    ASSERT_FALSE(log.aborted);
    EXPECT_EQ(static_cast<int>(log.rows.size()), step_count(0.01, T) + 1);
    for (size_t k = 1; k < log.rows.size(); ++k) EXPECT_GT(log.rows[k].t, log.rows[k - 1].t);
    EXPECT_DOUBLE_EQ(log.rows.back().t, T);
  }
}

TEST(Simulate, MatchesClosedForm) {
  // x'' = -2 x' - x, critically damped: x(t) = (1 + t) e^-t
  StaticGain c(Mat(vec({1.0, 2.0}).transpose()));
  const TrajectoryLog log = simulate(double_integrator(), c, origin(2, 1), short_sim(3.0, 1e-3));
  EXPECT_NEAR(log.rows.back().x(0), 4.0 * std::exp(-3.0), 1e-9);
}

TEST(Simulate, DivergenceAbortsWithPartialLog) {
  StaticGain c(Mat(vec({-5.0, 0.0}).transpose()));
  SimConfig sc = short_sim(20.0, 0.01);
  sc.divergence = 50.0;
  const TrajectoryLog log = simulate(double_integrator(), c, origin(2, 1), sc);
  EXPECT_TRUE(log.aborted);
  EXPECT_NE(log.abort_reason.find("NonFiniteState"), std::string::npos);
  EXPECT_FALSE(log.rows.empty());
  EXPECT_LT(log.rows.back().t, 20.0);
}

TEST(Simulate, HalvingStepChangesFinalErrorBelowOnePercent) {
  double final[2];
  for (int k = 0; k < 2; ++k) {
    StaticGain c(Mat(vec({1.0, 1.5}).transpose()));
    SimConfig sc = short_sim(8.0, 0.01 / (1 << k));
    sc.disturbance.sup = 0.15;
    sc.disturbance.seed = 4;
    final[k] = simulate(double_integrator(), c, origin(2, 1), sc).final_error();
  }
  EXPECT_GT(final[0], 1e-3);
  EXPECT_LT(std::abs(final[0] - final[1]) / final[1], 0.01);
}

// disturbance

TEST(DisturbanceTest, NeverExceedsSup) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0.0, 1.0);
  for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
    DisturbanceConfig dc;
    dc.sup = 0.15;
    dc.seed = seed;
    const Disturbance d(4, dc);
    double largest = 0.0;
    for (int k = 0; k < 20000; ++k) {
      const Vec x = Vec::NullaryExpr(4, [&] { return N(rng); });
      const double v = d(0.01 * k, x).norm();
      EXPECT_LE(v, 0.15);
      largest = std::max(largest, v);
    }
    EXPECT_GT(largest, 0.1);  // the clip is active, not a vacuous bound
  }
}

TEST(DisturbanceTest, SeededAndInactiveAtZero) {
  DisturbanceConfig dc;
  dc.sup = 0.15;
  dc.seed = 9;
  const Vec x = vec({0.1, 0.2, 0.3, 0.4});
  EXPECT_EQ(Disturbance(4, dc)(1.3, x), Disturbance(4, dc)(1.3, x));
  DisturbanceConfig other = dc;
  other.seed = 10;
  EXPECT_NE(Disturbance(4, dc)(1.3, x), Disturbance(4, other)(1.3, x));
  dc.sup = 0.0;
  EXPECT_FALSE(Disturbance(4, dc).active());
  EXPECT_EQ(Disturbance(4, dc)(0.5, x), Vec::Zero(4));
}

TEST(DisturbanceTest, ChannelMask) {
  DisturbanceConfig dc;
  dc.sup = 0.15;
  dc.channels = {2, 3};
  const Disturbance d(4, dc);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    const Vec v = d(0.0, cartpole_box().sample(rng));
    EXPECT_EQ(v(0), 0.0);
    EXPECT_EQ(v(1), 0.0);
    EXPECT_LE(v.norm(), 0.15);
  }
  dc.channels = {4};
  EXPECT_THROW(Disturbance(4, dc), InvalidArgument);
}

// iLQR

TEST(Ilqr, RiccatiScalarSteadyState) {
  const std::vector<Mat> G = riccati_gains(scalar(1.0), scalar(1.0), scalar(1.0), scalar(1.0),
                                           scalar(1.0), 60);
  const double P = (1.0 + std::sqrt(5.0)) / 2.0;
  EXPECT_NEAR(G.front()(0, 0), P / (1.0 + P), 1e-12);
}

TEST(Ilqr, LinearQuadraticMatchesRiccati) {
  const double dt = 0.1;
  Mat A(2, 2), B(2, 1);
  A << 1.0, dt, 0.0, 1.0;
  B << 0.5 * dt * dt, dt;
  const StepFn step = [&](const Vec& x, const Vec& u) { return Vec(A * x + B * u); };
  IlqrConfig cfg;
  cfg.horizon = 40;
  cfg.Q = Mat::Identity(2, 2);
  cfg.R = scalar(0.1);
  cfg.Qf = 5.0 * Mat::Identity(2, 2);
  cfg.reg = 0.0;
  const Vec x0 = vec({1.0, -0.5});
  const IlqrResult r = ilqr_solve(step, x0, std::vector<Vec>(40, Vec::Zero(1)), cfg);
  EXPECT_EQ(r.status, IlqrStatus::kConverged);
  const std::vector<Mat> G = riccati_gains(A, B, cfg.Q, cfg.R, cfg.Qf, 40);
  Vec x = x0;
  for (int k = 0; k < 40; ++k) {
    EXPECT_LT((r.K[k] + G[k]).cwiseAbs().maxCoeff(), 1e-6) << "stage " << k;
    const Vec u = -G[k] * x;
    EXPECT_NEAR(r.u[k](0), u(0), 1e-6);
    x = A * x + B * u;
  }
}

TEST(Ilqr, ZeroInitialErrorGivesZeroInput) {
  const StepFn step = rk4_discretize(cartpole_model(CartPole{}, cartpole_box()), 0.02);
  IlqrConfig cfg;
  cfg.horizon = 30;
  cfg.Q = Mat::Identity(4, 4);
  cfg.R = scalar(0.1);
  const IlqrResult r = ilqr_solve(step, Vec::Zero(4), std::vector<Vec>(30, Vec::Zero(1)), cfg);
  EXPECT_EQ(r.status, IlqrStatus::kConverged);
  for (const Vec& u : r.u) EXPECT_EQ(u(0), 0.0);
  EXPECT_EQ(r.cost, 0.0);
}

TEST(Ilqr, CartPoleCostDecreases) {
  const StepFn step = rk4_discretize(cartpole_model(CartPole{}, cartpole_box()), 0.02);
  IlqrConfig cfg;
  cfg.horizon = 75;
  cfg.Q = vec({10.0, 10.0, 1.0, 1.0}).asDiagonal();
  cfg.R = scalar(0.1);
  cfg.max_iter = 50;
  const Vec x0 = vec({0.83, -0.32, 0.39, 0.45});
  const std::vector<Vec> u0(75, Vec::Zero(1));
  std::vector<Vec> xs(76, x0);
  for (int k = 0; k < 75; ++k) xs[k + 1] = step(xs[k], u0[k]);
  const IlqrResult r = ilqr_solve(step, x0, u0, cfg);
  EXPECT_LT(r.cost, 0.5 * trajectory_cost(xs, u0, cfg));
  EXPECT_LT(r.x.back().norm(), 0.5 * x0.norm());
}

TEST(Ilqr, LineSearchFailureKeepsBestIterate) {
  // any nonzero input pays a jump the local model cannot see
  const StepFn step = [](const Vec& x, const Vec& u) {
    return Vec(x + u + Vec::Constant(1, std::abs(u(0)) > 1e-12 ? 1.0 : 0.0));
  };
  IlqrConfig cfg;
  cfg.horizon = 5;
  cfg.Q = scalar(1.0);
  cfg.R = scalar(1.0);
  const std::vector<Vec> u0(5, Vec::Zero(1));
  const IlqrResult r = ilqr_solve(step, vec({1.0}), u0, cfg);
  EXPECT_EQ(r.status, IlqrStatus::kLineSearchFailed);
  for (const Vec& u : r.u) EXPECT_EQ(u(0), 0.0);
  EXPECT_THROW(ilqr_solve_strict(step, vec({1.0}), u0, cfg), LineSearchFailed);
  EXPECT_STREQ(to_string(IlqrStatus::kLineSearchFailed), "line_search_failed");
}

// controllers

TEST(SimControllers, LinearizedMatchesDirectAtStepStart) {
  const ParametricSystem psys = cartpole_parametric(CartPole{}, cartpole_box());
  auto metric = std::make_shared<FunctionMetric>(
      [](const Vec& x, const Vec&, const Vec& th) -> Mat {
        Mat M = Mat::Identity(4, 4);
        M.diagonal() += x.array().square().matrix() * (1.0 + th(0));
        M(0, 1) = M(1, 0) = 0.1 * std::sin(x(1));
        return M;
      },
      false);
  ControllerConfig cfg;
  cfg.Gamma = vec({1.0, 1e-4}).asDiagonal();
  const Regulation ref = origin(4, 1);
  auto direct = make_ancm_controller(metric, psys, ref, vec({4.0, 0.0016}), cfg, Vec(), false);
  auto lin = make_ancm_controller(metric, psys, ref, vec({4.0, 0.0016}), cfg, Vec(), true);
  const Vec x = vec({0.3, -0.2, 0.1, 0.4}), a = vec({3.0, 0.002});
  direct->begin_step(0.0, x, a);
  lin->begin_step(0.0, x, a);
  const ControlOutput d = direct->eval(0.0, x, a), l = lin->eval(0.0, x, a);
  EXPECT_LT((d.u - l.u).norm(), 1e-10);
  EXPECT_LT((d.a_dot - l.a_dot).norm(), 1e-6 * (1.0 + d.a_dot.norm()));
}

TEST(SimControllers, RobustHoldsEquilibrium) {
  const CartPole cp;
  auto c = make_robust_controller(constant_metric(Mat::Identity(4, 4)),
                                  cartpole_model(cp, cartpole_box()), origin(4, 1), Vec(0), Mat(),
                                  false);
  SimConfig sc;
  sc.dt = 0.01;
  sc.T = 1.0;
  sc.x0 = Vec::Zero(4);
  const TrajectoryLog log = simulate(
      [cp](const Vec& x, const Vec& u) { return eval_cartpole(cp, x, u(0)); }, *c, origin(4, 1), sc);
  EXPECT_EQ(log.final_error(), 0.0);
}

TEST(SimControllers, BasisRatesVanishAtZeroError) {
  NominalModelConfig nc;
  nc.samples = 500;
  nc.validation = 100;
  nc.epochs = 5;
  const NominalModel nm = fit_nominal_model(CartPole{}, cartpole_box(), nc);
  ControllerConfig cfg;
  cfg.gamma = 2.0;
  auto c = make_basis_controller(constant_metric(Mat::Identity(4, 4)), nm.basis, origin(4, 1), cfg,
                                 false);
  const Vec a = c->initial_state();
  EXPECT_EQ(a.size(), 4 * 6 * 2);
  const ControlOutput out = c->eval(0.0, Vec::Zero(4), a);
  EXPECT_EQ(out.a_dot.norm(), 0.0);
  EXPECT_EQ(out.u(0), 0.0);
}

// nominal model

TEST(NominalModelTest, BasisReproducesNetwork) {
  NominalModelConfig nc;
  nc.samples = 2000;
  nc.validation = 400;
  nc.epochs = 40;
  const NominalModel nm = fit_nominal_model(CartPole{}, cartpole_box(), nc);
  EXPECT_LT(nm.loss_curve.back(), 0.25 * nm.loss_curve.front());
  std::mt19937_64 rng(5);
  const CartPole cp;
  double sq = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Vec x = cartpole_box().sample(rng);
    const double u = std::uniform_real_distribution<double>(-20.0, 20.0)(rng);
    const Vec o = nm.net.forward(Vec(x.cwiseQuotient(nm.in_scale)));
    const Vec direct = o.head(4) + o.tail(4) * u;
    const Vec basis = basis_model_eval(nm.basis, x, Vec::Constant(1, u));
    EXPECT_LT((direct - basis).norm(), 1e-10 * (1.0 + direct.norm()));
    sq += (basis - eval_cartpole(cp, x, u)).squaredNorm();
  }
  // sampled error agrees with the reported validation error
  EXPECT_NEAR(std::sqrt(sq / 200.0), nm.validation_rms, 0.5 * nm.validation_rms);
}

TEST(NominalModelTest, AsParametricHasNoParameters) {
  const SystemModel m = cartpole_model(CartPole{}, cartpole_box());
  const ParametricSystem p = as_parametric(m);
  EXPECT_EQ(p.p(), 0);
  const Vec x = vec({0.1, 0.2, -0.3, 0.4});
  EXPECT_EQ(p.xdot(x, Vec::Constant(1, 2.0), Vec(0)), m.xdot(x, Vec::Constant(1, 2.0)));
}

// export

TrajectoryLog thousand_step_log() {
  StaticGain c(Mat(vec({1.0, 1.5}).transpose()));
  SimConfig sc = short_sim(10.0, 0.01);
  sc.disturbance.sup = 0.15;
  return simulate(double_integrator(), c, origin(2, 1), sc);
}

TEST(Export, CsvLineCountAndRoundTrip) {
  const TrajectoryLog log = thousand_step_log();
  ASSERT_EQ(log.rows.size(), 1001u);
  const std::string dir = temp_dir("csv");
  const std::string a = dir + "/a.csv", b = dir + "/b.csv";
  write_log_csv(a, log);
  const std::string text = slurp(a);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1002);
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,x0,x1,xd0,xd1,u0,e_norm,V,bound,cert_pass");
  const TrajectoryLog back = read_log_csv(a);
  ASSERT_EQ(back.rows.size(), log.rows.size());
  for (size_t k = 0; k < log.rows.size(); ++k) {
    EXPECT_EQ(back.rows[k].t, log.rows[k].t);
    EXPECT_EQ(back.rows[k].x, log.rows[k].x);
    EXPECT_EQ(back.rows[k].u, log.rows[k].u);
  }
  write_log_csv(b, back);
  EXPECT_EQ(slurp(b), text);
}

TEST(Export, ReexportIsByteIdentical) {
  const std::string dir = temp_dir("reexport");
  write_log_csv(dir + "/1.csv", thousand_step_log());
  write_log_csv(dir + "/2.csv", thousand_step_log());
  EXPECT_EQ(slurp(dir + "/1.csv"), slurp(dir + "/2.csv"));
}

int count_paths(const std::string& svg) {
  int n = 0;
  for (size_t p = svg.find("<path"); p != std::string::npos; p = svg.find("<path", p + 1)) ++n;
  return n;
}

TEST(Export, PlotHasOneCurvePerControllerPlusEnvelope) {
  std::vector<TrajectoryLog> logs;
  for (const char* name : {"ancm", "robust_ncm", "ilqr"}) {
    logs.push_back(thousand_step_log());
    logs.back().controller = name;
  }
  std::ostringstream plain;
  write_plot_svg(plain, logs, "test");
  EXPECT_EQ(count_paths(plain.str()), 3);
  for (auto& r : logs[0].rows) {
    r.cert_pass = true;
    r.bound = 2.0;
  }
  std::ostringstream with_env;
  write_plot_svg(with_env, logs, "test");
  EXPECT_EQ(count_paths(with_env.str()), 4);
  EXPECT_NE(with_env.str().find("class=\"envelope\""), std::string::npos);
}

TEST(Export, ExportResultWritesFiles) {
  ScenarioResult res;
  res.scenario = "drag";
  res.logs = {thousand_step_log()};
  const std::string dir = temp_dir("result");
  const auto paths = export_result(res, dir);
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir + "/drag_static.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir + "/drag.svg"));
  EXPECT_THROW(write_log_csv("/nonexistent_dir/x.csv", res.logs[0]), IoError);
  EXPECT_THROW(write_log_csv(std::cout, TrajectoryLog{}), InvalidArgument);
}

// scenarios

TEST(Scenario, ConfigFromKv) {
  const KvConfig kv = KvConfig::parse(
      "dt = 0.005\nT = 3\nseed = 7\ndisturbance_sup = 0\nsigma = 0.02\nGamma_diag = 2, 1e-3\n"
      "controllers = ancm, ilqr\n");
  const ScenarioConfig c = scenario_config_from_kv(kv, "drag");
  EXPECT_EQ(c.sim.dt, 0.005);
  EXPECT_EQ(c.sim.T, 3.0);
  EXPECT_EQ(c.sim.disturbance.seed, 7u);
  EXPECT_EQ(c.sim.disturbance.sup, 0.0);
  EXPECT_EQ(c.control.sigma, 0.02);
  EXPECT_EQ(c.control.Gamma(0, 0), 2.0);
  EXPECT_EQ(c.control.Gamma(1, 1), 1e-3);
  EXPECT_EQ(c.controllers, (std::vector<std::string>{"ancm", "ilqr"}));
  EXPECT_EQ(c.sim.x0, vec({0.83, -0.32, 0.39, 0.45}));
  EXPECT_EQ(c.theta0, vec({4.0, 0.0016}));
  EXPECT_THROW(default_scenario_config("nope"), ConfigError);
  EXPECT_THROW(scenario_config_from_kv(KvConfig::parse("dt = -1\n"), "drag"), ConfigError);
}

TEST(Scenario, DragEquilibriumIsHeld) {
  ScenarioConfig c = default_scenario_config("drag");
  c.sim.x0 = Vec::Zero(4);
  c.sim.disturbance.sup = 0.0;
  c.sim.T = 0.3;
  c.theta0 = vec({0.5, 0.002});
  c.bound_samples = 10;
  const ScenarioResult r = run_unknown_drag_scenario(c);
  ASSERT_EQ(r.logs.size(), 4u);
  for (const auto& l : r.logs) {
    EXPECT_FALSE(l.aborted) << l.controller << ": " << l.abort_reason;
    EXPECT_LE(l.final_error(), 1e-6) << l.controller;
    EXPECT_EQ(l.rows.size(), 31u);
  }
  EXPECT_NO_THROW(r.log("ilqr"));
  EXPECT_THROW(r.log("missing"), InvalidArgument);
}

TEST(Scenario, SameSeedGivesIdenticalLogs) {
  ScenarioConfig c = default_scenario_config("drag");
  c.sim.T = 0.5;
  c.controllers = {"ilqr"};
  c.bound_samples = 5;
  std::ostringstream a, b;
  write_log_csv(a, run_unknown_drag_scenario(c).logs.at(0));
  write_log_csv(b, run_unknown_drag_scenario(c).logs.at(0));
  EXPECT_EQ(a.str(), b.str());
}

}  // namespace
}  // namespace ancm
