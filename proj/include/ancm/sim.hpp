#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ancm/controllers.hpp"
#include "ancm/kv_config.hpp"
#include "ancm/ncm.hpp"

namespace ancm {

// ---- integration

using Derivative = std::function<Vec(double t, const Vec& z)>;
using StepHook = std::function<void(double t, const Vec& z)>;

struct RkTrajectory {
  std::vector<double> t;
  std::vector<Vec> z;
};

/// ceil(T / dt) steps; the last one is shortened to land on T.
int step_count(double dt, double T);

/// Classic fourth-order Runge-Kutta from t = 0 to T. `before_step` runs at the
/// start of every step. On a non-finite state the trajectory so far is left
/// in `out` and NonFiniteState is thrown.
void integrate_rk4(const Derivative& f, const Vec& z0, double dt, double T, RkTrajectory& out,
                   const StepHook& before_step = {});
RkTrajectory integrate_rk4(const Derivative& f, const Vec& z0, double dt, double T);

// ---- disturbance

struct DisturbanceConfig {
  double sup = 0.0;
  unsigned seed = 1;
  int modes = 6;
  double spatial_freq = 2.0;
  double temporal_freq = 0.0;  // 0 gives a static field d(x)
  std::vector<int> channels;   // state rows the field acts on; empty means all
};

/// Smooth random field d(t, x), a sum of sinusoidal modes, rescaled onto the
/// ball |d| <= sup whenever it leaves it.
class Disturbance {
 public:
  Disturbance() = default;
  Disturbance(int n, const DisturbanceConfig& cfg);
  Vec operator()(double t, const Vec& x) const;
  double sup() const { return sup_; }
  bool active() const { return sup_ > 0.0; }

 private:
  int n_ = 0;
  double sup_ = 0.0;
  std::vector<Vec> amp_, wave_;
  std::vector<double> rate_, phase_;
};

// ---- logs

struct LogRow {
  double t = 0.0;
  Vec x, x_d, u, theta_hat;
  double e_norm = 0.0;
  double V = 0.0;
  double bound = 0.0;
  bool cert_pass = false;
};

struct TrajectoryLog {
  std::string controller;
  std::vector<LogRow> rows;
  bool aborted = false;
  std::string abort_reason;
  bool theta_excursion = false;  // |theta_hat| exceeded theta_bar at some step

  double final_error() const;
  /// Largest |e| over rows with t <= t_end.
  double max_error(double t_end) const;
};

// ---- closed-loop controllers

struct ControlOutput {
  Vec u;
  Vec a_dot;  // derivative of the controller's adaptive state
};

class SimController {
 public:
  virtual ~SimController() = default;
  virtual std::string name() const = 0;
  /// Initial adaptive state (empty for static laws).
  virtual Vec initial_state() const { return Vec(0); }
  /// Per-step setup at the start of every integration step.
  virtual void begin_step(double /*t*/, const Vec& /*x*/, const Vec& /*a*/) {}
  virtual ControlOutput eval(double t, const Vec& x, const Vec& a) = 0;
  /// Parameter estimate written to the log.
  virtual Vec theta_hat(const Vec& a) const { return a; }
  /// Lyapunov value for the log; NaN when undefined.
  virtual double lyapunov(const Vec& x, const Vec& a) const;
};

struct Regulation {
  Vec x_d;
  Vec u_d;
};

/// aNCM with the parameter-dependent metric (adaptive law with +Gamma).
/// With `linearize` the metric and its Jacobian are refreshed once per step.
std::unique_ptr<SimController> make_ancm_controller(std::shared_ptr<const MetricSource> metric,
                                                    ParametricSystem psys, Regulation ref,
                                                    Vec theta0, ControllerConfig cfg,
                                                    Vec theta_true, bool linearize);

/// Affine-uncertainty law with the least-squares phi; the metric is
/// evaluated at the fixed `metric_param`.
std::unique_ptr<SimController> make_affine_controller(std::shared_ptr<const MetricSource> metric,
                                                      AffineUncertainSystem sys, Regulation ref,
                                                      Vec theta0, Vec metric_param,
                                                      ControllerConfig cfg, Vec theta_true,
                                                      bool linearize);

/// Non-adaptive NCM law on a frozen model.
std::unique_ptr<SimController> make_robust_controller(std::shared_ptr<const MetricSource> metric,
                                                      SystemModel model, Regulation ref,
                                                      Vec metric_param, Mat R, bool linearize,
                                                      std::string name = "robust_ncm");

/// Basis-function law: adapts F_hat and every B_hat_i.
std::unique_ptr<SimController> make_basis_controller(std::shared_ptr<const MetricSource> metric,
                                                     BasisFunctionModel bm, Regulation ref,
                                                     ControllerConfig cfg, bool linearize);

// ---- iLQR

using StepFn = std::function<Vec(const Vec& x, const Vec& u)>;

struct IlqrConfig {
  int horizon = 75;
  Mat Q, R, Qf;
  Vec x_ref;           // empty means zero
  int max_iter = 100;
  double tol = 1e-8;   // stop when the cost decrease falls below tol
  double reg = 1e-6;   // Levenberg term on Q_uu
};

enum class IlqrStatus { kConverged, kMaxIter, kLineSearchFailed };
const char* to_string(IlqrStatus s);

struct IlqrResult {
  std::vector<Vec> x;  // horizon + 1 states
  std::vector<Vec> u;  // horizon inputs
  std::vector<Mat> K;  // feedback gains, u = u_bar + k + K (x - x_bar)
  std::vector<Vec> k;
  double cost = 0.0;
  int iterations = 0;
  IlqrStatus status = IlqrStatus::kMaxIter;
};

/// Standard iLQR with backtracking line search. A failed line search leaves
/// the best iterate in the result with status kLineSearchFailed.
IlqrResult ilqr_solve(const StepFn& step, const Vec& x0, std::vector<Vec> u_init,
                      const IlqrConfig& cfg);

/// Same, throwing LineSearchFailed instead of returning a failed status.
IlqrResult ilqr_solve_strict(const StepFn& step, const Vec& x0, std::vector<Vec> u_init,
                             const IlqrConfig& cfg);

/// x_{k+1} = one RK4 step of the model.
StepFn rk4_discretize(const SystemModel& model, double dt);

/// Finite-horizon discrete Riccati feedback gains (u_k = -G_k x_k), k = 0..N-1.
std::vector<Mat> riccati_gains(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                               const Mat& Qf, int horizon);

double trajectory_cost(const std::vector<Vec>& x, const std::vector<Vec>& u,
                       const IlqrConfig& cfg);

struct RecedingHorizonConfig {
  IlqrConfig solver;
  double dt_plan = 0.02;
  int iters_per_step = 5;
};

/// Re-plans from the current state every step, warm-started from the
/// shifted previous plan.
std::unique_ptr<SimController> make_ilqr_controller(SystemModel model, Regulation ref,
                                                    RecedingHorizonConfig cfg,
                                                    std::string name = "ilqr");

// ---- nominal learned dynamics

struct NominalModelConfig {
  int samples = 10000;
  int validation = 2000;
  int depth = 3;
  int width = 5;
  int epochs = 300;
  int batch_size = 64;
  double learning_rate = 5e-3;
  double momentum = 0.9;
  double lr_decay = 0.99;
  double u_max = 20.0;
  unsigned seed = 1;
};

struct NominalModel {
  Mlp net;      // normalized x -> [f_hat; b_hat]
  Vec in_scale; // x_norm = x ./ in_scale
  BasisFunctionModel basis;
  double validation_rms = 0.0;
  double validation_max = 0.0;
  std::vector<double> loss_curve;
};

/// Fits x' = f(x) + b(x) u of the true cart-pole on the domain with a tanh
/// network; the last hidden layer plus a constant is the basis for both
/// F_hat and B_hat.
NominalModel fit_nominal_model(const CartPole& cp, const Box& domain,
                               const NominalModelConfig& cfg);

/// Wraps a control-affine model as a parametric system with no parameters.
ParametricSystem as_parametric(const SystemModel& model);

// ---- scenarios

struct SimConfig {
  double dt = 0.01;
  double T = 15.0;
  Vec x0;
  DisturbanceConfig disturbance;
  double theta_bar = 0.0;  // excursion flag threshold; 0 disables
  double divergence = 1e3; // abort when |x| exceeds this
};

using Plant = std::function<Vec(const Vec& x, const Vec& u)>;

/// Integrates plant + controller jointly; the log holds ceil(T/dt)+1 rows
/// unless the run aborted.
TrajectoryLog simulate(const Plant& plant, SimController& ctrl, const Regulation& ref,
                       const SimConfig& cfg, const GainCertificate* cert = nullptr);

struct ScenarioConfig {
  SimConfig sim;
  CartPole plant;                 // true parameters
  Box domain;
  Box theta_box;
  Vec theta0;
  SynthesisConfig synthesis;
  ControllerConfig control;
  std::string metric = "exact";   // "exact" or a checkpoint path
  double eps_ell = 0.0;           // learning error used by the certificate
  bool linearize = true;
  int bound_samples = 200;        // metric samples for the omega bounds
  RecedingHorizonConfig ilqr;
  NominalModelConfig nominal;
  std::vector<std::string> controllers;  // empty runs all of the scenario's
  int threads = 1;
};

/// Defaults for "drag" or "unknown-dyn", overridden by the key-value file.
ScenarioConfig default_scenario_config(const std::string& scenario);
ScenarioConfig scenario_config_from_kv(const KvConfig& kv, const std::string& scenario);

struct ScenarioResult {
  std::string scenario;
  std::vector<TrajectoryLog> logs;
  GainCertificate certificate;
  DatasetSummary metric_bounds;
  std::string notes;

  const TrajectoryLog& log(const std::string& controller) const;
};

/// aNCM (+Gamma law), affine law via pseudo-inverse, robust NCM, iLQR; the
/// last three use the initial drag estimate.
ScenarioResult run_unknown_drag_scenario(const ScenarioConfig& cfg);

/// Basis-function adaptation, robust NCM and iLQR on the fitted nominal model.
ScenarioResult run_unknown_dynamics_scenario(const ScenarioConfig& cfg);

ScenarioResult run_scenario(const std::string& scenario, const ScenarioConfig& cfg);

// ---- export

void write_log_csv(std::ostream& out, const TrajectoryLog& log);
void write_log_csv(const std::string& path, const TrajectoryLog& log);
TrajectoryLog read_log_csv(std::istream& in, const std::string& controller);
TrajectoryLog read_log_csv(const std::string& path);

/// |e(t)| per controller plus the envelope of the first certified log.
void write_plot_svg(std::ostream& out, const std::vector<TrajectoryLog>& logs,
                    const std::string& title);
void write_plot_svg(const std::string& path, const std::vector<TrajectoryLog>& logs,
                    const std::string& title);

/// One CSV per controller (<dir>/<scenario>_<controller>.csv) and
/// <dir>/<scenario>.svg. Returns the written paths.
std::vector<std::string> export_result(const ScenarioResult& res, const std::string& dir);

// ---- metric pipeline on the cart-pole

struct PipelineConfig {
  CartPole cp;
  Box domain;
  Box theta_box;
  SynthesisConfig synthesis;
  int samples = 1000;
  int validation = 200;
  int derivative_checks = 20;
  unsigned seed = 1;
  int threads = 1;
  int depth = 3;
  int width = 100;
  TrainConfig train;
};

PipelineConfig default_pipeline_config();
PipelineConfig pipeline_config_from_kv(const KvConfig& kv);

/// Random quasi-static samples over domain x theta_box with x_d = 0.
Dataset cartpole_dataset(const PipelineConfig& cfg, int samples, unsigned seed);

struct TrainedMetric {
  std::shared_ptr<MetricNet> net;
  TrainResult train;
  LearningErrorReport error;
  double b_bar = 0.0;
  double rho_bar = 0.0;
};

/// Fits the net, then measures the learning error on `validation` against
/// the exact metric program.
TrainedMetric train_cartpole_metric(const PipelineConfig& cfg, const Dataset& train_set,
                                    const Dataset& validation_set);

/// aNCM-kind certificate from a dataset's bounds and the controller gains.
GainCertificate certify_ancm(const DatasetSummary& bounds, const ControllerConfig& control,
                             double alpha_ncm_value, double eps_ell, double d_bar,
                             double theta_bar, double y_bar = 0.0);

}  // namespace ancm
