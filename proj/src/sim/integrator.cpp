#include <cmath>
#include <limits>

#include "ancm/errors.hpp"
#include "ancm/sim.hpp"

namespace ancm {

int step_count(double dt, double T) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (!(T >= 0.0)) throw InvalidArgument("T must be >= 0");
  return static_cast<int>(std::ceil(T / dt - 1e-9));
}

void integrate_rk4(const Derivative& f, const Vec& z0, double dt, double T, RkTrajectory& out,
                   const StepHook& before_step) {
  const int N = step_count(dt, T);
  out.t.assign(1, 0.0);
  out.z.assign(1, z0);
  if (!z0.allFinite()) throw NonFiniteState("initial state is not finite");
  Vec z = z0;
  for (int k = 0; k < N; ++k) {
    const double t = k * dt;
    const double h = (k + 1 == N) ? T - t : dt;
    if (before_step) before_step(t, z);
    const Vec k1 = f(t, z);
    const Vec k2 = f(t + 0.5 * h, z + 0.5 * h * k1);
    const Vec k3 = f(t + 0.5 * h, z + 0.5 * h * k2);
    const Vec k4 = f(t + h, z + h * k3);
    z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!z.allFinite()) {
      throw NonFiniteState("state became non-finite at t = " + std::to_string(t + h));
    }
    out.t.push_back(k + 1 == N ? T : (k + 1) * dt);
    out.z.push_back(z);
  }
}

RkTrajectory integrate_rk4(const Derivative& f, const Vec& z0, double dt, double T) {
  RkTrajectory out;
  integrate_rk4(f, z0, dt, T, out);
  return out;
}

double TrajectoryLog::final_error() const {
  return rows.empty() ? std::numeric_limits<double>::quiet_NaN() : rows.back().e_norm;
}

double TrajectoryLog::max_error(double t_end) const {
  double worst = 0.0;
  for (const auto& r : rows) {
    if (r.t <= t_end + 1e-12) worst = std::max(worst, r.e_norm);
  }
  return worst;
}

double SimController::lyapunov(const Vec&, const Vec&) const {
  return std::numeric_limits<double>::quiet_NaN();
}

TrajectoryLog simulate(const Plant& plant, SimController& ctrl, const Regulation& ref,
                       const SimConfig& cfg, const GainCertificate* cert) {
  const Eigen::Index n = cfg.x0.size();
  if (ref.x_d.size() != n) throw InvalidArgument("x_d must match x0");
  const Disturbance dist(static_cast<int>(n), cfg.disturbance);
  const Vec a0 = ctrl.initial_state();
  const Eigen::Index na = a0.size();
  Vec z0(n + na);
  z0 << cfg.x0, a0;

  TrajectoryLog log;
  log.controller = ctrl.name();
  const bool certified = cert != nullptr && cert->pass;
  double V0 = 0.0;
  auto record = [&](double t, const Vec& z, const Vec& u) {
    LogRow r;
    r.t = t;
    r.x = z.head(n);
    r.x_d = ref.x_d;
    r.u = u;
    r.theta_hat = ctrl.theta_hat(z.tail(na));
    r.e_norm = (r.x - ref.x_d).norm();
    r.V = ctrl.lyapunov(r.x, z.tail(na));
    if (log.rows.empty()) V0 = r.V;
    r.cert_pass = certified;
    r.bound = certified && std::isfinite(V0) ? tracking_error_bound(*cert, V0, t)
                                             : std::numeric_limits<double>::quiet_NaN();
    if (cfg.theta_bar > 0.0 && r.theta_hat.size() > 0 && r.theta_hat.norm() > cfg.theta_bar) {
      log.theta_excursion = true;
    }
    log.rows.push_back(std::move(r));
  };

  Vec u_step;  // input at the start of the current step, for the log
  auto f = [&](double t, const Vec& z) -> Vec {
    const Vec x = z.head(n);
    const ControlOutput c = ctrl.eval(t, x, z.tail(na));
    Vec dz(n + na);
    dz.head(n) = plant(x, c.u);
    if (dist.active()) dz.head(n) += dist(t, x);
    if (na > 0) dz.tail(na) = c.a_dot;
    return dz;
  };
  const StepHook hook = [&](double t, const Vec& z) {
    if (z.head(n).norm() > cfg.divergence) throw NonFiniteState("state left the divergence ball");
    ctrl.begin_step(t, z.head(n), z.tail(na));
    u_step = ctrl.eval(t, z.head(n), z.tail(na)).u;
    record(t, z, u_step);
  };

  RkTrajectory traj;
  try {
    integrate_rk4(f, z0, cfg.dt, cfg.T, traj, hook);
    // final row: input evaluated at T for completeness
    const Vec& zT = traj.z.back();
    ctrl.begin_step(cfg.T, zT.head(n), zT.tail(na));
    record(cfg.T, zT, ctrl.eval(cfg.T, zT.head(n), zT.tail(na)).u);
  } catch (const Error& err) {
    log.aborted = true;
    log.abort_reason = err.what();
  }
  return log;
}

}  // namespace ancm
