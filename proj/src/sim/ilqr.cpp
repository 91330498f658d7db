#include <cmath>
#include <limits>

#include "ancm/errors.hpp"
#include "ancm/sim.hpp"

namespace ancm {

const char* to_string(IlqrStatus s) {
  switch (s) {
    case IlqrStatus::kConverged: return "converged";
    case IlqrStatus::kMaxIter: return "max_iter";
    case IlqrStatus::kLineSearchFailed: return "line_search_failed";
  }
  return "?";
}

StepFn rk4_discretize(const SystemModel& model, double dt) {
  return [model, dt](const Vec& x, const Vec& u) -> Vec {
    const Vec k1 = model.xdot(x, u);
    const Vec k2 = model.xdot(x + 0.5 * dt * k1, u);
    const Vec k3 = model.xdot(x + 0.5 * dt * k2, u);
    const Vec k4 = model.xdot(x + dt * k3, u);
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };
}

std::vector<Mat> riccati_gains(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                               const Mat& Qf, int horizon) {
  std::vector<Mat> G(horizon);
  Mat P = Qf;
  for (int k = horizon - 1; k >= 0; --k) {
    const Mat S = R + B.transpose() * P * B;
    G[k] = S.ldlt().solve(B.transpose() * P * A);
    P = Q + A.transpose() * P * (A - B * G[k]);
    P = sym(P);
  }
  return G;
}

namespace {

struct Weights {
  Mat Q, R, Qf;
  Vec ref;
};

Weights weights(const IlqrConfig& cfg, Eigen::Index n, Eigen::Index m) {
  Weights w;
  w.Q = cfg.Q.size() ? cfg.Q : Mat::Identity(n, n);
  w.R = cfg.R.size() ? cfg.R : Mat::Identity(m, m);
  w.Qf = cfg.Qf.size() ? cfg.Qf : w.Q;
  w.ref = cfg.x_ref.size() ? cfg.x_ref : Vec::Zero(n);
  if (w.Q.rows() != n || w.Qf.rows() != n || w.R.rows() != m) {
    throw InvalidArgument("iLQR weights do not match the dimensions");
  }
  return w;
}

double cost_of(const std::vector<Vec>& x, const std::vector<Vec>& u, const Weights& w) {
  double c = 0.0;
  for (size_t k = 0; k < u.size(); ++k) {
    const Vec dx = x[k] - w.ref;
    c += 0.5 * (dx.dot(w.Q * dx) + u[k].dot(w.R * u[k]));
  }
  const Vec dx = x.back() - w.ref;
  return c + 0.5 * dx.dot(w.Qf * dx);
}

std::pair<Mat, Mat> linearize(const StepFn& step, const Vec& x, const Vec& u) {
  const Eigen::Index n = x.size(), m = u.size();
  Mat A(n, n), B(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x(i)));
    Vec p = x, q = x;
    p(i) += h;
    q(i) -= h;
    A.col(i) = (step(p, u) - step(q, u)) / (2.0 * h);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    const double h = 1e-6 * (1.0 + std::abs(u(i)));
    Vec p = u, q = u;
    p(i) += h;
    q(i) -= h;
    B.col(i) = (step(x, p) - step(x, q)) / (2.0 * h);
  }
  return {A, B};
}

}  // namespace

double trajectory_cost(const std::vector<Vec>& x, const std::vector<Vec>& u,
                       const IlqrConfig& cfg) {
  if (x.size() != u.size() + 1) throw InvalidArgument("need one more state than inputs");
  return cost_of(x, u, weights(cfg, x[0].size(), u.empty() ? 0 : u[0].size()));
}

IlqrResult ilqr_solve(const StepFn& step, const Vec& x0, std::vector<Vec> u_init,
                      const IlqrConfig& cfg) {
  const int N = cfg.horizon;
  if (N < 1) throw InvalidArgument("horizon must be >= 1");
  if (static_cast<int>(u_init.size()) != N) throw InvalidArgument("u_init must have horizon entries");
  const Eigen::Index n = x0.size(), m = u_init[0].size();
  const Weights w = weights(cfg, n, m);

  IlqrResult res;
  res.u = std::move(u_init);
  res.x.assign(N + 1, x0);
  for (int k = 0; k < N; ++k) res.x[k + 1] = step(res.x[k], res.u[k]);
  res.cost = cost_of(res.x, res.u, w);
  res.K.assign(N, Mat::Zero(m, n));
  res.k.assign(N, Vec::Zero(m));
  if (!std::isfinite(res.cost)) throw NonFiniteState("initial iLQR rollout is not finite");

  for (int it = 0; it < cfg.max_iter; ++it) {
    res.iterations = it + 1;
    // backward pass
    Vec Vx = w.Qf * (res.x[N] - w.ref);
    Mat Vxx = w.Qf;
    double expected = 0.0;
    for (int k = N - 1; k >= 0; --k) {
      const auto [A, B] = linearize(step, res.x[k], res.u[k]);
      const Vec Qx = w.Q * (res.x[k] - w.ref) + A.transpose() * Vx;
      const Vec Qu = w.R * res.u[k] + B.transpose() * Vx;
      const Mat Qxx = w.Q + A.transpose() * Vxx * A;
      const Mat Quu = w.R + B.transpose() * Vxx * B + cfg.reg * Mat::Identity(m, m);
      const Mat Qux = B.transpose() * Vxx * A;
      const Eigen::LDLT<Mat> S(sym(Quu));
      res.k[k] = -S.solve(Qu);
      res.K[k] = -S.solve(Qux);
      expected += res.k[k].dot(Qu);
      Vx = Qx + res.K[k].transpose() * Quu * res.k[k] + res.K[k].transpose() * Qu +
           Qux.transpose() * res.k[k];
      Vxx = sym(Qxx + res.K[k].transpose() * Quu * res.K[k] + res.K[k].transpose() * Qux +
                Qux.transpose() * res.K[k]);
    }
    // forward pass with backtracking
    bool accepted = false;
    double step_size = 1.0;
    std::vector<Vec> xn(N + 1), un(N);
    double cn = 0.0;
    for (int ls = 0; ls < 12; ++ls, step_size *= 0.5) {
      xn[0] = x0;
      for (int k = 0; k < N; ++k) {
        un[k] = res.u[k] + step_size * res.k[k] + res.K[k] * (xn[k] - res.x[k]);
        xn[k + 1] = step(xn[k], un[k]);
      }
      cn = cost_of(xn, un, w);
      if (std::isfinite(cn) && cn < res.cost) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // no descent: at a stationary point when the model predicts none
      res.status = std::abs(expected) < cfg.tol ? IlqrStatus::kConverged
                                                : IlqrStatus::kLineSearchFailed;
      return res;
    }
    const double decrease = res.cost - cn;
    res.x = std::move(xn);
    res.u = std::move(un);
    xn.assign(N + 1, Vec());
    un.assign(N, Vec());
    res.cost = cn;
    if (decrease < cfg.tol) {
      res.status = IlqrStatus::kConverged;
      return res;
    }
  }
  res.status = IlqrStatus::kMaxIter;
  return res;
}

IlqrResult ilqr_solve_strict(const StepFn& step, const Vec& x0, std::vector<Vec> u_init,
                             const IlqrConfig& cfg) {
  IlqrResult r = ilqr_solve(step, x0, std::move(u_init), cfg);
  if (r.status == IlqrStatus::kLineSearchFailed) {
    throw LineSearchFailed("no step length decreased the cost (cost " + std::to_string(r.cost) + ")");
  }
  return r;
}

namespace {

class IlqrController : public SimController {
 public:
  IlqrController(SystemModel model, Regulation ref, RecedingHorizonConfig cfg, std::string name)
      : ref_(std::move(ref)), cfg_(std::move(cfg)), name_(std::move(name)),
        step_(rk4_discretize(model, cfg_.dt_plan)) {
    if (cfg_.solver.x_ref.size() == 0) cfg_.solver.x_ref = ref_.x_d;
    plan_.assign(cfg_.solver.horizon, ref_.u_d.size() ? ref_.u_d : Vec::Zero(model.m()));
  }

  std::string name() const override { return name_; }

  void begin_step(double t, const Vec& x, const Vec&) override {
    // shift the warm start by the elapsed planning steps
    if (have_plan_) {
      const int shift = static_cast<int>(std::floor((t - t_plan_) / cfg_.dt_plan + 1e-9));
      for (int s = 0; s < shift; ++s) {
        plan_.erase(plan_.begin());
        plan_.push_back(plan_.back());
      }
      t_plan_ += shift * cfg_.dt_plan;
    } else {
      t_plan_ = t;
    }
    IlqrConfig sc = cfg_.solver;
    sc.max_iter = cfg_.iters_per_step;
    last_ = ilqr_solve(step_, x, plan_, sc);
    plan_ = last_.u;
    x0_ = x;
    have_plan_ = true;
  }

  ControlOutput eval(double, const Vec& x, const Vec&) override {
    ControlOutput out;
    out.u = last_.u.front() + last_.K.front() * (x - x0_);
    out.a_dot = Vec(0);
    return out;
  }

 private:
  Regulation ref_;
  RecedingHorizonConfig cfg_;
  std::string name_;
  StepFn step_;
  std::vector<Vec> plan_;
  IlqrResult last_;
  Vec x0_;
  double t_plan_ = 0.0;
  bool have_plan_ = false;
};

}  // namespace

std::unique_ptr<SimController> make_ilqr_controller(SystemModel model, Regulation ref,
                                                    RecedingHorizonConfig cfg, std::string name) {
  return std::make_unique<IlqrController>(std::move(model), std::move(ref), std::move(cfg),
                                          std::move(name));
}

}  // namespace ancm
