#include <cmath>
#include <limits>

#include "ancm/errors.hpp"
#include "ancm/lmi.hpp"

namespace ancm::lmi {
namespace {

struct Block {
  Mat F0;  // constant part including the margin shift
  std::vector<std::pair<int, Mat>> terms;
};

// minimize c^T y  s.t.  F0_j + sum_i y_i G_ji <= 0  for every block j.
struct BarrierProblem {
  int n = 0;
  Vec c;
  std::vector<Block> blocks;
  int barrier_degree = 0;  // sum of block sizes
  int num_user_blocks = 0;
};

BarrierProblem lower(const LmiProblem& p, double bound) {
  BarrierProblem bp;
  bp.n = p.num_scalars();
  bp.c = Vec::Zero(bp.n);
  for (const auto& [k, g] : p.objective().terms()) bp.c(k) += g(0, 0);
  for (const auto& con : p.constraints()) {
    Block b;
    const auto s = con.expr.rows();
    b.F0 = con.expr.constant_part() + con.margin * Mat::Identity(s, s);
    for (const auto& [k, g] : con.expr.terms()) {
      if (g.cwiseAbs().maxCoeff() > 0.0) b.terms.emplace_back(k, g);
    }
    bp.barrier_degree += static_cast<int>(s);
    bp.blocks.push_back(std::move(b));
  }
  // |y_i| <= bound keeps the barrier bounded along free directions.
  for (int i = 0; i < bp.n; ++i) {
    for (double sign : {1.0, -1.0}) {
      Block b;
      b.F0 = Mat::Constant(1, 1, -bound);
      b.terms.emplace_back(i, Mat::Constant(1, 1, sign));
      bp.blocks.push_back(std::move(b));
      bp.barrier_degree += 1;
    }
  }
  bp.num_user_blocks = static_cast<int>(p.constraints().size());
  return bp;
}

Mat block_value(const Block& b, const Vec& y) {
  Mat f = b.F0;
  for (const auto& [k, g] : b.terms) f += y(k) * g;
  return f;
}

double block_max_eig(const Block& b, const Vec& y) {
  const Mat f = block_value(b, y);
  Eigen::SelfAdjointEigenSolver<Mat> es(f, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// Cholesky factors of the slacks S_j = -F_j(y); false if any is not PD.
bool factor_slacks(const BarrierProblem& bp, const Vec& y, std::vector<Eigen::LLT<Mat>>& llts) {
  llts.resize(bp.blocks.size());
  for (size_t j = 0; j < bp.blocks.size(); ++j) {
    llts[j].compute(-block_value(bp.blocks[j], y));
    if (llts[j].info() != Eigen::Success) return false;
    const auto& l = llts[j].matrixLLT();
    if (l.diagonal().minCoeff() <= 0.0 || !l.diagonal().allFinite()) return false;
  }
  return true;
}

// -sum log det S_j
double log_barrier(const std::vector<Eigen::LLT<Mat>>& llts) {
  double v = 0.0;
  for (const auto& llt : llts) v -= 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return v;
}

struct Counters {
  int newton = 0;
  int max_newton = 0;
};

enum class CenterResult { kConverged, kStopped, kBudget, kStalled };

template <typename StopFn>
CenterResult center(const BarrierProblem& bp, Vec& y, double t, Counters& cnt, StopFn stop) {
  std::vector<Eigen::LLT<Mat>> llts;
  if (!factor_slacks(bp, y, llts)) return CenterResult::kStalled;
  double barrier = log_barrier(llts);
  const int n = bp.n;

  for (int it = 0; it < 200; ++it) {
    if (cnt.newton >= cnt.max_newton) return CenterResult::kBudget;
    ++cnt.newton;

    // Columns of J are vec(L^-1 G_i L^-T) over all blocks; H = J^T J.
    int rows = 0;
    for (const auto& b : bp.blocks) rows += static_cast<int>(b.F0.rows() * b.F0.rows());
    Mat J = Mat::Zero(rows + n, n);
    Vec grad = t * bp.c;
    int r0 = 0;
    for (size_t j = 0; j < bp.blocks.size(); ++j) {
      const Block& b = bp.blocks[j];
      const auto s = b.F0.rows();
      const auto L = llts[j].matrixL();
      for (const auto& [k, g] : b.terms) {
        Mat h = L.solve(g);
        h = L.solve(h.transpose()).eval();
        grad(k) += h.trace();
        J.block(r0, k, s * s, 1) += Eigen::Map<const Vec>(h.data(), s * s);
      }
      r0 += static_cast<int>(s * s);
    }
    Vec d = J.topRows(rows).colwise().norm().transpose();
    for (int i = 0; i < n; ++i) d(i) = d(i) > 0.0 ? 1.0 / d(i) : 1.0;
    J = J * d.asDiagonal();
    J.bottomRows(n) = 1e-7 * Mat::Identity(n, n);
    const Eigen::HouseholderQR<Mat> qr(J);
    const Mat R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    const Vec rhs = -(d.asDiagonal() * grad).eval();
    const Vec z = R.transpose().triangularView<Eigen::Lower>().solve(rhs);
    const Vec step = (d.asDiagonal() * R.triangularView<Eigen::Upper>().solve(z)).eval();
    if (!step.allFinite()) return CenterResult::kStalled;
    const double decrement = -grad.dot(step);
    if (decrement / 2.0 <= 1e-8) return CenterResult::kConverged;

    double alpha = 1.0;
    Vec trial;
    bool accepted = false;
    std::vector<Eigen::LLT<Mat>> trial_llts;
    while (alpha > 1e-14) {
      trial = y + alpha * step;
      if (factor_slacks(bp, trial, trial_llts)) {
        // Change in t c^T y + barrier, formed without cancelling large totals.
        const double trial_barrier = log_barrier(trial_llts);
        const double change = t * alpha * bp.c.dot(step) + (trial_barrier - barrier);
        if (change <= -0.25 * alpha * decrement) {
          accepted = true;
          barrier = trial_barrier;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // Decrement is at roundoff level; accept the current point.
      return decrement < 1e-6 ? CenterResult::kConverged : CenterResult::kStalled;
    }
    y = trial;
    llts.swap(trial_llts);
    // Tiny accepted steps at a tiny decrement: roundoff floor reached.
    if (alpha < 1e-3 && decrement < 1e-3) return CenterResult::kConverged;
    if (stop(y)) return CenterResult::kStopped;
    if (y.cwiseAbs().maxCoeff() > 1e12) return CenterResult::kStalled;
  }
  return CenterResult::kStalled;
}

// Phase I: minimize s  s.t.  F_j(y) - s I <= 0.  Returns the best margin s.
double phase_one(const BarrierProblem& bp, Vec& y, const SolverOptions& opts, Counters& cnt,
                 bool& converged) {
  BarrierProblem aux;
  aux.n = bp.n + 1;
  aux.c = Vec::Zero(aux.n);
  aux.c(bp.n) = 1.0;
  aux.barrier_degree = bp.barrier_degree;
  double s0 = -std::numeric_limits<double>::infinity();
  for (const auto& b : bp.blocks) {
    Block ab = b;
    const auto sz = b.F0.rows();
    ab.terms.emplace_back(bp.n, -Mat::Identity(sz, sz));
    aux.blocks.push_back(std::move(ab));
    s0 = std::max(s0, block_max_eig(b, y));
  }
  Vec z(aux.n);
  z << y, std::max(s0, 0.0) + 1.0;

  // Stop as soon as the original constraints hold with a comfortable margin.
  const double target = -1e-2;
  auto stop = [&](const Vec& zz) { return zz(bp.n) < target; };

  converged = false;
  double t = 1.0 / opts.mu0;
  for (;;) {
    const CenterResult r = center(aux, z, t, cnt, stop);
    if (r == CenterResult::kStopped) break;
    if (r == CenterResult::kBudget || r == CenterResult::kStalled) break;
    if (z(bp.n) < target) break;
    if (aux.barrier_degree / t < opts.tol) {
      converged = true;
      break;
    }
    t *= opts.mu_factor;
  }
  y = z.head(bp.n);
  return z(bp.n);
}

}  // namespace

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::kOptimal: return "optimal";
    case SdpStatus::kInfeasible: return "infeasible";
    case SdpStatus::kMaxIter: return "max-iter";
  }
  return "unknown";
}

SdpSolution solve_sdp(const LmiProblem& p, double tol, int max_iter) {
  SolverOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return solve_sdp(p, opts);
}

SdpSolution solve_sdp(const LmiProblem& p, const SolverOptions& opts) {
  if (!(opts.tol > 0.0)) throw InvalidArgument("solver tolerance must be positive");
  const BarrierProblem bp = lower(p, opts.variable_bound);
  SdpSolution sol;
  sol.y = Vec::Zero(bp.n);
  Counters cnt{0, opts.max_iter};

  auto finish = [&](SdpStatus status) {
    sol.status = status;
    sol.objective = p.objective().evaluate(sol.y)(0, 0);
    sol.worst_margin = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < bp.num_user_blocks; ++j) {
      sol.worst_margin = std::max(sol.worst_margin, block_max_eig(bp.blocks[j], sol.y));
    }
    if (bp.num_user_blocks == 0) sol.worst_margin = 0.0;
    sol.newton_steps = cnt.newton;
    return sol;
  };

  if (bp.n == 0 && bp.blocks.empty()) return finish(SdpStatus::kOptimal);

  Vec y = Vec::Zero(bp.n);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& b : bp.blocks) worst = std::max(worst, block_max_eig(b, y));
  sol.phase1_margin = worst;
  if (worst >= -1e-2 || bp.n == 0) {
    bool converged = false;
    sol.phase1_margin = phase_one(bp, y, opts, cnt, converged);
    sol.y = y;
    if (sol.phase1_margin >= -opts.tol) {
      return finish(converged ? SdpStatus::kInfeasible : SdpStatus::kMaxIter);
    }
  }
  if (bp.n == 0) {
    sol.y = y;
    return finish(SdpStatus::kOptimal);
  }

  double t = std::min(1.0 / opts.mu0, bp.barrier_degree / (1.0 + std::abs(bp.c.dot(y))));
  auto never = [](const Vec&) { return false; };
  for (;;) {
    const CenterResult r = center(bp, y, t, cnt, never);
    sol.y = y;
    sol.gap = bp.barrier_degree / t;
    const double scale = std::max(1.0, std::abs(bp.c.dot(y)));
    if (r == CenterResult::kBudget) return finish(SdpStatus::kMaxIter);
    // Roundoff stalls close to the optimum are accepted.
    if (r == CenterResult::kStalled && sol.gap > 1e3 * opts.tol * scale) {
      return finish(SdpStatus::kMaxIter);
    }
    if (sol.gap < opts.tol * scale || r == CenterResult::kStalled) break;
    t *= opts.mu_factor;
  }
  // Optimum pinned at the artificial box: the problem is unbounded.
  if (bp.n > 0 && y.cwiseAbs().maxCoeff() > 0.999 * opts.variable_bound) {
    return finish(SdpStatus::kMaxIter);
  }
  return finish(SdpStatus::kOptimal);
}

LmiReport check_lmi(const LmiProblem& p, const Vec& candidate, double margin) {
  if (candidate.size() != p.num_scalars()) throw InvalidArgument("candidate size mismatch");
  LmiReport rep;
  rep.worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : p.constraints()) {
    const auto s = c.expr.rows();
    const Mat f = c.expr.evaluate(candidate) + c.margin * Mat::Identity(s, s);
    const double e = max_eig(sym(f));
    rep.names.push_back(c.name);
    rep.worst_eigs.push_back(e);
    rep.worst = std::max(rep.worst, e);
  }
  if (p.constraints().empty()) rep.worst = 0.0;
  rep.pass = rep.worst <= -margin;
  return rep;
}

}  // namespace ancm::lmi
