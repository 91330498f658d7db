#include <algorithm>
#include <atomic>
#include <thread>

#include "ancm/errors.hpp"
#include "ancm/synthesis.hpp"

namespace ancm {

void SynthesisConfig::validate(int m) const {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  if (margin < 0.0) throw InvalidArgument("margin must be >= 0");
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (d_bar < 0.0) throw InvalidArgument("d_bar must be >= 0");
  if (R.size() != 0) {
    if (R.rows() != m || R.cols() != m) throw InvalidArgument("R must be m x m");
    if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw NotSymmetric("R");
    if (min_eig(R) <= 0.0) throw InvalidArgument("R must be positive definite");
  }
  if (u_d.size() != 0 && u_d.size() != m) throw InvalidArgument("u_d must have m entries");
}

Mat SynthesisConfig::R_or_identity(int m) const {
  return R.size() == 0 ? Mat::Identity(m, m) : R;
}

Mat MetricSample::M() const { return nu * W_bar.inverse(); }

void add_contraction_block(NcmProgram& prog, const Mat& A, const Mat& B, const Mat& R,
                           double rate, const std::string& name) {
  auto& p = prog.problem;
  const lmi::AffineMatrix W = p.var(prog.W);
  const Mat BRB = B * R.inverse() * B.transpose();
  p.add_nsd(A * W + W * A.transpose() - p.var(prog.nu).scaled(2.0 * sym(BRB)) + 2.0 * rate * W,
            name);
}

NcmProgram build_ncm_program(const Mat& A, const Mat& B, const SynthesisConfig& cfg) {
  const int n = static_cast<int>(A.rows());
  NcmProgram prog;
  auto& p = prog.problem;
  prog.W = p.add_symmetric(n, "W");
  prog.nu = p.add_scalar("nu");
  prog.chi = p.add_scalar("chi");
  add_contraction_block(prog, A, B, cfg.R_or_identity(static_cast<int>(B.cols())),
                        cfg.alpha + cfg.margin, "contraction");
  const Mat I = Mat::Identity(n, n);
  p.add_psd(p.var(prog.W) - I, "W >= I");
  p.add_nsd(p.var(prog.W) - p.var(prog.chi).scaled(I), "W <= chi I");
  p.add_psd(p.var(prog.nu) - Mat::Constant(1, 1, cfg.eps), "nu >= eps");
  // A zero disturbance bound still needs chi to be driven down.
  const double chi_weight = (cfg.d_bar > 0.0 ? cfg.d_bar : 1.0) / cfg.alpha;
  p.minimize(chi_weight * p.var(prog.chi) + cfg.nu_weight * p.var(prog.nu));
  return prog;
}

namespace {

Vec candidate_vector(const NcmProgram& prog, const MetricSample& s) {
  Vec y = Vec::Zero(prog.problem.num_scalars());
  prog.problem.set_value(prog.W, s.W_bar, y);
  prog.problem.set_value(prog.nu, Mat::Constant(1, 1, s.nu), y);
  prog.problem.set_value(prog.chi, Mat::Constant(1, 1, s.chi), y);
  return y;
}

MetricSample solve_program(const NcmProgram& prog, const SynthesisConfig& cfg) {
  const lmi::SdpSolution sol = lmi::solve_sdp(prog.problem, cfg.tol, cfg.max_iter);
  if (sol.status == lmi::SdpStatus::kInfeasible) {
    throw Infeasible("metric program infeasible (phase I margin " +
                     std::to_string(sol.phase1_margin) + ")");
  }
  if (sol.status == lmi::SdpStatus::kMaxIter) {
    throw MaxIterations("metric program did not converge in " + std::to_string(cfg.max_iter) +
                        " Newton steps");
  }
  MetricSample s;
  s.W_bar = prog.problem.value(prog.W, sol.y);
  s.nu = prog.problem.scalar_value(prog.nu, sol.y);
  s.chi = prog.problem.scalar_value(prog.chi, sol.y);
  s.objective = cfg.d_bar * s.chi / cfg.alpha;
  const lmi::LmiReport rep = lmi::check_lmi(prog.problem, sol.y, 0.0);
  s.margins = rep.worst_eigs;
  s.worst_margin = rep.worst;
  return s;
}

Vec input_or_zero(const SynthesisConfig& cfg, int m) {
  return cfg.u_d.size() == 0 ? Vec::Zero(m) : cfg.u_d;
}

}  // namespace

lmi::LmiReport verify_sample(const MetricSample& s, const Mat& A, const Mat& B,
                             const SynthesisConfig& cfg) {
  const NcmProgram prog = build_ncm_program(A, B, cfg);
  return lmi::check_lmi(prog.problem, candidate_vector(prog, s), 0.0);
}

MetricSample sample_ncm_metric(const SystemModel& sys, const SynthesisConfig& cfg, const Vec& x,
                               const Vec& x_d) {
  cfg.validate(sys.m());
  const Mat A = sdc_matrix(sys, x, x_d, input_or_zero(cfg, sys.m()), cfg.quad_order);
  const Mat B = sys.B(x);
  MetricSample s = solve_program(build_ncm_program(A, B, cfg), cfg);
  s.x = x;
  s.x_d = x_d;
  s.theta_hat = Vec(0);
  return s;
}

MetricSample sample_ancm_metric(const ParametricSystem& psys, const SynthesisConfig& cfg,
                                const Vec& x, const Vec& x_d, const Vec& theta_hat) {
  MetricSample s = sample_ncm_metric(psys.at(theta_hat), cfg, x, x_d);
  s.theta_hat = theta_hat;
  return s;
}

std::vector<GridPoint> SampleGrid::points() const {
  const int dim = 2 * n + p;
  if (box.dim() != dim) throw InvalidArgument("grid box must have dimension 2n + p");
  auto split = [&](const Vec& z) {
    return GridPoint{z.head(n), z.segment(n, n), z.tail(p)};
  };
  std::vector<GridPoint> out;
  if (random_samples > 0) {
    std::mt19937_64 rng(seed);
    out.reserve(random_samples);
    for (int k = 0; k < random_samples; ++k) out.push_back(split(box.sample(rng)));
    return out;
  }
  if (static_cast<int>(counts.size()) != dim) throw InvalidArgument("grid needs one count per axis");
  long total = 1;
  for (int c : counts) {
    if (c < 1) throw InvalidArgument("grid counts must be >= 1");
    total *= c;
  }
  out.reserve(total);
  std::vector<int> idx(dim, 0);
  for (long k = 0; k < total; ++k) {
    Vec z(dim);
    for (int i = 0; i < dim; ++i) {
      z(i) = counts[i] == 1 ? 0.5 * (box.lo(i) + box.hi(i))
                            : box.lo(i) + (box.hi(i) - box.lo(i)) * idx[i] / (counts[i] - 1);
    }
    out.push_back(split(z));
    for (int i = dim - 1; i >= 0; --i) {
      if (++idx[i] < counts[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

DatasetSummary summarize(const std::vector<MetricSample>& samples, int rejected) {
  DatasetSummary s;
  s.feasible = static_cast<int>(samples.size());
  s.infeasible = rejected;
  for (const auto& m : samples) {
    s.nu_max = std::max(s.nu_max, m.nu);
    s.chi = std::max(s.chi, m.chi);
    s.omega_upper = std::max(s.omega_upper, m.omega_upper());
  }
  if (s.nu_max > 0.0) s.omega_lower = 1.0 / s.nu_max;
  return s;
}

MetricSample uniform_metric(const ParametricSystem& psys, const SynthesisConfig& cfg,
                            const std::vector<GridPoint>& points) {
  if (points.empty()) throw EmptyDataset("no grid points");
  cfg.validate(psys.m());
  const Vec u_d = input_or_zero(cfg, psys.m());
  const Mat R = cfg.R_or_identity(psys.m());
  NcmProgram prog;
  bool first = true;
  for (size_t k = 0; k < points.size(); ++k) {
    const GridPoint& g = points[k];
    const SystemModel sys = psys.at(g.theta_hat);
    const Mat A = sdc_matrix(sys, g.x, g.x_d, u_d, cfg.quad_order);
    const Mat B = sys.B(g.x);
    if (first) {
      prog = build_ncm_program(A, B, cfg);
      first = false;
    } else {
      add_contraction_block(prog, A, B, R, cfg.alpha + cfg.margin,
                            "contraction " + std::to_string(k));
    }
  }
  MetricSample s = solve_program(prog, cfg);
  s.x = points.front().x;
  s.x_d = points.front().x_d;
  s.theta_hat = points.front().theta_hat;
  return s;
}

Dataset build_dataset(const ParametricSystem& psys, const SynthesisConfig& cfg,
                      const SampleGrid& grid, int threads) {
  const std::vector<GridPoint> pts = grid.points();
  if (pts.empty()) throw EmptyDataset("grid is empty");
  Dataset ds;
  ds.n = psys.n();
  ds.p = grid.p;

  if (cfg.mode == SynthesisMode::kUniform) {
    MetricSample shared;
    try {
      shared = uniform_metric(psys, cfg, pts);
    } catch (const Infeasible&) {
      throw EmptyDataset("uniform metric infeasible over the grid");
    }
    const Vec u_d = input_or_zero(cfg, psys.m());
    for (const auto& g : pts) {
      MetricSample s = shared;
      s.x = g.x;
      s.x_d = g.x_d;
      s.theta_hat = g.theta_hat;
      const SystemModel sys = psys.at(g.theta_hat);
      const lmi::LmiReport rep =
          verify_sample(s, sdc_matrix(sys, g.x, g.x_d, u_d, cfg.quad_order), sys.B(g.x), cfg);
      s.margins = rep.worst_eigs;
      s.worst_margin = rep.worst;
      ds.samples.push_back(std::move(s));
    }
    ds.summary = summarize(ds.samples, 0);
    return ds;
  }

  std::vector<MetricSample> results(pts.size());
  std::vector<char> ok(pts.size(), 0);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t k = next++; k < pts.size(); k = next++) {
      try {
        results[k] = sample_ancm_metric(psys, cfg, pts[k].x, pts[k].x_d, pts[k].theta_hat);
        ok[k] = 1;
      } catch (const Infeasible&) {
      } catch (const MaxIterations&) {
      }
    }
  };
  int nt = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  nt = std::max(1, std::min<int>(nt, static_cast<int>(pts.size())));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (size_t k = 0; k < pts.size(); ++k) {
    if (ok[k]) {
      ds.samples.push_back(std::move(results[k]));
    } else {
      ds.rejected.push_back(pts[k]);
    }
  }
  if (ds.samples.empty()) throw EmptyDataset("every grid point was infeasible");
  ds.summary = summarize(ds.samples, static_cast<int>(ds.rejected.size()));
  return ds;
}

}  // namespace ancm
