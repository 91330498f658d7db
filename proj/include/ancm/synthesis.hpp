#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ancm/dynamics.hpp"
#include "ancm/lmi.hpp"

namespace ancm {

enum class SynthesisMode { kUniform, kQuasiStatic };

struct SynthesisConfig {
  double alpha = 1.0;
  Mat R;                        // m x m input weight; empty means identity
  SynthesisMode mode = SynthesisMode::kQuasiStatic;
  double margin = 0.0;          // extra rate eta added to alpha
  double d_bar = 1.0;
  double eps = 1e-6;            // strict-inequality floor on nu
  double nu_weight = 1e-4;      // tie-break weight on nu in the solver objective
  Vec u_d;                      // nominal input at x_d; empty means zero
  int quad_order = 8;
  double tol = 1e-9;
  int max_iter = 600;

  void validate(int m) const;
  Mat R_or_identity(int m) const;
};

/// One solved point of the metric program.
struct MetricSample {
  Vec x, x_d, theta_hat;
  Mat W_bar;
  double nu = 0.0;
  double chi = 0.0;
  double objective = 0.0;           // d_bar chi / alpha
  std::vector<double> margins;      // per constraint, most positive eigenvalue
  double worst_margin = 0.0;

  Mat M() const;                    // nu W_bar^{-1}
  double omega_lower() const { return 1.0 / nu; }
  double omega_upper() const { return chi / nu; }
};

/// Program  min d_bar chi / alpha  s.t.
///   A W + W A^T - 2 nu B R^-1 B^T + 2 (alpha + margin) W <= 0,  I <= W <= chi I,  nu >= eps.
struct NcmProgram {
  lmi::LmiProblem problem;
  lmi::VarHandle W, nu, chi;
};

/// Adds the contraction block for one (A, B) pair to an existing program.
void add_contraction_block(NcmProgram& prog, const Mat& A, const Mat& B, const Mat& R,
                           double rate, const std::string& name);
NcmProgram build_ncm_program(const Mat& A, const Mat& B, const SynthesisConfig& cfg);

/// Solver-free re-check of a sample against the program at (A, B).
lmi::LmiReport verify_sample(const MetricSample& s, const Mat& A, const Mat& B,
                             const SynthesisConfig& cfg);

/// Throws Infeasible or MaxIterations.
MetricSample sample_ncm_metric(const SystemModel& sys, const SynthesisConfig& cfg, const Vec& x,
                               const Vec& x_d);
MetricSample sample_ancm_metric(const ParametricSystem& psys, const SynthesisConfig& cfg,
                                const Vec& x, const Vec& x_d, const Vec& theta_hat);

struct GridPoint {
  Vec x, x_d, theta_hat;
};

/// Lattice over the stacked box [x; x_d; theta_hat] of dimension 2n + p.
/// An axis with count 1 sits at the box midpoint. With random_samples > 0
/// the points are instead drawn uniformly from the box with `seed`.
struct SampleGrid {
  int n = 0;
  int p = 0;
  Box box;
  std::vector<int> counts;
  int random_samples = 0;
  unsigned seed = 1;

  std::vector<GridPoint> points() const;
};

struct DatasetSummary {
  int feasible = 0;
  int infeasible = 0;
  double omega_lower = 0.0;  // 1 / max nu
  double omega_upper = 0.0;  // max chi / nu
  double chi = 0.0;          // max sample chi
  double nu_max = 0.0;
};

struct Dataset {
  int n = 0;
  int p = 0;
  std::vector<MetricSample> samples;
  std::vector<GridPoint> rejected;
  DatasetSummary summary;
};

DatasetSummary summarize(const std::vector<MetricSample>& samples, int rejected);

/// One sample per grid point (per-point programs in quasi-static mode, a single
/// shared W in uniform mode). Runs on `threads` workers (0 = hardware) and
/// merges in grid order. Throws EmptyDataset when nothing is feasible.
Dataset build_dataset(const ParametricSystem& psys, const SynthesisConfig& cfg,
                      const SampleGrid& grid, int threads = 0);

/// Shared constant W over all points; one constraint block per point.
MetricSample uniform_metric(const ParametricSystem& psys, const SynthesisConfig& cfg,
                            const std::vector<GridPoint>& points);

void write_dataset_csv(std::ostream& out, const Dataset& ds);
void write_dataset_csv(const std::string& path, const Dataset& ds);
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::string& path);

}  // namespace ancm
