#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ancm/linalg.hpp"

namespace ancm::lmi {

/// Affine matrix expression  C + sum_i y_i G_i  in the scalar decision
/// coordinates y of an LmiProblem.
class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(Eigen::Index rows, Eigen::Index cols);
  static AffineMatrix constant(const Mat& c);

  Eigen::Index rows() const { return constant_.rows(); }
  Eigen::Index cols() const { return constant_.cols(); }
  const Mat& constant_part() const { return constant_; }
  const std::map<int, Mat>& terms() const { return terms_; }

  /// Adds coefficient matrix `g` for scalar coordinate `index`.
  void add_term(int index, const Mat& g);

  Mat evaluate(const Vec& y) const;
  AffineMatrix transpose() const;
  AffineMatrix sym() const;  // (X + X^T) / 2
  AffineMatrix entry(Eigen::Index i, Eigen::Index j) const;
  /// For a 1x1 expression s, returns the matrix expression s * m.
  AffineMatrix scaled(const Mat& m) const;
  bool is_symmetric(double tol = 1e-12) const;

  AffineMatrix& operator+=(const AffineMatrix& o);
  AffineMatrix& operator-=(const AffineMatrix& o);

  friend AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
  friend AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }
  friend AffineMatrix operator-(const AffineMatrix& a);
  friend AffineMatrix operator*(double s, const AffineMatrix& a);
  friend AffineMatrix operator*(const Mat& l, const AffineMatrix& a);
  friend AffineMatrix operator*(const AffineMatrix& a, const Mat& r);
  friend AffineMatrix operator+(const AffineMatrix& a, const Mat& c);
  friend AffineMatrix operator-(const AffineMatrix& a, const Mat& c);

  /// Block assembly; every row of blocks must agree in height, every column
  /// in width.
  static AffineMatrix blocks(const std::vector<std::vector<AffineMatrix>>& rows);

 private:
  Mat constant_;
  std::map<int, Mat> terms_;
};

enum class VarKind { kSymmetric, kScalar, kNonnegScalar };

struct Variable {
  VarKind kind = VarKind::kScalar;
  int size = 1;    // k for a k x k symmetric matrix
  int offset = 0;  // first scalar coordinate
  std::string name;
};

struct VarHandle {
  int id = -1;
};

struct Constraint {
  AffineMatrix expr;  // required: expr + margin * I <= 0
  double margin = 0.0;
  std::string name;
};

/// Linear objective over symmetric-matrix and scalar variables subject to
/// affine LMIs  F_j(y) <= -margin_j I.
class LmiProblem {
 public:
  VarHandle add_symmetric(int k, const std::string& name);
  VarHandle add_scalar(const std::string& name, bool nonnegative = false);

  /// Expression for a variable (k x k or 1 x 1).
  AffineMatrix var(VarHandle v) const;

  /// expr <= -margin I.  Throws NotSymmetric for asymmetric expressions.
  void add_nsd(const AffineMatrix& expr, const std::string& name, double margin = 0.0);
  /// expr >= margin I.
  void add_psd(const AffineMatrix& expr, const std::string& name, double margin = 0.0);
  void minimize(const AffineMatrix& objective);

  int num_scalars() const { return num_scalars_; }
  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const AffineMatrix& objective() const { return objective_; }
  const Variable& variable(VarHandle v) const { return vars_.at(v.id); }

  /// Reads a variable's value out of the scalar coordinates.
  Mat value(VarHandle v, const Vec& y) const;
  double scalar_value(VarHandle v, const Vec& y) const;
  /// Writes a matrix (or 1x1) value into the scalar coordinates.
  void set_value(VarHandle v, const Mat& value, Vec& y) const;

  /// Randomized two-point linearity check on every constraint map.
  bool verify_affine(unsigned seed = 1, double tol = 1e-9) const;

 private:
  std::vector<Variable> vars_;
  std::vector<Constraint> constraints_;
  AffineMatrix objective_{1, 1};
  int num_scalars_ = 0;
};

enum class SdpStatus { kOptimal, kInfeasible, kMaxIter };
const char* to_string(SdpStatus s);

struct SdpSolution {
  Vec y;
  double objective = 0.0;
  double worst_margin = 0.0;  // most positive eigenvalue over all constraints
  double gap = 0.0;           // barrier duality-gap bound at exit
  double phase1_margin = 0.0; // best auxiliary margin found by phase I
  SdpStatus status = SdpStatus::kMaxIter;
  int newton_steps = 0;
};

struct SolverOptions {
  double tol = 1e-9;
  int max_iter = 600;  // Newton steps, both phases
  double mu0 = 1.0;
  double mu_factor = 10.0;
  double variable_bound = 1e7;  // |y_i| cap on every scalar coordinate
};

/// Log-det barrier method with an auxiliary max-margin phase I.
SdpSolution solve_sdp(const LmiProblem& p, double tol = 1e-9, int max_iter = 600);
SdpSolution solve_sdp(const LmiProblem& p, const SolverOptions& opts);

struct LmiReport {
  std::vector<std::string> names;
  std::vector<double> worst_eigs;  // most positive eigenvalue of expr + margin I
  double worst = 0.0;
  bool pass = false;
};

/// Solver-free re-verification with the Jacobi eigensolver; passes iff every
/// constraint's most positive eigenvalue is <= -margin.
LmiReport check_lmi(const LmiProblem& p, const Vec& candidate, double margin = 0.0);

/// Plain-text dump of a problem and optionally a solution.
void dump_problem(std::ostream& out, const LmiProblem& p, const SdpSolution* sol = nullptr);

}  // namespace ancm::lmi
