#include <random>

#include "ancm/errors.hpp"
#include "ancm/lmi.hpp"

namespace ancm::lmi {

AffineMatrix::AffineMatrix(Eigen::Index rows, Eigen::Index cols)
    : constant_(Mat::Zero(rows, cols)) {}

AffineMatrix AffineMatrix::constant(const Mat& c) {
  AffineMatrix a(c.rows(), c.cols());
  a.constant_ = c;
  return a;
}

void AffineMatrix::add_term(int index, const Mat& g) {
  if (g.rows() != rows() || g.cols() != cols()) {
    throw InvalidArgument("affine term shape mismatch");
  }
  auto it = terms_.find(index);
  if (it == terms_.end()) {
    terms_.emplace(index, g);
  } else {
    it->second += g;
  }
}

Mat AffineMatrix::evaluate(const Vec& y) const {
  Mat out = constant_;
  for (const auto& [i, g] : terms_) out += y(i) * g;
  return out;
}

AffineMatrix AffineMatrix::transpose() const {
  AffineMatrix t = constant(constant_.transpose());
  for (const auto& [i, g] : terms_) t.terms_.emplace(i, g.transpose());
  return t;
}

AffineMatrix AffineMatrix::sym() const {
  if (rows() != cols()) throw InvalidArgument("sym of a non-square expression");
  return 0.5 * (*this + transpose());
}

AffineMatrix AffineMatrix::entry(Eigen::Index i, Eigen::Index j) const {
  AffineMatrix e(1, 1);
  e.constant_(0, 0) = constant_(i, j);
  for (const auto& [k, g] : terms_) {
    if (g(i, j) != 0.0) e.terms_.emplace(k, Mat::Constant(1, 1, g(i, j)));
  }
  return e;
}

AffineMatrix AffineMatrix::scaled(const Mat& m) const {
  if (rows() != 1 || cols() != 1) throw InvalidArgument("scaled() needs a 1x1 expression");
  AffineMatrix out = constant(constant_(0, 0) * m);
  for (const auto& [k, g] : terms_) out.terms_.emplace(k, g(0, 0) * m);
  return out;
}

bool AffineMatrix::is_symmetric(double tol) const {
  if (rows() != cols()) return false;
  auto ok = [tol](const Mat& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
  };
  if (!ok(constant_)) return false;
  for (const auto& [k, g] : terms_) {
    if (!ok(g)) return false;
  }
  return true;
}

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& o) {
  if (o.rows() != rows() || o.cols() != cols()) throw InvalidArgument("shape mismatch in +");
  constant_ += o.constant_;
  for (const auto& [k, g] : o.terms_) add_term(k, g);
  return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& o) { return *this += -o; }

AffineMatrix operator-(const AffineMatrix& a) { return -1.0 * a; }

AffineMatrix operator*(double s, const AffineMatrix& a) {
  AffineMatrix out = AffineMatrix::constant(s * a.constant_);
  for (const auto& [k, g] : a.terms_) out.terms_.emplace(k, s * g);
  return out;
}

AffineMatrix operator*(const Mat& l, const AffineMatrix& a) {
  if (l.cols() != a.rows()) throw InvalidArgument("shape mismatch in left product");
  AffineMatrix out = AffineMatrix::constant(l * a.constant_);
  for (const auto& [k, g] : a.terms_) out.terms_.emplace(k, l * g);
  return out;
}

AffineMatrix operator*(const AffineMatrix& a, const Mat& r) {
  if (a.cols() != r.rows()) throw InvalidArgument("shape mismatch in right product");
  AffineMatrix out = AffineMatrix::constant(a.constant_ * r);
  for (const auto& [k, g] : a.terms_) out.terms_.emplace(k, g * r);
  return out;
}

AffineMatrix operator+(const AffineMatrix& a, const Mat& c) {
  return a + AffineMatrix::constant(c);
}

AffineMatrix operator-(const AffineMatrix& a, const Mat& c) {
  return a + AffineMatrix::constant(-c);
}

AffineMatrix AffineMatrix::blocks(const std::vector<std::vector<AffineMatrix>>& rows_in) {
  if (rows_in.empty() || rows_in.front().empty()) throw InvalidArgument("empty block layout");
  std::vector<Eigen::Index> heights, widths;
  for (const auto& row : rows_in) {
    if (row.size() != rows_in.front().size()) throw InvalidArgument("ragged block layout");
    heights.push_back(row.front().rows());
  }
  for (const auto& b : rows_in.front()) widths.push_back(b.cols());
  Eigen::Index total_r = 0, total_c = 0;
  for (auto h : heights) total_r += h;
  for (auto w : widths) total_c += w;

  AffineMatrix out(total_r, total_c);
  Eigen::Index r0 = 0;
  for (size_t bi = 0; bi < rows_in.size(); ++bi) {
    Eigen::Index c0 = 0;
    for (size_t bj = 0; bj < rows_in[bi].size(); ++bj) {
      const AffineMatrix& b = rows_in[bi][bj];
      if (b.rows() != heights[bi] || b.cols() != widths[bj]) {
        throw InvalidArgument("block size mismatch");
      }
      out.constant_.block(r0, c0, b.rows(), b.cols()) = b.constant_;
      for (const auto& [k, g] : b.terms_) {
        Mat full = Mat::Zero(total_r, total_c);
        full.block(r0, c0, b.rows(), b.cols()) = g;
        out.add_term(k, full);
      }
      c0 += widths[bj];
    }
    r0 += heights[bi];
  }
  return out;
}

VarHandle LmiProblem::add_symmetric(int k, const std::string& name) {
  if (k < 1) throw InvalidArgument("symmetric variable needs k >= 1");
  Variable v{VarKind::kSymmetric, k, num_scalars_, name};
  num_scalars_ += k * (k + 1) / 2;
  vars_.push_back(v);
  return VarHandle{static_cast<int>(vars_.size()) - 1};
}

VarHandle LmiProblem::add_scalar(const std::string& name, bool nonnegative) {
  Variable v{nonnegative ? VarKind::kNonnegScalar : VarKind::kScalar, 1, num_scalars_, name};
  num_scalars_ += 1;
  vars_.push_back(v);
  const VarHandle h{static_cast<int>(vars_.size()) - 1};
  if (nonnegative) add_psd(var(h), name + " >= 0");
  return h;
}

AffineMatrix LmiProblem::var(VarHandle h) const {
  const Variable& v = vars_.at(h.id);
  AffineMatrix out(v.size, v.size);
  int idx = v.offset;
  for (int i = 0; i < v.size; ++i) {
    for (int j = i; j < v.size; ++j) {
      Mat g = Mat::Zero(v.size, v.size);
      g(i, j) = 1.0;
      g(j, i) = 1.0;
      out.add_term(idx++, g);
    }
  }
  return out;
}

void LmiProblem::add_nsd(const AffineMatrix& expr, const std::string& name, double margin) {
  if (!expr.is_symmetric()) throw NotSymmetric("constraint '" + name + "' is not symmetric");
  if (margin < 0.0) throw InvalidArgument("constraint margin must be >= 0");
  for (const auto& [k, g] : expr.terms()) {
    if (k < 0 || k >= num_scalars_) throw InvalidArgument("constraint references unknown variable");
  }
  constraints_.push_back(Constraint{expr.sym(), margin, name});
}

void LmiProblem::add_psd(const AffineMatrix& expr, const std::string& name, double margin) {
  add_nsd(-expr, name, margin);
}

void LmiProblem::minimize(const AffineMatrix& objective) {
  if (objective.rows() != 1 || objective.cols() != 1) {
    throw InvalidArgument("objective must be a 1x1 expression");
  }
  objective_ = objective;
}

Mat LmiProblem::value(VarHandle h, const Vec& y) const {
  const Variable& v = vars_.at(h.id);
  Mat out(v.size, v.size);
  int idx = v.offset;
  for (int i = 0; i < v.size; ++i) {
    for (int j = i; j < v.size; ++j) {
      out(i, j) = y(idx);
      out(j, i) = y(idx);
      ++idx;
    }
  }
  return out;
}

double LmiProblem::scalar_value(VarHandle h, const Vec& y) const {
  return y(vars_.at(h.id).offset);
}

void LmiProblem::set_value(VarHandle h, const Mat& value, Vec& y) const {
  const Variable& v = vars_.at(h.id);
  if (value.rows() != v.size || value.cols() != v.size) throw InvalidArgument("value shape");
  int idx = v.offset;
  for (int i = 0; i < v.size; ++i) {
    for (int j = i; j < v.size; ++j) y(idx++) = 0.5 * (value(i, j) + value(j, i));
  }
}

bool LmiProblem::verify_affine(unsigned seed, double tol) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Vec y1(num_scalars_), y2(num_scalars_);
  for (int i = 0; i < num_scalars_; ++i) {
    y1(i) = gauss(rng);
    y2(i) = gauss(rng);
  }
  const double a = 0.3;
  for (const auto& c : constraints_) {
    const Mat lhs = c.expr.evaluate(a * y1 + (1.0 - a) * y2);
    const Mat rhs = a * c.expr.evaluate(y1) + (1.0 - a) * c.expr.evaluate(y2);
    if ((lhs - rhs).cwiseAbs().maxCoeff() > tol * (1.0 + rhs.cwiseAbs().maxCoeff())) {
      return false;
    }
    if (c.expr.rows() != c.expr.cols()) return false;
  }
  return true;
}

}  // namespace ancm::lmi
