#include "ancm/dynamics.hpp"
#include "ancm/errors.hpp"

namespace ancm {

Mat BasisFunctionModel::B(const Vec& x) const {
  Mat b(n(), m());
  for (int i = 0; i < m(); ++i) b.col(i) = B_hat[i] * varphi[i](x);
  return b;
}

Vec basis_model_eval(const BasisFunctionModel& bm, const Vec& x, const Vec& u) {
  if (static_cast<int>(bm.varphi.size()) != bm.m() || u.size() != bm.m()) {
    throw InvalidArgument("basis model: input channel count mismatch");
  }
  Vec out = bm.F_hat * bm.phi(x);
  for (int i = 0; i < bm.m(); ++i) out += bm.B_hat[i] * bm.varphi[i](x) * u(i);
  return out;
}

SystemModel BasisFunctionModel::as_system(Box domain) const {
  const BasisFunctionModel self = *this;
  return SystemModel(
      n(), m(), [self](const Vec& x) -> Vec { return self.F_hat * self.phi(x); },
      [self](const Vec& x) { return self.B(x); }, std::move(domain));
}

}  // namespace ancm
