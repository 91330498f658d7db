#include <cmath>
#include <numbers>

#include "ancm/dynamics.hpp"
#include "ancm/errors.hpp"

namespace ancm {

Quadrature gauss_legendre(int order) {
  if (order < 1) throw InvalidArgument("quadrature order must be >= 1");
  Quadrature q;
  q.nodes.resize(order);
  q.weights.resize(order);
  const int n = order;
  for (int i = 0; i < n; ++i) {
    // Newton on P_n starting from the Chebyshev-like guess.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Map [-1, 1] onto [0, 1].
    q.nodes(i) = 0.5 * (1.0 - z);
    q.weights(i) = 1.0 / ((1.0 - z * z) * dp * dp);
  }
  return q;
}

Mat jacobian_fd(const std::function<Vec(const Vec&)>& fn, const Vec& x) {
  const double h = 1e-6 * (1.0 + x.norm());
  const Eigen::Index n = x.size();
  Vec xp = x;
  Vec xm = x;
  Mat J;
  for (Eigen::Index i = 0; i < n; ++i) {
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    const Vec fp = fn(xp);
    const Vec fm = fn(xm);
    if (i == 0) J.resize(fp.size(), n);
    J.col(i) = (fp - fm) / (2.0 * h);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return J;
}

}  // namespace ancm
