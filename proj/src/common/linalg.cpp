#include "ancm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ancm/errors.hpp"

namespace ancm {

SymmetricEigen jacobi_eigen(const Mat& S, double symmetry_tol) {
  if (S.rows() != S.cols()) {
    throw NotSymmetric("matrix is not square");
  }
  const Eigen::Index k = S.rows();
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > symmetry_tol * scale) {
    throw NotSymmetric("asymmetry exceeds tolerance");
  }
  Mat a = sym(S);
  Mat v = Mat::Identity(k, k);
  const double stop = 1e-15 * std::max(a.norm(), 1e-300);

  int sweep = 0;
  for (; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < k; ++p) {
      for (Eigen::Index q = p + 1; q < k; ++q) off += 2.0 * a(p, q) * a(p, q);
    }
    if (std::sqrt(off) <= stop) break;

    for (Eigen::Index p = 0; p < k; ++p) {
      for (Eigen::Index q = p + 1; q < k; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle that zeroes a(p,q); stable form from Golub & Van Loan.
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Eigen::Index r = 0; r < k; ++r) {
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (Eigen::Index r = 0; r < k; ++r) {
          const double apr = a(p, r);
          const double aqr = a(q, r);
          a(p, r) = c * apr - s * aqr;
          a(q, r) = s * apr + c * aqr;
        }
        for (Eigen::Index r = 0; r < k; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  SymmetricEigen out;
  out.values.resize(k);
  out.vectors.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    out.values(i) = a(order[i], order[i]);
    out.vectors.col(i) = v.col(order[i]);
  }
  out.sweeps = sweep;
  return out;
}

double min_eig(const Mat& S) { return jacobi_eigen(S).values(0); }

double max_eig(const Mat& S) {
  const Vec ev = jacobi_eigen(S).values;
  return ev(ev.size() - 1);
}

double spectral_norm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  const Mat ata = A.transpose() * A;
  return std::sqrt(std::max(0.0, max_eig(ata)));
}

bool all_finite(const Mat& A) { return A.allFinite(); }

}  // namespace ancm
