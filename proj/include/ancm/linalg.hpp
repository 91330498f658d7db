#pragma once

#include <Eigen/Dense>

namespace ancm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct SymmetricEigen {
  Vec values;   // ascending
  Mat vectors;  // columns are eigenvectors
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Throws NotSymmetric when |S - S^T| exceeds `symmetry_tol` (absolute,
/// scaled by max(1, |S|_max)). Rotations continue until the off-diagonal
/// Frobenius norm falls below 1e-15 * |S|_F.
SymmetricEigen jacobi_eigen(const Mat& S, double symmetry_tol = 1e-12);

/// Smallest eigenvalue of a symmetric matrix (Jacobi).
double min_eig(const Mat& S);
/// Largest eigenvalue of a symmetric matrix (Jacobi).
double max_eig(const Mat& S);

inline Mat sym(const Mat& A) { return 0.5 * (A + A.transpose()); }

/// Spectral norm, i.e. sqrt of the largest eigenvalue of A^T A.
double spectral_norm(const Mat& A);

bool all_finite(const Mat& A);

}  // namespace ancm
