#include "ancm/controllers.hpp"
#include "ancm/errors.hpp"
#include "ancm/lmi.hpp"

namespace ancm {

namespace {

// Tiny weight on |K|_F^2 pins the components of K orthogonal to e.
constexpr double kGainRegularizer = 1e-10;

}  // namespace

ClfQpResult clf_qp_gain(const Mat& M, const Mat& A, const Mat& B, const Mat& Mdot, const Vec& e,
                        double alpha) {
  const Eigen::Index n = M.rows(), m = B.cols();
  if (M.cols() != n || A.rows() != n || A.cols() != n || B.rows() != n || e.size() != n) {
    throw InvalidArgument("clf_qp_gain: dimension mismatch");
  }
  const Mat Md = Mdot.size() == 0 ? Mat::Zero(n, n) : Mdot;
  lmi::LmiProblem prob;
  std::vector<lmi::VarHandle> kv;
  lmi::AffineMatrix K(m, n), vecK(m * n, 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto h = prob.add_scalar("K" + std::to_string(i) + "_" + std::to_string(j));
      const int idx = prob.variable(h).offset;
      Mat g = Mat::Zero(m, n);
      g(i, j) = 1.0;
      K.add_term(idx, g);
      Mat gv = Mat::Zero(m * n, 1);
      gv(i * n + j, 0) = std::sqrt(kGainRegularizer);
      vecK.add_term(idx, gv);
      kv.push_back(h);
    }
  }
  const auto ph = prob.add_scalar("p");
  const auto th = prob.add_scalar("tau");
  const lmi::AffineMatrix P = prob.var(ph), T = prob.var(th);
  const Mat I = Mat::Identity(n, n);
  const Mat MB = M * B;
  prob.add_nsd(lmi::AffineMatrix::constant(sym(Md + 2.0 * (M * A) + 2.0 * alpha * M)) +
                   (MB * K + (MB * K).transpose()) - P.scaled(I),
               "clf");
  const Eigen::Index k = m + m * n + 1;
  const lmi::AffineMatrix v = lmi::AffineMatrix::blocks({{K * Mat(e)}, {vecK}, {P}});
  prob.add_psd(lmi::AffineMatrix::blocks({{T, v.transpose()},
                                          {v, lmi::AffineMatrix::constant(Mat::Identity(k, k))}}),
               "epigraph");
  prob.minimize(T);
  const lmi::SdpSolution sol = lmi::solve_sdp(prob, 1e-10, 800);
  ClfQpResult out;
  out.K = Mat(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out.K(i, j) = prob.scalar_value(kv[i * n + j], sol.y);
  }
  out.p = std::max(0.0, prob.scalar_value(ph, sol.y));
  out.objective = (out.K * e).squaredNorm() + out.p * out.p;
  return out;
}

ClfQpResult clf_qp_gain(const MetricSource& metric, const ParametricSystem& psys, const Vec& x,
                        const Vec& x_d, const Vec& theta_hat, const Vec& u_d, double alpha,
                        const Mat& Mdot) {
  const SystemModel sys = psys.at(theta_hat);
  const Mat A = sdc_matrix(sys, x, x_d, u_d);
  return clf_qp_gain(metric.metric(x, x_d, theta_hat), A, sys.B(x), Mdot, x - x_d, alpha);
}

Vec bregman_adaptation_wrap(const Vec& base, const Vec& theta_hat,
                            const std::function<Mat(const Vec&)>& psi_hessian) {
  const Mat H = psi_hessian(theta_hat);
  if (H.rows() != base.size() || H.cols() != base.size()) {
    throw InvalidArgument("psi Hessian has the wrong size");
  }
  Eigen::LLT<Mat> llt(sym(H));
  if (llt.info() != Eigen::Success || !H.allFinite()) {
    throw SingularHessian("psi Hessian is not positive definite");
  }
  const Vec d = llt.matrixL().toDenseMatrix().diagonal();
  if (d.minCoeff() <= 1e-12 * std::max(1.0, d.maxCoeff())) {
    throw SingularHessian("psi Hessian is numerically singular");
  }
  return llt.solve(base);
}

Mat l2_hessian(const Vec& theta) { return Mat::Identity(theta.size(), theta.size()); }

std::function<Mat(const Vec&)> quadratic_hessian(const Vec& D) {
  return [D](const Vec& theta) -> Mat {
    if (theta.size() != D.size()) throw InvalidArgument("D has the wrong size");
    return D.asDiagonal();
  };
}

std::function<Mat(const Vec&)> smoothed_l1_hessian(double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  return [eps](const Vec& theta) -> Mat {
    const Vec r = (theta.array().square() + eps * eps).sqrt();
    return Vec((eps * eps) / (r.array() * r.array() * r.array())).asDiagonal();
  };
}

}  // namespace ancm
