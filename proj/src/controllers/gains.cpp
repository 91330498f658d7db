#include <cmath>
#include <ostream>

#include "ancm/controllers.hpp"
#include "ancm/errors.hpp"

namespace ancm {

void ControllerConfig::validate() const {
  if (!(sigma >= 0.0)) throw InvalidArgument("sigma must be >= 0");
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
  auto spd = [](const Mat& S, const char* what) {
    if (S.size() == 0) return;
    if (S.rows() != S.cols() || (S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
        Eigen::LLT<Mat>(S).info() != Eigen::Success) {
      throw InvalidArgument(std::string(what) + " must be symmetric positive definite");
    }
  };
  spd(R, "R");
  spd(Gamma, "Gamma");
  const auto& b = bounds;
  if (!(b.omega_lower > 0.0) || b.omega_upper < b.omega_lower) {
    throw InvalidArgument("need 0 < omega_lower <= omega_upper");
  }
  if (!(b.gamma_lower > 0.0) || b.gamma_upper < b.gamma_lower) {
    throw InvalidArgument("need 0 < gamma_lower <= gamma_upper");
  }
  if (Gamma.size() != 0) {
    Eigen::SelfAdjointEigenSolver<Mat> es(Gamma);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (lo < b.gamma_lower * (1 - 1e-12) || hi > b.gamma_upper * (1 + 1e-12)) {
      throw InvalidArgument("Gamma eigenvalues outside [gamma_lower, gamma_upper]");
    }
  }
}

Mat ControllerConfig::R_or_identity(int m) const {
  if (R.size() == 0) return Mat::Identity(m, m);
  if (R.rows() != m || R.cols() != m) throw InvalidArgument("R must be m x m");
  return R;
}

Mat ControllerConfig::Gamma_or_scalar(int p) const {
  if (Gamma.size() == 0) return gamma * Mat::Identity(p, p);
  if (Gamma.rows() != p || Gamma.cols() != p) throw InvalidArgument("Gamma must be p x p");
  return Gamma;
}

const char* to_string(GainKind k) {
  switch (k) {
    case GainKind::kAffine: return "affine";
    case GainKind::kLagrangian: return "lagrangian";
    case GainKind::kAncm: return "ancm";
    case GainKind::kBasis: return "basis";
  }
  return "?";
}

GainKind parse_gain_kind(const std::string& s) {
  if (s == "affine") return GainKind::kAffine;
  if (s == "lagrangian") return GainKind::kLagrangian;
  if (s == "ancm") return GainKind::kAncm;
  if (s == "basis") return GainKind::kBasis;
  throw InvalidArgument("unknown gain kind '" + s + "'");
}

namespace {

double coupling(GainKind kind, const ControllerBounds& b, double eps) {
  switch (kind) {
    case GainKind::kAffine: return b.phi_bar * b.b_bar * eps;
    case GainKind::kLagrangian: return b.delta_bar * b.b_bar * eps;
    case GainKind::kAncm: return b.y_bar * eps;
    case GainKind::kBasis: return b.zeta_bar * eps;
  }
  return 0.0;
}

double top_eig(const Mat& S) {
  return Eigen::SelfAdjointEigenSolver<Mat>(sym(S), Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

}  // namespace

Mat gain_condition_matrix(const GainCertificate& cert, double alpha) {
  return cert.condition + 2.0 * alpha * cert.scaling;
}

GainCertificate check_gain_condition(GainKind kind, const ControllerBounds& bounds, double sigma,
                                     double eps_ell, double alpha_ncm, int inputs) {
  if (!(bounds.omega_lower > 0.0) || !(bounds.omega_upper > 0.0) || !(bounds.gamma_lower > 0.0)) {
    throw InvalidArgument("omega and gamma bounds must be positive");
  }
  if (sigma < 0.0 || eps_ell < 0.0) throw InvalidArgument("sigma and eps_ell must be >= 0");
  GainCertificate cert;
  cert.kind = kind;
  cert.alpha_ncm = alpha_ncm;
  cert.eps_ell = eps_ell;
  cert.sigma = sigma;
  cert.bounds = bounds;
  const int k = kind == GainKind::kBasis ? std::max(1, inputs) + 1 : 1;
  const double c = coupling(kind, bounds, eps_ell);
  cert.condition = Mat::Zero(k + 1, k + 1);
  cert.condition(0, 0) = -2.0 * alpha_ncm / bounds.omega_upper;
  cert.condition.block(0, 1, 1, k).setConstant(c);
  cert.condition.block(1, 0, k, 1).setConstant(c);
  cert.condition.block(1, 1, k, k) = -2.0 * sigma * Mat::Identity(k, k);
  cert.scaling = Mat::Zero(k + 1, k + 1);
  cert.scaling(0, 0) = 1.0 / bounds.omega_lower;
  for (int i = 1; i <= k; ++i) cert.scaling(i, i) = 1.0 / bounds.gamma_lower;

  const double hi_limit =
      std::min(alpha_ncm * bounds.omega_lower / bounds.omega_upper, sigma * bounds.gamma_lower);
  auto feasible = [&](double a) { return top_eig(gain_condition_matrix(cert, a)) <= 0.0; };
  if (hi_limit > 0.0 && feasible(0.0)) {
    double lo = 0.0, hi = hi_limit;
    if (feasible(hi)) {
      lo = hi;
    } else {
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi_limit; ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
      }
    }
    cert.alpha_a = lo;
  }
  cert.worst_eig = top_eig(gain_condition_matrix(cert, cert.alpha_a));
  cert.pass = cert.alpha_a > 0.0 && cert.worst_eig <= 1e-9;
  return cert;
}

double disturbance_gain(const GainCertificate& cert) {
  const auto& b = cert.bounds;
  return cert.sigma * std::sqrt(b.gamma_upper) * b.theta_bar + b.d_bar / std::sqrt(b.omega_lower);
}

double tracking_error_bound(const GainCertificate& cert, double V0, double t) {
  if (V0 < 0.0) throw InvalidArgument("V0 must be >= 0");
  const double a = cert.alpha_a;
  const double da = disturbance_gain(cert);
  const double decay = std::exp(-a * t);
  const double forced = a > 0.0 ? da / a * (1.0 - decay) : da * t;
  return std::sqrt(cert.bounds.omega_upper) * (std::sqrt(V0) * decay + forced);
}

void write_certificate(std::ostream& out, const GainCertificate& cert) {
  const auto& b = cert.bounds;
  const auto old = out.precision(17);
  out << "kind " << to_string(cert.kind) << "\n"
      << "pass " << (cert.pass ? "true" : "false") << "\n"
      << "alpha_a " << cert.alpha_a << "\n"
      << "alpha_ncm " << cert.alpha_ncm << "\n"
      << "eps_ell " << cert.eps_ell << "\n"
      << "sigma " << cert.sigma << "\n"
      << "worst_eig " << cert.worst_eig << "\n"
      << "d_a " << disturbance_gain(cert) << "\n"
      << "omega_lower " << b.omega_lower << "\n"
      << "omega_upper " << b.omega_upper << "\n"
      << "gamma_lower " << b.gamma_lower << "\n"
      << "gamma_upper " << b.gamma_upper << "\n"
      << "theta_bar " << b.theta_bar << "\n"
      << "d_bar " << b.d_bar << "\n"
      << "condition_size " << cert.condition.rows() << "\n";
  for (Eigen::Index i = 0; i < cert.condition.rows(); ++i) {
    out << "condition_row_" << i;
    for (Eigen::Index j = 0; j < cert.condition.cols(); ++j) out << " " << cert.condition(i, j);
    out << "\n";
  }
  out.precision(old);
}

}  // namespace ancm
