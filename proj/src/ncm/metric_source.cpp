#include "ancm/errors.hpp"
#include "ancm/ncm.hpp"

namespace ancm {

Mat NetMetric::metric(const Vec& x, const Vec& x_d, const Vec& theta_hat) const {
  return net_->metric(x, x_d, theta_hat);
}

MetricSample ExactMetric::sample(const Vec& x, const Vec& x_d, const Vec& theta_hat) const {
  return sample_ancm_metric(psys_, cfg_, x, x_d, theta_hat);
}

Mat ExactMetric::metric(const Vec& x, const Vec& x_d, const Vec& theta_hat) const {
  return sym(sample(x, x_d, theta_hat).M());
}

LinearizedMetric::LinearizedMetric(const MetricSource& src, const Vec& x0, const Vec& x_d0,
                                   const Vec& theta_hat, bool with_xd)
    : x0_(x0), xd0_(x_d0), M0_(src.metric(x0, x_d0, theta_hat)) {
  const double h = src.fd_step();
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    Vec p = x0, m = x0;
    p(i) += h;
    m(i) -= h;
    dM_dx_.push_back((src.metric(p, x_d0, theta_hat) - src.metric(m, x_d0, theta_hat)) / (2.0 * h));
  }
  if (!with_xd || !src.depends_on_xd()) return;
  for (Eigen::Index i = 0; i < x_d0.size(); ++i) {
    Vec p = x_d0, m = x_d0;
    p(i) += h;
    m(i) -= h;
    dM_dxd_.push_back((src.metric(x0, p, theta_hat) - src.metric(x0, m, theta_hat)) / (2.0 * h));
  }
}

Mat LinearizedMetric::metric(const Vec& x, const Vec& x_d, const Vec&) const {
  Mat M = M0_;
  for (size_t i = 0; i < dM_dx_.size(); ++i) M += dM_dx_[i] * (x(i) - x0_(i));
  for (size_t i = 0; i < dM_dxd_.size(); ++i) M += dM_dxd_[i] * (x_d(i) - xd0_(i));
  return M;
}

std::shared_ptr<MetricSource> constant_metric(const Mat& M) {
  return std::make_shared<FunctionMetric>(
      [M](const Vec&, const Vec&, const Vec&) { return M; }, false);
}

namespace {

Mat directional_rows(const MetricSource& src, const Vec& x, const Vec& x_d, const Vec& th,
                     const Vec& e, bool wrt_xd) {
  const Eigen::Index n = e.size();
  const double h = src.fd_step();
  Mat out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec qp = wrt_xd ? x_d : x;
    Vec qm = qp;
    qp(i) += h;
    qm(i) -= h;
    const Mat Mp = wrt_xd ? src.metric(x, qp, th) : src.metric(qp, x_d, th);
    const Mat Mm = wrt_xd ? src.metric(x, qm, th) : src.metric(qm, x_d, th);
    out.row(i) = ((Mp - Mm) * e).transpose() / (4.0 * h);
  }
  return out;
}

}  // namespace

MetricDerivatives metric_derivatives(const MetricSource& src, const Vec& x, const Vec& x_d,
                                     const Vec& theta_hat, const Vec& e, bool with_xd) {
  const Eigen::Index n = x.size();
  if (x_d.size() != n || e.size() != n) throw InvalidArgument("derivative inputs disagree in size");
  MetricDerivatives d;
  if (e.isZero(0.0)) {
    d.dM_x = Mat::Zero(n, n);
    d.dM_xd = Mat::Zero(n, n);
    return d;
  }
  d.dM_x = directional_rows(src, x, x_d, theta_hat, e, false);
  d.dM_xd = with_xd && src.depends_on_xd() ? directional_rows(src, x, x_d, theta_hat, e, true)
                                           : Mat::Zero(n, n);
  return d;
}

}  // namespace ancm
