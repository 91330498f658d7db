#include <cmath>

#include "ancm/errors.hpp"
#include "ancm/sim.hpp"

namespace ancm {

namespace {

// Metric either evaluated directly or replaced by its first-order model
// around the state at the start of each step.
class MetricHold {
 public:
  MetricHold(std::shared_ptr<const MetricSource> src, bool linearize, bool with_xd)
      : src_(std::move(src)), linearize_(linearize), with_xd_(with_xd) {
    if (!src_) throw InvalidArgument("metric source is null");
  }
  void refresh(const Vec& x, const Vec& x_d, const Vec& param) {
    if (linearize_) lin_ = std::make_unique<LinearizedMetric>(*src_, x, x_d, param, with_xd_);
  }
  const MetricSource& get() const {
    if (linearize_ && lin_) return *lin_;
    return *src_;
  }

 private:
  std::shared_ptr<const MetricSource> src_;
  bool linearize_;
  bool with_xd_;
  std::unique_ptr<LinearizedMetric> lin_;
};

Vec input_or_zero(const Vec& u_d, int m) { return u_d.size() ? u_d : Vec(Vec::Zero(m)); }

double quad(const Mat& M, const Vec& v) { return v.dot(M * v); }

class AncmController : public SimController {
 public:
  AncmController(std::shared_ptr<const MetricSource> metric, ParametricSystem psys, Regulation ref,
                 Vec theta0, ControllerConfig cfg, Vec theta_true, bool linearize)
      : psys_(std::move(psys)), ref_(std::move(ref)), theta0_(std::move(theta0)),
        cfg_(std::move(cfg)), theta_true_(std::move(theta_true)),
        hold_(metric, linearize, needs_xd(*metric)) {
    ref_.u_d = input_or_zero(ref_.u_d, psys_.m());
    if (theta0_.size() != psys_.p()) throw InvalidArgument("theta0 must have p entries");
    u_start_ = ref_.u_d;
    u_prev_ = ref_.u_d;
    Gamma_inv_ = psys_.p() > 0 ? Mat(cfg_.Gamma_or_scalar(psys_.p()).inverse()) : Mat(0, 0);
  }

  std::string name() const override { return "ancm"; }
  Vec initial_state() const override { return theta0_; }

  void begin_step(double, const Vec& x, const Vec& a) override {
    hold_.refresh(x, ref_.x_d, a);
    u_prev_ = u_start_;
    u_start_ = step(x, a).u;
  }

  ControlOutput eval(double, const Vec& x, const Vec& a) override {
    const AdaptiveStep s = step(x, a);
    return {s.u, s.theta_dot};
  }

  double lyapunov(const Vec& x, const Vec& a) const override {
    const Vec e = x - ref_.x_d;
    double V = quad(hold_.get().metric(x, ref_.x_d, a), e);
    if (theta_true_.size() == a.size() && a.size() > 0) V += quad(Gamma_inv_, a - theta_true_);
    return V;
  }

 private:
  bool needs_xd(const MetricSource& m) const {
    if (!m.depends_on_xd() || psys_.p() == 0) return false;
    const Vec ud = input_or_zero(ref_.u_d, psys_.m());
    return !(psys_.Y_f(ref_.x_d) + psys_.Y_b(ref_.x_d, ud)).isZero(0.0);
  }
  AdaptiveStep step(const Vec& x, const Vec& a) const {
    return ancm_control_step(hold_.get(), psys_, x, ref_.x_d, ref_.u_d, u_prev_, a, cfg_);
  }

  ParametricSystem psys_;
  Regulation ref_;
  Vec theta0_;
  ControllerConfig cfg_;
  Vec theta_true_;
  MetricHold hold_;
  Vec u_start_, u_prev_;
  Mat Gamma_inv_;
};

class AffineController : public SimController {
 public:
  AffineController(std::shared_ptr<const MetricSource> metric, AffineUncertainSystem sys,
                   Regulation ref, Vec theta0, Vec metric_param, ControllerConfig cfg,
                   Vec theta_true, bool linearize)
      : sys_(std::move(sys)), ref_(std::move(ref)), theta0_(std::move(theta0)),
        param_(std::move(metric_param)), cfg_(std::move(cfg)), theta_true_(std::move(theta_true)),
        hold_(std::move(metric), linearize, false) {
    ref_.u_d = input_or_zero(ref_.u_d, sys_.base.m());
    if (theta0_.size() != sys_.p) throw InvalidArgument("theta0 must have p entries");
    Gamma_inv_ = cfg_.Gamma_or_scalar(sys_.p).inverse();
  }

  std::string name() const override { return "affine"; }
  Vec initial_state() const override { return theta0_; }
  void begin_step(double, const Vec& x, const Vec&) override { hold_.refresh(x, ref_.x_d, param_); }

  ControlOutput eval(double, const Vec& x, const Vec& a) override {
    const AdaptiveStep s =
        affine_adaptive_step(hold_.get(), sys_, x, ref_.x_d, ref_.u_d, a, cfg_, param_, true);
    return {s.u, s.theta_dot};
  }

  double lyapunov(const Vec& x, const Vec& a) const override {
    double V = quad(hold_.get().metric(x, ref_.x_d, param_), x - ref_.x_d);
    if (theta_true_.size() == a.size()) V += quad(Gamma_inv_, a - theta_true_);
    return V;
  }

 private:
  AffineUncertainSystem sys_;
  Regulation ref_;
  Vec theta0_, param_;
  ControllerConfig cfg_;
  Vec theta_true_;
  MetricHold hold_;
  Mat Gamma_inv_;
};

class RobustController : public SimController {
 public:
  RobustController(std::shared_ptr<const MetricSource> metric, SystemModel model, Regulation ref,
                   Vec metric_param, Mat R, bool linearize, std::string name)
      : model_(std::move(model)), ref_(std::move(ref)), param_(std::move(metric_param)),
        R_(R.size() ? std::move(R) : Mat(Mat::Identity(model_.m(), model_.m()))),
        name_(std::move(name)), hold_(std::move(metric), linearize, false) {
    ref_.u_d = input_or_zero(ref_.u_d, model_.m());
  }

  std::string name() const override { return name_; }
  Vec theta_hat(const Vec&) const override { return param_; }
  void begin_step(double, const Vec& x, const Vec&) override { hold_.refresh(x, ref_.x_d, param_); }

  ControlOutput eval(double, const Vec& x, const Vec&) override {
    return {robust_ncm_u(hold_.get(), model_, x, ref_.x_d, ref_.u_d, R_, param_), Vec(0)};
  }

  double lyapunov(const Vec& x, const Vec&) const override {
    return quad(hold_.get().metric(x, ref_.x_d, param_), x - ref_.x_d);
  }

 private:
  SystemModel model_;
  Regulation ref_;
  Vec param_;
  Mat R_;
  std::string name_;
  MetricHold hold_;
};

class BasisController : public SimController {
 public:
  BasisController(std::shared_ptr<const MetricSource> metric, BasisFunctionModel bm,
                  Regulation ref, ControllerConfig cfg, bool linearize)
      : bm_(std::move(bm)), ref_(std::move(ref)), cfg_(std::move(cfg)),
        hold_(metric, linearize, metric->depends_on_xd()) {
    ref_.u_d = input_or_zero(ref_.u_d, bm_.m());
  }

  std::string name() const override { return "ancm_basis"; }

  Vec initial_state() const override {
    Eigen::Index len = bm_.F_hat.size();
    for (const auto& B : bm_.B_hat) len += B.size();
    Vec a(len);
    Eigen::Index k = 0;
    a.segment(k, bm_.F_hat.size()) = bm_.F_hat.reshaped();
    k += bm_.F_hat.size();
    for (const auto& B : bm_.B_hat) {
      a.segment(k, B.size()) = B.reshaped();
      k += B.size();
    }
    return a;
  }

  void begin_step(double, const Vec& x, const Vec&) override {
    hold_.refresh(x, ref_.x_d, Vec(0));
  }

  ControlOutput eval(double, const Vec& x, const Vec& a) override {
    const BasisFunctionModel bm = unpack(a);
    ControlOutput out;
    out.u = basis_control_u(hold_.get(), bm, x, ref_.x_d, ref_.u_d, cfg_.R_or_identity(bm.m()));
    const BasisWeightRates r = basis_weight_step(hold_.get(), bm, x, ref_.x_d, out.u, ref_.u_d, cfg_);
    out.a_dot.resize(a.size());
    Eigen::Index k = 0;
    out.a_dot.segment(k, r.F_dot.size()) = r.F_dot.reshaped();
    k += r.F_dot.size();
    for (const auto& B : r.B_dot) {
      out.a_dot.segment(k, B.size()) = B.reshaped();
      k += B.size();
    }
    return out;
  }

  double lyapunov(const Vec& x, const Vec&) const override {
    return quad(hold_.get().metric(x, ref_.x_d, Vec(0)), x - ref_.x_d);
  }

 private:
  BasisFunctionModel unpack(const Vec& a) const {
    BasisFunctionModel bm = bm_;
    Eigen::Index k = 0;
    bm.F_hat = a.segment(k, bm_.F_hat.size()).reshaped(bm_.F_hat.rows(), bm_.F_hat.cols());
    k += bm_.F_hat.size();
    for (auto& B : bm.B_hat) {
      B = a.segment(k, B.size()).reshaped(B.rows(), B.cols());
      k += B.size();
    }
    return bm;
  }

  BasisFunctionModel bm_;
  Regulation ref_;
  ControllerConfig cfg_;
  MetricHold hold_;
};

}  // namespace

std::unique_ptr<SimController> make_ancm_controller(std::shared_ptr<const MetricSource> metric,
                                                    ParametricSystem psys, Regulation ref,
                                                    Vec theta0, ControllerConfig cfg,
                                                    Vec theta_true, bool linearize) {
  return std::make_unique<AncmController>(std::move(metric), std::move(psys), std::move(ref),
                                          std::move(theta0), std::move(cfg),
                                          std::move(theta_true), linearize);
}

std::unique_ptr<SimController> make_affine_controller(std::shared_ptr<const MetricSource> metric,
                                                      AffineUncertainSystem sys, Regulation ref,
                                                      Vec theta0, Vec metric_param,
                                                      ControllerConfig cfg, Vec theta_true,
                                                      bool linearize) {
  return std::make_unique<AffineController>(std::move(metric), std::move(sys), std::move(ref),
                                            std::move(theta0), std::move(metric_param),
                                            std::move(cfg), std::move(theta_true), linearize);
}

std::unique_ptr<SimController> make_robust_controller(std::shared_ptr<const MetricSource> metric,
                                                      SystemModel model, Regulation ref,
                                                      Vec metric_param, Mat R, bool linearize,
                                                      std::string name) {
  return std::make_unique<RobustController>(std::move(metric), std::move(model), std::move(ref),
                                            std::move(metric_param), std::move(R), linearize,
                                            std::move(name));
}

std::unique_ptr<SimController> make_basis_controller(std::shared_ptr<const MetricSource> metric,
                                                     BasisFunctionModel bm, Regulation ref,
                                                     ControllerConfig cfg, bool linearize) {
  return std::make_unique<BasisController>(std::move(metric), std::move(bm), std::move(ref),
                                           std::move(cfg), linearize);
}

}  // namespace ancm
