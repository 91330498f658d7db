#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "ancm/controllers.hpp"
#include "ancm/errors.hpp"

namespace ancm {
namespace {

Mat scalar(double v) { return Mat::Constant(1, 1, v); }
Vec vec1(double v) { return Vec::Constant(1, v); }

SystemModel scalar_model(double a, double b) {
  return SystemModel(
      1, 1, [a](const Vec& x) { return Vec(a * x); }, [b](const Vec&) { return scalar(b); });
}

Box cartpole_box() {
  Vec lo(4), hi(4);
  lo << -1.5, -0.6, -1.5, -1.5;
  hi << 1.5, 0.6, 1.5, 1.5;
  return Box(lo, hi);
}

/// Classic RK4 on a flat state.
template <class F>
Vec rk4(const F& f, const Vec& y, double dt) {
  const Vec k1 = f(y);
  const Vec k2 = f(Vec(y + 0.5 * dt * k1));
  const Vec k3 = f(Vec(y + 0.5 * dt * k2));
  const Vec k4 = f(Vec(y + dt * k3));
  return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// robust law

TEST(RobustNcm, ZeroErrorGivesFeedforward) {
  const auto M = constant_metric(scalar(3.0));
  const Vec u = robust_ncm_u(*M, scalar_model(-1.0, 2.0), vec1(0.4), vec1(0.4), vec1(1.7), Mat());
  EXPECT_EQ(u(0), 1.7);
}

TEST(RobustNcm, ScalarUnitFeedback) {
  const auto M = constant_metric(scalar(1.0));
  const Vec u = robust_ncm_u(*M, scalar_model(0.0, 1.0), vec1(2.0), vec1(0.5), vec1(0.25),
                             scalar(1.0));
  EXPECT_DOUBLE_EQ(u(0), 0.25 - 1.5);
}

TEST(RobustNcm, CartPoleInputOpposesPoleFall) {
  const CartPole cp;
  SynthesisConfig sc;
  sc.nu_weight = 1.0;
  const ExactMetric metric(cartpole_parametric(cp, cartpole_box()), sc);
  const SystemModel sys = cartpole_model(cp, cartpole_box());
  for (double angle : {0.2, -0.2}) {
    Vec x = Vec::Zero(4);
    x(1) = angle;
    const Vec u = robust_ncm_u(metric, sys, x, Vec::Zero(4), Vec::Zero(1), Mat(), cp.mu_c * Vec::Ones(1));
    ASSERT_TRUE(u.allFinite());
    // effect of u on the pole acceleration pushes the pole back up
    EXPECT_LT(sys.B(x)(3, 0) * u(0) * angle, 0.0);
  }
}

// affine law

AffineUncertainSystem linear_drag_system(double c) {
  AffineUncertainSystem s;
  s.base = scalar_model(-1.0, 1.0);
  s.Delta = [c](const Vec& x) { return Mat::Constant(1, 1, -c * x(0)); };
  s.p = 1;
  return s;
}

TEST(AffineAdaptive, ZeroErrorNoAdaptation) {
  const auto sys = linear_drag_system(0.7);
  const auto M = constant_metric(scalar(2.0));
  ControllerConfig cfg;
  const Vec th = vec1(0.3);
  const auto st = affine_adaptive_step(*M, sys, vec1(0.5), vec1(0.5), vec1(0.1), th, cfg);
  EXPECT_EQ(st.theta_dot(0), 0.0);
  EXPECT_EQ(st.u(0), 0.1);  // phi = 0 at x = x_d
}

TEST(AffineAdaptive, LeakageOnlyAtZeroError) {
  const auto sys = linear_drag_system(0.7);
  const auto M = constant_metric(scalar(2.0));
  ControllerConfig cfg;
  cfg.sigma = 0.4;
  cfg.gamma = 3.0;
  const auto st = affine_adaptive_step(*M, sys, vec1(0.5), vec1(0.5), vec1(0.0), vec1(2.0), cfg);
  EXPECT_DOUBLE_EQ(st.theta_dot(0), -3.0 * 0.4 * 2.0);
}

TEST(AffineAdaptive, ScalarClosedLoopMatchesHandOde) {
  // x' = -x + u + c theta x, x_d = 0:  e' = -2e - c e th~,  th~' = Gamma c e^2
  const double c = 0.8, theta = 1.5, Gamma = 2.0, dt = 1e-3;
  const auto sys = linear_drag_system(c);
  const auto M = constant_metric(scalar(1.0));
  ControllerConfig cfg;
  cfg.gamma = Gamma;
  auto plant = [&](const Vec& y) {
    const auto st = affine_adaptive_step(*M, sys, y.head(1), vec1(0.0), vec1(0.0), y.tail(1), cfg);
    Vec d(2);
    d << sys.xdot(y.head(1), st.u, vec1(theta))(0), st.theta_dot(0);
    return d;
  };
  auto hand = [&](const Vec& y) {
    Vec d(2);
    d << -2.0 * y(0) - c * y(0) * y(1), Gamma * c * y(0) * y(0);
    return d;
  };
  Vec y(2), z(2);
  y << 1.0, 0.0;
  z << 1.0, -theta;
  const double V0 = z(0) * z(0) + z(1) * z(1) / Gamma;
  double dissipated = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double e0 = z(0);
    y = rk4(plant, y, dt);
    z = rk4(hand, z, dt);
    dissipated += 2.0 * dt * (e0 * e0 + z(0) * z(0));  // trapezoid of 4 e^2
    ASSERT_NEAR(y(0), z(0), 1e-12);
    ASSERT_NEAR(y(1) - theta, z(1), 1e-12);
  }
  EXPECT_LT(std::abs(y(0)), 1e-4);
  const double V = z(0) * z(0) + z(1) * z(1) / Gamma;
  EXPECT_NEAR(V + dissipated, V0, 1e-6);
}

TEST(AffineAdaptive, UnmatchedPropagates) {
  AffineUncertainSystem s;
  s.base = SystemModel(
      2, 1, [](const Vec& x) { return Vec(-x); },
      [](const Vec&) { return Mat(Mat::Identity(2, 1)); });
  s.Delta = [](const Vec& x) { return Mat(x.transpose()); };
  s.p = 1;
  const auto M = constant_metric(Mat::Identity(2, 2));
  ControllerConfig cfg;
  EXPECT_THROW(affine_adaptive_step(*M, s, Vec::Ones(2), Vec::Zero(2), Vec::Zero(1), vec1(0.0), cfg),
               Unmatched);
  EXPECT_NO_THROW(affine_adaptive_step(*M, s, Vec::Ones(2), Vec::Zero(2), Vec::Zero(1), vec1(0.0),
                                       cfg, Vec(0), true));
}

// lagrangian law

LagrangianSystem one_dof(double H, std::function<Mat(const Vec&)> Delta) {
  LagrangianSystem l;
  l.n = 1;
  l.p = 1;
  l.H = [H](const Vec&) { return scalar(H); };
  l.h = [](const Vec&) { return vec1(0.0); };
  l.Delta = std::move(Delta);
  return l;
}

TEST(LagrangianAdaptive, ZeroVelocityError) {
  const auto l = one_dof(2.0, [](const Vec& s) { return scalar(std::cos(s(0))); });
  const auto M = constant_metric(scalar(3.0));
  ControllerConfig cfg;
  cfg.sigma = 0.5;
  const auto st = lagrangian_adaptive_step(*M, l, vec1(0.0), vec1(0.7), cfg);
  EXPECT_DOUBLE_EQ(st.u(0), 0.7);
  EXPECT_EQ(st.theta_dot(0), 0.0);
}

TEST(LagrangianAdaptive, ReducesToRobustLaw) {
  LagrangianSystem l;
  l.n = 2;
  l.p = 2;
  l.H = [](const Vec&) { return Mat(Mat::Identity(2, 2)); };
  l.h = [](const Vec&) { return Vec(Vec::Zero(2)); };
  l.Delta = [](const Vec&) { return Mat(Mat::Zero(2, 2)); };
  Mat Mc(2, 2);
  Mc << 2.0, 0.3, 0.3, 1.0;
  const auto M = constant_metric(Mc);
  ControllerConfig cfg;
  cfg.R = 2.0 * Mat::Identity(2, 2);
  Vec s(2);
  s << 0.4, -1.1;
  const auto st = lagrangian_adaptive_step(*M, l, s, Vec::Ones(2), cfg);
  const SystemModel sm(
      2, 2, [](const Vec&) { return Vec(Vec::Zero(2)); },
      [](const Vec&) { return Mat(Mat::Identity(2, 2)); });
  const Vec u = robust_ncm_u(*M, sm, s, Vec::Zero(2), Vec::Zero(2), cfg.R);
  EXPECT_LT((st.u - u).norm(), 1e-15);
}

TEST(LagrangianAdaptive, SingularMassPropagates) {
  const auto l = one_dof(0.0, [](const Vec&) { return scalar(1.0); });
  const auto M = constant_metric(scalar(1.0));
  EXPECT_THROW(lagrangian_adaptive_step(*M, l, vec1(1.0), vec1(0.0), ControllerConfig{}),
               SingularMass);
}

TEST(LagrangianAdaptive, PrintedLeakageNeedsSquareRegressor) {
  LagrangianSystem l = one_dof(1.0, [](const Vec&) { return Mat(Mat::Ones(1, 2)); });
  l.p = 2;
  const auto M = constant_metric(scalar(1.0));
  ControllerConfig cfg;
  cfg.sigma = 0.1;
  EXPECT_THROW(lagrangian_adaptive_step(*M, l, vec1(1.0), Vec::Zero(2), cfg), InvalidArgument);
  cfg.leak_on_theta = true;
  EXPECT_NO_THROW(lagrangian_adaptive_step(*M, l, vec1(1.0), Vec::Zero(2), cfg));
}

TEST(LagrangianAdaptive, OneDofStaysInsideBound) {
  // 2 s' + cos(s) theta = tau + d,  M = 2, R = 1:  alpha = M (1/2)^2 / R
  const double Hs = 2.0, Mv = 2.0, theta = 1.0, d_s = 0.1, dt = 1e-3;
  const auto l = one_dof(Hs, [](const Vec& s) { return scalar(std::cos(s(0))); });
  const auto M = constant_metric(scalar(Mv));
  ControllerConfig cfg;
  cfg.gamma = 1.0;
  cfg.sigma = 0.5;
  cfg.leak_on_theta = true;
  const double alpha = Mv * 0.25;
  ControllerBounds b;
  b.omega_lower = b.omega_upper = 1.0 / Mv;
  b.gamma_lower = b.gamma_upper = 1.0;
  b.theta_bar = theta;
  b.b_bar = 1.0 / Hs;
  b.delta_bar = 1.0;
  b.d_bar = b.b_bar * d_s;
  const auto cert = check_gain_condition(GainKind::kLagrangian, b, cfg.sigma, 0.0, alpha);
  ASSERT_TRUE(cert.pass);
  EXPECT_NEAR(cert.alpha_a, std::min(alpha, cfg.sigma), 1e-12);

  double t = 0.0;
  auto f = [&](const Vec& y) {
    const auto st = lagrangian_adaptive_step(*M, l, y.head(1), y.tail(1), cfg);
    const double d = d_s * std::sin(3.0 * t);
    Vec dy(2);
    dy << l.sdot(y.head(1), st.u, vec1(theta), vec1(d))(0), st.theta_dot(0);
    return dy;
  };
  Vec y(2);
  y << 1.0, 0.0;
  const double V0 = Mv * y(0) * y(0) + (y(1) - theta) * (y(1) - theta);
  for (int k = 0; k < 20000; ++k) {
    // the disturbance is sampled at step start; bound slack covers it
    y = rk4(f, y, dt);
    t += dt;
    ASSERT_LE(std::abs(y(0)), tracking_error_bound(cert, V0, t) * 1.05) << "t=" << t;
  }
}

// aNCM law

ParametricSystem scalar_linear_param() {
  // x' = theta x + u
  ParametricSystem ps(
      1, 1, 1, 1, [](const Vec&) { return vec1(0.0); }, [](const Vec&) { return scalar(1.0); },
      [](const Vec& x) { return Mat::Constant(1, 1, x(0)); },
      [](const Vec&) { return std::vector<Mat>{Mat::Zero(1, 1)}; }, [](const Vec& th) { return th; });
  ps.mark_linear();
  return ps;
}

TEST(AncmLaw, ZeroErrorNoAdaptation) {
  const auto ps = scalar_linear_param();
  const auto M = constant_metric(scalar(2.0));
  ControllerConfig cfg;
  const auto st = ancm_control_step(*M, ps, vec1(0.3), vec1(0.3), vec1(0.2), vec1(0.0), vec1(0.5), cfg);
  EXPECT_EQ(st.u(0), 0.2);
  EXPECT_EQ(st.theta_dot(0), 0.0);
}

TEST(AncmLaw, LyapunovIdentityScalar) {
  // u = -e, theta_hat' = Gamma e^2;  V = e^2 + th~^2 / Gamma,  V' = 2 e^2 (theta_hat - 1)
  const auto ps = scalar_linear_param();
  const auto M = constant_metric(scalar(1.0));
  ControllerConfig cfg;
  cfg.gamma = 0.1;
  const double theta = 0.5, dt = 1e-3;
  auto f = [&](const Vec& y) {
    const auto st = ancm_control_step(*M, ps, y.head(1), vec1(0.0), vec1(0.0), vec1(0.0),
                                      y.tail(1), cfg);
    Vec d(2);
    d << ps.xdot(y.head(1), st.u, vec1(theta))(0), st.theta_dot(0);
    return d;
  };
  auto V = [&](const Vec& y) {
    return y(0) * y(0) + (y(1) - theta) * (y(1) - theta) / cfg.gamma;
  };
  Vec y(2);
  y << 1.0, 0.0;
  for (int k = 0; k < 10000; ++k) {
    const Vec y1 = rk4(f, y, dt);
    const double Vdot = (V(y1) - V(y)) / dt;
    const Vec ym = 0.5 * (y + y1);
    ASSERT_NEAR(Vdot, 2.0 * ym(0) * ym(0) * (ym(1) - 1.0), 1e-5 * V(y));
    ASSERT_LT(Vdot, 0.0);
    y = y1;
  }
  EXPECT_LT(std::abs(y(0)), 0.05);
}

TEST(AncmLaw, NoParametersMatchesRobustLawBitwise) {
  const CartPole cp;
  const SystemModel sm = cartpole_model(cp, cartpole_box());
  ParametricSystem ps(
      4, 1, 0, 0, [sm](const Vec& x) { return sm.f(x); }, [sm](const Vec& x) { return sm.B(x); },
      [](const Vec&) { return Mat(4, 0); },
      [](const Vec&) { return std::vector<Mat>{Mat(4, 0)}; }, [](const Vec&) { return Vec(0); });
  MetricNet net(4, 0, 2, 16, Activation::kTanh, 3);
  const NetMetric metric(std::make_shared<const MetricNet>(net));
  std::mt19937_64 rng(4);
  for (int k = 0; k < 50; ++k) {
    const Vec x = cartpole_box().sample(rng), xd = 0.3 * cartpole_box().sample(rng);
    const Vec ud = Vec::Constant(1, 0.1 * k);
    const auto st = ancm_control_step(metric, ps, x, xd, ud, Vec::Zero(1), Vec(0), ControllerConfig{});
    const Vec u = robust_ncm_u(metric, ps.at(Vec(0)), x, xd, ud, Mat());
    ASSERT_EQ(st.u(0), u(0));
    ASSERT_EQ(st.theta_dot.size(), 0);
  }
}

// basis-function law

BasisFunctionModel small_basis() {
  BasisFunctionModel bm;
  bm.F_hat = Mat::Constant(2, 3, 0.5);
  bm.B_hat = {Mat::Constant(2, 2, -0.25)};
  bm.phi = [](const Vec& x) {
    Vec z(3);
    z << x(0), std::sin(x(1)), 1.0;
    return z;
  };
  bm.varphi = {[](const Vec& x) {
    Vec z(2);
    z << 1.0, x(0) * x(0);
    return z;
  }};
  return bm;
}

TEST(BasisLaw, ZeroErrorZeroLeakage) {
  const auto bm = small_basis();
  const auto M = constant_metric(Mat::Identity(2, 2));
  ControllerConfig cfg;
  const Vec x = Vec::Constant(2, 0.3);
  const auto r = basis_weight_step(*M, bm, x, x, vec1(1.0), vec1(1.0), cfg);
  EXPECT_TRUE(r.F_dot.isZero(0.0));
  EXPECT_TRUE(r.B_dot[0].isZero(0.0));
}

TEST(BasisLaw, LeakageOnly) {
  const auto bm = small_basis();
  const auto M = constant_metric(Mat::Identity(2, 2));
  ControllerConfig cfg;
  cfg.sigma = 0.3;
  cfg.gamma = 2.0;
  const Vec x = Vec::Constant(2, 0.3);
  const auto r = basis_weight_step(*M, bm, x, x, vec1(1.0), vec1(1.0), cfg);
  EXPECT_TRUE(r.F_dot.isApprox(-0.15 * bm.F_hat, 1e-15));
  EXPECT_TRUE(r.B_dot[0].isApprox(-0.15 * bm.B_hat[0], 1e-15));
}

TEST(BasisLaw, RankOneElementwise) {
  const auto bm = small_basis();
  const auto M = constant_metric(Mat::Identity(2, 2));
  ControllerConfig cfg;
  cfg.gamma = 4.0;
  Vec x(2), xd(2);
  x << 0.7, -0.2;
  xd << 0.1, 0.4;
  const Vec u = vec1(1.3), ud = vec1(-0.5);
  const auto r = basis_weight_step(*M, bm, x, xd, u, ud, cfg);
  const Vec e = x - xd, z = bm.phi(x), zd = bm.phi(xd);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(r.F_dot(i, j), e(i) * (z(j) - zd(j)) / 4.0, 1e-15);
  }
  const Vec w = bm.varphi[0](x) * u(0), wd = bm.varphi[0](xd) * ud(0);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(r.B_dot[0](i, j), e(i) * (w(j) - wd(j)) / 4.0, 1e-15);
  }
}

TEST(BasisLaw, MetricGradientTerms) {
  // M(x, x_d) = diag(1 + x_0^2, 1):  dM_x e has entry 0 = x_0 e_0^2 / 2 * 2 / 2
  const auto bm = small_basis();
  const FunctionMetric M(
      [](const Vec& x, const Vec&, const Vec&) {
        Mat m = Mat::Identity(2, 2);
        m(0, 0) += x(0) * x(0);
        return m;
      },
      false);
  ControllerConfig cfg;
  Vec x(2), xd(2);
  x << 0.7, -0.2;
  xd << 0.1, 0.4;
  const auto r = basis_weight_step(M, bm, x, xd, vec1(0.0), vec1(0.0), cfg);
  const Vec e = x - xd;
  Vec a = Vec::Zero(2);
  a(0) = x(0) * e(0) * e(0);  // row i = (dM/dx_i e)^T e / 2
  const Mat Mx = M.metric(x, xd, Vec(0));
  const Mat expect = a * bm.phi(x).transpose() + Mx * e * (bm.phi(x) - bm.phi(xd)).transpose();
  EXPECT_LT((r.F_dot - expect).cwiseAbs().maxCoeff(), 1e-8);
}

// gain condition

ControllerBounds gain_bounds() {
  ControllerBounds b;
  b.b_bar = 1.5;
  b.phi_bar = 0.8;
  b.delta_bar = 0.6;
  b.y_bar = 2.0;
  b.zeta_bar = 1.2;
  b.omega_lower = 0.5;
  b.omega_upper = 2.0;
  b.gamma_lower = 0.3;
  b.gamma_upper = 3.0;
  return b;
}

TEST(GainCondition, ExactLearningDiagonalCase) {
  const auto b = gain_bounds();
  for (double sigma : {0.1, 1.0, 10.0}) {
    for (auto kind : {GainKind::kAffine, GainKind::kLagrangian, GainKind::kAncm, GainKind::kBasis}) {
      const auto c = check_gain_condition(kind, b, sigma, 0.0, 0.9, 2);
      ASSERT_TRUE(c.pass);
      EXPECT_DOUBLE_EQ(c.alpha_a, std::min(0.9 * 0.5 / 2.0, sigma * 0.3));
    }
  }
}

TEST(GainCondition, NoLeakageNoRate) {
  const auto c = check_gain_condition(GainKind::kAncm, gain_bounds(), 0.0, 0.0, 0.9);
  EXPECT_FALSE(c.pass);
  EXPECT_EQ(c.alpha_a, 0.0);
}

double closed_form_root(const ControllerBounds& b, double sigma, double coupling, double a_ncm,
                        int k) {
  const double a1 = 2.0 * a_ncm / b.omega_upper, b1 = 2.0 / b.omega_lower;
  const double a2 = 2.0 * sigma, b2 = 2.0 / b.gamma_lower;
  const double c2 = k * coupling * coupling;
  // (a1 - b1 x)(a2 - b2 x) = c2, smaller root
  const double A = b1 * b2, B = -(a1 * b2 + a2 * b1), C = a1 * a2 - c2;
  return (-B - std::sqrt(B * B - 4.0 * A * C)) / (2.0 * A);
}

TEST(GainCondition, BisectionMatchesQuadraticRoot) {
  const auto b = gain_bounds();
  const double sigma = 0.5, a_ncm = 0.9;
  struct Case {
    GainKind kind;
    double per_eps;
    int k;
  };
  for (const Case cs : {Case{GainKind::kAffine, b.phi_bar * b.b_bar, 1},
                        Case{GainKind::kLagrangian, b.delta_bar * b.b_bar, 1},
                        Case{GainKind::kAncm, b.y_bar, 1}, Case{GainKind::kBasis, b.zeta_bar, 3}}) {
    for (double eps : {1e-3, 0.05, 0.2}) {
      const auto c = check_gain_condition(cs.kind, b, sigma, eps, a_ncm, 2);
      const double root = closed_form_root(b, sigma, cs.per_eps * eps, a_ncm, cs.k);
      if (root > 0.0) {
        ASSERT_TRUE(c.pass) << to_string(cs.kind) << " eps " << eps;
        EXPECT_NEAR(c.alpha_a, std::min(root, std::min(a_ncm * 0.25, sigma * 0.3)), 1e-9);
      } else {
        EXPECT_FALSE(c.pass);
      }
    }
  }
}

TEST(GainCondition, TightDeterminantBoundary) {
  // coupling where alpha_a -> 0: a1 a2 = c^2
  const auto b = gain_bounds();
  const double sigma = 0.5, a_ncm = 0.9;
  const double c_star = std::sqrt(2.0 * a_ncm / b.omega_upper * 2.0 * sigma);
  const double eps_star = c_star / b.y_bar;
  const auto inside = check_gain_condition(GainKind::kAncm, b, sigma, 0.999 * eps_star, a_ncm);
  ASSERT_TRUE(inside.pass);
  EXPECT_NEAR(inside.alpha_a, closed_form_root(b, sigma, 0.999 * c_star, a_ncm, 1), 1e-9);
  const auto outside = check_gain_condition(GainKind::kAncm, b, sigma, 1.001 * eps_star, a_ncm);
  EXPECT_FALSE(outside.pass);
}

TEST(GainCondition, SoundnessRandomized) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int k = 0; k < 300; ++k) {
    ControllerBounds b;
    b.omega_lower = u(rng);
    b.omega_upper = b.omega_lower * (1.0 + u(rng));
    b.gamma_lower = u(rng);
    b.gamma_upper = b.gamma_lower + u(rng);
    b.phi_bar = u(rng);
    b.b_bar = u(rng);
    b.y_bar = u(rng);
    b.zeta_bar = u(rng);
    b.delta_bar = u(rng);
    const auto kind = static_cast<GainKind>(k % 4);
    const auto c = check_gain_condition(kind, b, u(rng), 0.1 * u(rng), u(rng), 1 + k % 3);
    const double worst = max_eig(gain_condition_matrix(c, c.alpha_a));
    if (c.pass) {
      ASSERT_GT(c.alpha_a, 0.0);
      ASSERT_LE(worst, 1e-9);
    }
  }
}

TEST(GainCondition, BasisBlockSize) {
  const auto c = check_gain_condition(GainKind::kBasis, gain_bounds(), 0.5, 0.01, 0.9, 3);
  EXPECT_EQ(c.condition.rows(), 5);
  EXPECT_EQ(c.scaling(4, 4), 1.0 / 0.3);
  EXPECT_DOUBLE_EQ(c.condition(0, 4), 1.2 * 0.01);
}

TEST(GainCondition, KindNamesRoundTrip) {
  for (auto kind : {GainKind::kAffine, GainKind::kLagrangian, GainKind::kAncm, GainKind::kBasis}) {
    EXPECT_EQ(parse_gain_kind(to_string(kind)), kind);
  }
  EXPECT_THROW(parse_gain_kind("robust"), InvalidArgument);
}

TEST(GainCondition, CertificateTextHasOneKeyPerLine) {
  const auto c = check_gain_condition(GainKind::kAffine, gain_bounds(), 0.5, 0.0, 0.9);
  std::ostringstream os;
  write_certificate(os, c);
  std::istringstream is(os.str());
  std::string line;
  bool saw_pass = false;
  while (std::getline(is, line)) {
    ASSERT_FALSE(line.empty());
    if (line == "pass true") saw_pass = true;
  }
  EXPECT_TRUE(saw_pass);
}

// tracking bound

TEST(TrackingBound, InitialValue) {
  auto c = check_gain_condition(GainKind::kAncm, gain_bounds(), 0.5, 0.0, 0.9);
  c.bounds.d_bar = 0.3;
  c.bounds.theta_bar = 2.0;
  EXPECT_DOUBLE_EQ(tracking_error_bound(c, 4.0, 0.0), std::sqrt(2.0) * 2.0);
}

TEST(TrackingBound, Limit) {
  auto c = check_gain_condition(GainKind::kAncm, gain_bounds(), 0.5, 0.0, 0.9);
  c.bounds.d_bar = 0.3;
  c.bounds.theta_bar = 2.0;
  const double da = 0.5 * std::sqrt(3.0) * 2.0 + 0.3 / std::sqrt(0.5);
  EXPECT_DOUBLE_EQ(disturbance_gain(c), da);
  EXPECT_NEAR(tracking_error_bound(c, 4.0, 1e4), std::sqrt(2.0) * da / c.alpha_a, 1e-12);
}

TEST(TrackingBound, PureDecay) {
  auto c = check_gain_condition(GainKind::kAncm, gain_bounds(), 0.5, 0.0, 0.9);
  c.sigma = 0.0;
  for (double t : {0.5, 1.0, 7.0}) {
    EXPECT_NEAR(tracking_error_bound(c, 9.0, t), std::sqrt(2.0) * 3.0 * std::exp(-c.alpha_a * t),
                1e-15);
  }
}

// CLF-QP

TEST(ClfQp, SlackConstraintGivesZero) {
  const auto r = clf_qp_gain(scalar(1.0), scalar(-2.0), scalar(1.0), scalar(0.0), vec1(1.0), 1.0);
  EXPECT_NEAR(r.K(0, 0), 0.0, 1e-6);
  EXPECT_NEAR(r.p, 0.0, 1e-6);
}

TEST(ClfQp, ActiveConstraintKkt) {
  const auto r = clf_qp_gain(scalar(1.0), scalar(1.0), scalar(1.0), scalar(0.0), vec1(1.0), 1.0);
  EXPECT_NEAR(r.K(0, 0), -1.6, 1e-6);
  EXPECT_NEAR(r.p, 0.8, 1e-6);
  // grid search over the feasible boundary 2K = -4 + p
  double best = 1e300;
  for (int i = 0; i <= 400000; ++i) {
    const double p = 4.0 * i / 400000.0;
    const double K = (-4.0 + p) / 2.0;
    best = std::min(best, K * K + p * p);
  }
  EXPECT_NEAR(r.objective, best, 1e-6);
}

TEST(ClfQp, AlwaysFeasible) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const int n = 2 + k % 3, m = 1 + k % 2;
    const Mat G = Mat::NullaryExpr(n, n, [&] { return N(rng); });
    const Mat M = Mat::Identity(n, n) + G * G.transpose();
    const Mat A = 3.0 * Mat::NullaryExpr(n, n, [&] { return N(rng); });
    const Mat B = Mat::NullaryExpr(n, m, [&] { return N(rng); });
    const Vec e = Vec::NullaryExpr(n, [&] { return N(rng); });
    const auto r = clf_qp_gain(M, A, B, Mat(), e, 1.0);
    ASSERT_TRUE(r.K.allFinite());
    ASSERT_GE(r.p, 0.0);
    const Mat C = 2.0 * sym(M * A + M * B * r.K) + 2.0 * M - r.p * Mat::Identity(n, n);
    ASSERT_LE(max_eig(C), 1e-6 * (1.0 + C.norm()));
  }
}

TEST(ClfQp, ZeroErrorWithContractingGain) {
  // the gain -B^T M already satisfies the constraint with slack
  Mat A(2, 2), B(2, 1);
  A << -1.0, 0.5, -0.5, -1.0;
  B << 0.0, 1.0;
  const Mat M = Mat::Identity(2, 2);
  const Mat K = -B.transpose() * M;
  ASSERT_LT(max_eig(2.0 * sym(M * A + M * B * K) + 0.2 * M), 0.0);
  const auto r = clf_qp_gain(M, A, B, Mat(), Vec::Zero(2), 0.1);
  EXPECT_LT(r.p, 1e-6);
}

TEST(ClfQp, MetricSourceOverload) {
  const auto ps = scalar_linear_param();
  const auto M = constant_metric(scalar(1.0));
  // x' = theta x + u at theta_hat = 1:  A = 1
  const auto r = clf_qp_gain(*M, ps, vec1(1.0), vec1(0.0), vec1(1.0), vec1(0.0), 1.0);
  EXPECT_NEAR(r.K(0, 0), -1.6, 1e-6);
  EXPECT_NEAR(r.p, 0.8, 1e-6);
}

// Bregman

TEST(Bregman, L2IsIdentity) {
  Vec base(3), th(3);
  base << 0.3, -1.0, 2.5;
  th << 1.0, 0.0, -4.0;
  const Vec out = bregman_adaptation_wrap(base, th, l2_hessian);
  EXPECT_EQ(out, base);
}

TEST(Bregman, DiagonalQuadraticRescales) {
  Vec base(3), D(3);
  base << 0.3, -1.0, 2.5;
  D << 2.0, 0.5, 10.0;
  const Vec out = bregman_adaptation_wrap(base, Vec::Zero(3), quadratic_hessian(D));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(out(i), base(i) / D(i), 1e-15);
}

TEST(Bregman, SingularHessianRejected) {
  Vec D(2);
  D << 1.0, 0.0;
  EXPECT_THROW(bregman_adaptation_wrap(Vec::Ones(2), Vec::Zero(2), quadratic_hessian(D)),
               SingularHessian);
  D << 1.0, -1.0;
  EXPECT_THROW(bregman_adaptation_wrap(Vec::Ones(2), Vec::Zero(2), quadratic_hessian(D)),
               SingularHessian);
}

TEST(Bregman, SmoothedL1Hessian) {
  const double eps = 0.1;
  Vec th(2);
  th << 0.0, 0.3;
  const Mat H = smoothed_l1_hessian(eps)(th);
  EXPECT_NEAR(H(0, 0), 1.0 / eps, 1e-12);
  EXPECT_NEAR(H(1, 1), eps * eps / std::pow(0.09 + 0.01, 1.5), 1e-12);
}

int count_above(const Vec& v, double tol) { return static_cast<int>((v.array().abs() > tol).count()); }

Vec run_overparameterized(const std::function<Mat(const Vec&)>& hess, double gain) {
  // scalar output error e = Y (theta_hat - theta), theta_hat' = -gain H^-1 Y^T e
  Vec Y(4), theta(4);
  Y << 1.0, 0.5, 0.25, 0.125;
  theta << 1.0, 0.0, 0.0, 0.0;
  auto f = [&](const Vec& th) {
    return bregman_adaptation_wrap(Vec(-gain * Y * Y.dot(th - theta)), th, hess);
  };
  // at most 5% relative change of any entry per step
  auto step_cap = [&](const Vec& th) {
    const Vec v = f(th);
    double cap = 1e300;
    for (int i = 0; i < 4; ++i) {
      if (v(i) != 0.0) cap = std::min(cap, 0.05 * (std::abs(th(i)) + 1e-3) / std::abs(v(i)));
    }
    return cap;
  };
  Vec th = Vec::Zero(4);
  for (int k = 0; k < 200000 && std::abs(Y.dot(th - theta)) > 1e-10; ++k) {
    const Vec h_inv = hess(th).diagonal().cwiseInverse();
    const double rate = gain * h_inv.dot(Y.cwiseProduct(Y));
    th = rk4(f, th, std::min({1e-2, 0.5 / rate, step_cap(th)}));
  }
  EXPECT_NEAR(Y.dot(th), 1.0, 1e-8);
  return th;
}

TEST(Bregman, SmoothedL1IsSparserThanL2) {
  const Vec l2 = run_overparameterized(l2_hessian, 100.0);
  const Vec l1 = run_overparameterized(smoothed_l1_hessian(1e-3), 100.0);
  EXPECT_EQ(count_above(l2, 1e-3), 4);
  EXPECT_EQ(count_above(l1, 1e-3), 1);
  EXPECT_LT(count_above(l1, 1e-3), count_above(l2, 1e-3));
}

// config

TEST(ControllerConfigTest, Validation) {
  ControllerConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.sigma = -1.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.sigma = 0.0;
  cfg.Gamma = scalar(-1.0);
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.Gamma = scalar(5.0);
  EXPECT_THROW(cfg.validate(), InvalidArgument);  // outside [gamma_lower, gamma_upper]
  cfg.bounds.gamma_upper = 5.0;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_THROW(cfg.Gamma_or_scalar(2), InvalidArgument);
  cfg.R = Mat::Identity(2, 2);
  EXPECT_THROW(cfg.R_or_identity(1), InvalidArgument);
}

}  // namespace
}  // namespace ancm
