#include <cmath>

#include "ancm/dynamics.hpp"
#include "ancm/errors.hpp"

namespace ancm {

void CartPole::validate() const {
  if (!(m_c > 0.0 && m > 0.0 && l > 0.0)) {
    throw InvalidArgument("cart-pole masses and length must be positive");
  }
}

Eigen::Matrix2d cartpole_mass_matrix(const CartPole& cp, double angle) {
  const double ml = cp.m * cp.l;
  Eigen::Matrix2d mm;
  mm << cp.m_c + cp.m, ml * std::cos(angle),
        ml * std::cos(angle), 4.0 / 3.0 * ml * cp.l;
  return mm;
}

namespace {

Eigen::Matrix2d inverse_mass(const CartPole& cp, double angle) {
  const Eigen::Matrix2d mm = cartpole_mass_matrix(cp, angle);
  const double det = mm.determinant();
  if (std::abs(det) < 1e-12) throw SingularMass("cart-pole mass matrix determinant below 1e-12");
  Eigen::Matrix2d inv;
  inv << mm(1, 1), -mm(0, 1), -mm(1, 0), mm(0, 0);
  return inv / det;
}

// Generalized forces without drag and input.
Eigen::Vector2d conservative_forces(const CartPole& cp, const Vec& x) {
  const double ml = cp.m * cp.l;
  return {ml * x(3) * x(3) * std::sin(x(1)), ml * cp.g * std::sin(x(1))};
}

}  // namespace

Vec eval_cartpole(const CartPole& cp, const Vec& x, double u) {
  if (x.size() != 4) throw InvalidArgument("cart-pole state has 4 entries");
  const Eigen::Matrix2d inv = inverse_mass(cp, x(1));
  Eigen::Vector2d rhs = conservative_forces(cp, x);
  rhs(0) += -cp.mu_c * x(2) + u;
  rhs(1) += -cp.mu_p * x(3);
  const Eigen::Vector2d acc = inv * rhs;
  Vec xd(4);
  xd << x(2), x(3), acc(0), acc(1);
  return xd;
}

CartPoleRegressors cartpole_regressors(const CartPole& cp, const Vec& x) {
  if (x.size() != 4) throw InvalidArgument("cart-pole state has 4 entries");
  const Eigen::Matrix2d inv = inverse_mass(cp, x(1));
  CartPoleRegressors out;
  out.Y_f = Mat::Zero(4, 2);
  out.Y_f.block<2, 1>(2, 0) = inv * Eigen::Vector2d(-x(2), 0.0);
  out.Y_f.block<2, 1>(2, 1) = inv * Eigen::Vector2d(0.0, -x(3));
  out.theta = Eigen::Vector2d(cp.mu_c, cp.mu_p);
  return out;
}

ParametricSystem cartpole_parametric(const CartPole& cp, const Box& domain) {
  cp.validate();
  CartPole dragless = cp;
  dragless.mu_c = 0.0;
  dragless.mu_p = 0.0;
  auto f0 = [dragless](const Vec& x) { return eval_cartpole(dragless, x, 0.0); };
  auto B0 = [dragless](const Vec& x) {
    const Eigen::Matrix2d inv = inverse_mass(dragless, x(1));
    Mat b = Mat::Zero(4, 1);
    b.block<2, 1>(2, 0) = inv.col(0);
    return b;
  };
  auto Yf = [dragless](const Vec& x) { return cartpole_regressors(dragless, x).Y_f; };
  // Drag does not enter the input matrix.
  return ParametricSystem(4, 1, 2, 2, f0, B0, Yf, nullptr, nullptr, domain);
}

SystemModel cartpole_model(const CartPole& cp, const Box& domain) {
  return cartpole_parametric(cp, domain).at(Eigen::Vector2d(cp.mu_c, cp.mu_p));
}

AffineUncertainSystem cartpole_affine(const CartPole& cp, const Box& domain) {
  CartPole dragless = cp;
  dragless.mu_c = 0.0;
  dragless.mu_p = 0.0;
  AffineUncertainSystem sys;
  sys.base = cartpole_model(dragless, domain);
  sys.p = 2;
  sys.Delta = [dragless](const Vec& x) -> Mat {
    return -cartpole_regressors(dragless, x).Y_f.transpose();
  };
  return sys;
}

double cartpole_energy(const CartPole& cp, const Vec& x) {
  const double ml = cp.m * cp.l;
  return 0.5 * (cp.m_c + cp.m) * x(2) * x(2) + ml * std::cos(x(1)) * x(2) * x(3) +
         2.0 / 3.0 * ml * cp.l * x(3) * x(3) + ml * cp.g * std::cos(x(1));
}

}  // namespace ancm
