#include <cmath>
#include <random>

#include "ancm/errors.hpp"
#include "ancm/sim.hpp"

namespace ancm {

Disturbance::Disturbance(int n, const DisturbanceConfig& cfg) : n_(n), sup_(cfg.sup) {
  if (cfg.sup < 0.0) throw InvalidArgument("disturbance bound must be >= 0");
  if (cfg.sup == 0.0) return;
  if (cfg.modes < 1) throw InvalidArgument("disturbance needs at least one mode");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 2.0 * M_PI);
  // amplitude so that the unclipped field is typically above the bound
  const double a = 1.5 * cfg.sup / std::sqrt(0.5 * cfg.modes);
  for (int c : cfg.channels) {
    if (c < 0 || c >= n) throw InvalidArgument("disturbance channel out of range");
  }
  for (int k = 0; k < cfg.modes; ++k) {
    Vec dir = Vec::NullaryExpr(n, [&] { return N(rng); });
    if (!cfg.channels.empty()) {
      Vec masked = Vec::Zero(n);
      for (int c : cfg.channels) masked(c) = dir(c);
      dir = masked;
    }
    amp_.push_back(a * dir / dir.norm());
    wave_.push_back(cfg.spatial_freq * Vec::NullaryExpr(n, [&] { return N(rng); }) / std::sqrt(n));
    rate_.push_back(cfg.temporal_freq * (0.5 + std::abs(N(rng))));
    phase_.push_back(U(rng));
  }
}

Vec Disturbance::operator()(double t, const Vec& x) const {
  if (sup_ == 0.0) return Vec::Zero(x.size());
  if (x.size() != n_) throw InvalidArgument("disturbance state size mismatch");
  Vec d = Vec::Zero(n_);
  for (size_t k = 0; k < amp_.size(); ++k) {
    d += amp_[k] * std::sin(wave_[k].dot(x) + rate_[k] * t + phase_[k]);
  }
  const double norm = d.norm();
  if (norm > sup_) {
    d *= sup_ / norm;
    while (d.norm() > sup_) d *= 1.0 - 1e-15;
  }
  return d;
}

}  // namespace ancm
