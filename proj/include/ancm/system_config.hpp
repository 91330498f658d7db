#pragma once

#include <string>

#include "ancm/dynamics.hpp"
#include "ancm/kv_config.hpp"

namespace ancm {

/// A system loaded from a key-value file.
///
/// Recognized keys:
///   model = cartpole | linear
///   domain_lo, domain_hi          state box
///   theta_lo, theta_hi            parameter box (parametric models)
///   b_bar, rho_bar, d_bar         declared bounds
///   cartpole: g, m_c, m, mu_c, mu_p, l
///   linear:   n, m, A (row-major), B (row-major)
struct SystemDefinition {
  std::string name;
  CartPole cartpole;
  ParametricSystem parametric;
  Vec theta_true;
  Box domain;
  Box theta_box;
  ModelBounds bounds;
};

SystemDefinition load_system(const KvConfig& cfg);

}  // namespace ancm
