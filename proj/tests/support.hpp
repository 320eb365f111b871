#pragma once

#include <cmath>
#include <string>

#include "lecam/model.hpp"

namespace lecam::testing {

inline ModelSpec builtin(const std::string& name, double eps = 0.1, double w = 0.5, int n = 16) {
  const auto m = find_builtin(name);
  if (!m) throw std::invalid_argument("no builtin " + name);
  ModelSpec s;
  s.drift = m->drift;
  s.diffusion = m->diffusion;
  s.epsilon = eps;
  s.horizon_T = 1.0;
  s.w = w;
  s.n_obs = n;
  return s;
}

// f = sin, sigma = 1 + sin/2
inline ModelSpec default_model(double eps = 0.1, int n = 16) {
  ModelSpec s = builtin("sin-drift/half-sin-sigma", eps, 0.5, n);
  s.fg_lipschitz_L = 1.75;
  return s;
}

}  // namespace lecam::testing
