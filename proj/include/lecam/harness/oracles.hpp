#pragma once

// Closed forms the suites compare against. Written directly from the Gaussian
// densities, without going through the likelihood module.

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>

#include "lecam/model.hpp"
#include "lecam/stats.hpp"

namespace lecam::harness {

inline double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - d * d / (2.0 * var);
}

/// log prod N(w_{i+1}; w_i + h f(w_i), eps^2 h sigma^2(w_i))
///   - log prod N(w_{i+1}; w_i, eps^2 h sigma^2(w_i)).
inline double gaussian_product_logratio(std::span<const double> obs, const ModelSpec& spec) {
  if (obs.size() != static_cast<std::size_t>(spec.n_obs) + 1) throw std::invalid_argument("observation count");
  const double h = spec.obs_step();
  double with_drift = 0.0, without = 0.0;
  for (std::size_t i = 0; i + 1 < obs.size(); ++i) {
    const double x = obs[i];
    const double var = spec.epsilon * spec.epsilon * h * spec.sigma2(x);
    with_drift += normal_logpdf(obs[i + 1], x + h * spec.f(x), var);
    without += normal_logpdf(obs[i + 1], x, var);
  }
  return with_drift - without;
}

/// TV between eps W + c1 t and eps W + c0 t on [0, T].
inline double gaussian_shift_tv(double c1, double c0, double T, double eps) {
  return 2.0 * normal_cdf(std::abs(c1 - c0) * std::sqrt(T) / (2.0 * eps)) - 1.0;
}

}  // namespace lecam::harness
