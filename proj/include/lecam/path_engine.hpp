#pragma once

// Fine-grid simulators for every continuous-time process of the two chains,
// the Euler autoregression, and the deterministic ODEs z, z_bar.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lecam/error.hpp"
#include "lecam/lamperti.hpp"
#include "lecam/model.hpp"
#include "lecam/random.hpp"
#include "lecam/sample_path.hpp"
#include "lecam/time_change.hpp"

namespace lecam {

struct FineGridConfig {
  int steps_per_interval = 64;     ///< power of two
  double horizon_multiplier = 1.0; ///< simulated span / T

  double dt(const ModelSpec& spec) const {
    return spec.horizon_T / (static_cast<double>(spec.n_obs) * steps_per_interval);
  }
  /// Fine steps covering [0, T].
  std::size_t steps_to_T(const ModelSpec& spec) const {
    return static_cast<std::size_t>(spec.n_obs) * static_cast<std::size_t>(steps_per_interval);
  }
  /// Fine steps covering [0, horizon_multiplier T].
  std::size_t span_steps(const ModelSpec& spec) const {
    const double raw = horizon_multiplier * static_cast<double>(steps_to_T(spec));
    return static_cast<std::size_t>(std::ceil(raw - 1e-9));
  }

  /// Span sigma1^2 T (1 + margin), enough for A_T and A_bar^n_T.
  static FineGridConfig for_reclocking(const ModelSpec& spec, int steps_per_interval,
                                       double margin = kDefaultHorizonMargin) {
    const double s1 = spec.diffusion.sigma1;
    return FineGridConfig{steps_per_interval, std::max(1.0, s1 * s1 * (1.0 + margin))};
  }

  void validate() const {
    if (steps_per_interval < 1 || (steps_per_interval & (steps_per_interval - 1)) != 0)
      throw std::invalid_argument("steps_per_interval must be a power of two");
    if (!(horizon_multiplier >= 1.0)) throw std::invalid_argument("horizon_multiplier must be >= 1");
  }
};

/// Driver whose step equals the grid's fine step.
inline BrownianDriver make_driver(std::uint64_t seed, std::uint64_t stream_id, const ModelSpec& spec,
                                  const FineGridConfig& grid) {
  return BrownianDriver{seed, stream_id, grid.dt(spec)};
}

namespace detail {

// Brownian increments for `steps` grid steps; the driver may be finer than
// the grid by a power of two.
inline std::vector<double> grid_increments(const BrownianDriver& driver, double grid_dt,
                                           std::size_t steps) {
  const std::size_t factor = refinement_factor(grid_dt, driver.dt);
  std::vector<double> dw(steps);
  driver.fill_increments(0, dw, factor);
  return dw;
}

inline void check_finite(double v, std::size_t step, const char* process) {
  if (!std::isfinite(v)) throw SimulationBlowUp(step, process);
}

}  // namespace detail

/// Euler-Maruyama for dy = f(y) dt + eps sigma(y) dW on [0, T], y_0 = w.
inline SamplePath simulate_y(const ModelSpec& spec, const FineGridConfig& grid,
                             const BrownianDriver& driver) {
  grid.validate();
  const double dt = grid.dt(spec);
  const std::size_t N = grid.steps_to_T(spec);
  const auto dw = detail::grid_increments(driver, dt, N);
  std::vector<double> y(N + 1);
  y[0] = spec.w;
  const double eps = spec.epsilon;
  for (std::size_t k = 0; k < N; ++k) {
    const double x = y[k];
    y[k + 1] = x + spec.f(x) * dt + eps * spec.sigma(x) * dw[k];
    detail::check_finite(y[k + 1], k + 1, "y");
  }
  return SamplePath(0.0, dt, std::move(y));
}

/// M2: coefficients frozen at the observation times, f_bar_n dt + eps sigma_bar_n dW.
inline SamplePath simulate_y_bar(const ModelSpec& spec, const FineGridConfig& grid,
                                 const BrownianDriver& driver) {
  grid.validate();
  const double dt = grid.dt(spec);
  const std::size_t N = grid.steps_to_T(spec);
  const auto spi = static_cast<std::size_t>(grid.steps_per_interval);
  const auto dw = detail::grid_increments(driver, dt, N);
  std::vector<double> y(N + 1);
  y[0] = spec.w;
  const double eps = spec.epsilon;
  double fl = 0.0, sl = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    if (k % spi == 0) {
      const bool skip = k == 0 && spec.freeze == FreezeConvention::skip_first_interval;
      fl = skip ? 0.0 : spec.f(y[k]);
      sl = skip ? 0.0 : spec.sigma(y[k]);
    }
    y[k + 1] = y[k] + fl * dt + eps * sl * dw[k];
    detail::check_finite(y[k + 1], k + 1, "y_bar");
  }
  return SamplePath(0.0, dt, std::move(y));
}

enum class ConstantEpsForm { f_over_sigma2, gbar, zeta_bar };

/// Constant-diffusion processes dxi = drift dt + eps dW on [0, horizon_multiplier T].
/// gbar: the A_bar^n knots and g_bar_n levels are read from the path's own
/// past (knots continue beyond A_bar^n_T with the same recursion).
/// zeta_bar: drift (f/sigma^2)(x) sigma^2(x(t_i)) on [t_i, t_{i+1}), grid knots i T/n.
inline SamplePath simulate_constant_eps(ConstantEpsForm form, const ModelSpec& spec,
                                        const FineGridConfig& grid, const BrownianDriver& driver) {
  grid.validate();
  const double dt = grid.dt(spec);
  const std::size_t N = grid.span_steps(spec);
  const auto spi = static_cast<std::size_t>(grid.steps_per_interval);
  const auto dw = detail::grid_increments(driver, dt, N);
  std::vector<double> x(N + 1);
  x[0] = spec.w;
  const double eps = spec.epsilon;
  switch (form) {
    case ConstantEpsForm::f_over_sigma2:
      for (std::size_t k = 0; k < N; ++k) {
        x[k + 1] = x[k] + spec.f_over_sigma2(x[k]) * dt + eps * dw[k];
        detail::check_finite(x[k + 1], k + 1, "xi");
      }
      break;
    case ConstantEpsForm::gbar: {
      AbarKnotTracker tracker(spec);
      tracker.reset(x[0]);
      for (std::size_t k = 0; k < N; ++k) {
        tracker.advance(static_cast<double>(k) * dt,
                        PathPrefix{std::span<const double>(x.data(), k + 1), 0.0, dt});
        x[k + 1] = x[k] + tracker.level() * dt + eps * dw[k];
        detail::check_finite(x[k + 1], k + 1, "xi_bar");
      }
      break;
    }
    case ConstantEpsForm::zeta_bar: {
      double s2 = 0.0;
      for (std::size_t k = 0; k < N; ++k) {
        if (k % spi == 0) {
          const bool skip = k == 0 && spec.freeze == FreezeConvention::skip_first_interval;
          s2 = skip ? 0.0 : spec.sigma2(x[k]);
        }
        x[k + 1] = x[k] + spec.f_over_sigma2(x[k]) * s2 * dt + eps * dw[k];
        detail::check_finite(x[k + 1], k + 1, "zeta_bar");
      }
      break;
    }
  }
  return SamplePath(0.0, dt, std::move(x));
}

/// Z_i = Z_{i-1} + (T/n) f(Z_{i-1}) + eps sqrt(T/n) sigma(Z_{i-1}) xi_i, Z_0 = w.
/// The xi_i come from a stream independent of the driver's fine increments.
inline std::vector<double> simulate_euler(const ModelSpec& spec, const BrownianDriver& driver) {
  const auto n = static_cast<std::size_t>(spec.n_obs);
  const BrownianDriver innov = driver.substream(StreamPurpose::euler_innovations);
  std::vector<double> xi(n);
  innov.fill_normals(0, xi);
  const double h = spec.obs_step();
  const double sh = std::sqrt(h);
  std::vector<double> z(n + 1);
  z[0] = spec.w;
  for (std::size_t i = 1; i <= n; ++i) {
    const double p = z[i - 1];
    z[i] = p + h * spec.f(p) + spec.epsilon * sh * spec.sigma(p) * xi[i - 1];
  }
  return z;
}

enum class MuForm { mu, mu_bar };

/// Unit-diffusion Lamperti processes on [0, T] from F(w). mu_bar freezes b at
/// the observation times: b(mu(t_i)) on (t_i, t_{i+1}].
inline SamplePath simulate_mu_family(MuForm form, const ModelSpec& spec, const FineGridConfig& grid,
                                     const BrownianDriver& driver, const TransformTable& table) {
  grid.validate();
  if (!spec.diffusion.has_derivative())
    throw ModelError("mu processes need sigma' but the diffusion declares no derivative");
  const double dt = grid.dt(spec);
  const std::size_t N = grid.steps_to_T(spec);
  const auto spi = static_cast<std::size_t>(grid.steps_per_interval);
  const auto dw = detail::grid_increments(driver, dt, N);
  std::vector<double> mu(N + 1);
  mu[0] = table.F(spec.w);
  double level = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    double b;
    if (form == MuForm::mu) {
      b = drift_b(table, spec, mu[k]);
    } else {
      if (k % spi == 0) level = drift_b(table, spec, mu[k]);
      b = level;
    }
    mu[k + 1] = mu[k] + b * dt + dw[k];
    detail::check_finite(mu[k + 1], k + 1, form == MuForm::mu ? "mu" : "mu_bar");
  }
  return SamplePath(0.0, dt, std::move(mu));
}

enum class OdeForm { z, z_bar };

/// RK4 on the fine grid over [0, horizon_multiplier T]. z_bar freezes
/// sigma^2(z_bar(t_i)) over [t_i, t_{i+1}).
inline SamplePath solve_ode(OdeForm form, const ModelSpec& spec, const FineGridConfig& grid) {
  grid.validate();
  const double dt = grid.dt(spec);
  const std::size_t N = grid.span_steps(spec);
  const auto spi = static_cast<std::size_t>(grid.steps_per_interval);
  std::vector<double> z(N + 1);
  z[0] = spec.w;
  double s2 = 1.0;
  std::function<double(double)> rhs;
  if (form == OdeForm::z) {
    rhs = [&spec](double x) { return spec.f(x); };
  } else {
    rhs = [&spec, &s2](double x) { return spec.f_over_sigma2(x) * s2; };
  }
  for (std::size_t k = 0; k < N; ++k) {
    if (form == OdeForm::z_bar && k % spi == 0) {
      const bool skip = k == 0 && spec.freeze == FreezeConvention::skip_first_interval;
      s2 = skip ? 0.0 : spec.sigma2(z[k]);
    }
    const double x = z[k];
    const double k1 = rhs(x);
    const double k2 = rhs(x + 0.5 * dt * k1);
    const double k3 = rhs(x + 0.5 * dt * k2);
    const double k4 = rhs(x + dt * k3);
    z[k + 1] = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    detail::check_finite(z[k + 1], k + 1, form == OdeForm::z ? "z" : "z_bar");
  }
  return SamplePath(0.0, dt, std::move(z));
}

// ---------------------------------------------------------------------------
// Experiment samplers

enum class ProcessKind { y, y_bar, xi, xi_gbar, zeta_bar, euler, mu, mu_bar };

/// How an experiment's observation is produced: which process, where it is
/// stopped, and whether only the grid values are observed.
struct SamplerInfo {
  ProcessKind process = ProcessKind::y;
  StopKind stop = StopKind::fixed_T;
  bool grid_only = false;
};

inline SamplerInfo sampler_for(ExperimentId id) {
  switch (id) {
    case ExperimentId::M1: return {ProcessKind::y, StopKind::fixed_T, false};
    case ExperimentId::M2: return {ProcessKind::y_bar, StopKind::fixed_T, false};
    case ExperimentId::M3: return {ProcessKind::xi, StopKind::A_T, false};
    case ExperimentId::M4: return {ProcessKind::xi_gbar, StopKind::A_bar_T_n, false};
    case ExperimentId::M5: return {ProcessKind::xi, StopKind::S_T_n, false};
    case ExperimentId::M6: return {ProcessKind::xi, StopKind::A_bar_T_n, false};
    case ExperimentId::M7: return {ProcessKind::euler, StopKind::fixed_T, true};
    case ExperimentId::N1: return {ProcessKind::y, StopKind::fixed_T, false};
    case ExperimentId::N2: return {ProcessKind::y, StopKind::fixed_T, true};
    case ExperimentId::N3: return {ProcessKind::mu, StopKind::fixed_T, false};
    case ExperimentId::N4: return {ProcessKind::mu, StopKind::fixed_T, true};
    case ExperimentId::N5: return {ProcessKind::mu_bar, StopKind::fixed_T, false};
    case ExperimentId::N6: return {ProcessKind::mu_bar, StopKind::fixed_T, true};
  }
  return {};
}

inline bool needs_reclocking_span(ProcessKind p) {
  return p == ProcessKind::xi || p == ProcessKind::xi_gbar || p == ProcessKind::zeta_bar;
}

/// Simulates one path of the given process. Euler output is returned as a
/// path on the observation grid. mu processes need a transform table.
inline SamplePath simulate_process(ProcessKind p, const ModelSpec& spec, const FineGridConfig& grid,
                                   const BrownianDriver& driver,
                                   const TransformTable* table = nullptr) {
  switch (p) {
    case ProcessKind::y: return simulate_y(spec, grid, driver);
    case ProcessKind::y_bar: return simulate_y_bar(spec, grid, driver);
    case ProcessKind::xi: return simulate_constant_eps(ConstantEpsForm::f_over_sigma2, spec, grid, driver);
    case ProcessKind::xi_gbar: return simulate_constant_eps(ConstantEpsForm::gbar, spec, grid, driver);
    case ProcessKind::zeta_bar: return simulate_constant_eps(ConstantEpsForm::zeta_bar, spec, grid, driver);
    case ProcessKind::euler: {
      auto z = simulate_euler(spec, driver);
      return SamplePath(0.0, spec.obs_step(), std::move(z));
    }
    case ProcessKind::mu:
    case ProcessKind::mu_bar:
      if (table == nullptr) throw std::invalid_argument("mu processes need a transform table");
      return simulate_mu_family(p == ProcessKind::mu ? MuForm::mu : MuForm::mu_bar, spec, grid,
                                driver, *table);
  }
  throw std::logic_error("unknown process");
}

}  // namespace lecam
