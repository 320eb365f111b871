#pragma once

// Clocks rho, theta and their inverses eta, A; the discrete clock A_bar^n;
// frozen coefficients; the re-clocking maps Phi/Psi; stopping and extension.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lecam/error.hpp"
#include "lecam/lamperti.hpp"
#include "lecam/model.hpp"
#include "lecam/random.hpp"
#include "lecam/sample_path.hpp"

namespace lecam {

enum class ClockKind { rho, theta, eta, A, A_bar_n };

inline constexpr std::string_view to_string(ClockKind k) {
  switch (k) {
    case ClockKind::rho: return "rho";
    case ClockKind::theta: return "theta";
    case ClockKind::eta: return "eta";
    case ClockKind::A: return "A";
    case ClockKind::A_bar_n: return "A_bar_n";
  }
  return "?";
}

struct ClockResult {
  ClockKind kind = ClockKind::rho;
  double query_time = 0.0;
  double value = 0.0;
  bool path_span_ok = true;
};

/// Cumulative trapezoid integral of g(path) on the path's own grid.
class ClockIntegral {
 public:
  template <class G>
  ClockIntegral(const SamplePath& path, G&& g) : t0_(path.t0()), dt_(path.dt()) {
    acc_.resize(path.size());
    acc_[0] = 0.0;
    double prev = g(path[0]);
    for (std::size_t k = 1; k < path.size(); ++k) {
      const double cur = g(path[k]);
      acc_[k] = acc_[k - 1] + 0.5 * dt_ * (prev + cur);
      prev = cur;
    }
  }

  static ClockIntegral rho(const SamplePath& path, const ModelSpec& spec) {
    return ClockIntegral(path, [&spec](double x) { return spec.sigma2(x); });
  }
  static ClockIntegral theta(const SamplePath& path, const ModelSpec& spec) {
    return ClockIntegral(path, [&spec](double x) { return 1.0 / spec.sigma2(x); });
  }

  double total() const noexcept { return acc_.back(); }
  const std::vector<double>& accumulator() const noexcept { return acc_; }
  double span_end() const noexcept { return t0_ + static_cast<double>(acc_.size() - 1) * dt_; }

  /// Integral up to s, linear between grid knots.
  double at(double s) const {
    const double u = (s - t0_) / dt_;
    if (u < -1e-9 || u > static_cast<double>(acc_.size() - 1) + 1e-9)
      throw ClockOverrun(s, span_end());
    return SamplePath::interpolate(acc_, t0_, dt_, s);
  }

  /// Right-continuous inverse inf{s : integral(s) >= level}. Ties take the left endpoint.
  double inverse(double level) const {
    if (level <= 0.0) return t0_;
    if (level > acc_.back()) throw ClockOverrun(level, acc_.back());
    const auto it = std::lower_bound(acc_.begin(), acc_.end(), level);
    const auto k = static_cast<std::size_t>(it - acc_.begin());
    if (k == 0 || acc_[k] == level) return t0_ + static_cast<double>(k) * dt_;
    const double a = (level - acc_[k - 1]) / (acc_[k] - acc_[k - 1]);
    return t0_ + (static_cast<double>(k - 1) + a) * dt_;
  }

 private:
  double t0_;
  double dt_;
  std::vector<double> acc_;
};

namespace detail {

#ifndef NDEBUG
inline void check_clock_bounds(const ModelSpec& spec, ClockKind kind, double q, double v) {
  const double s0 = spec.diffusion.sigma0 * spec.diffusion.sigma0;
  const double s1 = spec.diffusion.sigma1 * spec.diffusion.sigma1;
  const double tol = 1e-9 * (1.0 + std::abs(q) * s1 + 1.0 / s0);
  double lo = 0.0, hi = 0.0;
  switch (kind) {
    case ClockKind::rho: lo = q * s0; hi = q * s1; break;
    case ClockKind::theta: lo = q / s1; hi = q / s0; break;
    case ClockKind::eta: lo = q / s1; hi = q / s0; break;
    case ClockKind::A: case ClockKind::A_bar_n: lo = q * s0; hi = q * s1; break;
  }
  if (v < lo - tol || v > hi + tol)
    throw std::logic_error("clock " + std::string(to_string(kind)) + " outside its sigma bounds");
}
#else
inline void check_clock_bounds(const ModelSpec&, ClockKind, double, double) {}
#endif

}  // namespace detail

/// Knots A_bar^n_{t_i} of the discrete clock for i = 0..count, built from the
/// recursion A_{i+1} = A_i + sigma^2(omega(A_i)) T/n. Throws when a knot
/// whose path value is needed lies outside the path span.
inline std::vector<double> a_bar_knots(const SamplePath& path, const ModelSpec& spec, int count) {
  const double h = spec.obs_step();
  std::vector<double> knots(static_cast<std::size_t>(count) + 1);
  knots[0] = 0.0;
  for (int i = 0; i < count; ++i) {
    const double a = knots[static_cast<std::size_t>(i)];
    if (!path.covers(a)) throw ClockOverrun(a, path.t_end());
    knots[static_cast<std::size_t>(i) + 1] = a + spec.sigma2(path.value_at(a)) * h;
  }
  return knots;
}

inline std::vector<double> a_bar_knots(const SamplePath& path, const ModelSpec& spec) {
  return a_bar_knots(path, spec, spec.n_obs);
}

/// A_bar^n_t = A_bar_{t_{i-1}} + sigma^2(omega(A_bar_{t_{i-1}})) (t - t_{i-1}) on (t_{i-1}, t_i].
inline ClockResult a_bar_n(const SamplePath& path, const ModelSpec& spec, double t) {
  if (t < 0.0) throw std::invalid_argument("a_bar_n: negative time");
  ClockResult r{ClockKind::A_bar_n, t, 0.0, true};
  if (t == 0.0) return r;
  const double h = spec.obs_step();
  const auto j = static_cast<int>(std::max(0.0, std::ceil(t / h - 1e-12) - 1.0));
  const auto knots = a_bar_knots(path, spec, j);
  const double a = knots.back();
  if (!path.covers(a)) throw ClockOverrun(a, path.t_end());
  r.value = a + spec.sigma2(path.value_at(a)) * (t - j * h);
  detail::check_clock_bounds(spec, r.kind, t, r.value);
  return r;
}

inline ClockResult clock(const SamplePath& path, const ModelSpec& spec, ClockKind kind, double q) {
  if (q < 0.0) throw std::invalid_argument("clock: negative query time");
  if (path.t0() != 0.0) throw std::invalid_argument("clock: path must start at 0");
  ClockResult r{kind, q, 0.0, true};
  switch (kind) {
    case ClockKind::rho: r.value = ClockIntegral::rho(path, spec).at(q); break;
    case ClockKind::theta: r.value = ClockIntegral::theta(path, spec).at(q); break;
    case ClockKind::eta: r.value = ClockIntegral::rho(path, spec).inverse(q); break;
    case ClockKind::A: r.value = ClockIntegral::theta(path, spec).inverse(q); break;
    case ClockKind::A_bar_n: return a_bar_n(path, spec, q);
  }
  detail::check_clock_bounds(spec, kind, q, r.value);
  return r;
}

/// Online tracker of the A_bar^n knots and the g_bar_n level for a path that
/// is being built. The level returned after advance(t) applies on the step
/// starting at t.
class AbarKnotTracker {
 public:
  explicit AbarKnotTracker(const ModelSpec& spec) : spec_(&spec), h_(spec.obs_step()) {}

  void reset(double x0) {
    current_ = 0.0;
    index_ = 0;
    level_ = spec_->f_over_sigma2(x0);
    next_ = spec_->sigma2(x0) * h_;
  }

  void advance(double t, const PathPrefix& prefix) {
    while (next_ <= t) {
      current_ = next_;
      const double x = prefix.value_at(current_);
      level_ = spec_->f_over_sigma2(x);
      next_ = current_ + spec_->sigma2(x) * h_;
      ++index_;
    }
  }

  double level() const noexcept { return level_; }
  int index() const noexcept { return index_; }
  double current_knot() const noexcept { return current_; }
  double next_knot() const noexcept { return next_; }

 private:
  const ModelSpec* spec_;
  double h_;
  double current_ = 0.0;
  double next_ = 0.0;
  double level_ = 0.0;
  int index_ = 0;
};

// ---------------------------------------------------------------------------
// Piecewise-constant coefficients

enum class CoeffKind { f_bar_n, sigma_bar_n, g_bar_n, b_bar_n };

struct PiecewiseCoeff {
  CoeffKind kind = CoeffKind::f_bar_n;
  std::vector<double> knots;
  std::vector<double> levels;
  bool left_open = false;  ///< intervals (k_i, k_{i+1}] instead of [k_i, k_{i+1})

  /// Level of the interval containing t; 0 outside every interval.
  double at(double t) const {
    if (knots.size() < 2) return 0.0;
    std::size_t i;
    if (left_open) {
      if (t <= knots.front() || t > knots.back()) return 0.0;
      i = static_cast<std::size_t>(std::lower_bound(knots.begin(), knots.end(), t) - knots.begin()) - 1;
    } else {
      if (t < knots.front() || t >= knots.back()) return 0.0;
      i = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin()) - 1;
    }
    return levels[i];
  }
};

/// Frozen coefficient on the observation grid (f_bar_n, sigma_bar_n, b_bar_n)
/// or on the A_bar^n knots (g_bar_n). b_bar_n reads a mu path and needs the
/// transform table.
inline PiecewiseCoeff piecewise_coeffs(const SamplePath& path, const ModelSpec& spec, CoeffKind kind,
                                       const TransformTable* table = nullptr) {
  const int n = spec.n_obs;
  PiecewiseCoeff c;
  c.kind = kind;
  c.levels.resize(static_cast<std::size_t>(n));
  if (kind == CoeffKind::g_bar_n) {
    c.knots = a_bar_knots(path, spec, n);
    c.left_open = true;
    for (int i = 0; i < n; ++i)
      c.levels[static_cast<std::size_t>(i)] =
          spec.f_over_sigma2(path.value_at(c.knots[static_cast<std::size_t>(i)]));
    return c;
  }
  if (kind == CoeffKind::b_bar_n && table == nullptr)
    throw std::invalid_argument("piecewise_coeffs: b_bar_n needs a transform table");
  c.knots.resize(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) c.knots[static_cast<std::size_t>(i)] = spec.obs_time(i);
  c.left_open = kind == CoeffKind::b_bar_n;
  for (int i = 0; i < n; ++i) {
    const double x = path.value_at(c.knots[static_cast<std::size_t>(i)]);
    double level = 0.0;
    switch (kind) {
      case CoeffKind::f_bar_n: level = spec.f(x); break;
      case CoeffKind::sigma_bar_n: level = spec.sigma(x); break;
      case CoeffKind::b_bar_n: level = drift_b(*table, spec, x); break;
      case CoeffKind::g_bar_n: break;
    }
    if (i == 0 && spec.freeze == FreezeConvention::skip_first_interval &&
        kind != CoeffKind::b_bar_n)
      level = 0.0;
    c.levels[static_cast<std::size_t>(i)] = level;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Stopping and re-clocking

enum class StopKind { A_T, A_bar_T_n, S_T_n, fixed_T };

inline constexpr std::string_view to_string(StopKind k) {
  switch (k) {
    case StopKind::A_T: return "A_T";
    case StopKind::A_bar_T_n: return "A_bar_T_n";
    case StopKind::S_T_n: return "S_T_n";
    case StopKind::fixed_T: return "fixed_T";
  }
  return "?";
}

/// A path observed on [0, stop_time].
struct StoppedPath {
  SamplePath path;
  double stop_time = 0.0;
  StopKind stop_kind = StopKind::fixed_T;
};

inline double stop_time_of(const SamplePath& path, const ModelSpec& spec, StopKind kind) {
  const double T = spec.horizon_T;
  switch (kind) {
    case StopKind::fixed_T: return T;
    case StopKind::A_T: return ClockIntegral::theta(path, spec).inverse(T);
    case StopKind::A_bar_T_n: return a_bar_n(path, spec, T).value;
    case StopKind::S_T_n: {
      const double a = ClockIntegral::theta(path, spec).inverse(T);
      const double ab = a_bar_n(path, spec, T).value;
      return a <= ab + 1e-12 ? a : ab;
    }
  }
  return T;
}

inline StoppedPath stop_path(SamplePath path, const ModelSpec& spec, StopKind kind) {
  const double s = stop_time_of(path, spec, kind);
  if (!path.covers(s)) throw ClockOverrun(s, path.t_end());
  return StoppedPath{std::move(path), s, kind};
}

/// Phi: omega on [0, T] to (omega(eta_t) : t in [0, rho_T]), resampled on the
/// input's fine step. The stop time is rho_T.
inline StoppedPath phi_map(const SamplePath& path_on_0T, const ModelSpec& spec) {
  const SamplePath& x = path_on_0T;
  const double T = spec.horizon_T;
  if (x.t0() != 0.0 || !x.covers(T)) throw std::invalid_argument("phi_map: input must span [0, T]");
  const ClockIntegral rho = ClockIntegral::rho(x, spec);
  const double rho_T = rho.at(T);
  const double dt = x.dt();
  const auto K = static_cast<std::size_t>(std::floor(rho_T / dt)) + 1;
  std::vector<double> out(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    const double level = static_cast<double>(k) * dt;
    const double eta = level >= rho_T ? T : std::min(rho.inverse(level), T);
    out[k] = x.value_at(eta);
  }
  return StoppedPath{SamplePath(0.0, dt, std::move(out)), rho_T, StopKind::A_T};
}

/// Psi: (omega_t : t <= A_T) to (omega(A_t) : t in [0, T]) on the same fine step.
inline SamplePath psi_map(const StoppedPath& stopped, const ModelSpec& spec) {
  if (stopped.stop_kind != StopKind::A_T) throw std::invalid_argument("psi_map: needs a path stopped at A_T");
  const SamplePath& x = stopped.path;
  const double T = spec.horizon_T;
  const ClockIntegral theta = ClockIntegral::theta(x, spec);
  const double dt = x.dt();
  const auto K = static_cast<std::size_t>(std::llround(T / dt));
  std::vector<double> out(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    const double t = std::min(static_cast<double>(k) * dt, T);
    out[k] = x.value_at(theta.inverse(t));
  }
  return SamplePath(0.0, dt, std::move(out));
}

inline constexpr double kDefaultHorizonMargin = 0.05;

/// Samples K^n: keeps the path up to S_T^n, continues it with drift-free
/// eps dW increments until the theta clock of the result reaches T, and stops
/// the result at its own A_T.
inline StoppedPath kernel_extend(const StoppedPath& stopped, const ModelSpec& spec,
                                 const BrownianDriver& driver,
                                 double margin = kDefaultHorizonMargin) {
  if (stopped.stop_kind != StopKind::S_T_n)
    throw std::invalid_argument("kernel_extend: needs a path stopped at S_T^n");
  const SamplePath& x = stopped.path;
  const double T = spec.horizon_T;
  const double dt = x.dt();
  const double S = stopped.stop_time;
  const double budget = spec.diffusion.sigma1 * spec.diffusion.sigma1 * T * (1.0 + margin);

  // Theta of the observed segment alone may already reach T.
  const ClockIntegral theta_in = ClockIntegral::theta(x, spec);
  if (theta_in.at(std::min(S, x.t_end())) >= T) {
    const double a = theta_in.inverse(T);
    return StoppedPath{x, a, StopKind::A_T};
  }

  const auto m = static_cast<std::size_t>(std::floor(S / dt + 1e-12));
  std::vector<double> v(x.values().begin(), x.values().begin() + static_cast<std::ptrdiff_t>(m) + 1);
  std::vector<double> acc(m + 1);
  acc[0] = 0.0;
  for (std::size_t k = 1; k <= m; ++k)
    acc[k] = acc[k - 1] + 0.5 * dt * (1.0 / spec.sigma2(v[k - 1]) + 1.0 / spec.sigma2(v[k]));

  const BrownianDriver ext = driver.substream(StreamPurpose::kernel_extension);
  std::uint64_t draw = 0;
  const double eps = spec.epsilon;
  auto append = [&](double value) {
    const std::size_t k = v.size();
    v.push_back(value);
    acc.push_back(acc[k - 1] + 0.5 * dt * (1.0 / spec.sigma2(v[k - 1]) + 1.0 / spec.sigma2(v[k])));
    if (!std::isfinite(value)) throw SimulationBlowUp(k, "kernel extension");
  };

  // The first new knot continues the Brownian path from S, not from knot m.
  const double tm1 = static_cast<double>(m + 1) * dt;
  const double gap = std::max(0.0, tm1 - S);
  append(x.value_at(std::min(S, x.t_end())) + eps * std::sqrt(gap) * ext.normal(draw++));
  bool extra_done = false;
  while (true) {
    if (static_cast<double>(v.size() - 1) * dt > budget) {
      throw ClockOverrun(static_cast<double>(v.size() - 1) * dt, budget);
    }
    if (acc.back() >= T) {
      if (extra_done) break;
      extra_done = true;
    }
    append(v.back() + eps * std::sqrt(dt) * ext.normal(draw++));
  }
  SamplePath out(0.0, dt, std::move(v));
  const double a = ClockIntegral::theta(out, spec).inverse(T);
  return StoppedPath{std::move(out), a, StopKind::A_T};
}

}  // namespace lecam
