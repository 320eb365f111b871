#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lecam/error.hpp"

namespace lecam {

/// A continuous path stored on a uniform grid t0 + k*dt, read back by linear
/// interpolation between knots.
class SamplePath {
 public:
  SamplePath(double t0, double dt, std::vector<double> values)
      : t0_(t0), dt_(dt), values_(std::move(values)) {
    if (!(dt_ > 0.0) || !std::isfinite(dt_)) {
      throw std::invalid_argument("SamplePath: dt must be positive and finite");
    }
    if (values_.size() < 2) {
      throw std::invalid_argument("SamplePath: at least two knots are required");
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k])) {
        throw std::invalid_argument("SamplePath: non-finite value at knot " +
                                    std::to_string(k));
      }
    }
  }

  double t0() const noexcept { return t0_; }
  double dt() const noexcept { return dt_; }
  std::size_t size() const noexcept { return values_.size(); }
  double t_end() const noexcept { return time_at(values_.size() - 1); }
  double time_at(std::size_t k) const noexcept { return t0_ + static_cast<double>(k) * dt_; }
  double operator[](std::size_t k) const noexcept { return values_[k]; }
  std::span<const double> values() const noexcept { return values_; }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  bool covers(double t) const noexcept {
    const double tol = span_tolerance();
    return t >= t0_ - tol && t <= t_end() + tol;
  }

  /// Linear interpolant at t; throws std::out_of_range outside [t0, t_end].
  double value_at(double t) const {
    if (!covers(t)) {
      throw std::out_of_range("SamplePath::value_at: t=" + std::to_string(t) +
                              " outside [" + std::to_string(t0_) + ", " +
                              std::to_string(t_end()) + "]");
    }
    return interpolate(values_, t0_, dt_, t);
  }

  /// Shared by SamplePath and prefix views so both read paths identically.
  static double interpolate(std::span<const double> v, double t0, double dt, double t) noexcept {
    const double u = (t - t0) / dt;
    if (u <= 0.0) return v.front();
    const auto last = v.size() - 1;
    if (u >= static_cast<double>(last)) return v.back();
    // Queries that land on a knot up to rounding read the knot itself.
    const double r = std::nearbyint(u);
    if (std::abs(u - r) <= 1e-9 * std::max(1.0, r)) return v[static_cast<std::size_t>(r)];
    const auto k = static_cast<std::size_t>(u);
    const double a = u - static_cast<double>(k);
    return v[k] + a * (v[k + 1] - v[k]);
  }

 private:
  double span_tolerance() const noexcept {
    return 1e-12 * std::max(1.0, std::abs(t_end())) + 1e-9 * dt_;
  }

  double t0_;
  double dt_;
  std::vector<double> values_;
};

/// Read-only view of the knots simulated so far. Reading past the last knot is
/// an adaptedness violation.
struct PathPrefix {
  std::span<const double> values;
  double t0 = 0.0;
  double dt = 1.0;

  double t_end() const noexcept {
    return t0 + static_cast<double>(values.size() - 1) * dt;
  }

  double value_at(double t) const {
    if (t > t_end() + 1e-9 * dt) {
      throw AdaptednessError("path read at t=" + std::to_string(t) + " beyond prefix end " +
                             std::to_string(t_end()));
    }
    return SamplePath::interpolate(values, t0, dt, t);
  }

  double back() const noexcept { return values.back(); }
};

}  // namespace lecam
