#pragma once

// Lamperti transform F(x) = int_0^x du / (eps sigma(u)), its inverse, and the
// unit-diffusion drift b.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "lecam/error.hpp"
#include "lecam/model.hpp"

namespace lecam {

namespace detail {

inline double simpson_recurse(const ScalarFn& g, double a, double b, double fa, double fm, double fb,
                              double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = g(lm);
  const double frm = g(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return simpson_recurse(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of g over [a, b] to absolute tolerance tol.
inline double adaptive_simpson(const ScalarFn& g, double a, double b, double tol) {
  if (a == b) return 0.0;
  const double fa = g(a);
  const double fb = g(b);
  const double fm = g(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_recurse(g, a, b, fa, fm, fb, whole, tol, 40);
}

/// Tabulated F on a uniform knot grid that contains 0. Cubic Hermite
/// interpolation between knots using the exact slopes 1/(eps sigma), linear
/// extrapolation outside with a shared overrun counter.
class TransformTable {
 public:
  TransformTable(std::vector<double> x_knots, std::vector<double> f_values,
                 std::vector<double> slopes, double epsilon)
      : x_(std::move(x_knots)),
        F_(std::move(f_values)),
        s_(std::move(slopes)),
        epsilon_(epsilon),
        overruns_(std::make_shared<std::atomic<std::size_t>>(0)) {
    if (x_.size() < 2 || F_.size() != x_.size() || s_.size() != x_.size())
      throw std::invalid_argument("TransformTable: inconsistent knot arrays");
    hx_ = (x_.back() - x_.front()) / static_cast<double>(x_.size() - 1);
    for (std::size_t j = 0; j + 1 < F_.size(); ++j)
      if (!(F_[j + 1] > F_[j])) throw std::invalid_argument("TransformTable: F not increasing");
  }

  const std::vector<double>& x_knots() const noexcept { return x_; }
  const std::vector<double>& F_values() const noexcept { return F_; }
  double epsilon() const noexcept { return epsilon_; }
  double x_lo() const noexcept { return x_.front(); }
  double x_hi() const noexcept { return x_.back(); }
  double extrapolation_slope_lo() const noexcept { return s_.front(); }
  double extrapolation_slope_hi() const noexcept { return s_.back(); }
  /// Number of evaluations that fell outside the tabulated range.
  std::size_t overrun_count() const noexcept { return overruns_->load(std::memory_order_relaxed); }

  double F(double x) const {
    if (x < x_.front()) {
      note_overrun();
      return F_.front() + s_.front() * (x - x_.front());
    }
    if (x > x_.back()) {
      note_overrun();
      return F_.back() + s_.back() * (x - x_.back());
    }
    const std::size_t j = panel_of(x);
    return hermite(j, x);
  }

  /// Derivative of the interpolant (1/(eps sigma) at knots).
  double dF(double x) const {
    if (x <= x_.front()) return s_.front();
    if (x >= x_.back()) return s_.back();
    return hermite_slope(panel_of(x), x);
  }

  /// F^{-1}(v) with |F(F^{-1}(v)) - v| <= max(1e-10, a few ulps of v).
  double inverse(double v) const {
    if (v < F_.front()) {
      note_overrun();
      return x_.front() + (v - F_.front()) / s_.front();
    }
    if (v > F_.back()) {
      note_overrun();
      return x_.back() + (v - F_.back()) / s_.back();
    }
    auto it = std::upper_bound(F_.begin(), F_.end(), v);
    std::size_t j = it == F_.begin() ? 0 : static_cast<std::size_t>(it - F_.begin()) - 1;
    if (j + 1 >= x_.size()) j = x_.size() - 2;
    if (v == F_[j]) return x_[j];

    const double tol = std::max(1e-10, 8.0 * std::abs(v) * 2.220446049250313e-16);
    double lo = x_[j];
    double hi = x_[j + 1];
    double x = lo + (v - F_[j]) / (F_[j + 1] - F_[j]) * (hi - lo);
    for (int iter = 0; iter < 100; ++iter) {
      const double r = hermite(j, x) - v;
      if (std::abs(r) <= tol) break;
      if (r > 0.0) hi = x; else lo = x;
      const double d = hermite_slope(j, x);
      double next = x - r / d;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (next == x) break;
      x = next;
    }
    return x;
  }

 private:
  std::size_t panel_of(double x) const {
    auto j = static_cast<std::ptrdiff_t>(std::floor((x - x_.front()) / hx_));
    j = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(x_.size()) - 2);
    return static_cast<std::size_t>(j);
  }

  // Fritsch-Carlson limited slopes for panel j.
  std::pair<double, double> panel_slopes(std::size_t j) const {
    const double h = x_[j + 1] - x_[j];
    const double delta = (F_[j + 1] - F_[j]) / h;
    double m0 = s_[j];
    double m1 = s_[j + 1];
    const double a = m0 / delta;
    const double b = m1 / delta;
    const double r = a * a + b * b;
    if (r > 9.0) {
      const double tau = 3.0 / std::sqrt(r);
      m0 = tau * a * delta;
      m1 = tau * b * delta;
    }
    return {m0, m1};
  }

  double hermite(std::size_t j, double x) const {
    const double h = x_[j + 1] - x_[j];
    const double t = (x - x_[j]) / h;
    const auto [m0, m1] = panel_slopes(j);
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * F_[j] + (t3 - 2 * t2 + t) * h * m0 +
           (-2 * t3 + 3 * t2) * F_[j + 1] + (t3 - t2) * h * m1;
  }

  double hermite_slope(std::size_t j, double x) const {
    const double h = x_[j + 1] - x_[j];
    const double t = (x - x_[j]) / h;
    const auto [m0, m1] = panel_slopes(j);
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * F_[j] + (6 * t - 6 * t2) * F_[j + 1]) / h +
           (3 * t2 - 4 * t + 1) * m0 + (3 * t2 - 2 * t) * m1;
  }

  void note_overrun() const { overruns_->fetch_add(1, std::memory_order_relaxed); }

  std::vector<double> x_;
  std::vector<double> F_;
  std::vector<double> s_;
  double epsilon_;
  double hx_ = 1.0;
  std::shared_ptr<std::atomic<std::size_t>> overruns_;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// [w - R, w + R] with R = (1 + |w| + MT) e^{MT} + 10 eps sigma1 sqrt(T).
inline Interval default_transform_range(const ModelSpec& spec) {
  const double MT = spec.drift.lipschitz_M * spec.horizon_T;
  const double R = (1.0 + std::abs(spec.w) + MT) * std::exp(MT) +
                   10.0 * spec.epsilon * spec.diffusion.sigma1 * std::sqrt(spec.horizon_T);
  return {spec.w - R, spec.w + R};
}

inline constexpr std::size_t kDefaultTransformKnots = 4097;

inline TransformTable build_transform(const ModelSpec& spec, Interval range,
                                      std::size_t knot_count = kDefaultTransformKnots) {
  if (knot_count < 2) throw std::invalid_argument("build_transform: knot_count must be >= 2");
  if (!(range.hi > range.lo)) throw std::invalid_argument("build_transform: empty range");
  if (!(spec.epsilon > 0.0)) throw std::invalid_argument("build_transform: epsilon must be > 0");
  const double eps = spec.epsilon;
  const ScalarFn integrand = [&spec, eps](double u) {
    const double s = spec.sigma(u);
    if (!std::isfinite(s) || !(s > 0.0))
      throw ModelError("sigma evaluation failure at x=" + std::to_string(u));
    return 1.0 / (eps * s);
  };

  const double hx = (range.hi - range.lo) / static_cast<double>(knot_count - 1);
  const auto kmin = static_cast<long long>(std::floor(range.lo / hx));
  const auto kmax = static_cast<long long>(std::ceil(range.hi / hx));
  const auto count = static_cast<std::size_t>(kmax - kmin + 1);
  std::vector<double> xs(count), Fs(count), slopes(count);
  for (std::size_t j = 0; j < count; ++j) {
    xs[j] = static_cast<double>(kmin + static_cast<long long>(j)) * hx;
    slopes[j] = integrand(xs[j]);
  }
  constexpr double kPanelTol = 1e-10;
  if (kmin <= 0 && kmax >= 0) {
    const auto z = static_cast<std::size_t>(-kmin);
    Fs[z] = 0.0;
    for (std::size_t j = z + 1; j < count; ++j)
      Fs[j] = Fs[j - 1] + adaptive_simpson(integrand, xs[j - 1], xs[j], kPanelTol);
    for (std::size_t j = z; j-- > 0;)
      Fs[j] = Fs[j + 1] - adaptive_simpson(integrand, xs[j], xs[j + 1], kPanelTol);
  } else {
    Fs[0] = adaptive_simpson(integrand, 0.0, xs[0], kPanelTol);
    for (std::size_t j = 1; j < count; ++j)
      Fs[j] = Fs[j - 1] + adaptive_simpson(integrand, xs[j - 1], xs[j], kPanelTol);
  }
  return TransformTable(std::move(xs), std::move(Fs), std::move(slopes), eps);
}

inline TransformTable build_transform(const ModelSpec& spec) {
  return build_transform(spec, default_transform_range(spec));
}

inline double invert_transform(const TransformTable& table, double v) { return table.inverse(v); }

/// b(v) = f(F^{-1}(v)) / (eps sigma(F^{-1}(v))) - eps sigma'(F^{-1}(v)) / 2.
inline double drift_b(const TransformTable& table, const ModelSpec& spec, double v) {
  if (!spec.diffusion.has_derivative())
    throw ModelError("drift b needs sigma' but the diffusion declares no derivative");
  const double x = table.inverse(v);
  const double eps = table.epsilon();
  return spec.f(x) / (eps * spec.sigma(x)) - 0.5 * eps * spec.diffusion.eval_deriv(x);
}

/// Bound on |b(0)| that holds when |sigma'| <= M.
inline double b_origin_bound(const ModelSpec& spec) {
  const double M = spec.drift.lipschitz_M;
  return M / (spec.epsilon * spec.diffusion.sigma0) + 0.5 * spec.epsilon * M;
}

/// Lipschitz bound on b: (L/eps + M eps/2) sigma1 eps.
inline double b_lipschitz_bound(const ModelSpec& spec) {
  if (!spec.fg_lipschitz_L) throw ModelError("Lipschitz bound on b needs L (f/sigma)");
  const double e = spec.epsilon;
  return (*spec.fg_lipschitz_L / e + 0.5 * spec.drift.lipschitz_M * e) * spec.diffusion.sigma1 * e;
}

}  // namespace lecam
