#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lecam/error.hpp"

namespace lecam {

using ScalarFn = std::function<double(double)>;

/// Drift f in the class of functions with |f(0)| <= M and M-Lipschitz.
struct DriftSpec {
  ScalarFn eval;
  double lipschitz_M = 1.0;
  double origin_bound = 0.0;  ///< declared |f(0)|
};

/// Diffusion coefficient sigma with sigma0^2 <= sigma^2 <= sigma1^2 and K-Lipschitz.
/// eval_deriv (sigma') is only required by the Lamperti chain.
struct DiffusionSpec {
  ScalarFn eval;
  ScalarFn eval_deriv;
  double sigma0 = 1.0;
  double sigma1 = 1.0;
  double lipschitz_K = 0.0;

  bool has_derivative() const noexcept { return static_cast<bool>(eval_deriv); }
};

/// Which grid intervals receive a frozen coefficient in the piecewise
/// approximations f_bar_n and sigma_bar_n.
enum class FreezeConvention {
  from_first_knot,      ///< intervals i = 0..n-1 (default)
  skip_first_interval,  ///< intervals i = 1..n-1; [0, t_1) carries zero
};

/// dy = f(y) dt + epsilon sigma(y) dW on [0, T], y_0 = w, observed at n_obs
/// equally spaced times.
struct ModelSpec {
  DriftSpec drift;
  DiffusionSpec diffusion;
  double epsilon = 0.1;
  double horizon_T = 1.0;
  int n_obs = 1;
  double w = 0.0;
  std::optional<double> fg_lipschitz_L;  ///< Lipschitz constant of f / sigma
  FreezeConvention freeze = FreezeConvention::from_first_knot;

  double f(double x) const { return drift.eval(x); }
  double sigma(double x) const { return diffusion.eval(x); }
  double sigma2(double x) const {
    const double s = diffusion.eval(x);
    return s * s;
  }
  double f_over_sigma2(double x) const { return f(x) / sigma2(x); }
  double obs_step() const noexcept { return horizon_T / n_obs; }
  double obs_time(int i) const noexcept { return horizon_T * i / n_obs; }

  ModelSpec with_n(int n) const {
    ModelSpec s = *this;
    s.n_obs = n;
    return s;
  }
  ModelSpec with_epsilon(double e) const {
    ModelSpec s = *this;
    s.epsilon = e;
    return s;
  }
};

/// Statistical experiments appearing in the two equivalence chains.
enum class ExperimentId { M1, M2, M3, M4, M5, M6, M7, N1, N2, N3, N4, N5, N6 };

inline constexpr std::string_view to_string(ExperimentId id) {
  constexpr std::string_view names[] = {"M1", "M2", "M3", "M4", "M5", "M6", "M7",
                                        "N1", "N2", "N3", "N4", "N5", "N6"};
  return names[static_cast<int>(id)];
}

inline std::optional<ExperimentId> parse_experiment(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(ExperimentId::N6); ++i) {
    const auto id = static_cast<ExperimentId>(i);
    if (to_string(id) == s) return id;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Validation on probe grids

struct Violation {
  std::string constraint;
  double x = std::numeric_limits<double>::quiet_NaN();
  double y = std::numeric_limits<double>::quiet_NaN();
  double measured = 0.0;
  double allowed = 0.0;

  std::string describe() const {
    std::ostringstream os;
    os << constraint;
    if (!std::isnan(x)) {
      os << " at x=" << x;
      if (!std::isnan(y)) os << ", y=" << y;
    }
    os << ": measured " << measured << ", allowed " << allowed;
    return os.str();
  }
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  bool has(std::string_view constraint) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.constraint == constraint; });
  }
  std::string summary() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v.describe();
    }
    return out;
  }
};

namespace detail {

constexpr double kValidationRelTol = 1e-9;
constexpr double kValidationAbsFloor = 1e-14;

inline bool exceeds(double measured, double allowed) {
  return measured > allowed * (1.0 + kValidationRelTol) + kValidationAbsFloor;
}

// Keeps the worst excess per constraint so the report stays one line per failure.
class ViolationCollector {
 public:
  void check(const std::string& constraint, double x, double y, double measured, double allowed) {
    if (!exceeds(measured, allowed)) return;
    for (auto& v : out_) {
      if (v.constraint == constraint) {
        if (measured - allowed > v.measured - v.allowed) v = Violation{constraint, x, y, measured, allowed};
        return;
      }
    }
    out_.push_back(Violation{constraint, x, y, measured, allowed});
  }
  void add(Violation v) { out_.push_back(std::move(v)); }
  std::vector<Violation> take() { return std::move(out_); }

 private:
  std::vector<Violation> out_;
};

// Lipschitz checks over adjacent probe pairs: the largest chord slope over all
// pairs of a finite set is attained by some adjacent pair.
inline void check_lipschitz(ViolationCollector& c, const std::string& name,
                            const std::vector<double>& xs, const std::vector<double>& vs,
                            double constant) {
  for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
    const double gap = xs[j + 1] - xs[j];
    c.check(name, xs[j], xs[j + 1], std::abs(vs[j + 1] - vs[j]), constant * gap);
  }
}

}  // namespace detail

/// Checks the drift-class, (H1)/(H2) and optional f/sigma Lipschitz
/// inequalities on probe_count equally spaced probes over [lo, hi].
/// A finite probe grid can refute membership but never prove it.
inline ValidationReport validate_model(const ModelSpec& spec, int probe_count, double lo,
                                       double hi) {
  if (probe_count < 2) throw std::invalid_argument("validate_model: probe_count must be >= 2");
  if (!(hi > lo)) throw std::invalid_argument("validate_model: probe range is degenerate");

  detail::ViolationCollector c;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  if (!(spec.epsilon > 0.0 && spec.epsilon < 1.0))
    c.add({"epsilon in (0,1)", nan, nan, spec.epsilon, 1.0});
  if (!(spec.horizon_T > 0.0)) c.add({"horizon T > 0", nan, nan, spec.horizon_T, 0.0});
  if (spec.n_obs < 1) c.add({"n_obs >= 1", nan, nan, static_cast<double>(spec.n_obs), 1.0});
  if (!spec.drift.eval || !spec.diffusion.eval) {
    c.add({"model functions present", nan, nan, 0.0, 1.0});
    return {c.take()};
  }
  if (!(spec.diffusion.sigma0 > 0.0) || spec.diffusion.sigma1 < spec.diffusion.sigma0)
    c.add({"0 < sigma0 <= sigma1", nan, nan, spec.diffusion.sigma0, spec.diffusion.sigma1});

  const auto n = static_cast<std::size_t>(probe_count);
  std::vector<double> xs(n), fv(n), sv(n), dv;
  const bool with_deriv = spec.diffusion.has_derivative();
  if (with_deriv) dv.resize(n);
  bool evaluation_ok = true;
  for (std::size_t j = 0; j < n; ++j) {
    xs[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n - 1);
    fv[j] = spec.f(xs[j]);
    sv[j] = spec.sigma(xs[j]);
    if (with_deriv) dv[j] = spec.diffusion.eval_deriv(xs[j]);
    if (!std::isfinite(fv[j]) || !std::isfinite(sv[j]) || (with_deriv && !std::isfinite(dv[j]))) {
      c.add({"model evaluation failure", xs[j], nan, nan, nan});
      evaluation_ok = false;
    }
  }
  if (!evaluation_ok) return {c.take()};

  const double f0 = std::abs(spec.f(0.0));
  const double M = spec.drift.lipschitz_M;
  c.check("|f(0)| <= M", 0.0, nan, f0, M);
  c.check("|f(0)| <= declared origin bound", 0.0, nan, f0, spec.drift.origin_bound);
  detail::check_lipschitz(c, "f M-Lipschitz", xs, fv, M);

  const double s0sq = spec.diffusion.sigma0 * spec.diffusion.sigma0;
  const double s1sq = spec.diffusion.sigma1 * spec.diffusion.sigma1;
  for (std::size_t j = 0; j < n; ++j) {
    const double s2 = sv[j] * sv[j];
    c.check("sigma^2 <= sigma1^2", xs[j], nan, s2, s1sq);
    c.check("sigma^2 >= sigma0^2", xs[j], nan, s0sq, s2);
  }
  detail::check_lipschitz(c, "sigma K-Lipschitz", xs, sv, spec.diffusion.lipschitz_K);
  if (with_deriv) detail::check_lipschitz(c, "sigma' K-Lipschitz", xs, dv, spec.diffusion.lipschitz_K);

  if (spec.fg_lipschitz_L) {
    std::vector<double> ratio(n);
    for (std::size_t j = 0; j < n; ++j) ratio[j] = fv[j] / sv[j];
    detail::check_lipschitz(c, "f/sigma L-Lipschitz", xs, ratio, *spec.fg_lipschitz_L);
  }
  return {c.take()};
}

// ---------------------------------------------------------------------------
// Built-in model ingredients

struct NamedDrift {
  std::string name;
  DriftSpec spec;
};

struct NamedDiffusion {
  std::string name;
  DiffusionSpec spec;
};

struct NamedModel {
  std::string name;
  DriftSpec drift;
  DiffusionSpec diffusion;
};

inline std::vector<NamedDrift> drift_catalog() {
  return {
      {"zero-drift", {[](double) { return 0.0; }, 1.0, 0.0}},
      {"constant-drift", {[](double) { return 0.5; }, 0.5, 0.5}},
      {"linear-drift", {[](double x) { return std::clamp(-0.5 * x + 0.25, -2.0, 2.0); }, 0.5, 0.25}},
      {"sin-drift", {[](double x) { return std::sin(x); }, 1.0, 0.0}},
      {"tanh-drift", {[](double x) { return -std::tanh(x); }, 1.0, 0.0}},
  };
}

inline std::vector<NamedDiffusion> diffusion_catalog() {
  return {
      {"unit-sigma", {[](double) { return 1.0; }, [](double) { return 0.0; }, 1.0, 1.0, 0.0}},
      {"constant-sigma", {[](double) { return 1.5; }, [](double) { return 0.0; }, 1.5, 1.5, 0.0}},
      // sigma'' = -0.5 sin, so sigma' is also 0.5-Lipschitz.
      {"half-sin-sigma",
       {[](double x) { return 1.0 + 0.5 * std::sin(x); },
        [](double x) { return 0.5 * std::cos(x); }, 0.5, 1.5, 0.5}},
      // (sigma0 + sigma1)/2 + slope*tanh with sigma0 = 0.6, sigma1 = 1.4, slope = 0.4.
      {"tanh-sigma",
       {[](double x) { return 1.0 + 0.4 * std::tanh(x); },
        [](double x) {
          const double c = 1.0 / std::cosh(x);
          return 0.4 * c * c;
        },
        0.6, 1.4, 0.4}},
  };
}

inline constexpr std::string_view kDefaultDrift = "sin-drift";
inline constexpr std::string_view kDefaultDiffusion = "unit-sigma";

/// Every drift paired with every diffusion, named "drift/diffusion".
inline std::vector<NamedModel> builtin_library() {
  std::vector<NamedModel> out;
  for (const auto& d : drift_catalog())
    for (const auto& s : diffusion_catalog())
      out.push_back({d.name + "/" + s.name, d.spec, s.spec});
  return out;
}

/// Resolves "drift/diffusion", or a single ingredient name paired with the
/// default partner (sin-drift or unit-sigma).
inline std::optional<NamedModel> find_builtin(std::string_view name) {
  std::string full(name);
  if (full.find('/') == std::string::npos) {
    bool is_drift = false;
    for (const auto& d : drift_catalog()) is_drift = is_drift || d.name == full;
    bool is_diffusion = false;
    for (const auto& s : diffusion_catalog()) is_diffusion = is_diffusion || s.name == full;
    if (is_drift) {
      full += "/" + std::string(kDefaultDiffusion);
    } else if (is_diffusion) {
      full = std::string(kDefaultDrift) + "/" + full;
    } else {
      return std::nullopt;
    }
  }
  for (auto& m : builtin_library())
    if (m.name == full) return m;
  return std::nullopt;
}

}  // namespace lecam
