#pragma once

// Girsanov log-likelihood ratios between drift hypotheses sharing a constant
// diffusion coefficient, the Euler sufficient-statistic density, and the
// Hellinger process between xi and xi_bar.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
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

/// Drift value for the step that starts at t, given the path up to t.
/// Evaluators may keep state and must be called with non-decreasing t.
using DriftEvaluator = std::function<double(double t, const PathPrefix& past)>;

struct DriftHypothesis {
  std::string label;
  double diffusion_eps = 1.0;
  std::function<DriftEvaluator()> make;  ///< fresh evaluator per path
};

struct LogLikelihoodRatio {
  double value = 0.0;
  double stoch_integral_part = 0.0;
  double bounded_variation_part = 0.0;
};

// ---------------------------------------------------------------------------
// Hypothesis factories

inline DriftHypothesis zero_hypothesis(double diffusion_eps) {
  return {"0", diffusion_eps, [] { return DriftEvaluator([](double, const PathPrefix&) { return 0.0; }); }};
}

inline DriftHypothesis constant_hypothesis(double c, double diffusion_eps) {
  return {"const(" + std::to_string(c) + ")", diffusion_eps,
          [c] { return DriftEvaluator([c](double, const PathPrefix&) { return c; }); }};
}

/// Drift g(x_t) depending on the current state only.
inline DriftHypothesis markov_hypothesis(std::string label, ScalarFn g, double diffusion_eps) {
  return {std::move(label), diffusion_eps, [g] {
            return DriftEvaluator([g](double t, const PathPrefix& past) { return g(past.value_at(t)); });
          }};
}

inline DriftHypothesis f_over_sigma2_hypothesis(const ModelSpec& spec) {
  return markov_hypothesis("f/sigma^2", [spec](double x) { return spec.f_over_sigma2(x); },
                           spec.epsilon);
}

/// g_bar_n: (f/sigma^2)(x(A_i)) on (A_i, A_{i+1}] with the A_bar^n knots read
/// from the path's own past.
inline DriftHypothesis g_bar_n_hypothesis(const ModelSpec& spec) {
  auto shared = std::make_shared<const ModelSpec>(spec);
  return {"g_bar_n", spec.epsilon, [shared] {
            auto tracker = std::make_shared<AbarKnotTracker>(*shared);
            auto started = std::make_shared<bool>(false);
            return DriftEvaluator([shared, tracker, started](double t, const PathPrefix& past) {
              if (!*started) {
                tracker->reset(past.values.front());
                *started = true;
              }
              tracker->advance(t, past);
              return tracker->level();
            });
          }};
}

/// b on the unit-diffusion scale.
inline DriftHypothesis b_hypothesis(const ModelSpec& spec, std::shared_ptr<const TransformTable> table) {
  auto s = std::make_shared<const ModelSpec>(spec);
  return markov_hypothesis("b", [s, table](double v) { return drift_b(*table, *s, v); }, 1.0);
}

/// b_bar_n: b(mu(t_i)) on (t_i, t_{i+1}].
inline DriftHypothesis b_bar_n_hypothesis(const ModelSpec& spec,
                                          std::shared_ptr<const TransformTable> table) {
  auto s = std::make_shared<const ModelSpec>(spec);
  return {"b_bar_n", 1.0, [s, table] {
            auto cache = std::make_shared<std::pair<long long, double>>(-1, 0.0);
            return DriftEvaluator([s, table, cache](double t, const PathPrefix& past) {
              const double h = s->obs_step();
              const auto i = static_cast<long long>(std::floor(t / h + 1e-9));
              if (i != cache->first) {
                cache->first = i;
                cache->second = drift_b(*table, *s, past.value_at(static_cast<double>(i) * h));
              }
              return cache->second;
            });
          }};
}

// ---------------------------------------------------------------------------

/// Euler-Maruyama path of dx = g(t, x) dt + eps* dW from x_0 = w with `steps`
/// steps of size dt. Used to sample under a hypothesis with exactly the
/// discretization the likelihood ratio assumes.
inline SamplePath simulate_hypothesis(const DriftHypothesis& h, double w, std::size_t steps, double dt,
                                      const BrownianDriver& driver) {
  const std::size_t factor = refinement_factor(dt, driver.dt);
  std::vector<double> dw(steps);
  driver.fill_increments(0, dw, factor);
  std::vector<double> x(steps + 1);
  x[0] = w;
  auto g = h.make();
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double drift = g(t, PathPrefix{std::span<const double>(x.data(), k + 1), 0.0, dt});
    x[k + 1] = x[k] + drift * dt + h.diffusion_eps * dw[k];
    if (!std::isfinite(x[k + 1])) throw SimulationBlowUp(k + 1, h.label);
  }
  return SamplePath(0.0, dt, std::move(x));
}

/// (1/eps*^2) int (g1 - g0) dx - (1/(2 eps*^2)) int (g1^2 - g0^2) ds over [0, upto],
/// left-endpoint sums on the path's grid; a final partial step ends at upto.
inline LogLikelihoodRatio girsanov_log_lr(const SamplePath& path, const DriftHypothesis& h1,
                                          const DriftHypothesis& h0, double upto) {
  if (h1.diffusion_eps != h0.diffusion_eps)
    throw std::invalid_argument("girsanov_log_lr: hypotheses must share the diffusion coefficient");
  if (path.t0() != 0.0) throw std::invalid_argument("girsanov_log_lr: path must start at 0");
  if (!path.covers(upto)) throw ClockOverrun(upto, path.t_end());
  const double e2 = h1.diffusion_eps * h1.diffusion_eps;
  const double dt = path.dt();
  auto g1 = h1.make();
  auto g0 = h0.make();
  const auto vals = path.values();
  double stoch = 0.0;
  double bv = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t >= upto) break;
    const PathPrefix past{vals.first(k + 1), 0.0, dt};
    const double a = g1(t, past);
    const double b = g0(t, past);
    if (!std::isfinite(a) || !std::isfinite(b))
      throw std::domain_error("girsanov_log_lr: non-finite drift at t=" + std::to_string(t));
    const double tn = static_cast<double>(k + 1) * dt;
    double ds = dt;
    double dx = vals[k + 1] - vals[k];
    if (tn > upto) {
      ds = upto - t;
      dx = path.value_at(upto) - vals[k];
    }
    stoch += (a - b) * dx;
    bv += (a * a - b * b) * ds;
  }
  LogLikelihoodRatio r;
  r.stoch_integral_part = stoch / e2;
  r.bounded_variation_part = -0.5 * bv / e2;
  r.value = r.stoch_integral_part + r.bounded_variation_part;
  return r;
}

/// log of sum_i [ f/(eps^2 sigma^2)(w_i) (w_{i+1} - w_i) - (T/n) f^2/(2 eps^2 sigma^2)(w_i) ].
inline double euler_sufficient_logdensity(std::span<const double> obs, const ModelSpec& spec) {
  const auto n = static_cast<std::size_t>(spec.n_obs);
  if (obs.size() != n + 1)
    throw std::invalid_argument("euler_sufficient_logdensity: expected " + std::to_string(n + 1) +
                                " observations, got " + std::to_string(obs.size()));
  const double e2 = spec.epsilon * spec.epsilon;
  const double h = spec.obs_step();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = obs[i];
    const double f = spec.f(x);
    const double v = e2 * spec.sigma2(x);
    s += f / v * (obs[i + 1] - x) - h * f * f / (2.0 * v);
  }
  return s;
}

/// Same density read from a continuous path at the observation times.
inline double euler_sufficient_logdensity(const SamplePath& path, const ModelSpec& spec) {
  std::vector<double> obs(static_cast<std::size_t>(spec.n_obs) + 1);
  for (int i = 0; i <= spec.n_obs; ++i) obs[static_cast<std::size_t>(i)] = path.value_at(spec.obs_time(i));
  return euler_sufficient_logdensity(obs, spec);
}

/// h_f(upto) = (1/(8 eps^2)) int_0^upto ((f/sigma^2)(x_s) - g_bar_n(s, x))^2 ds.
/// Trapezoid on each fine cell, cells split at the g_bar_n knots.
inline double hellinger_process(const SamplePath& path, const ModelSpec& spec, double upto) {
  if (!path.covers(upto)) throw ClockOverrun(upto, path.t_end());
  const PiecewiseCoeff g = piecewise_coeffs(path, spec, CoeffKind::g_bar_n);
  const double dt = path.dt();
  auto gap2 = [&](double s, double level) {
    const double d = spec.f_over_sigma2(path.value_at(s)) - level;
    return d * d;
  };
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const double a = static_cast<double>(k) * dt;
    if (a >= upto) break;
    const double b = std::min(static_cast<double>(k + 1) * dt, upto);
    // knots strictly inside (a, b)
    auto lo = std::upper_bound(g.knots.begin(), g.knots.end(), a);
    auto hi = std::lower_bound(g.knots.begin(), g.knots.end(), b);
    double left = a;
    for (auto it = lo; it <= hi; ++it) {
      const double right = it == hi ? b : *it;
      if (right > left) {
        const double level = g.at(0.5 * (left + right));
        total += 0.5 * (right - left) * (gap2(left, level) + gap2(right, level));
      }
      left = right;
      if (it == hi) break;
    }
  }
  return total / (8.0 * spec.epsilon * spec.epsilon);
}

}  // namespace lecam
