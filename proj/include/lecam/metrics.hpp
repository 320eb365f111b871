#pragma once

// Monte Carlo estimators for the rate lemmas, TV from likelihood ratios, and
// log-log rate fitting.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "lecam/error.hpp"
#include "lecam/lamperti.hpp"
#include "lecam/likelihood.hpp"
#include "lecam/model.hpp"
#include "lecam/path_engine.hpp"
#include "lecam/stats.hpp"
#include "lecam/time_change.hpp"

namespace lecam {

/// Worker count: LECAM_THREADS if set, otherwise the hardware concurrency.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("LECAM_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t replicates = 0;  ///< replicates that contributed
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> dropped_streams;  ///< stream ids lost to clock overrun
  std::string warning;
};

/// Maximum fraction of replicates that may be dropped for clock overrun.
inline constexpr double kMaxDropFraction = 1e-3;

class ReplicateDropLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs fn(stream_id) for stream_id = 0..count-1 on `threads` workers and
/// returns results in stream order. Replicates throwing ClockOverrun come back
/// empty; any other exception is rethrown (lowest stream id first).
template <class R>
std::vector<std::optional<R>> replicate_map(std::size_t count,
                                            const std::function<R(std::uint64_t)>& fn,
                                            unsigned threads = 0) {
  if (threads == 0) threads = default_thread_count();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  std::vector<std::optional<R>> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        out[i] = fn(i);
      } catch (const ClockOverrun&) {
        out[i].reset();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Mean and standard error over the successful replicates.
inline MCEstimate summarize(const std::vector<std::optional<double>>& draws, std::uint64_t seed) {
  MCEstimate est;
  est.seed = seed;
  std::vector<double> v;
  v.reserve(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    if (draws[i]) v.push_back(*draws[i]);
    else est.dropped_streams.push_back(i);
  }
  if (static_cast<double>(est.dropped_streams.size()) > kMaxDropFraction * static_cast<double>(draws.size())) {
    std::string ids;
    for (std::size_t k = 0; k < std::min<std::size_t>(est.dropped_streams.size(), 10); ++k)
      ids += (k ? "," : "") + std::to_string(est.dropped_streams[k]);
    throw ReplicateDropLimit("clock overrun dropped " + std::to_string(est.dropped_streams.size()) +
                             " of " + std::to_string(draws.size()) + " replicates (seed " +
                             std::to_string(seed) + ", streams " + ids + ")");
  }
  const MeanSe ms = mean_and_se(v);
  est.mean = ms.mean;
  est.std_error = ms.std_error;
  est.replicates = v.size();
  return est;
}

inline MCEstimate monte_carlo(std::size_t replicates, std::uint64_t seed,
                              const std::function<double(std::uint64_t)>& draw, unsigned threads = 0) {
  return summarize(replicate_map<double>(replicates, draw, threads), seed);
}

inline FineGridConfig reclocking_grid(const ModelSpec& spec, const FineGridConfig& grid) {
  FineGridConfig g = FineGridConfig::for_reclocking(spec, grid.steps_per_interval);
  g.horizon_multiplier = std::max(g.horizon_multiplier, grid.horizon_multiplier);
  return g;
}

/// |A_T - A_bar^n_T| on one xi path.
inline double clock_gap(const SamplePath& xi, const ModelSpec& spec) {
  const double a = ClockIntegral::theta(xi, spec).inverse(spec.horizon_T);
  const double ab = a_bar_n(xi, spec, spec.horizon_T).value;
  return std::abs(a - ab);
}

/// E |A_T - A_bar^n_T| under xi with drift f/sigma^2.
inline MCEstimate estimate_clock_gap(const ModelSpec& spec, const FineGridConfig& grid,
                                     std::size_t replicates, std::uint64_t seed, unsigned threads = 0) {
  const FineGridConfig g = reclocking_grid(spec, grid);
  return monte_carlo(replicates, seed, [&](std::uint64_t id) {
    const auto xi = simulate_constant_eps(ConstantEpsForm::f_over_sigma2, spec, g, make_driver(seed, id, spec, g));
    return clock_gap(xi, spec);
  }, threads);
}

/// int_0^upto ((f/sigma^2)(x_s) - g_bar_n(s, x))^2 ds, accumulated interval by
/// interval of g_bar_n and, inside each, over the fine cells it meets.
inline double drift_gap_l2(const SamplePath& path, const ModelSpec& spec, double upto) {
  if (!path.covers(upto)) throw ClockOverrun(upto, path.t_end());
  const auto knots = a_bar_knots(path, spec);
  const double dt = path.dt();
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double lo = knots[i];
    if (lo >= upto) break;
    const double hi = std::min(knots[i + 1], upto);
    const double level = spec.f_over_sigma2(path.value_at(lo));
    auto gap2 = [&](double s) {
      const double d = spec.f_over_sigma2(path.value_at(s)) - level;
      return d * d;
    };
    auto k = static_cast<std::size_t>(std::floor(lo / dt));
    double left = lo;
    while (left < hi) {
      double right = std::min(static_cast<double>(k + 1) * dt, hi);
      if (right <= left) {
        ++k;
        continue;
      }
      total += 0.5 * (right - left) * (gap2(left) + gap2(right));
      left = right;
      ++k;
    }
  }
  return total;
}

inline double drift_gap_l2(const SamplePath& path, const ModelSpec& spec) {
  return drift_gap_l2(path, spec, a_bar_n(path, spec, spec.horizon_T).value);
}

/// E int_0^{A_bar^n_T} ((f/sigma^2)(x_s) - g_bar_n(s, x))^2 ds under xi.
inline MCEstimate estimate_drift_gap_l2(const ModelSpec& spec, const FineGridConfig& grid,
                                        std::size_t replicates, std::uint64_t seed,
                                        unsigned threads = 0) {
  const FineGridConfig g = reclocking_grid(spec, grid);
  return monte_carlo(replicates, seed, [&](std::uint64_t id) {
    const auto xi = simulate_constant_eps(ConstantEpsForm::f_over_sigma2, spec, g, make_driver(seed, id, spec, g));
    return drift_gap_l2(xi, spec);
  }, threads);
}

/// int_0^T (b(mu_s) - b_bar_n(s, mu))^2 ds on a mu path whose fine grid
/// refines the observation grid.
inline double lamperti_gap_l2(const SamplePath& mu, const ModelSpec& spec, const TransformTable& table) {
  const double dt = mu.dt();
  const double h = spec.obs_step();
  const auto spi = static_cast<std::size_t>(std::llround(h / dt));
  const std::size_t N = static_cast<std::size_t>(spec.n_obs) * spi;
  if (mu.size() < N + 1) throw ClockOverrun(spec.horizon_T, mu.t_end());
  std::vector<double> b(N + 1);
  for (std::size_t k = 0; k <= N; ++k) b[k] = drift_b(table, spec, mu[k]);
  double total = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    const double level = b[(k / spi) * spi];
    const double d0 = b[k] - level;
    const double d1 = b[k + 1] - level;
    total += 0.5 * dt * (d0 * d0 + d1 * d1);
  }
  return total;
}

enum class StopRule { fixed_T, A_bar_T_n };

/// Log-likelihood ratios log dP_h1/dP_h0 on paths simulated under h0.
inline std::vector<std::optional<double>> sample_log_lr(const ModelSpec& spec, const DriftHypothesis& h1,
                                                        const DriftHypothesis& h0, StopRule rule,
                                                        const FineGridConfig& grid, std::size_t replicates,
                                                        std::uint64_t seed, unsigned threads = 0) {
  if (h1.diffusion_eps != h0.diffusion_eps)
    throw std::invalid_argument("hypotheses must share the diffusion coefficient");
  const FineGridConfig g = rule == StopRule::fixed_T ? grid : reclocking_grid(spec, grid);
  const std::size_t steps = rule == StopRule::fixed_T ? g.steps_to_T(spec) : g.span_steps(spec);
  const double dt = g.dt(spec);
  return replicate_map<double>(replicates, [&](std::uint64_t id) {
    const SamplePath x = simulate_hypothesis(h0, spec.w, steps, dt, make_driver(seed, id, spec, g));
    const double upto = rule == StopRule::fixed_T ? spec.horizon_T : a_bar_n(x, spec, spec.horizon_T).value;
    return girsanov_log_lr(x, h1, h0, upto).value;
  }, threads);
}

/// Fraction effective sample size of the weights exp(l), computed after
/// subtracting max l.
inline double relative_ess(std::span<const double> log_w) {
  if (log_w.empty()) return 1.0;
  const double mx = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(log_w.size()), w2(log_w.size());
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    w[i] = std::exp(log_w[i] - mx);
    w2[i] = w[i] * w[i];
  }
  const double s = pairwise_sum(w);
  return s * s / pairwise_sum(w2) / static_cast<double>(log_w.size());
}

namespace detail {

inline std::vector<double> present(const std::vector<std::optional<double>>& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v)
    if (x) out.push_back(*x);
  return out;
}

inline std::vector<std::optional<double>> map_present(const std::vector<std::optional<double>>& v,
                                                      double (*fn)(double)) {
  std::vector<std::optional<double>> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i]) out[i] = fn(*v[i]);
  return out;
}

}  // namespace detail

/// TV(P_h1, P_h0) = (1/2) E_h0 |1 - exp(l)|.
inline MCEstimate tv_from_log_lr(const std::vector<std::optional<double>>& log_lr, std::uint64_t seed) {
  MCEstimate est = summarize(detail::map_present(log_lr, [](double l) { return 0.5 * std::abs(std::expm1(l)); }), seed);
  const auto ls = detail::present(log_lr);
  const double ess = relative_ess(ls);
  if (ess < 0.1)
    est.warning = "heavy-tailed likelihood ratios: effective sample size " +
                  std::to_string(ess * 100.0) + "% of replicates";
  return est;
}

/// E_h0 exp(l); equals 1 for a true density ratio.
inline MCEstimate lr_mean_from_log_lr(const std::vector<std::optional<double>>& log_lr, std::uint64_t seed) {
  return summarize(detail::map_present(log_lr, [](double l) { return std::exp(l); }), seed);
}

inline MCEstimate estimate_tv_from_lr(const ModelSpec& spec, const DriftHypothesis& h1,
                                      const DriftHypothesis& h0, StopRule rule,
                                      const FineGridConfig& grid, std::size_t replicates,
                                      std::uint64_t seed, unsigned threads = 0) {
  return tv_from_log_lr(sample_log_lr(spec, h1, h0, rule, grid, replicates, seed, threads), seed);
}

/// E h_f(A_bar^n_T) under xi with drift f/sigma^2.
inline MCEstimate estimate_hellinger(const ModelSpec& spec, const FineGridConfig& grid,
                                     std::size_t replicates, std::uint64_t seed, unsigned threads = 0) {
  const FineGridConfig g = reclocking_grid(spec, grid);
  return monte_carlo(replicates, seed, [&](std::uint64_t id) {
    const auto xi = simulate_constant_eps(ConstantEpsForm::f_over_sigma2, spec, g, make_driver(seed, id, spec, g));
    return hellinger_process(xi, spec, a_bar_n(xi, spec, spec.horizon_T).value);
  }, threads);
}

/// E |X_t|^p for the process behind an experiment (or any ProcessKind).
inline MCEstimate estimate_moment(const ModelSpec& spec, ProcessKind process, int p, double at_time,
                                  const FineGridConfig& grid, std::size_t replicates, std::uint64_t seed,
                                  unsigned threads = 0) {
  if (p != 2 && p != 4 && p != 8) throw std::invalid_argument("estimate_moment: p must be 2, 4 or 8");
  const FineGridConfig g = needs_reclocking_span(process) ? reclocking_grid(spec, grid) : grid;
  std::shared_ptr<const TransformTable> table;
  if (process == ProcessKind::mu || process == ProcessKind::mu_bar)
    table = std::make_shared<const TransformTable>(build_transform(spec));
  return monte_carlo(replicates, seed, [&](std::uint64_t id) {
    const SamplePath x = simulate_process(process, spec, g, make_driver(seed, id, spec, g), table.get());
    return std::pow(std::abs(x.value_at(at_time)), p);
  }, threads);
}

inline MCEstimate estimate_moment(const ModelSpec& spec, ExperimentId id, int p, double at_time,
                                  const FineGridConfig& grid, std::size_t replicates, std::uint64_t seed,
                                  unsigned threads = 0) {
  return estimate_moment(spec, sampler_for(id).process, p, at_time, grid, replicates, seed, threads);
}

// ---------------------------------------------------------------------------
// Rate fitting

enum class RateAxis { n, epsilon };

inline constexpr std::string_view to_string(RateAxis a) { return a == RateAxis::n ? "n" : "epsilon"; }

struct RatePoint {
  double axis_value = 0.0;
  int n = 0;
  double epsilon = 0.0;
  MCEstimate estimate;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_halfwidth = 0.0;  ///< 95% two-sided
  bool weighted = true;
};

struct RateTable {
  std::string suite;
  RateAxis axis = RateAxis::n;
  std::vector<RatePoint> points;
  double fitted_slope = 0.0;
  double slope_ci_halfwidth = 0.0;
};

/// Weighted least squares of log mean on log axis_value, weights
/// (mean / std_error)^2; unweighted if any std_error is zero.
inline RateFit fit_rate(std::span<const RatePoint> points) {
  if (points.size() < 4) throw std::invalid_argument("fit_rate: at least 4 points are required");
  const std::size_t m = points.size();
  std::vector<double> x(m), y(m), w(m);
  bool weighted = true;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& p = points[i];
    if (!(p.estimate.mean > 0.0) || !std::isfinite(p.estimate.mean))
      throw DegenerateRatePoint("rate point at axis value " + std::to_string(p.axis_value) +
                                " has non-positive mean " + std::to_string(p.estimate.mean));
    if (!(p.axis_value > 0.0)) throw std::invalid_argument("fit_rate: axis values must be positive");
    x[i] = std::log(p.axis_value);
    y[i] = std::log(p.estimate.mean);
    if (p.estimate.std_error > 0.0) {
      const double rel = p.estimate.std_error / p.estimate.mean;
      w[i] = 1.0 / (rel * rel);
    } else {
      weighted = false;
    }
  }
  if (!weighted) std::fill(w.begin(), w.end(), 1.0);
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double xb = sx / sw, yb = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += w[i] * (x[i] - xb) * (x[i] - xb);
    sxy += w[i] * (x[i] - xb) * (y[i] - yb);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_rate: axis values must not all coincide");
  RateFit fit;
  fit.weighted = weighted;
  fit.slope = sxy / sxx;
  fit.intercept = yb - fit.slope * xb;
  double rss = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    rss += w[i] * r * r;
  }
  const double dof = static_cast<double>(m) - 2.0;
  const double se = std::sqrt(rss / dof / sxx);
  const boost::math::students_t dist(dof);
  fit.ci_halfwidth = boost::math::quantile(boost::math::complement(dist, 0.025)) * se;
  return fit;
}

inline RateTable make_rate_table(std::string suite, RateAxis axis, std::vector<RatePoint> points) {
  RateTable t{std::move(suite), axis, std::move(points), 0.0, 0.0};
  const RateFit fit = fit_rate(t.points);
  t.fitted_slope = fit.slope;
  t.slope_ci_halfwidth = fit.ci_halfwidth;
  return t;
}

}  // namespace lecam
