#pragma once

// The invariant and rate suites. Each suite reads its parameters up front
// (so a bad key fails before anything runs) and returns verdict rows plus any
// rate tables.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "lecam/harness/config.hpp"
#include "lecam/harness/csv.hpp"
#include "lecam/harness/oracles.hpp"
#include "lecam/metrics.hpp"

namespace lecam::harness {

struct SuiteContext {
  const HarnessConfig& cfg;
  ModelSpec model;  // n_obs is set per suite
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct SuiteOutput {
  std::string suite;
  std::string quantity;
  std::vector<SuiteResult> results;
  std::vector<RateTable> tables;
  std::vector<std::string> notes;

  bool failed() const {
    return std::any_of(results.begin(), results.end(), [](const SuiteResult& r) { return r.status == Status::fail; });
  }
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of one named stream family inside a suite.
inline std::uint64_t stream_seed(std::uint64_t base, std::string_view suite, std::string_view tag) {
  return lecam::detail::splitmix64(base ^ fnv1a(std::string(suite) + "/" + std::string(tag)));
}

/// Steps per observation interval giving about `fine_steps` steps on [0, T].
inline int fine_spi(int n, long long fine_steps) {
  const long long per = std::max<long long>(1, fine_steps / n);
  return static_cast<int>(std::bit_floor(static_cast<unsigned long long>(per)));
}

template <class R>
std::vector<R> present_or_throw(const std::vector<std::optional<R>>& v, std::uint64_t seed) {
  std::vector<R> out;
  out.reserve(v.size());
  std::size_t dropped = 0;
  for (const auto& x : v) {
    if (x) out.push_back(*x);
    else ++dropped;
  }
  if (static_cast<double>(dropped) > kMaxDropFraction * static_cast<double>(v.size()))
    throw ReplicateDropLimit("clock overrun dropped " + std::to_string(dropped) + " of " +
                             std::to_string(v.size()) + " replicates (seed " + std::to_string(seed) + ")");
  return out;
}

inline std::vector<double> column(const std::vector<std::array<double, 3>>& rows, std::size_t j) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

inline std::string g(double v) { return fmt::format("{:.6g}", v); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Verdict rows

struct Cell {
  std::optional<int> n;
  std::optional<double> eps;
};

inline Cell global_cell() { return {}; }
inline Cell cell(int n, double eps) { return {n, eps}; }

inline SuiteResult row(const std::string& suite, Cell c, Status s, double measured, double threshold,
                       std::string detail) {
  return {suite, c.n, c.eps, s, measured, threshold, std::move(detail)};
}

/// fail unless measured <= threshold.
inline SuiteResult at_most(const std::string& suite, Cell c, double measured, double threshold,
                           std::string detail, Status on_miss = Status::fail) {
  return row(suite, c, measured <= threshold ? Status::pass : on_miss, measured, threshold, std::move(detail));
}

/// fail unless measured >= threshold.
inline SuiteResult at_least(const std::string& suite, Cell c, double measured, double threshold,
                            std::string detail, Status on_miss = Status::fail) {
  return row(suite, c, measured >= threshold ? Status::pass : on_miss, measured, threshold, std::move(detail));
}

/// Two-sided bracket; the threshold column holds the nearer end.
inline SuiteResult in_bracket(const std::string& suite, Cell c, double value, double lo, double hi,
                              const std::string& what, Status on_miss = Status::fail) {
  const bool lower = value < 0.5 * (lo + hi);
  std::string detail = fmt::format("{} {} in [{}, {}]", what, detail::g(value), detail::g(lo), detail::g(hi));
  const bool ok = value >= lo && value <= hi;
  return row(suite, c, ok ? Status::pass : on_miss, value, lower ? lo : hi, std::move(detail));
}

// ---------------------------------------------------------------------------
// identities

struct IdentitiesParams {
  int n;
  std::size_t replicates;
  int spi;
  double bound_factor, halving_lo, halving_hi, inverse_tol;
};

inline IdentitiesParams read_identities(const HarnessConfig& cfg) {
  const std::string s = "identities";
  return {static_cast<int>(cfg.integer(s + ".n")), static_cast<std::size_t>(cfg.replicates(s)),
          cfg.steps_per_interval(s), cfg.real(s + ".bound_factor"), cfg.real(s + ".halving_lo"),
          cfg.real(s + ".halving_hi"), cfg.real(s + ".inverse_tol")};
}

inline SuiteResult halving_row(const std::string& suite, Cell c, double coarse, double fine, double lo,
                               double hi, const std::string& what) {
  if (coarse <= 1e-13 && fine <= 1e-13)
    return row(suite, c, Status::pass, 0.0, 0.0, what + ": identity holds to rounding at both steps");
  SuiteResult r = in_bracket(suite, c, coarse / fine, lo, hi, what + " halving ratio");
  r.detail += fmt::format(" (max {} at dt, {} at dt/2)", detail::g(coarse), detail::g(fine));
  return r;
}

inline SuiteOutput run_identities(const SuiteContext& ctx, const IdentitiesParams& p) {
  const std::string S = "identities";
  SuiteOutput out{S,
                  "Time-change identities on xi paths: rho_T(x) against A_T(Phi x), the round trip "
                  "Psi(Phi x) against x, and the clock inverses rho(eta_t) = t, theta(A_t) = t; the first "
                  "two should shrink linearly with the fine step.",
                  {}, {}, {}};
  const ModelSpec spec = ctx.model.with_n(p.n);
  const double T = spec.horizon_T;
  const double s1 = spec.diffusion.sigma1;
  const double M = spec.drift.lipschitz_M;
  const FineGridConfig coarse{p.spi, 1.0}, fine{2 * p.spi, 1.0};
  const std::uint64_t seed = detail::stream_seed(ctx.seed, S, "paths");

  struct Stats {
    double clock[2];
    double roundtrip[2];
    double to_bound;
    double inverse;
  };
  auto draws = replicate_map<Stats>(p.replicates, [&](std::uint64_t id) {
    const BrownianDriver drv = make_driver(seed, id, spec, fine);
    Stats st{};
    for (int k = 0; k < 2; ++k) {
      const FineGridConfig& grid = k == 0 ? coarse : fine;
      const SamplePath x = simulate_constant_eps(ConstantEpsForm::f_over_sigma2, spec, grid, drv);
      const StoppedPath ph = phi_map(x, spec);
      const double rho_T = ClockIntegral::rho(x, spec).at(T);
      st.clock[k] = std::abs(rho_T - ClockIntegral::theta(ph.path, spec).inverse(T));
      const SamplePath back = psi_map(ph, spec);
      double sup = 0.0;
      for (std::size_t j = 0; j < std::min(x.size(), back.size()); ++j) sup = std::max(sup, std::abs(back[j] - x[j]));
      st.roundtrip[k] = sup;
      if (k == 0) {
        const double bound = p.bound_factor * grid.dt(spec) * (M * (1.0 + x.max_abs()) * s1 * s1 + 1.0);
        st.to_bound = sup / bound;
        const ClockIntegral rho = ClockIntegral::rho(x, spec);
        const ClockIntegral theta = ClockIntegral::theta(x, spec);
        const BrownianDriver q = drv.substream(StreamPurpose::reference_sample);
        double worst = 0.0;
        for (std::uint64_t j = 0; j < 16; ++j) {
          const double a = q.uniform(2 * j) * rho.total();
          worst = std::max(worst, std::abs(rho.at(rho.inverse(a)) - a));
          const double b = q.uniform(2 * j + 1) * theta.total();
          worst = std::max(worst, std::abs(theta.at(theta.inverse(b)) - b));
        }
        st.inverse = worst;
      }
    }
    return st;
  }, ctx.threads);
  const auto stats = detail::present_or_throw(draws, seed);

  double clock[2] = {0, 0}, rt[2] = {0, 0}, to_bound = 0, inverse = 0;
  for (const auto& st : stats) {
    for (int k = 0; k < 2; ++k) {
      clock[k] = std::max(clock[k], st.clock[k]);
      rt[k] = std::max(rt[k], st.roundtrip[k]);
    }
    to_bound = std::max(to_bound, st.to_bound);
    inverse = std::max(inverse, st.inverse);
  }
  const Cell c = cell(p.n, spec.epsilon);
  const double dt = coarse.dt(spec);
  out.results.push_back(at_most(S, c, clock[0], p.bound_factor * dt * s1 * s1,
                                fmt::format("max |rho_T - A_T(Phi x)| over {} paths, dt {}", stats.size(), detail::g(dt))));
  out.results.push_back(at_most(S, c, to_bound, 1.0,
                                fmt::format("max sup|Psi(Phi x) - x| / (bound on its path); raw max {}", detail::g(rt[0]))));
  out.results.push_back(halving_row(S, c, clock[0], clock[1], p.halving_lo, p.halving_hi, "clock identity"));
  out.results.push_back(halving_row(S, c, rt[0], rt[1], p.halving_lo, p.halving_hi, "round trip"));
  out.results.push_back(at_most(S, c, inverse, p.inverse_tol, "max clock inverse error at 16 levels per path"));
  return out;
}

// ---------------------------------------------------------------------------
// law_preservation

struct LawParams {
  int n;
  std::size_t replicates;
  int spi;
  double alpha;
};

inline LawParams read_law(const HarnessConfig& cfg) {
  const std::string s = "law_preservation";
  return {static_cast<int>(cfg.integer(s + ".n")), static_cast<std::size_t>(cfg.replicates(s)),
          cfg.steps_per_interval(s), cfg.real(s + ".alpha")};
}

inline SuiteOutput run_law(const SuiteContext& ctx, const LawParams& p) {
  const std::string S = "law_preservation";
  SuiteOutput out{S,
                  "Marginal law of the re-clocked xi(A_t) against the direct diffusion y_t at t = T/4, T/2, "
                  "T (two-sample KS, level split over the three times).",
                  {}, {}, {}};
  const ModelSpec spec = ctx.model.with_n(p.n);
  const double T = spec.horizon_T;
  const std::array<double, 3> times = {T / 4, T / 2, T};
  const FineGridConfig gy{p.spi, 1.0};
  const FineGridConfig gx = FineGridConfig::for_reclocking(spec, p.spi);
  const std::uint64_t sx = detail::stream_seed(ctx.seed, S, "xi");
  const std::uint64_t sy = detail::stream_seed(ctx.seed, S, "y");

  using Triple = std::array<double, 3>;
  const auto xi = detail::present_or_throw(replicate_map<Triple>(p.replicates, [&](std::uint64_t id) {
    const SamplePath x = simulate_constant_eps(ConstantEpsForm::f_over_sigma2, spec, gx, make_driver(sx, id, spec, gx));
    const ClockIntegral theta = ClockIntegral::theta(x, spec);
    Triple r{};
    for (std::size_t j = 0; j < 3; ++j) r[j] = x.value_at(theta.inverse(times[j]));
    return r;
  }, ctx.threads), sx);
  const auto ys = detail::present_or_throw(replicate_map<Triple>(p.replicates, [&](std::uint64_t id) {
    const SamplePath y = simulate_y(spec, gy, make_driver(sy, id, spec, gy));
    Triple r{};
    for (std::size_t j = 0; j < 3; ++j) r[j] = y.value_at(times[j]);
    return r;
  }, ctx.threads), sy);

  const double level = p.alpha / 3.0;
  for (std::size_t j = 0; j < 3; ++j) {
    const KsResult ks = ks_two_sample(detail::column(xi, j), detail::column(ys, j));
    out.results.push_back(at_least(S, cell(p.n, spec.epsilon), ks.p_value, level,
                                   fmt::format("t={} KS D={} p={}", detail::g(times[j]), detail::g(ks.statistic),
                                               detail::g(ks.p_value))));
  }
  return out;
}

// ---------------------------------------------------------------------------
// lemma2 / lemma1: rate sweeps

struct RateSweepParams {
  std::vector<int> n_list;
  std::vector<double> eps_list;
  std::size_t replicates;
  long long fine_steps;
  double eps_fixed;
  int n_fixed;
  double w_eps_axis;
};

inline RateSweepParams read_rate_sweep(const HarnessConfig& cfg, const std::string& s) {
  return {cfg.int_list(cfg.list_key(s, "n")),
          cfg.real_list(cfg.list_key(s, "eps")),
          static_cast<std::size_t>(cfg.replicates(s)),
          cfg.integer(s + ".fine_steps"),
          cfg.real(s + ".eps_fixed"),
          static_cast<int>(cfg.integer(s + ".n_fixed")),
          cfg.real(s + ".w_eps_axis")};
}

using RateEstimator = std::function<MCEstimate(const ModelSpec&, const FineGridConfig&, std::size_t,
                                               std::uint64_t, unsigned)>;

struct AxisSweep {
  RateAxis axis;
  std::vector<RatePoint> points;
  std::optional<RateTable> table;
  bool vanishes = false;
  std::string error;
};

inline AxisSweep sweep_axis(const SuiteContext& ctx, const std::string& suite, RateAxis axis,
                            const RateSweepParams& p, const RateEstimator& estimate) {
  AxisSweep sw{axis, {}, std::nullopt, false, {}};
  // One seed per axis: with a common fine step the points share Brownian paths.
  const std::uint64_t seed = detail::stream_seed(ctx.seed, suite, to_string(axis));
  if (axis == RateAxis::n) {
    for (int n : p.n_list) {
      const ModelSpec spec = ctx.model.with_n(n).with_epsilon(p.eps_fixed);
      const FineGridConfig grid{detail::fine_spi(n, p.fine_steps), 1.0};
      sw.points.push_back({static_cast<double>(n), n, p.eps_fixed, estimate(spec, grid, p.replicates, seed, ctx.threads)});
    }
  } else {
    for (double e : p.eps_list) {
      ModelSpec spec = ctx.model.with_n(p.n_fixed).with_epsilon(e);
      spec.w = p.w_eps_axis;
      const FineGridConfig grid{detail::fine_spi(p.n_fixed, p.fine_steps), 1.0};
      sw.points.push_back({e, p.n_fixed, e, estimate(spec, grid, p.replicates, seed, ctx.threads)});
    }
  }
  sw.vanishes = std::all_of(sw.points.begin(), sw.points.end(),
                            [](const RatePoint& q) { return std::abs(q.estimate.mean) <= 1e-12; });
  if (!sw.vanishes) {
    try {
      sw.table = make_rate_table(suite, axis, sw.points);
    } catch (const DegenerateRatePoint& e) {
      sw.error = e.what();
    } catch (const std::invalid_argument& e) {
      sw.error = e.what();
    }
  }
  return sw;
}

/// Slope row for one axis sweep; vanishing quantities pass as exact.
inline SuiteResult slope_row(const std::string& suite, const AxisSweep& sw, double lo, double hi,
                             const std::string& what, Status on_miss = Status::fail) {
  if (sw.vanishes)
    return row(suite, global_cell(), Status::pass, 0.0, 0.0, what + ": quantity vanishes at every point");
  if (!sw.table) return row(suite, global_cell(), Status::fail, std::nan(""), lo, what + ": " + sw.error);
  SuiteResult r = in_bracket(suite, global_cell(), sw.table->fitted_slope, lo, hi, what + " slope", on_miss);
  r.detail += fmt::format(" (95% CI +/- {}, {} points)", detail::g(sw.table->slope_ci_halfwidth), sw.points.size());
  return r;
}

inline void keep_table(SuiteOutput& out, const AxisSweep& sw, const std::string& name = {}) {
  if (sw.table) out.tables.push_back(*sw.table);
  else if (!sw.points.empty())
    out.tables.push_back(RateTable{name.empty() ? out.suite : name, sw.axis, sw.points, std::nan(""), std::nan("")});
}

struct Lemma2Params {
  RateSweepParams sweep;
  double n_lo, n_hi, eps_lo, eps_hi;
};

inline Lemma2Params read_lemma2(const HarnessConfig& cfg) {
  const std::string s = "lemma2";
  return {read_rate_sweep(cfg, s), cfg.real(s + ".slope_n_lo"), cfg.real(s + ".slope_n_hi"),
          cfg.real(s + ".slope_eps_lo"), cfg.real(s + ".slope_eps_hi")};
}

inline SuiteOutput run_lemma2(const SuiteContext& ctx, const Lemma2Params& p) {
  const std::string S = "lemma2";
  SuiteOutput out{S,
                  "Clock gap E|A_T - A_bar^n_T| under xi: decay in n at vanishing noise, growth in epsilon "
                  "at fixed large n.",
                  {}, {}, {}};
  const RateEstimator est = [](const ModelSpec& s, const FineGridConfig& g, std::size_t r, std::uint64_t seed,
                               unsigned t) { return estimate_clock_gap(s, g, r, seed, t); };
  const AxisSweep sn = sweep_axis(ctx, S, RateAxis::n, p.sweep, est);
  const AxisSweep se = sweep_axis(ctx, S, RateAxis::epsilon, p.sweep, est);
  keep_table(out, sn);
  keep_table(out, se);
  out.results.push_back(slope_row(S, sn, p.n_lo, p.n_hi, fmt::format("n-axis (eps {})", detail::g(p.sweep.eps_fixed))));
  out.results.push_back(slope_row(S, se, p.eps_lo, p.eps_hi,
                                  fmt::format("eps-axis (n {}, w {})", p.sweep.n_fixed, detail::g(p.sweep.w_eps_axis))));
  return out;
}

struct Lemma1Params {
  RateSweepParams sweep;
  double n_lo, n_hi, proof_lo, proof_hi, statement_lo, statement_hi;
};

inline Lemma1Params read_lemma1(const HarnessConfig& cfg) {
  const std::string s = "lemma1";
  return {read_rate_sweep(cfg, s),
          cfg.real(s + ".slope_n_lo"),
          cfg.real(s + ".slope_n_hi"),
          cfg.real(s + ".slope_eps_proof_lo"),
          cfg.real(s + ".slope_eps_proof_hi"),
          cfg.real(s + ".slope_eps_statement_lo"),
          cfg.real(s + ".slope_eps_statement_hi")};
}

inline SuiteOutput run_lemma1(const SuiteContext& ctx, const Lemma1Params& p) {
  const std::string S = "lemma1";
  SuiteOutput out{S,
                  "Drift gap E int_0^{A_bar^n_T} (f/sigma^2 - g_bar_n)^2 ds under xi: decay in n at vanishing "
                  "noise; the epsilon slope is set against the eps^2/n and eps/n hypotheses.",
                  {}, {}, {}};
  const RateEstimator est = [](const ModelSpec& s, const FineGridConfig& g, std::size_t r, std::uint64_t seed,
                               unsigned t) { return estimate_drift_gap_l2(s, g, r, seed, t); };
  const AxisSweep sn = sweep_axis(ctx, S, RateAxis::n, p.sweep, est);
  const AxisSweep se = sweep_axis(ctx, S, RateAxis::epsilon, p.sweep, est);
  keep_table(out, sn);
  keep_table(out, se);
  out.results.push_back(slope_row(S, sn, p.n_lo, p.n_hi, fmt::format("n-axis (eps {})", detail::g(p.sweep.eps_fixed))));
  const std::string ax = fmt::format("eps-axis (n {}, w {})", p.sweep.n_fixed, detail::g(p.sweep.w_eps_axis));
  const SuiteResult proof = slope_row(S, se, p.proof_lo, p.proof_hi, ax + " vs eps^2/n", Status::warn);
  const SuiteResult stmt = slope_row(S, se, p.statement_lo, p.statement_hi, ax + " vs eps/n", Status::warn);
  out.results.push_back(proof);
  out.results.push_back(stmt);
  if (se.table) {
    const bool a = proof.status == Status::pass, b = stmt.status == Status::pass;
    out.notes.push_back(fmt::format("epsilon slope {}: supported hypothesis {}", detail::g(se.table->fitted_slope),
                                    a && b ? "ambiguous (both brackets)"
                                    : a    ? "eps^2/n"
                                    : b    ? "eps/n"
                                           : "neither"));
  }
  return out;
}

// ---------------------------------------------------------------------------
// tv_bounds

struct TvBoundsParams {
  std::vector<int> n_list;
  std::vector<double> eps_list;
  std::size_t replicates;
  long long fine_steps;
  double se_multiplier;
};

inline TvBoundsParams read_tv_bounds(const HarnessConfig& cfg) {
  const std::string s = "tv_bounds";
  return {cfg.int_list(cfg.list_key(s, "n")), cfg.real_list(cfg.list_key(s, "eps")),
          static_cast<std::size_t>(cfg.replicates(s)), cfg.integer(s + ".fine_steps"), cfg.real(s + ".se_multiplier")};
}

inline SuiteOutput run_tv_bounds(const SuiteContext& ctx, const TvBoundsParams& p) {
  const std::string S = "tv_bounds";
  SuiteOutput out{S,
                  "Total variation between the xi laws with drift f/sigma^2 and g_bar_n, stopped at "
                  "A_bar^n_T, against 4 sqrt(E h_f) with h_f the Hellinger process.",
                  {}, {}, {}};
  double worst_excess = -1.0;
  for (int n : p.n_list) {
    for (double e : p.eps_list) {
      const ModelSpec spec = ctx.model.with_n(n).with_epsilon(e);
      const FineGridConfig grid = FineGridConfig::for_reclocking(spec, detail::fine_spi(n, p.fine_steps));
      const std::uint64_t seed = detail::stream_seed(ctx.seed, S, fmt::format("n{}/eps{}", n, e));
      const DriftHypothesis h1 = g_bar_n_hypothesis(spec);
      const DriftHypothesis h0 = f_over_sigma2_hypothesis(spec);
      auto draws = replicate_map<std::pair<double, double>>(p.replicates, [&](std::uint64_t id) {
        const SamplePath x = simulate_constant_eps(ConstantEpsForm::f_over_sigma2, spec, grid,
                                                   make_driver(seed, id, spec, grid));
        const double stop = a_bar_n(x, spec, spec.horizon_T).value;
        return std::make_pair(girsanov_log_lr(x, h1, h0, stop).value, hellinger_process(x, spec, stop));
      }, ctx.threads);
      std::vector<std::optional<double>> ls(draws.size()), hs(draws.size());
      for (std::size_t i = 0; i < draws.size(); ++i)
        if (draws[i]) {
          ls[i] = draws[i]->first;
          hs[i] = draws[i]->second;
        }
      const MCEstimate tv = tv_from_log_lr(ls, seed);
      const MCEstimate hf = summarize(hs, seed);
      const double root = std::sqrt(hf.mean);
      const double bound = 4.0 * root;
      const double se_bound = root > 0.0 ? 2.0 * hf.std_error / root : 0.0;
      const double cse = std::sqrt(tv.std_error * tv.std_error + se_bound * se_bound);
      const double threshold = bound + p.se_multiplier * cse;
      std::string detail = fmt::format("TV {} +/- {}, 4 sqrt(E h_f) = {} +/- {}", detail::g(tv.mean),
                                       detail::g(tv.std_error), detail::g(bound), detail::g(se_bound));
      if (!tv.warning.empty()) {
        detail += "; " + tv.warning;
        out.notes.push_back(fmt::format("n={} eps={}: {}", n, detail::g(e), tv.warning));
      }
      out.results.push_back(at_most(S, cell(n, e), tv.mean, threshold, std::move(detail)));
      worst_excess = std::max(worst_excess, tv.mean - 1.0 - p.se_multiplier * tv.std_error);
    }
  }
  out.results.push_back(at_most(S, global_cell(), worst_excess, 0.0,
                                "max over cells of TV - 1 - k SE (TV estimates must not exceed 1)"));
  return out;
}

// ---------------------------------------------------------------------------
// girsanov

struct GirsanovParams {
  double epsilon;
  int n, spi;
  std::size_t replicates;
  double c1, c0, const_epsilon, se_multiplier;
};

inline GirsanovParams read_girsanov(const HarnessConfig& cfg) {
  const std::string s = "girsanov";
  return {cfg.real(s + ".epsilon"), static_cast<int>(cfg.integer(s + ".n")), cfg.steps_per_interval(s),
          static_cast<std::size_t>(cfg.replicates(s)), cfg.real(s + ".c1"), cfg.real(s + ".c0"),
          cfg.real(s + ".const_epsilon"), cfg.real(s + ".se_multiplier")};
}

inline SuiteOutput run_girsanov(const SuiteContext& ctx, const GirsanovParams& p) {
  const std::string S = "girsanov";
  SuiteOutput out{S,
                  "Likelihood-ratio calibration E_h0 exp(l) = 1 for the drift pairs (f/sigma^2, 0), "
                  "(f/sigma^2, g_bar_n), (b, b_bar_n); constant-drift TV against the Gaussian closed form.",
                  {}, {}, {}};
  const ModelSpec spec = ctx.model.with_n(p.n).with_epsilon(p.epsilon);
  const FineGridConfig grid{p.spi, 1.0};
  const std::size_t steps = grid.steps_to_T(spec);
  const double dt = grid.dt(spec);
  const Cell c = cell(p.n, p.epsilon);

  auto calibrate = [&](const std::string& label, const DriftHypothesis& h1, const DriftHypothesis& h0, double start) {
    const std::uint64_t seed = detail::stream_seed(ctx.seed, S, label);
    const auto ls = replicate_map<double>(p.replicates, [&](std::uint64_t id) {
      const SamplePath x = simulate_hypothesis(h0, start, steps, dt, make_driver(seed, id, spec, grid));
      return girsanov_log_lr(x, h1, h0, spec.horizon_T).value;
    }, ctx.threads);
    const MCEstimate m = lr_mean_from_log_lr(ls, seed);
    out.results.push_back(at_most(S, c, std::abs(m.mean - 1.0), p.se_multiplier * m.std_error,
                                  fmt::format("pair ({}): E exp(l) = {} +/- {}", label, detail::g(m.mean),
                                              detail::g(m.std_error))));
  };
  calibrate("f/sigma^2, 0", f_over_sigma2_hypothesis(spec), zero_hypothesis(spec.epsilon), spec.w);
  calibrate("f/sigma^2, g_bar_n", f_over_sigma2_hypothesis(spec), g_bar_n_hypothesis(spec), spec.w);
  try {
    auto table = std::make_shared<const TransformTable>(build_transform(spec));
    calibrate("b, b_bar_n", b_hypothesis(spec, table), b_bar_n_hypothesis(spec, table), table->F(spec.w));
  } catch (const ModelError& e) {
    out.results.push_back(row(S, c, Status::fail, std::nan(""), 0.0, std::string("pair (b, b_bar_n): ") + e.what()));
  }

  const ModelSpec cs = ctx.model.with_n(p.n).with_epsilon(p.const_epsilon);
  const std::uint64_t seed = detail::stream_seed(ctx.seed, S, "constant");
  const MCEstimate tv = estimate_tv_from_lr(cs, constant_hypothesis(p.c1, p.const_epsilon),
                                            constant_hypothesis(p.c0, p.const_epsilon), StopRule::fixed_T, grid,
                                            p.replicates, seed, ctx.threads);
  const double exact = gaussian_shift_tv(p.c1, p.c0, cs.horizon_T, p.const_epsilon);
  out.results.push_back(at_most(S, cell(p.n, p.const_epsilon), std::abs(tv.mean - exact),
                                p.se_multiplier * tv.std_error,
                                fmt::format("constant drifts {} vs {}: TV {} +/- {}, closed form {}", detail::g(p.c1),
                                            detail::g(p.c0), detail::g(tv.mean), detail::g(tv.std_error),
                                            detail::g(exact))));
  return out;
}

// ---------------------------------------------------------------------------
// sufficiency

struct SufficiencyParams {
  int n;
  std::size_t vectors;
  double tolerance;
  int spi;
};

inline SufficiencyParams read_sufficiency(const HarnessConfig& cfg) {
  const std::string s = "sufficiency";
  return {static_cast<int>(cfg.integer(s + ".n")), static_cast<std::size_t>(cfg.integer(s + ".vectors")),
          cfg.real(s + ".tolerance"), cfg.steps_per_interval(s)};
}

inline SuiteOutput run_sufficiency(const SuiteContext& ctx, const SufficiencyParams& p) {
  const std::string S = "sufficiency";
  SuiteOutput out{S,
                  "Euler-chain log-density ratio against the Gaussian-product log-density difference, and "
                  "dependence of the path version on the grid values only.",
                  {}, {}, {}};
  const ModelSpec spec = ctx.model.with_n(p.n);
  const auto n = static_cast<std::size_t>(p.n);
  const auto spi = static_cast<std::size_t>(p.spi);
  const double h = spec.obs_step();
  const std::uint64_t seed = detail::stream_seed(ctx.seed, S, "vectors");
  double worst = 0.0;
  std::size_t mismatches = 0;
  for (std::uint64_t v = 0; v < p.vectors; ++v) {
    const BrownianDriver d{seed, v, 1.0};
    std::vector<double> obs(n + 1);
    obs[0] = spec.w;
    for (std::size_t i = 0; i < n; ++i) obs[i + 1] = obs[i] + std::sqrt(h) * d.normal(i);
    worst = std::max(worst, std::abs(euler_sufficient_logdensity(obs, spec) - gaussian_product_logratio(obs, spec)));

    // Two fine paths agreeing at the observation times only.
    std::vector<double> a(n * spi + 1), b(n * spi + 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < spi; ++k) {
        const double u = static_cast<double>(k) / static_cast<double>(spi);
        a[i * spi + k] = obs[i] + u * (obs[i + 1] - obs[i]);
        b[i * spi + k] = k == 0 ? obs[i] : a[i * spi + k] + d.normal(n + i * spi + k);
      }
    a[n * spi] = b[n * spi] = obs[n];
    const double dt = h / static_cast<double>(spi);
    const double la = euler_sufficient_logdensity(SamplePath(0.0, dt, a), spec);
    const double lb = euler_sufficient_logdensity(SamplePath(0.0, dt, b), spec);
    if (std::memcmp(&la, &lb, sizeof la) != 0) ++mismatches;
  }
  const Cell c = cell(p.n, spec.epsilon);
  out.results.push_back(at_most(S, c, worst, p.tolerance,
                                fmt::format("max |difference| over {} random observation vectors", p.vectors)));
  out.results.push_back(at_most(S, c, static_cast<double>(mismatches), 0.0,
                                "paths sharing grid values with different outputs"));
  return out;
}

// ---------------------------------------------------------------------------
// lamperti

struct LampertiParams {
  int n;
  std::vector<int> sweep_n;
  std::size_t replicates, rate_replicates;
  long long fine_steps;
  double alpha;
  std::size_t lipschitz_probes;
  double lipschitz_factor, slope_lo, slope_hi;
};

inline LampertiParams read_lamperti(const HarnessConfig& cfg) {
  const std::string s = "lamperti";
  if (!cfg.has("model.L")) throw ConfigError("model.L: required by the lamperti suite");
  return {static_cast<int>(cfg.integer(s + ".n")),
          cfg.int_list(s + ".sweep_n"),
          static_cast<std::size_t>(cfg.replicates(s)),
          static_cast<std::size_t>(cfg.replicates(s, "rate_replicates")),
          cfg.integer(s + ".fine_steps"),
          cfg.real(s + ".alpha"),
          static_cast<std::size_t>(cfg.integer(s + ".lipschitz_probes")),
          cfg.real(s + ".lipschitz_factor"),
          cfg.real(s + ".slope_lo"),
          cfg.real(s + ".slope_hi")};
}

inline SuiteOutput run_lamperti(const SuiteContext& ctx, const LampertiParams& p) {
  const std::string S = "lamperti";
  SuiteOutput out{S,
                  "Lamperti chain: law of F(y_T) against mu_T, Lipschitz constant and origin value of b, and "
                  "decay in n of the mu / mu_bar distance (Hellinger surrogate 4 sqrt(E int (b - b_bar_n)^2 / 8); "
                  "Monte Carlo TV reported alongside).",
                  {}, {}, {}};
  const ModelSpec spec = ctx.model.with_n(p.n);
  const auto table = std::make_shared<const TransformTable>(build_transform(spec));
  const Cell c = cell(p.n, spec.epsilon);

  {
    const FineGridConfig grid{detail::fine_spi(p.n, p.fine_steps), 1.0};
    const std::uint64_t sy = detail::stream_seed(ctx.seed, S, "y");
    const std::uint64_t sm = detail::stream_seed(ctx.seed, S, "mu");
    const auto fy = detail::present_or_throw(replicate_map<double>(p.replicates, [&](std::uint64_t id) {
      return table->F(simulate_y(spec, grid, make_driver(sy, id, spec, grid)).values().back());
    }, ctx.threads), sy);
    const auto mu = detail::present_or_throw(replicate_map<double>(p.replicates, [&](std::uint64_t id) {
      return simulate_mu_family(MuForm::mu, spec, grid, make_driver(sm, id, spec, grid), *table).values().back();
    }, ctx.threads), sm);
    const KsResult ks = ks_two_sample(fy, mu);
    out.results.push_back(at_least(S, c, ks.p_value, p.alpha,
                                   fmt::format("F(y_T) vs mu_T: KS D={} p={}", detail::g(ks.statistic), detail::g(ks.p_value))));
  }

  {
    const double v0 = table->F_values().front(), v1 = table->F_values().back();
    const double step = (v1 - v0) / static_cast<double>(p.lipschitz_probes);
    double worst = 0.0;
    double prev = drift_b(*table, spec, v0);
    for (std::size_t j = 1; j <= p.lipschitz_probes; ++j) {
      const double b = drift_b(*table, spec, v0 + static_cast<double>(j) * step);
      worst = std::max(worst, std::abs(b - prev) / step);
      prev = b;
    }
    const double bound = b_lipschitz_bound(spec);
    out.results.push_back(at_most(S, c, worst, bound * p.lipschitz_factor,
                                  fmt::format("empirical Lipschitz constant of b over {} probe pairs, bound {}",
                                              p.lipschitz_probes, detail::g(bound))));
    out.results.push_back(at_most(S, c, std::abs(drift_b(*table, spec, 0.0)), b_origin_bound(spec), "|b(0)|"));
  }

  std::vector<RatePoint> surrogate, tv;
  const std::uint64_t seed = detail::stream_seed(ctx.seed, S, "rate");
  for (int n : p.sweep_n) {
    const ModelSpec sn = ctx.model.with_n(n);
    const auto tn = std::make_shared<const TransformTable>(build_transform(sn));
    const FineGridConfig grid{detail::fine_spi(n, p.fine_steps), 1.0};
    const DriftHypothesis h0 = b_hypothesis(sn, tn), h1 = b_bar_n_hypothesis(sn, tn);
    const double start = tn->F(sn.w);
    auto draws = replicate_map<std::pair<double, double>>(p.rate_replicates, [&](std::uint64_t id) {
      const SamplePath mu = simulate_hypothesis(h0, start, grid.steps_to_T(sn), grid.dt(sn), make_driver(seed, id, sn, grid));
      return std::make_pair(lamperti_gap_l2(mu, sn, *tn), girsanov_log_lr(mu, h1, h0, sn.horizon_T).value);
    }, ctx.threads);
    std::vector<std::optional<double>> gaps(draws.size()), ls(draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i)
      if (draws[i]) {
        gaps[i] = draws[i]->first;
        ls[i] = draws[i]->second;
      }
    const MCEstimate gap = summarize(gaps, seed);
    MCEstimate s = gap;
    s.mean = 4.0 * std::sqrt(gap.mean / 8.0);
    s.std_error = gap.mean > 0.0 ? gap.std_error / (4.0 * std::sqrt(gap.mean / 8.0)) : 0.0;
    surrogate.push_back({static_cast<double>(n), n, sn.epsilon, s});
    const MCEstimate t = tv_from_log_lr(ls, seed);
    if (!t.warning.empty()) out.notes.push_back(fmt::format("TV at n={}: {}", n, t.warning));
    tv.push_back({static_cast<double>(n), n, sn.epsilon, t});
  }
  AxisSweep ss{RateAxis::n, surrogate, std::nullopt, false, {}};
  AxisSweep st{RateAxis::n, tv, std::nullopt, false, {}};
  for (AxisSweep* sw : {&ss, &st}) {
    sw->vanishes = std::all_of(sw->points.begin(), sw->points.end(),
                               [](const RatePoint& q) { return std::abs(q.estimate.mean) <= 1e-12; });
    if (sw->vanishes) continue;
    try {
      sw->table = make_rate_table(sw == &ss ? "lamperti/surrogate" : "lamperti/tv", RateAxis::n, sw->points);
    } catch (const std::exception& e) {
      sw->error = e.what();
    }
  }
  keep_table(out, ss, "lamperti/surrogate");
  keep_table(out, st, "lamperti/tv");
  out.results.push_back(slope_row(S, ss, p.slope_lo, p.slope_hi, fmt::format("surrogate n-axis (eps {})", detail::g(spec.epsilon))));
  out.results.push_back(slope_row(S, st, p.slope_lo, p.slope_hi, "Monte Carlo TV n-axis", Status::warn));
  if (table->overrun_count() > 0)
    out.notes.push_back(fmt::format("transform table extrapolated {} times", table->overrun_count()));
  return out;
}

// ---------------------------------------------------------------------------
// euler_marginal

struct EulerParams {
  double epsilon;
  int n;
  std::vector<int> trend_n;
  std::size_t replicates, trend_batches, trend_batch_size;
  long long fine_steps;
  double alpha, trend_alpha;
};

inline EulerParams read_euler(const HarnessConfig& cfg) {
  const std::string s = "euler_marginal";
  return {cfg.real(s + ".epsilon"),
          static_cast<int>(cfg.integer(s + ".n")),
          cfg.int_list(s + ".trend_n"),
          static_cast<std::size_t>(cfg.replicates(s)),
          static_cast<std::size_t>(cfg.integer(s + ".trend_batches")),
          static_cast<std::size_t>(cfg.integer(s + ".trend_batch_size")),
          cfg.integer(s + ".fine_steps"),
          cfg.real(s + ".alpha"),
          cfg.real(s + ".trend_alpha")};
}

inline SuiteOutput run_euler(const SuiteContext& ctx, const EulerParams& p) {
  const std::string S = "euler_marginal";
  SuiteOutput out{S,
                  "Law of the Euler chain endpoint Z_n against the fine-grid diffusion y_T (two-sample KS), "
                  "and the trend of the KS statistic across n.",
                  {}, {}, {}};
  auto samples = [&](const ModelSpec& spec, std::size_t first, std::size_t count, std::uint64_t sz,
                     std::uint64_t sy) {
    const FineGridConfig grid{detail::fine_spi(spec.n_obs, p.fine_steps), 1.0};
    auto z = detail::present_or_throw(replicate_map<double>(count, [&](std::uint64_t id) {
      return simulate_euler(spec, make_driver(sz, first + id, spec, grid)).back();
    }, ctx.threads), sz);
    auto y = detail::present_or_throw(replicate_map<double>(count, [&](std::uint64_t id) {
      return simulate_y(spec, grid, make_driver(sy, first + id, spec, grid)).values().back();
    }, ctx.threads), sy);
    return ks_two_sample(std::move(z), std::move(y));
  };

  const ModelSpec spec = ctx.model.with_n(p.n).with_epsilon(p.epsilon);
  const KsResult ks = samples(spec, 0, p.replicates, detail::stream_seed(ctx.seed, S, "z"),
                              detail::stream_seed(ctx.seed, S, "y"));
  out.results.push_back(at_least(S, cell(p.n, p.epsilon), ks.p_value, p.alpha,
                                 fmt::format("Z_n vs y_T: KS D={} p={}", detail::g(ks.statistic), detail::g(ks.p_value))));

  std::vector<double> xs, ds;
  std::string means;
  for (int n : p.trend_n) {
    const ModelSpec sn = ctx.model.with_n(n).with_epsilon(p.epsilon);
    const std::uint64_t sz = detail::stream_seed(ctx.seed, S, fmt::format("trend_z/{}", n));
    const std::uint64_t sy = detail::stream_seed(ctx.seed, S, fmt::format("trend_y/{}", n));
    double sum = 0.0;
    for (std::size_t b = 0; b < p.trend_batches; ++b) {
      const double d = samples(sn, b * p.trend_batch_size, p.trend_batch_size, sz, sy).statistic;
      xs.push_back(static_cast<double>(n));
      ds.push_back(d);
      sum += d;
    }
    means += fmt::format("{}n={}: {}", means.empty() ? "" : ", ", n, detail::g(sum / static_cast<double>(p.trend_batches)));
  }
  const SpearmanResult sp = spearman(xs, ds);
  const bool down = sp.rho < 0.0 && sp.p_value < p.trend_alpha;
  out.results.push_back(row(S, global_cell(), down ? Status::pass : Status::fail, sp.p_value, p.trend_alpha,
                            fmt::format("Spearman rho {} between n and batch KS D (mean D {})", detail::g(sp.rho), means)));
  return out;
}

// ---------------------------------------------------------------------------

/// Parameters of every requested suite, read before any suite runs.
struct SuitePlan {
  std::string name;
  std::function<SuiteOutput(const SuiteContext&)> run;
};

inline SuitePlan plan_suite(const HarnessConfig& cfg, const std::string& name) {
  if (name == "identities") return {name, [p = read_identities(cfg)](const SuiteContext& c) { return run_identities(c, p); }};
  if (name == "law_preservation") return {name, [p = read_law(cfg)](const SuiteContext& c) { return run_law(c, p); }};
  if (name == "lemma2") return {name, [p = read_lemma2(cfg)](const SuiteContext& c) { return run_lemma2(c, p); }};
  if (name == "lemma1") return {name, [p = read_lemma1(cfg)](const SuiteContext& c) { return run_lemma1(c, p); }};
  if (name == "tv_bounds") return {name, [p = read_tv_bounds(cfg)](const SuiteContext& c) { return run_tv_bounds(c, p); }};
  if (name == "girsanov") return {name, [p = read_girsanov(cfg)](const SuiteContext& c) { return run_girsanov(c, p); }};
  if (name == "sufficiency") return {name, [p = read_sufficiency(cfg)](const SuiteContext& c) { return run_sufficiency(c, p); }};
  if (name == "lamperti") return {name, [p = read_lamperti(cfg)](const SuiteContext& c) { return run_lamperti(c, p); }};
  if (name == "euler_marginal") return {name, [p = read_euler(cfg)](const SuiteContext& c) { return run_euler(c, p); }};
  throw ConfigError("run.suites: unknown suite '" + name + "'");
}

}  // namespace lecam::harness
