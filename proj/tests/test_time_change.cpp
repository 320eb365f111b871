#include <catch_amalgamated.hpp>

#include "lecam/path_engine.hpp"
#include "lecam/time_change.hpp"
#include "support.hpp"

using namespace lecam;
using lecam::testing::builtin;
using lecam::testing::default_model;

namespace {

SamplePath xi_path(const ModelSpec& s, int spi, std::uint64_t id) {
  const auto g = FineGridConfig::for_reclocking(s, spi);
  return simulate_constant_eps(ConstantEpsForm::f_over_sigma2, s, g, make_driver(77, id, s, g));
}

}  // namespace

TEST_CASE("constant sigma: every clock is linear") {
  const ModelSpec s = builtin("sin-drift/constant-sigma", 0.1, 0.5, 8);
  const SamplePath x = xi_path(s, 32, 1);
  for (double t : {0.1, 0.37, 1.0}) {
    CHECK(clock(x, s, ClockKind::rho, t).value == Catch::Approx(2.25 * t).epsilon(1e-12));
    CHECK(clock(x, s, ClockKind::theta, t).value == Catch::Approx(t / 2.25).epsilon(1e-12));
    CHECK(clock(x, s, ClockKind::A, t).value == Catch::Approx(2.25 * t).epsilon(1e-12));
    CHECK(clock(x, s, ClockKind::eta, t).value == Catch::Approx(t / 2.25).epsilon(1e-12));
    CHECK(a_bar_n(x, s, t).value == Catch::Approx(2.25 * t).epsilon(1e-12));
  }
}

TEST_CASE("clock integral and its inverse") {
  const ModelSpec s = default_model(0.1, 8);
  const SamplePath x = xi_path(s, 64, 2);
  const ClockIntegral rho = ClockIntegral::rho(x, s);
  const ClockIntegral theta = ClockIntegral::theta(x, s);
  // trapezoid oracle
  double acc = 0;
  for (std::size_t k = 1; k < x.size(); ++k) {
    acc += 0.5 * x.dt() * (s.sigma2(x[k - 1]) + s.sigma2(x[k]));
    REQUIRE(rho.accumulator()[k] == Catch::Approx(acc).epsilon(1e-13));
  }
  for (double level : {0.05, 0.5, 0.99}) {
    CHECK(rho.at(rho.inverse(level)) == Catch::Approx(level).margin(1e-13));
    CHECK(theta.at(theta.inverse(level)) == Catch::Approx(level).margin(1e-13));
  }
  CHECK(rho.inverse(0.0) == 0.0);
  CHECK_THROWS_AS(rho.at(x.t_end() + 1.0), ClockOverrun);
  CHECK_THROWS_AS(theta.inverse(theta.total() + 1.0), ClockOverrun);
}

TEST_CASE("clock bounds from sigma0 and sigma1") {
  const ModelSpec s = default_model(0.2, 8);
  for (std::uint64_t id = 0; id < 20; ++id) {
    const SamplePath x = xi_path(s, 32, id);
    const double a = clock(x, s, ClockKind::A, 1.0).value;
    CHECK(a >= 0.25 - 1e-9);
    CHECK(a <= 2.25 + 1e-9);
    const double ab = a_bar_n(x, s, 1.0).value;
    CHECK(ab >= 0.25 - 1e-9);
    CHECK(ab <= 2.25 + 1e-9);
  }
}

TEST_CASE("A_bar knots follow their recursion") {
  const ModelSpec s = default_model(0.1, 8);
  const SamplePath x = xi_path(s, 32, 3);
  const auto k = a_bar_knots(x, s);
  REQUIRE(k.size() == 9);
  CHECK(k[0] == 0.0);
  for (std::size_t i = 0; i < 8; ++i) CHECK(k[i + 1] == Catch::Approx(k[i] + s.sigma2(x.value_at(k[i])) / 8).epsilon(1e-15));
  CHECK(a_bar_n(x, s, 1.0).value == Catch::Approx(k[8]).epsilon(1e-14));
  // linear in between
  const double mid = a_bar_n(x, s, 0.5 / 8).value;
  CHECK(mid == Catch::Approx(0.5 * k[1]).epsilon(1e-13));
}

TEST_CASE("online tracker reproduces the offline knots") {
  const ModelSpec s = default_model(0.1, 8);
  const SamplePath x = xi_path(s, 32, 4);
  const auto k = a_bar_knots(x, s);
  AbarKnotTracker tr(s);
  tr.reset(x[0]);
  for (std::size_t j = 0; j < x.size(); ++j) {
    tr.advance(x.time_at(j), PathPrefix{x.values().first(j + 1), 0.0, x.dt()});
    if (tr.index() >= 8) break;
  }
  CHECK(tr.index() == 8);
  CHECK(tr.current_knot() == Catch::Approx(k[8]).epsilon(1e-14));
}

TEST_CASE("a prefix refuses to look ahead") {
  const std::vector<double> v{0.0, 1.0, 2.0};
  const PathPrefix p{v, 0.0, 0.5};
  CHECK(p.value_at(0.75) == Catch::Approx(1.5));
  CHECK_THROWS_AS(p.value_at(1.5), AdaptednessError);
}

TEST_CASE("g_bar_n lives on left-open intervals") {
  const ModelSpec s = default_model(0.1, 4);
  const SamplePath x = xi_path(s, 64, 5);
  const PiecewiseCoeff g = piecewise_coeffs(x, s, CoeffKind::g_bar_n);
  REQUIRE(g.left_open);
  CHECK(g.at(g.knots[1]) == g.levels[0]);
  CHECK(g.at(std::nextafter(g.knots[1], 10.0)) == g.levels[1]);
  CHECK(g.at(0.0) == 0.0);
  CHECK(g.levels[2] == Catch::Approx(s.f_over_sigma2(x.value_at(g.knots[2]))));

  const PiecewiseCoeff f = piecewise_coeffs(x, s, CoeffKind::f_bar_n);
  CHECK_FALSE(f.left_open);
  CHECK(f.at(0.0) == Catch::Approx(s.f(s.w)));
  CHECK(f.at(0.25) == Catch::Approx(s.f(x.value_at(0.25))));

  ModelSpec skip = s;
  skip.freeze = FreezeConvention::skip_first_interval;
  CHECK(piecewise_coeffs(x, skip, CoeffKind::f_bar_n).at(0.1) == 0.0);
}

TEST_CASE("sigma = 1: Phi and Psi are exact inverses") {
  const ModelSpec s = builtin("sin-drift/unit-sigma", 0.1, 0.5, 8);
  const SamplePath x = simulate_constant_eps(ConstantEpsForm::f_over_sigma2, s, FineGridConfig{32, 1.0},
                                             make_driver(1, 1, s, FineGridConfig{32, 1.0}));
  const StoppedPath ph = phi_map(x, s);
  CHECK(ph.stop_time == Catch::Approx(1.0).epsilon(1e-13));
  const SamplePath back = psi_map(ph, s);
  for (std::size_t k = 0; k < x.size(); ++k) CHECK(back[k] == Catch::Approx(x[k]).margin(1e-13));
}

TEST_CASE("round trip error is within the first-order bound") {
  const ModelSpec s = default_model(0.1, 8);
  const FineGridConfig g{128, 1.0};
  for (std::uint64_t id = 0; id < 5; ++id) {
    const SamplePath x = simulate_constant_eps(ConstantEpsForm::f_over_sigma2, s, g, make_driver(2, id, s, g));
    const StoppedPath ph = phi_map(x, s);
    const double rho_T = ClockIntegral::rho(x, s).at(1.0);
    CHECK(std::abs(rho_T - ClockIntegral::theta(ph.path, s).inverse(1.0)) <= 5 * g.dt(s) * 2.25);
    const SamplePath back = psi_map(ph, s);
    double sup = 0;
    for (std::size_t k = 0; k < x.size(); ++k) sup = std::max(sup, std::abs(back[k] - x[k]));
    CHECK(sup <= 5 * g.dt(s) * ((1 + x.max_abs()) * 2.25 + 1));
  }
}

TEST_CASE("stopping rules") {
  const ModelSpec s = default_model(0.1, 8);
  const SamplePath x = xi_path(s, 32, 6);
  const double a = stop_time_of(x, s, StopKind::A_T);
  const double ab = stop_time_of(x, s, StopKind::A_bar_T_n);
  CHECK(stop_time_of(x, s, StopKind::S_T_n) == std::min(a, ab));
  CHECK(stop_time_of(x, s, StopKind::fixed_T) == 1.0);
  const StoppedPath sp = stop_path(x, s, StopKind::S_T_n);
  CHECK(sp.stop_kind == StopKind::S_T_n);
}

TEST_CASE("kernel extension keeps the observed segment and stops at its own A_T") {
  const ModelSpec s = default_model(0.1, 8);
  int extended = 0;
  for (std::uint64_t id = 0; id < 30; ++id) {
    const SamplePath x = xi_path(s, 32, id);
    const StoppedPath sp = stop_path(x, s, StopKind::S_T_n);
    const auto drv = make_driver(5, id, s, FineGridConfig::for_reclocking(s, 32));
    const StoppedPath ext = kernel_extend(sp, s, drv);
    CHECK(ext.stop_kind == StopKind::A_T);
    const auto m = static_cast<std::size_t>(std::floor(sp.stop_time / x.dt() + 1e-12));
    for (std::size_t k = 0; k <= m; ++k) REQUIRE(ext.path[k] == x[k]);
    const ClockIntegral th = ClockIntegral::theta(ext.path, s);
    CHECK(th.at(ext.stop_time) == Catch::Approx(1.0).epsilon(1e-9));
    extended += ext.path.size() != x.size();
  }
  CHECK(extended > 0);
}
