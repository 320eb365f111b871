#include <catch_amalgamated.hpp>

#include "lecam/likelihood.hpp"
#include "lecam/path_engine.hpp"
#include "lecam/stats.hpp"
#include "support.hpp"

using namespace lecam;
using lecam::testing::builtin;
using lecam::testing::default_model;

namespace {

double brownian_endpoint(const BrownianDriver& d, std::size_t steps) {
  double s = 0;
  for (double v : d.increments(steps)) s += v;
  return s;
}

}  // namespace

TEST_CASE("constant coefficients give the exact Gaussian endpoint") {
  const ModelSpec s = builtin("constant-drift/constant-sigma", 0.2, 0.3, 8);
  const FineGridConfig g{16, 1.0};
  const auto drv = make_driver(3, 1, s, g);
  const SamplePath y = simulate_y(s, g, drv);
  const double W = brownian_endpoint(drv, g.steps_to_T(s));
  CHECK(y.values().back() == Catch::Approx(0.3 + 0.5 + 1.5 * 0.2 * W).margin(1e-12));
  CHECK(y.t_end() == Catch::Approx(1.0));

  // freezing changes nothing when nothing varies
  const SamplePath yb = simulate_y_bar(s, g, drv);
  for (std::size_t k = 0; k < y.size(); ++k) CHECK(yb[k] == Catch::Approx(y[k]).margin(1e-13));
}

TEST_CASE("skip_first_interval holds the frozen path at w on [0, t_1]") {
  ModelSpec s = default_model(0.1, 4);
  s.freeze = FreezeConvention::skip_first_interval;
  const FineGridConfig g{8, 1.0};
  const SamplePath y = simulate_y_bar(s, g, make_driver(1, 2, s, g));
  for (std::size_t k = 0; k <= 8; ++k) CHECK(y[k] == s.w);
  CHECK(y[9] != s.w);
}

TEST_CASE("Ornstein-Uhlenbeck moments") {
  // linear drift 0.25 - x/2 never reaches its clamp here; y_T ~ N(0.5 + (w-0.5)e^{-T/2}, eps^2 (1 - e^{-T}))
  const ModelSpec s = builtin("linear-drift/unit-sigma", 0.3, 1.5, 16);
  const FineGridConfig g{64, 1.0};
  std::vector<double> end(20000);
  for (std::size_t i = 0; i < end.size(); ++i) end[i] = simulate_y(s, g, make_driver(99, i, s, g)).values().back();
  const MeanSe m = mean_and_se(end);
  const double mean = 0.5 + (1.5 - 0.5) * std::exp(-0.5);
  const double var = 0.09 * (1.0 - std::exp(-1.0));
  CHECK(std::abs(m.mean - mean) < 4 * m.std_error + 1e-3);
  CHECK(m.std_dev * m.std_dev == Catch::Approx(var).epsilon(0.05));
}

TEST_CASE("Euler chain follows its recursion with the innovation substream") {
  const ModelSpec s = default_model(0.2, 10);
  const auto drv = BrownianDriver{4, 7, 0.01};
  const auto z = simulate_euler(s, drv);
  REQUIRE(z.size() == 11);
  const auto innov = drv.substream(StreamPurpose::euler_innovations);
  double x = s.w;
  for (int i = 1; i <= 10; ++i) {
    const double h = 0.1;
    x = x + h * std::sin(x) + 0.2 * std::sqrt(h) * (1 + 0.5 * std::sin(x)) * innov.normal(i - 1);
    CHECK(z[i] == Catch::Approx(x).margin(1e-14));
  }
}

TEST_CASE("grid simulation is coupled to a finer driver") {
  const ModelSpec s = default_model(0.1, 4);
  const FineGridConfig coarse{8, 1.0}, fine{16, 1.0};
  const auto drv = make_driver(1, 1, s, fine);
  const SamplePath a = simulate_y(s, coarse, drv);
  const SamplePath b = simulate_y(s, fine, drv);
  // same Brownian path: endpoints close, not identical
  CHECK(std::abs(a.values().back() - b.values().back()) < 0.05);
  CHECK(a.values().back() != b.values().back());
}

TEST_CASE("constant-eps simulators match the hypothesis sampler") {
  const ModelSpec s = default_model(0.2, 8);
  const FineGridConfig g = FineGridConfig::for_reclocking(s, 16);
  const auto drv = make_driver(12, 3, s, g);
  const std::size_t steps = g.span_steps(s);
  const double dt = g.dt(s);

  const SamplePath x = simulate_constant_eps(ConstantEpsForm::f_over_sigma2, s, g, drv);
  const SamplePath hx = simulate_hypothesis(f_over_sigma2_hypothesis(s), s.w, steps, dt, drv);
  REQUIRE(x.size() == hx.size());
  for (std::size_t k = 0; k < x.size(); ++k) REQUIRE(x[k] == hx[k]);

  const SamplePath gb = simulate_constant_eps(ConstantEpsForm::gbar, s, g, drv);
  const SamplePath hg = simulate_hypothesis(g_bar_n_hypothesis(s), s.w, steps, dt, drv);
  for (std::size_t k = 0; k < gb.size(); ++k) REQUIRE(gb[k] == hg[k]);
  CHECK(g.span_steps(s) > g.steps_to_T(s));
}

TEST_CASE("zeta_bar freezes sigma^2 at the grid knots") {
  const ModelSpec s = builtin("zero-drift/half-sin-sigma", 0.1, 0.5, 4);
  const FineGridConfig g{8, 1.0};
  const auto drv = make_driver(1, 1, s, g);
  // zero drift: zeta_bar and xi are both w + eps W
  const SamplePath a = simulate_constant_eps(ConstantEpsForm::zeta_bar, s, g, drv);
  const SamplePath b = simulate_constant_eps(ConstantEpsForm::f_over_sigma2, s, g, drv);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
}

TEST_CASE("RK4 solves dz = sin z dt") {
  ModelSpec s = builtin("sin-drift/unit-sigma", 0.1, 0.5, 8);
  const SamplePath z = solve_ode(OdeForm::z, s, FineGridConfig{32, 1.0});
  // tan(z/2) = tan(w/2) e^t
  const double exact = 2.0 * std::atan(std::tan(0.25) * std::exp(1.0));
  CHECK(z.values().back() == Catch::Approx(exact).margin(1e-10));
  // sigma = 1: z_bar is the same ODE
  const SamplePath zb = solve_ode(OdeForm::z_bar, s, FineGridConfig{32, 1.0});
  CHECK(zb.values().back() == Catch::Approx(exact).margin(1e-10));
}

TEST_CASE("mu family and samplers") {
  const ModelSpec s = default_model(0.1, 8);
  const FineGridConfig g{16, 1.0};
  const TransformTable table = build_transform(s);
  const auto drv = make_driver(1, 1, s, g);
  const SamplePath mu = simulate_mu_family(MuForm::mu, s, g, drv, table);
  CHECK(mu[0] == Catch::Approx(table.F(s.w)));
  const SamplePath mb = simulate_mu_family(MuForm::mu_bar, s, g, drv, table);
  CHECK(mb[0] == mu[0]);
  CHECK(mb[1] == mu[1]);  // same drift on the first step

  CHECK(sampler_for(ExperimentId::M7).grid_only);
  CHECK(sampler_for(ExperimentId::M3).process == ProcessKind::xi);
  CHECK(sampler_for(ExperimentId::N5).process == ProcessKind::mu_bar);
  CHECK_THROWS_AS(simulate_process(ProcessKind::mu, s, g, drv), std::exception);
}

TEST_CASE("blow-up is reported with its step") {
  ModelSpec s = default_model(0.1, 4);
  s.drift.eval = [](double x) { return 1e200 * (1.0 + x * x); };
  const FineGridConfig g{8, 1.0};
  try {
    simulate_y(s, g, make_driver(1, 1, s, g));
    FAIL("no blow-up");
  } catch (const SimulationBlowUp& e) {
    CHECK(e.step() >= 1);
  }
}

TEST_CASE("grid configuration checks") {
  CHECK_THROWS(FineGridConfig{3, 1.0}.validate());
  CHECK_THROWS(FineGridConfig{4, 0.5}.validate());
  const ModelSpec s = default_model(0.1, 8);
  const auto g = FineGridConfig::for_reclocking(s, 16);
  CHECK(g.horizon_multiplier == Catch::Approx(2.25 * 1.05));
  CHECK(g.span_steps(s) == static_cast<std::size_t>(std::ceil(2.25 * 1.05 * 128 - 1e-9)));
}
