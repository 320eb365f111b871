#include <catch_amalgamated.hpp>

#include "lecam/harness/oracles.hpp"
#include "lecam/likelihood.hpp"
#include "lecam/metrics.hpp"
#include "support.hpp"

using namespace lecam;
using lecam::testing::builtin;
using lecam::testing::default_model;

TEST_CASE("constant drifts: the log-LR is the Gaussian shift") {
  const double eps = 0.3, c1 = 0.7, c0 = -0.2;
  const auto h1 = constant_hypothesis(c1, eps), h0 = constant_hypothesis(c0, eps);
  const auto drv = BrownianDriver{1, 1, 1.0 / 256};
  const SamplePath x = simulate_hypothesis(h0, 0.4, 256, 1.0 / 256, drv);
  const double want = (c1 - c0) / (eps * eps) * (x.values().back() - 0.4) - (c1 * c1 - c0 * c0) / (2 * eps * eps);
  const auto l = girsanov_log_lr(x, h1, h0, 1.0);
  CHECK(l.value == Catch::Approx(want).margin(1e-11));
  CHECK(l.value == Catch::Approx(l.stoch_integral_part + l.bounded_variation_part));
  // a partial last step
  const double half = girsanov_log_lr(x, h1, h0, 0.5 + 0.3 / 256).value;
  const double want_half =
      (c1 - c0) / (eps * eps) * (x.value_at(0.5 + 0.3 / 256) - 0.4) - (c1 * c1 - c0 * c0) * (0.5 + 0.3 / 256) / (2 * eps * eps);
  CHECK(half == Catch::Approx(want_half).margin(1e-11));
}

TEST_CASE("identical hypotheses give zero") {
  const ModelSpec s = default_model(0.2, 8);
  const auto h = f_over_sigma2_hypothesis(s);
  const SamplePath x = simulate_hypothesis(h, s.w, 128, 1.0 / 128, BrownianDriver{2, 2, 1.0 / 128});
  CHECK(girsanov_log_lr(x, h, h, 1.0).value == 0.0);
}

TEST_CASE("mismatched diffusion or span is rejected") {
  const auto a = constant_hypothesis(0.1, 0.2), b = constant_hypothesis(0.1, 0.3);
  const SamplePath x(0.0, 0.1, std::vector<double>(11, 0.0));
  CHECK_THROWS_AS(girsanov_log_lr(x, a, b, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(girsanov_log_lr(x, a, a, 2.0), ClockOverrun);
}

TEST_CASE("exponential martingale under h0") {
  const ModelSpec s = default_model(0.5, 8);
  const FineGridConfig g{16, 1.0};
  const auto h1 = f_over_sigma2_hypothesis(s), h0 = g_bar_n_hypothesis(s);
  const auto ls = replicate_map<double>(20000, [&](std::uint64_t id) {
    const SamplePath x = simulate_hypothesis(h0, s.w, g.steps_to_T(s), g.dt(s), make_driver(9, id, s, g));
    return girsanov_log_lr(x, h1, h0, 1.0).value;
  }, 2);
  const MCEstimate m = lr_mean_from_log_lr(ls, 9);
  CHECK(std::abs(m.mean - 1.0) <= 4 * m.std_error);
}

TEST_CASE("Euler log-density matches the Gaussian product") {
  const ModelSpec s = default_model(0.1, 12);
  const BrownianDriver d{3, 3, 1.0};
  for (int v = 0; v < 200; ++v) {
    std::vector<double> obs(13);
    obs[0] = s.w;
    for (int i = 0; i < 12; ++i) obs[i + 1] = obs[i] + 0.4 * d.normal(100 * v + i);
    CHECK(euler_sufficient_logdensity(obs, s) ==
          Catch::Approx(harness::gaussian_product_logratio(obs, s)).margin(1e-10));
  }
  CHECK_THROWS_AS(euler_sufficient_logdensity(std::vector<double>(5, 0.0), s), std::invalid_argument);
}

TEST_CASE("path density reads only the observation times") {
  const ModelSpec s = default_model(0.1, 4);
  std::vector<double> a(17), b(17);
  for (int k = 0; k <= 16; ++k) {
    a[k] = std::sin(0.3 * k);
    b[k] = k % 4 == 0 ? a[k] : a[k] + 1.0;
  }
  const double la = euler_sufficient_logdensity(SamplePath(0.0, 1.0 / 16, a), s);
  const double lb = euler_sufficient_logdensity(SamplePath(0.0, 1.0 / 16, b), s);
  CHECK(std::memcmp(&la, &lb, sizeof la) == 0);
}

TEST_CASE("Hellinger process") {
  SECTION("vanishes when f/sigma^2 is constant") {
    const ModelSpec s = builtin("constant-drift/constant-sigma", 0.1, 0.5, 8);
    const SamplePath x = simulate_hypothesis(f_over_sigma2_hypothesis(s), s.w, 768, 1.0 / 256, BrownianDriver{1, 1, 1.0 / 256});
    CHECK(hellinger_process(x, s, a_bar_n(x, s, 1.0).value) == 0.0);
  }
  SECTION("agrees with the drift-gap integral") {
    const ModelSpec s = default_model(0.1, 8);
    const auto g = FineGridConfig::for_reclocking(s, 32);
    for (std::uint64_t id = 0; id < 10; ++id) {
      const SamplePath x = simulate_constant_eps(ConstantEpsForm::f_over_sigma2, s, g, make_driver(4, id, s, g));
      const double stop = a_bar_n(x, s, 1.0).value;
      CHECK(hellinger_process(x, s, stop) == Catch::Approx(drift_gap_l2(x, s, stop) / (8 * 0.01)).epsilon(1e-9));
    }
  }
}

TEST_CASE("b_bar_n holds b at the observation times") {
  const ModelSpec s = default_model(0.1, 4);
  auto table = std::make_shared<const TransformTable>(build_transform(s));
  const auto hb = b_bar_n_hypothesis(s, table);
  std::vector<double> v(33);
  for (int k = 0; k <= 32; ++k) v[k] = table->F(s.w) + 0.1 * k;
  auto g = hb.make();
  const double dt = 1.0 / 32;
  for (int k = 0; k < 32; ++k) {
    const PathPrefix p{std::span<const double>(v.data(), k + 1), 0.0, dt};
    const int i = k / 8;
    CHECK(g(k * dt, p) == Catch::Approx(drift_b(*table, s, v[8 * i])));
  }
}
