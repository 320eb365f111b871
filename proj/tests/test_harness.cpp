#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lecam/harness/run.hpp"
#include "support.hpp"

using namespace lecam;
using namespace lecam::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lecam_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_ini(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "config.ini";
  std::ofstream(p) << body;
  return p;
}

int run_quiet(RunOptions opt, std::string* log_out = nullptr) {
  std::ostringstream log;
  const int code = run(opt, log);
  if (log_out) *log_out = log.str();
  return code;
}

}  // namespace

TEST_CASE("config: defaults, file values and overrides") {
  const fs::path d = scratch("cfg");
  const fs::path ini = write_ini(d, "[model]\nepsilon = 0.2\n\n[sweep]\nn = 4, 8, 16, 32\n");
  const HarnessConfig cfg = load_config(ini.string(), {"model.epsilon=0.3", "run.seed=5"});
  CHECK(cfg.real("model.epsilon") == 0.3);
  CHECK(cfg.origin("model.epsilon") == "--set");
  CHECK(cfg.seed() == 5);
  CHECK(cfg.int_list("sweep.n") == std::vector<int>{4, 8, 16, 32});
  CHECK(cfg.origin("sweep.n") == ini.string() + ":5");
  CHECK(cfg.list_key("lemma2", "n") == "sweep.n");
  CHECK(cfg.list_key("tv_bounds", "n") == "tv_bounds.n");
  CHECK(cfg.real("identities.bound_factor") == 5.0);
  CHECK(cfg.suites().size() == 9);
  bool echoed = false;
  for (const auto& line : cfg.echo()) echoed = echoed || line.rfind("model.epsilon = 0.3", 0) == 0;
  CHECK(echoed);
}

TEST_CASE("config: errors carry their location") {
  const fs::path d = scratch("cfg_err");
  SECTION("unknown key") {
    const fs::path ini = write_ini(d, "[model]\nepsilon = 0.2\nepsilom = 0.3\n");
    try {
      load_config(ini.string(), {});
      FAIL("accepted");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(":3") != std::string::npos);
      CHECK(std::string(e.what()).find("epsilom") != std::string::npos);
    }
  }
  SECTION("syntax error") {
    const fs::path ini = write_ini(d, "[model]\nepsilon = 0.2\n[broken\n");
    try {
      load_config(ini.string(), {});
      FAIL("accepted");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
  }
  SECTION("unsorted list") {
    const fs::path ini = write_ini(d, "[sweep]\nn = 16, 8\n");
    const HarnessConfig cfg = load_config(ini.string(), {});
    CHECK_THROWS_AS(cfg.int_list("sweep.n"), ConfigError);
  }
  SECTION("bad number and unknown suite") {
    const fs::path ini = write_ini(d, "[model]\nepsilon = abc\n");
    CHECK_THROWS_AS(load_config(ini.string(), {}).real("model.epsilon"), ConfigError);
    CHECK_THROWS_AS(load_config(ini.string(), {"run.suites=identities,bogus"}), ConfigError);
    CHECK_THROWS_AS(load_config(ini.string(), {"noequals"}), ConfigError);
  }
  SECTION("missing file") {
    CHECK_THROWS_AS(load_config((d / "absent.ini").string(), {}), ConfigError);
  }
}

TEST_CASE("config: model construction") {
  const fs::path d = scratch("cfg_model");
  const HarnessConfig cfg = load_config(write_ini(d, "[model]\nname = tanh-sigma\nsigma1 = 2\n").string(), {});
  const ModelSpec m = model_from_config(cfg);
  CHECK(m.diffusion.sigma1 == 2.0);
  CHECK(m.sigma(0.0) == 1.0);
  CHECK(m.fg_lipschitz_L.value() == 1.75);
  const HarnessConfig bad = load_config(write_ini(d, "[model]\nname = nothing\n").string(), {});
  CHECK_THROWS_AS(model_from_config(bad), ConfigError);
}

TEST_CASE("csv: schema, precision and round trip") {
  const fs::path d = scratch("csv");
  emit_csv({}, {}, d);
  CHECK(read_file(d / "rates.csv") == std::string(kRatesHeader) + "\n");
  CHECK(read_file(d / "suites.csv") == std::string(kSuitesHeader) + "\n");

  std::vector<RatePoint> pts;
  for (int n : {8, 16, 32, 64}) pts.push_back({double(n), n, 0.1, MCEstimate{1.0 / (3.0 * n), 1e-3 / 7.0, 100, 42, {}, {}}});
  const RateTable t = make_rate_table("lemma2", RateAxis::n, pts);
  const SuiteResult r{"tv_bounds", 8, 0.05, Status::fail, 0.1 + 0.2, 1.0 / 3.0, "a \"quoted\", detail"};
  const SuiteResult g{"identities", std::nullopt, std::nullopt, Status::pass, 0.0, 0.0, "x"};
  emit_csv({t}, {r, g}, d);
  const auto rates = parse_csv(read_file(d / "rates.csv"));
  REQUIRE(rates.size() == 5);
  for (std::size_t i = 1; i < rates.size(); ++i) {
    REQUIRE(rates[i].size() == 9);
    CHECK(std::strtod(rates[i][5].c_str(), nullptr) == pts[i - 1].estimate.mean);
    CHECK(std::strtod(rates[i][6].c_str(), nullptr) == pts[i - 1].estimate.std_error);
    CHECK(rates[i][0] == "lemma2");
    CHECK(rates[i][1] == "n");
  }
  const auto suites = parse_csv(read_file(d / "suites.csv"));
  REQUIRE(suites.size() == 3);
  CHECK(suites[1][6] == "a \"quoted\", detail");
  CHECK(std::strtod(suites[1][4].c_str(), nullptr) == 0.1 + 0.2);
  CHECK(suites[1][3] == "fail");
  CHECK(suites[2][1] == "global");
  CHECK(suites[2][2] == "global");
  CHECK(read_file(d / "suites.csv").find('\r') == std::string::npos);
}

TEST_CASE("run: minimal unit-sigma config passes the identities") {
  const fs::path d = scratch("run_min");
  const fs::path ini = write_ini(d, "[model]\nname = unit-sigma\n\n[run]\nsuites = identities\n\n[identities]\nreplicates = 20\nsteps_per_interval = 64\n");
  RunOptions opt{ini.string(), {}, (d / "out").string(), 1u};
  REQUIRE(run_quiet(opt) == kExitOk);
  const auto rows = parse_csv(read_file(d / "out" / "suites.csv"));
  REQUIRE(rows.size() > 1);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][3] == "pass");
  const std::string report = read_file(d / "out" / "report.txt");
  CHECK(report.find("[identities] PASS") != std::string::npos);
  CHECK(report.find("run.suites = identities") != std::string::npos);
}

TEST_CASE("run: lemma2 sweep at vanishing noise") {
  const fs::path d = scratch("run_lemma2");
  const fs::path ini = write_ini(d, "[run]\nsuites = lemma2\nreplicates = 50\n\n[lemma2]\nfine_steps = 256\nn_fixed = 64\n");
  RunOptions opt{ini.string(), {}, (d / "out").string(), 2u};
  CHECK(run_quiet(opt) == kExitOk);
  const auto rates = parse_csv(read_file(d / "out" / "rates.csv"));
  CHECK(rates.size() == 9);
  const std::string report = read_file(d / "out" / "report.txt");
  CHECK(report.find("rate lemma2 axis n: slope") != std::string::npos);
}

TEST_CASE("run: exit codes") {
  const fs::path d = scratch("run_codes");
  std::string log;
  SECTION("sigma1 below the probed sigma") {
    const fs::path ini = write_ini(d, "[model]\nname = half-sin-sigma\nsigma1 = 1.2\n[run]\nsuites = sufficiency\n");
    CHECK(run_quiet({ini.string(), {}, (d / "out").string(), 1u}, &log) == kExitConfig);
    CHECK(log.find("sigma^2 <= sigma1^2") != std::string::npos);
  }
  SECTION("unknown key") {
    const fs::path ini = write_ini(d, "[model]\nnmae = x\n");
    CHECK(run_quiet({ini.string(), {}, (d / "out").string(), 1u}, &log) == kExitConfig);
    CHECK(log.find(":2") != std::string::npos);
  }
  SECTION("missing L for the lamperti suite") {
    const fs::path ini = write_ini(d, "[model]\nL =\n[run]\nsuites = lamperti\n");
    CHECK(run_quiet({ini.string(), {}, (d / "out").string(), 1u}, &log) == kExitConfig);
  }
  SECTION("a failing suite") {
    const fs::path ini = write_ini(d, "[run]\nsuites = sufficiency\n[sufficiency]\nvectors = 10\ntolerance = -1\n");
    CHECK(run_quiet({ini.string(), {}, (d / "out").string(), 1u}) == kExitSuiteFailed);
    CHECK(read_file(d / "out" / "suites.csv").find(",fail,") != std::string::npos);
  }
  SECTION("unwritable output directory") {
    const fs::path ini = write_ini(d, "[run]\nsuites = sufficiency\n[sufficiency]\nvectors = 10\n");
    std::ofstream(d / "blocker") << "file";
    CHECK(run_quiet({ini.string(), {}, (d / "blocker" / "out").string(), 1u}) == kExitRuntime);
  }
}

TEST_CASE("run: simulation blow-up stops with exit 3") {
  const fs::path d = scratch("blowup");
  const HarnessConfig cfg = load_config(write_ini(d, "[run]\nsuites = law_preservation\nreplicates = 10\n").string(), {});
  ModelSpec m = model_from_config(cfg);
  m.drift.eval = [](double x) { return 1e300 * (1 + x * x); };
  RunRecord rec;
  std::ostringstream log;
  CHECK(run_suites(cfg, m, 1, rec, log) == kExitRuntime);
  REQUIRE(rec.aborted.size() == 1);
  CHECK(rec.aborted[0].find("blow-up") != std::string::npos);
}

TEST_CASE("run: outputs do not depend on the worker count") {
  const fs::path d = scratch("threads");
  const fs::path ini = write_ini(d,
                                 "[run]\nsuites = identities,lemma1,tv_bounds,girsanov,euler_marginal\nreplicates = 60\n"
                                 "[identities]\nsteps_per_interval = 32\n[lemma1]\nfine_steps = 128\nn_fixed = 64\n"
                                 "[tv_bounds]\nn = 8\neps = 0.1\nfine_steps = 128\n"
                                 "[euler_marginal]\nn = 16\ntrend_batches = 3\ntrend_batch_size = 40\nfine_steps = 64\n");
  run_quiet({ini.string(), {}, (d / "one").string(), 1u});
  run_quiet({ini.string(), {}, (d / "four").string(), 4u});
  CHECK(read_file(d / "one" / "rates.csv") == read_file(d / "four" / "rates.csv"));
  CHECK(read_file(d / "one" / "suites.csv") == read_file(d / "four" / "suites.csv"));
}

TEST_CASE("suite helpers") {
  CHECK(lecam::harness::detail::fine_spi(8, 1024) == 128);
  CHECK(lecam::harness::detail::fine_spi(512, 1024) == 2);
  CHECK(lecam::harness::detail::fine_spi(2048, 1024) == 1);
  CHECK(lecam::harness::detail::fine_spi(100, 1024) == 8);
  CHECK(lecam::harness::detail::stream_seed(1, "a", "x") != lecam::harness::detail::stream_seed(1, "a", "y"));
  CHECK(lecam::harness::detail::stream_seed(1, "a", "x") == lecam::harness::detail::stream_seed(1, "a", "x"));
  const auto r = in_bracket("s", global_cell(), 1.0, 0.7, 1.3, "slope");
  CHECK(r.status == Status::pass);
  const auto lo = in_bracket("s", global_cell(), 0.2, 0.7, 1.3, "slope");
  CHECK(lo.status == Status::fail);
  CHECK(lo.threshold == 0.7);
  CHECK(at_most("s", global_cell(), std::nan(""), 1.0, "").status == Status::fail);
}
