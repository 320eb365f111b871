// Runs every suite at the default configuration and prints one line per
// acceptance criterion.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>

#include <fmt/format.h>

#include "lecam/harness/run.hpp"

using namespace lecam;
using namespace lecam::harness;

namespace {

struct Criterion {
  int id;
  std::string suite;
  std::string label;
};

const std::vector<Criterion> kCriteria = {
    {1, "identities", "time-change identities"},
    {2, "law_preservation", "reclocked law"},
    {3, "lemma2", "clock gap rate"},
    {4, "lemma1", "frozen-drift L2 rate"},
    {5, "tv_bounds", "TV below the Hellinger bound"},
    {6, "girsanov", "likelihood calibration"},
    {7, "sufficiency", "grid sufficiency"},
    {8, "euler_marginal", "Euler marginal"},
    {9, "lamperti", "Lamperti route"},
};

std::string summarize(const SuiteOutput& s) {
  int fails = 0, warns = 0;
  const SuiteResult* first_fail = nullptr;
  for (const auto& r : s.results) {
    if (r.status == Status::fail && !first_fail) first_fail = &r;
    fails += r.status == Status::fail;
    warns += r.status == Status::warn;
  }
  std::string d = fmt::format("{} rows, {} fail, {} warn", s.results.size(), fails, warns);
  if (first_fail) d += "; first failure: " + first_fail->detail;
  for (const auto& t : s.tables)
    d += fmt::format("; {} {} slope {:.4g}+/-{:.2g}", t.suite, to_string(t.axis), t.fitted_slope, t.slope_ci_halfwidth);
  for (const auto& n : s.notes)
    if (n.find("hypothesis") != std::string::npos) d += "; " + n;
  return d;
}

struct Pass {
  std::map<std::string, SuiteOutput> by_suite;
  std::string rates, suites;
  bool aborted = false;
  std::string abort_msg;
};

Pass run_all(const HarnessConfig& cfg, const ModelSpec& model, unsigned threads, bool timed) {
  Pass p;
  const SuiteContext ctx{cfg, model, cfg.seed(), threads};
  std::vector<SuiteOutput> outs;
  for (const auto& name : cfg.suites()) {
    const SuitePlan plan = plan_suite(cfg, name);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      outs.push_back(plan.run(ctx));
    } catch (const ReplicateDropLimit& e) {
      outs.push_back({name, "", {row(name, global_cell(), Status::fail, 0.0, 0.0, e.what())}, {}, {}});
    } catch (const std::exception& e) {
      p.aborted = true;
      p.abort_msg = name + ": " + e.what();
      outs.push_back({name, "", {row(name, global_cell(), Status::fail, 0.0, 0.0, e.what())}, {}, {}});
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (timed) std::cout << fmt::format("  {} finished in {:.1f} s (threads {})", name, secs, threads) << std::endl;
    p.by_suite[name] = outs.back();
  }
  std::vector<RateTable> tables;
  std::vector<SuiteResult> results;
  for (const auto& s : outs) {
    tables.insert(tables.end(), s.tables.begin(), s.tables.end());
    results.insert(results.end(), s.results.begin(), s.results.end());
  }
  p.rates = rates_csv(tables);
  p.suites = suites_csv(results);
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  std::string out_dir = "acceptance_out";
  std::string config;
  for (int i = 1; i + 1 < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--output-dir") out_dir = argv[++i];
    else if (a == "--config") config = argv[++i];
  }
  HarnessConfig cfg;
  ModelSpec model;
  try {
    if (!config.empty()) cfg = load_config(config, {});
    model = model_from_config(cfg);
    const ValidationReport vr = validate_model(model, static_cast<int>(cfg.integer("model.probe_count")),
                                               cfg.real("model.probe_lo"), cfg.real("model.probe_hi"));
    if (!vr.ok()) {
      std::cerr << vr.summary() << std::endl;
      return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  const Pass one = run_all(cfg, model, 1, true);
  const Pass three = run_all(cfg, model, 3, true);
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::filesystem::create_directories(out_dir);
  emit_csv({}, {}, out_dir);
  write_file(std::filesystem::path(out_dir) / "rates.csv", one.rates);
  write_file(std::filesystem::path(out_dir) / "suites.csv", one.suites);

  bool all_ok = true;
  for (const auto& c : kCriteria) {
    auto it = one.by_suite.find(c.suite);
    bool ok = it != one.by_suite.end() && !it->second.failed();
    const std::string detail = it == one.by_suite.end() ? "suite not run" : summarize(it->second);
    all_ok = all_ok && ok;
    std::cout << fmt::format("criterion {}: {} {} ({})", c.id, ok ? "PASS" : "FAIL", c.label, detail) << std::endl;
  }
  const bool same = one.rates == three.rates && one.suites == three.suites && !one.aborted && !three.aborted;
  all_ok = all_ok && same;
  std::cout << fmt::format("criterion 10: {} outputs identical at 1 and 3 threads (rates.csv {} bytes, suites.csv {} bytes{})",
                           same ? "PASS" : "FAIL", one.rates.size(), one.suites.size(),
                           one.aborted ? ", aborted: " + one.abort_msg : "")
            << std::endl;
  std::cout << fmt::format("total runtime {:.1f} s", total) << std::endl;
  return all_ok ? 0 : 1;
}
