#pragma once

// `run`: config, validation, suites in order, CSV tables and report.txt.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

#include <fmt/format.h>

#include "lecam/harness/config.hpp"
#include "lecam/harness/csv.hpp"
#include "lecam/harness/suites.hpp"

namespace lecam::harness {

enum ExitCode : int { kExitOk = 0, kExitSuiteFailed = 1, kExitConfig = 2, kExitRuntime = 3 };

struct RunOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> output_dir;
  std::optional<unsigned> threads;
};

struct RunRecord {
  std::vector<SuiteOutput> suites;
  std::vector<std::string> aborted;  ///< messages for suites stopped by a runtime failure
};

inline std::vector<RateTable> all_tables(const RunRecord& rec) {
  std::vector<RateTable> t;
  for (const auto& s : rec.suites) t.insert(t.end(), s.tables.begin(), s.tables.end());
  return t;
}

inline std::vector<SuiteResult> all_results(const RunRecord& rec) {
  std::vector<SuiteResult> r;
  for (const auto& s : rec.suites) r.insert(r.end(), s.results.begin(), s.results.end());
  return r;
}

inline std::string render_report(const HarnessConfig& cfg, const std::string& config_path, unsigned threads,
                                 const RunRecord& rec, int exit_code) {
  std::string out = "lecam run report\n";
  out += fmt::format("config file: {}\nworker threads: {}\n\n", config_path, threads);
  out += "effective configuration\n";
  for (const auto& line : cfg.echo()) out += "  " + line + "\n";
  for (const auto& s : rec.suites) {
    out += fmt::format("\n[{}] {}\n", s.suite, s.failed() ? "FAIL" : "PASS");
    out += "  tested: " + s.quantity + "\n";
    for (const auto& r : s.results) {
      const std::string where = r.cell_n ? fmt::format("n={} eps={}", *r.cell_n, detail::g(*r.cell_eps)) : "global";
      out += fmt::format("  {:<4}  {:<22} measured {:<12} threshold {:<12} {}\n", to_string(r.status), where,
                         detail::g(r.measured), detail::g(r.threshold), r.detail);
    }
    for (const auto& t : s.tables) {
      out += fmt::format("  rate {} axis {}: slope {} +/- {} (95% CI) over {} points\n", t.suite, to_string(t.axis),
                         detail::g(t.fitted_slope), detail::g(t.slope_ci_halfwidth), t.points.size());
      for (const auto& p : t.points)
        out += fmt::format("    {}={:<10} mean {:<12} se {:<12} replicates {}\n", to_string(t.axis),
                           detail::g(p.axis_value), detail::g(p.estimate.mean), detail::g(p.estimate.std_error),
                           p.estimate.replicates);
    }
    for (const auto& n : s.notes) out += "  note: " + n + "\n";
  }
  for (const auto& a : rec.aborted) out += "\naborted: " + a + "\n";
  std::size_t failed = 0;
  for (const auto& s : rec.suites) failed += s.failed() ? 1 : 0;
  out += fmt::format("\n{} suite(s) run, {} failed, exit code {}\n", rec.suites.size(), failed, exit_code);
  return out;
}

/// Runs the planned suites in order. A SimulationBlowUp stops the run; the
/// suites finished so far are kept.
inline int run_suites(const HarnessConfig& cfg, const ModelSpec& model, unsigned threads, RunRecord& rec,
                      std::ostream& log) {
  std::vector<SuitePlan> plans;
  for (const auto& name : cfg.suites()) plans.push_back(plan_suite(cfg, name));
  const SuiteContext ctx{cfg, model, cfg.seed(), threads};
  for (const auto& plan : plans) {
    log << "running " << plan.name << " ..." << std::endl;
    try {
      rec.suites.push_back(plan.run(ctx));
    } catch (const SimulationBlowUp& e) {
      rec.aborted.push_back(plan.name + ": " + e.what());
      log << "error: " << plan.name << ": " << e.what() << std::endl;
      return kExitRuntime;
    } catch (const ReplicateDropLimit& e) {
      rec.suites.push_back({plan.name, "", {row(plan.name, global_cell(), Status::fail, 0.0, 0.0, e.what())}, {}, {}});
    }
    const SuiteOutput& s = rec.suites.back();
    log << "  " << plan.name << ": " << (s.failed() ? "FAIL" : "PASS") << std::endl;
  }
  for (const auto& s : rec.suites)
    if (s.failed()) return kExitSuiteFailed;
  return kExitOk;
}

inline unsigned resolve_threads(const HarnessConfig& cfg, const std::optional<unsigned>& cli) {
  if (cli && *cli > 0) return *cli;
  if (cfg.threads() > 0) return cfg.threads();
  return default_thread_count();
}

inline int run(const RunOptions& opt, std::ostream& log) {
  HarnessConfig cfg;
  ModelSpec model;
  try {
    cfg = load_config(opt.config_path, opt.overrides);
    if (opt.output_dir) cfg.set("run.output_dir", *opt.output_dir, "--output-dir");
    if (opt.threads) cfg.set("run.threads", std::to_string(*opt.threads), "--threads");
    model = model_from_config(cfg);
    const ValidationReport vr = validate_model(model, static_cast<int>(cfg.integer("model.probe_count")),
                                               cfg.real("model.probe_lo"), cfg.real("model.probe_hi"));
    if (!vr.ok()) {
      log << "error: model '" << cfg.str("model.name") << "' fails validation\n" << vr.summary() << std::endl;
      return kExitConfig;
    }
    for (const auto& name : cfg.suites()) plan_suite(cfg, name);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const ModelError& e) {
    log << "error: " << e.what() << std::endl;
    return kExitConfig;
  }

  const std::filesystem::path dir = cfg.output_dir();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    log << "error: cannot create output directory " << dir << ": " << ec.message() << std::endl;
    return kExitRuntime;
  }
  const unsigned threads = resolve_threads(cfg, opt.threads);
  RunRecord rec;
  int code = kExitOk;
  try {
    code = run_suites(cfg, model, threads, rec, log);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::exception& e) {
    rec.aborted.push_back(e.what());
    log << "error: " << e.what() << std::endl;
    code = kExitRuntime;
  }
  try {
    emit_csv(all_tables(rec), all_results(rec), dir);
    write_file(dir / "report.txt", render_report(cfg, opt.config_path, threads, rec, code));
  } catch (const IoError& e) {
    log << "error: " << e.what() << std::endl;
    return kExitRuntime;
  }
  log << "wrote " << (dir / "rates.csv").string() << ", " << (dir / "suites.csv").string() << ", "
      << (dir / "report.txt").string() << std::endl;
  return code;
}

}  // namespace lecam::harness
