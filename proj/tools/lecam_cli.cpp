// lecam_cli run <config> [--set section.key=value]... [--output-dir path] [--threads k]

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lecam/harness/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Invariant suites and rate sweeps for the time-changed diffusion experiments"};
  app.require_subcommand(1);

  lecam::harness::RunOptions opt;
  std::string out_dir;
  unsigned threads = 0;
  auto* run = app.add_subcommand("run", "run the suites listed in a config file");
  run->add_option("config", opt.config_path, "INI config file")->required();
  run->add_option("--set", opt.overrides, "override section.key=value (repeatable)");
  run->add_option("--output-dir", out_dir, "directory for rates.csv, suites.csv, report.txt");
  run->add_option("--threads", threads, "worker threads (default: LECAM_THREADS or hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : lecam::harness::kExitConfig;
  }
  if (!out_dir.empty()) opt.output_dir = out_dir;
  if (threads > 0) opt.threads = threads;
  return lecam::harness::run(opt, std::cerr);
}
