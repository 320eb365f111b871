#pragma once

// Harness configuration: an INI file with one level of sections, merged over
// built-in defaults and then over command-line overrides.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "lecam/model.hpp"

namespace lecam::harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DefaultEntry {
  std::string_view key;    ///< section.key
  std::string_view value;  ///< empty means unset
};

// Every accepted key with its default. Suite sections hold thresholds and
// sweep sizes; an unset suite list falls back to [sweep].
inline constexpr DefaultEntry kDefaults[] = {
    {"model.name", "sin-drift/half-sin-sigma"},
    {"model.epsilon", "0.1"},
    {"model.T", "1"},
    {"model.w", "0.5"},
    {"model.M", ""},
    {"model.origin_bound", ""},
    {"model.sigma0", ""},
    {"model.sigma1", ""},
    {"model.K", ""},
    {"model.L", "1.75"},
    {"model.freeze", "from_first_knot"},
    {"model.probe_count", "10000"},
    {"model.probe_lo", "-20"},
    {"model.probe_hi", "20"},

    {"sweep.n", "8,16,32,64"},
    {"sweep.eps", "0.02,0.04,0.08,0.16"},

    {"run.replicates", ""},
    {"run.seed", "20240917"},
    {"run.steps_per_interval", ""},
    {"run.threads", "0"},
    {"run.suites",
     "identities,law_preservation,lemma2,lemma1,tv_bounds,girsanov,sufficiency,lamperti,euler_marginal"},
    {"run.output_dir", "lecam_out"},

    {"identities.n", "32"},
    {"identities.replicates", "200"},
    {"identities.steps_per_interval", "256"},
    {"identities.bound_factor", "5"},
    {"identities.halving_lo", "1.5"},
    {"identities.halving_hi", "2.5"},
    {"identities.inverse_tol", "1e-9"},

    {"law_preservation.n", "32"},
    {"law_preservation.replicates", "10000"},
    {"law_preservation.steps_per_interval", "32"},
    {"law_preservation.alpha", "0.01"},

    {"lemma2.n", ""},
    {"lemma2.eps", ""},
    {"lemma2.replicates", "2000"},
    {"lemma2.fine_steps", "1024"},
    {"lemma2.eps_fixed", "1e-6"},
    {"lemma2.n_fixed", "512"},
    {"lemma2.w_eps_axis", "0"},
    {"lemma2.slope_n_lo", "-1.3"},
    {"lemma2.slope_n_hi", "-0.7"},
    {"lemma2.slope_eps_lo", "0.7"},
    {"lemma2.slope_eps_hi", "1.3"},

    {"lemma1.n", ""},
    {"lemma1.eps", ""},
    {"lemma1.replicates", "2000"},
    {"lemma1.fine_steps", "1024"},
    {"lemma1.eps_fixed", "1e-6"},
    {"lemma1.n_fixed", "512"},
    {"lemma1.w_eps_axis", "0"},
    {"lemma1.slope_n_lo", "-2.4"},
    {"lemma1.slope_n_hi", "-1.6"},
    {"lemma1.slope_eps_proof_lo", "1.5"},
    {"lemma1.slope_eps_proof_hi", "2.5"},
    {"lemma1.slope_eps_statement_lo", "0.7"},
    {"lemma1.slope_eps_statement_hi", "1.3"},

    {"tv_bounds.n", "8,16,32,64"},
    {"tv_bounds.eps", "0.05,0.1,0.2"},
    {"tv_bounds.replicates", "10000"},
    {"tv_bounds.fine_steps", "1024"},
    {"tv_bounds.se_multiplier", "3"},

    {"girsanov.epsilon", "0.5"},
    {"girsanov.n", "16"},
    {"girsanov.steps_per_interval", "16"},
    {"girsanov.replicates", "100000"},
    {"girsanov.c1", "0.3"},
    {"girsanov.c0", "0.1"},
    {"girsanov.const_epsilon", "0.2"},
    {"girsanov.se_multiplier", "3"},

    {"sufficiency.n", "16"},
    {"sufficiency.vectors", "1000"},
    {"sufficiency.tolerance", "1e-10"},
    {"sufficiency.steps_per_interval", "8"},

    {"lamperti.n", "64"},
    {"lamperti.sweep_n", "8,16,32,64"},
    {"lamperti.replicates", "10000"},
    {"lamperti.rate_replicates", "2000"},
    {"lamperti.fine_steps", "1024"},
    {"lamperti.alpha", "0.01"},
    {"lamperti.lipschitz_probes", "10000"},
    {"lamperti.lipschitz_factor", "1.01"},
    {"lamperti.slope_lo", "-1.4"},
    {"lamperti.slope_hi", "-0.6"},

    {"euler_marginal.epsilon", "0.05"},
    {"euler_marginal.n", "128"},
    {"euler_marginal.trend_n", "8,32,128"},
    {"euler_marginal.replicates", "10000"},
    {"euler_marginal.trend_batches", "8"},
    {"euler_marginal.trend_batch_size", "2500"},
    {"euler_marginal.fine_steps", "1024"},
    {"euler_marginal.alpha", "0.01"},
    {"euler_marginal.trend_alpha", "0.05"},
};

inline constexpr std::string_view kSuiteNames[] = {
    "identities", "law_preservation", "lemma2", "lemma1", "tv_bounds",
    "girsanov", "sufficiency", "lamperti", "euler_marginal"};

inline bool is_suite_name(std::string_view s) {
  return std::find(std::begin(kSuiteNames), std::end(kSuiteNames), s) != std::end(kSuiteNames);
}

/// Effective configuration: every known key with its resolved value and the
/// place it came from.
class HarnessConfig {
 public:
  HarnessConfig() {
    for (const auto& d : kDefaults) values_[std::string(d.key)] = {std::string(d.value), "default"};
  }

  bool known(const std::string& key) const { return values_.count(key) != 0; }

  void set(const std::string& key, const std::string& value, const std::string& origin) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin + ": unknown key '" + key + "'");
    it->second = {value, origin};
  }

  bool has(const std::string& key) const { return !raw(key).empty(); }

  const std::string& raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::logic_error("config key not registered: " + key);
    return it->second.value;
  }

  const std::string& origin(const std::string& key) const { return values_.at(key).origin; }

  std::string str(const std::string& key) const { return raw(key); }

  double real(const std::string& key) const { return parse_real(key, raw(key)); }

  long long integer(const std::string& key) const { return parse_integer(key, raw(key)); }

  std::optional<double> opt_real(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return real(key);
  }

  std::vector<double> real_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split(raw(key))) out.push_back(parse_real(key, item));
    check_list(key, out);
    return out;
  }

  std::vector<int> int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& item : split(raw(key))) out.push_back(static_cast<int>(parse_integer(key, item)));
    check_list(key, out);
    return out;
  }

  std::vector<std::string> string_list(const std::string& key) const { return split(raw(key)); }

  /// Suite key with fallback: [suite] key, else [sweep] key.
  std::string list_key(const std::string& suite, const std::string& key) const {
    const std::string own = suite + "." + key;
    return known(own) && has(own) ? own : "sweep." + key;
  }

  /// key = value lines in key order, annotated with non-default origins.
  std::vector<std::string> echo() const {
    std::vector<std::string> lines;
    for (const auto& [k, v] : values_) {
      std::string line = k + " = " + (v.value.empty() ? "(unset)" : v.value);
      if (v.origin != "default") line += "  [" + v.origin + "]";
      lines.push_back(line);
    }
    return lines;
  }

  // Typed views of the run section.
  std::uint64_t seed() const { return static_cast<std::uint64_t>(integer("run.seed")); }
  std::string output_dir() const { return raw("run.output_dir"); }
  unsigned threads() const { return static_cast<unsigned>(integer("run.threads")); }
  std::vector<std::string> suites() const { return string_list("run.suites"); }

  /// Suite replicate count, overridden globally by run.replicates when set.
  long long replicates(const std::string& suite, const std::string& key = "replicates") const {
    if (has("run.replicates")) return integer("run.replicates");
    return integer(suite + "." + key);
  }

  /// Suite fine-grid density, overridden globally by run.steps_per_interval when set.
  int steps_per_interval(const std::string& suite) const {
    if (has("run.steps_per_interval")) return static_cast<int>(integer("run.steps_per_interval"));
    return static_cast<int>(integer(suite + ".steps_per_interval"));
  }

 private:
  struct Entry {
    std::string value;
    std::string origin;
  };

  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
      const auto b = item.find_first_not_of(" \t[]");
      const auto e = item.find_last_not_of(" \t[]");
      if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
  }

  double parse_real(const std::string& key, const std::string& s) const {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": '" + s + "' is not a number");
    }
  }

  long long parse_integer(const std::string& key, const std::string& s) const {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": '" + s + "' is not an integer");
    }
  }

  template <class T>
  void check_list(const std::string& key, const std::vector<T>& v) const {
    if (v.empty()) throw ConfigError(where(key) + ": list must not be empty");
    if (!std::is_sorted(v.begin(), v.end()))
      throw ConfigError(where(key) + ": list must be sorted ascending");
  }

  std::string where(const std::string& key) const {
    auto it = values_.find(key);
    const std::string o = it == values_.end() ? "" : it->second.origin;
    return o == "default" || o.empty() ? key : o + " (" + key + ")";
  }

  std::map<std::string, Entry> values_;
};

/// Line number of each section.key in an INI file, for diagnostics.
inline std::map<std::string, int> ini_key_lines(const std::string& path) {
  std::map<std::string, int> out;
  std::ifstream in(path);
  std::string line, section;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == ';' || line[b] == '#') continue;
    if (line[b] == '[') {
      const auto e = line.find(']', b);
      section = line.substr(b + 1, e == std::string::npos ? std::string::npos : e - b - 1);
      continue;
    }
    const auto eq = line.find('=', b);
    if (eq == std::string::npos) continue;
    std::string key = line.substr(b, eq - b);
    key.erase(key.find_last_not_of(" \t") + 1);
    out[section + "." + key] = no;
  }
  return out;
}

/// Loads defaults, then the file, then `section.key=value` overrides.
inline HarnessConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  HarnessConfig cfg;
  namespace pt = boost::property_tree;
  pt::ptree tree;
  {
    std::ifstream probe(path);
    if (!probe) throw ConfigError(path + ": cannot open config file");
  }
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(path + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  const auto lines = ini_key_lines(path);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(path + ": key '" + section + "' must be inside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      auto ln = lines.find(full);
      const std::string origin = path + ":" + (ln == lines.end() ? "?" : std::to_string(ln->second));
      cfg.set(full, value.get_value<std::string>(), origin);
    }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set " + o + ": expected section.key=value");
    const std::string key = o.substr(0, eq);
    if (key.find('.') == std::string::npos)
      throw ConfigError("--set " + o + ": key must be section.key");
    cfg.set(key, o.substr(eq + 1), "--set");
  }
  for (const auto& s : cfg.suites())
    if (!is_suite_name(s)) throw ConfigError("run.suites: unknown suite '" + s + "'");
  return cfg;
}

/// Builds the model from [model], starting from the named builtin and applying
/// any declared constants. Throws ConfigError on unknown names.
inline ModelSpec model_from_config(const HarnessConfig& cfg) {
  const std::string name = cfg.str("model.name");
  auto m = find_builtin(name);
  if (!m) throw ConfigError("model.name: unknown builtin model '" + name + "'");
  ModelSpec spec;
  spec.drift = m->drift;
  spec.diffusion = m->diffusion;
  spec.epsilon = cfg.real("model.epsilon");
  spec.horizon_T = cfg.real("model.T");
  spec.w = cfg.real("model.w");
  spec.n_obs = 1;
  if (auto v = cfg.opt_real("model.M")) spec.drift.lipschitz_M = *v;
  if (auto v = cfg.opt_real("model.origin_bound")) spec.drift.origin_bound = *v;
  if (auto v = cfg.opt_real("model.sigma0")) spec.diffusion.sigma0 = *v;
  if (auto v = cfg.opt_real("model.sigma1")) spec.diffusion.sigma1 = *v;
  if (auto v = cfg.opt_real("model.K")) spec.diffusion.lipschitz_K = *v;
  spec.fg_lipschitz_L = cfg.opt_real("model.L");
  const std::string freeze = cfg.str("model.freeze");
  if (freeze == "from_first_knot") spec.freeze = FreezeConvention::from_first_knot;
  else if (freeze == "skip_first_interval") spec.freeze = FreezeConvention::skip_first_interval;
  else throw ConfigError("model.freeze: expected from_first_knot or skip_first_interval, got '" + freeze + "'");
  return spec;
}

}  // namespace lecam::harness
