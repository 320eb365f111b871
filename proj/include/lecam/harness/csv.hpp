#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "lecam/metrics.hpp"

namespace lecam::harness {

enum class Status { pass, fail, warn };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::warn: return "warn";
  }
  return "?";
}

/// One verdict. A cell without n and epsilon is the "global" cell.
struct SuiteResult {
  std::string suite;
  std::optional<int> cell_n;
  std::optional<double> cell_eps;
  Status status = Status::pass;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string real_field(double v) { return fmt::format("{:.17g}", v); }

inline std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline constexpr const char* kRatesHeader = "suite,axis,axis_value,n,epsilon,mean,std_error,replicates,seed";
inline constexpr const char* kSuitesHeader = "suite,cell_n,cell_eps,status,measured,threshold,detail";

inline std::string rates_csv(const std::vector<RateTable>& tables) {
  std::string out = std::string(kRatesHeader) + "\n";
  for (const auto& t : tables)
    for (const auto& p : t.points)
      out += fmt::format("{},{},{},{},{},{},{},{},{}\n", quote_field(t.suite), to_string(t.axis),
                         real_field(p.axis_value), p.n, real_field(p.epsilon),
                         real_field(p.estimate.mean), real_field(p.estimate.std_error),
                         p.estimate.replicates, p.estimate.seed);
  return out;
}

inline std::string suites_csv(const std::vector<SuiteResult>& results) {
  std::string out = std::string(kSuitesHeader) + "\n";
  for (const auto& r : results) {
    const std::string n = r.cell_n ? std::to_string(*r.cell_n) : "global";
    const std::string e = r.cell_eps ? real_field(*r.cell_eps) : "global";
    out += fmt::format("{},{},{},{},{},{},{}\n", quote_field(r.suite), n, e, to_string(r.status),
                       real_field(r.measured), real_field(r.threshold), quote_field(r.detail));
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

struct CsvPaths {
  std::filesystem::path rates;
  std::filesystem::path suites;
};

inline CsvPaths emit_csv(const std::vector<RateTable>& tables, const std::vector<SuiteResult>& results,
                         const std::filesystem::path& output_dir) {
  CsvPaths p{output_dir / "rates.csv", output_dir / "suites.csv"};
  write_file(p.rates, rates_csv(tables));
  write_file(p.suites, suites_csv(results));
  return p;
}

/// RFC 4180 reader used to read the tables back.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace lecam::harness
