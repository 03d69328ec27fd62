#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace kmfg {

struct CheckRow {
  std::string name;
  double value = 0.0;
  std::string op;  // "<=", ">=", "<", ">", "==" or "flag"
  double bound = 0.0;
  bool pass = false;
  bool timing = false;  // wall-clock row; kept out of reproducible outputs
};

struct CheckResult {
  std::string id;
  std::string title;
  std::vector<CheckRow> rows;
  std::vector<std::string> notes;

  bool pass() const;
};

struct CheckOptions {
  std::uint64_t seed = 1;
  // Multiplies path and replicate counts; 1 is full acceptance scale.
  double scale = 1.0;
  // Replaces the headline tolerance of a case (used for negative controls).
  std::optional<double> tolerance;
  // CLI binary for the determinism criterion.
  std::string cli_path;
};

// Criteria 1..12 at the requested scale.
CheckResult run_acceptance(int id, const CheckOptions& opt);

// Named cases reachable from the CLI check mode: "constant",
// "quadratic-oracle", "linear-oracle" and "acc-1" .. "acc-11".
std::vector<std::string> check_case_names();
CheckResult run_check_case(const std::string& name, const CheckOptions& opt);

void print_check(std::ostream& os, const CheckResult& r);
nlohmann::json to_json(const CheckResult& r, bool include_timing);

}  // namespace kmfg
