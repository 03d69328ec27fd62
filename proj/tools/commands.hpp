#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kimura_mfg/model.hpp"

namespace kmfg::cli {

enum ExitCode { kOk = 0, kInternal = 1, kValidation = 2, kNumerical = 3, kCheckFailed = 4 };

struct Numerics {
  int grid_n = 100;
  double dt_pde = 1e-3;
  double dt_sde = 1e-3;
  std::size_t n_paths = 1000;
  double picard_tol = 1e-9;
};

struct RunContext {
  std::string command;
  nlohmann::json config;  // as read, with the effective seed filled in
  nlohmann::json model_json;
  Numerics numerics;
  nlohmann::json params;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::vector<std::string> outputs;  // file names relative to output_dir

  // Opens output_dir / name for writing and records it in the manifest.
  std::filesystem::path output(const std::string& name);
  void write_json(const std::string& name, const nlohmann::json& j);
};

const std::vector<std::string>& command_names();

// Throws InvalidInput on schema violations.
RunContext make_context(const nlohmann::json& config, std::optional<std::uint64_t> seed_override);

// Runs the named command; returns an exit code.
int run_command(RunContext& ctx);
// Runs the check case named in config["check"]; prints the table.
int run_check(RunContext& ctx);

void write_manifest(const RunContext& ctx, double wall_time_s);

}  // namespace kmfg::cli
