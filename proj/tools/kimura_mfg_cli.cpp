#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "kimura_mfg/errors.hpp"
#include "kimura_mfg/parallel.hpp"

using namespace kmfg;

int main(int argc, char** argv) {
  CLI::App app{"Finite-state mean field games with Wright-Fisher common noise"};
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool check = false;
  app.add_option("--config", config_path, "experiment config (JSON)")->required();
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--threads", threads, "worker cap (default: KIMURA_MFG_THREADS, else all cores)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--check", check, "run the acceptance case named in config.check");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kValidation;
  }
  if (threads) set_thread_cap(*threads);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot read config " << config_path << '\n';
      return cli::kValidation;
    }
    nlohmann::json config;
    try {
      config = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      std::cerr << "error: malformed config " << config_path << ": " << e.what() << '\n';
      return cli::kValidation;
    }
    cli::RunContext ctx = cli::make_context(config, seed);
    const int rc = check ? cli::run_check(ctx) : cli::run_command(ctx);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    cli::write_manifest(ctx, wall);
    return rc;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad config value: " << e.what() << '\n';
    return cli::kValidation;
  } catch (const NumericalFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kInternal;
  }
}
