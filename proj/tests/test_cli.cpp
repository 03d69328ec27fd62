#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int status = -1;
  std::string output;
};

fs::path scratch() {
  const fs::path p = fs::temp_directory_path() / "kimura_mfg_cli_test";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run_text(const std::string& name, const std::string& text, const std::string& extra = "") {
  const fs::path cfg = scratch() / (name + ".json");
  const fs::path log = scratch() / (name + ".log");
  std::ofstream(cfg) << text;
  const std::string line = std::string("\"") + KIMURA_MFG_CLI + "\" --config \"" + cfg.string() + "\" " +
                           extra + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(line.c_str());
  return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, slurp(log)};
}

Run run_json(const std::string& name, json cfg, const std::string& extra = "") {
  if (!cfg.contains("output_dir")) cfg["output_dir"] = (scratch() / (name + "_out")).string();
  return run_text(name, cfg.dump(2), extra);
}

json constant_model(double eps = 0.5, double kappa = 2.0) {
  return {{"d", 2},
          {"epsilon", eps},
          {"kappa", kappa},
          {"delta", 0.1},
          {"T", 1.0},
          {"f", {{"kind", "constant"}, {"params", {{"c", {0.0, 0.0}}}}}},
          {"g", {{"kind", "constant"}, {"params", {{"c", {1.5, 1.5}}}}}}};
}

json solve_config() {
  return {{"command", "solve-master"},
          {"model", constant_model()},
          {"numerics", {{"grid_n", 20}, {"dt_pde", 1e-3}}},
          {"seed", 3}};
}

}  // namespace

TEST_CASE("malformed JSON is a validation error with a position") {
  const Run r = run_text("malformed", "{\n  \"command\" \"solve-master\"\n}\n");
  CHECK(r.status == 2);
  CHECK(r.output.find("line 2") != std::string::npos);
}

TEST_CASE("unknown commands and keys are rejected") {
  json cfg = solve_config();
  cfg["command"] = "solve-everything";
  CHECK(run_json("unknown_command", cfg).status == 2);
  cfg = solve_config();
  cfg["extra"] = 1;
  CHECK(run_json("unknown_key", cfg).status == 2);
  cfg = solve_config();
  cfg["numerics"]["grid_n"] = -4;
  CHECK(run_json("bad_numerics", cfg).status == 2);
}

TEST_CASE("solve-master writes a manifest of its outputs") {
  const Run r = run_json("solve", solve_config());
  REQUIRE(r.status == 0);
  const fs::path out = scratch() / "solve_out";
  const json m = json::parse(slurp(out / "manifest.json"));
  std::vector<std::string> files;
  for (const auto& o : m["outputs"]) {
    files.push_back(o["file"]);
    CHECK(o["sha256"].get<std::string>().size() == 64);
    CHECK(fs::file_size(out / o["file"].get<std::string>()) == o["bytes"].get<std::uintmax_t>());
  }
  CHECK(std::find(files.begin(), files.end(), "U_1.csv") != files.end());
  CHECK(std::find(files.begin(), files.end(), "U_2.csv") != files.end());
}

TEST_CASE("reruns are byte-identical") {
  json cfg = {{"command", "simulate-mfg"},
              {"model", constant_model()},
              {"numerics", {{"grid_n", 20}, {"dt_sde", 1e-2}, {"n_paths", 32}}},
              {"seed", 9},
              {"params", {{"p0", {0.3, 0.7}}}}};
  REQUIRE(run_json("rerun_a", cfg, "--threads 1").status == 0);
  REQUIRE(run_json("rerun_b", cfg, "--threads 2").status == 0);
  CHECK(slurp(scratch() / "rerun_a_out" / "paths.csv") == slurp(scratch() / "rerun_b_out" / "paths.csv"));
  const Run other = run_json("rerun_c", cfg, "--seed 10");
  REQUIRE(other.status == 0);
  CHECK(slurp(scratch() / "rerun_a_out" / "paths.csv") != slurp(scratch() / "rerun_c_out" / "paths.csv"));
}

TEST_CASE("CFL violations exit with the numerical status") {
  json cfg = solve_config();
  cfg["model"]["kappa"] = 20.0;
  cfg["numerics"] = {{"grid_n", 200}, {"dt_pde", 1e-2}};
  CHECK(run_json("cfl", cfg).status == 3);
}

TEST_CASE("check mode") {
  CHECK(run_json("check_constant", {{"check", {{"case", "constant"}}}}, "--check").status == 0);
  CHECK(run_json("check_oracle", {{"check", {{"case", "quadratic-oracle"}}}}, "--check").status == 0);
  const Run strict =
      run_json("check_strict", {{"check", {{"case", "quadratic-oracle"}, {"tolerance", 1e-12}}}}, "--check");
  CHECK(strict.status == 4);
  CHECK(strict.output.find("FAIL") != std::string::npos);
  CHECK(run_json("check_unknown", {{"check", {{"case", "nope"}}}}, "--check").status == 2);
}
