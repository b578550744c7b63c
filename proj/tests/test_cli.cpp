#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "mpct/commands.hpp"
#include "mpct/config.hpp"
#include "mpct/error.hpp"

namespace mpct {
namespace {

namespace fs = std::filesystem;

const std::string kConfigs = MPCT_CONFIG_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path out_dir(const std::string& name) {
  const fs::path p = fs::path(MPCT_TEST_OUT_DIR) / name;
  fs::remove_all(p);
  return p;
}

std::string write_config(const std::string& name, const std::string& text) {
  const fs::path dir = out_dir("configs_" + name);
  fs::create_directories(dir);
  const fs::path p = dir / "config.json";
  std::ofstream(p, std::ios::binary) << text;
  return p.string();
}

struct RunResult {
  int code;
  std::string log, err;
  fs::path out;
};

RunResult run(const std::string& command, const std::string& config, const std::string& out_name,
              std::vector<std::string> overrides = {}, bool strict = false,
              std::optional<unsigned> seed = std::nullopt, const std::string& ingredients = "") {
  CliOptions o;
  o.command = command;
  o.config_path = config;
  o.out_dir = out_dir(out_name).string();
  o.strict = strict;
  o.seed = seed;
  o.tol_overrides = std::move(overrides);
  o.ingredients_path = ingredients;
  std::ostringstream log, err;
  const int code = run_command(o, log, err);
  return {code, log.str(), err.str(), o.out_dir};
}

std::string config_file(const std::string& name) { return kConfigs + "/double_integrator_" + name + ".json"; }

const char* kScalarContraction = R"({
  "model": {"A": [[0.5]], "B": [[1]], "C": [[1]]},
  "constraints": {"box": {"x_inf": [1], "u_inf": [1]}},
  "controller": {"N": 2, "Q": [[1]], "R": [[1]], "terminal": "inequality",
                 "offset": {"type": "quadratic", "T": [[10]]}}
})";

TEST(Config, MalformedJsonReportsLineAndColumn) {
  try {
    parse_config("{\n  \"model\": {\n    \"A\": [[1,]]\n  }\n}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    EXPECT_NE(std::string(e.what()).find("line 3, column"), std::string::npos) << e.what();
  }
  const RunResult r = run("analyze", write_config("malformed", "{\"model\": "), "malformed");
  EXPECT_EQ(r.code, kExitConfigError);
  EXPECT_NE(r.err.find("line 1, column"), std::string::npos) << r.err;
}

TEST(Config, UnknownKeysRejected) {
  nlohmann::json j = nlohmann::json::parse(slurp(config_file("tracking_equality")));
  j["controller"]["horizon"] = 3;
  try {
    parse_config(j.dump());
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("controller: unknown key \"horizon\""), std::string::npos) << e.what();
  }
  j = nlohmann::json::parse(slurp(config_file("tracking_equality")));
  j["extra"] = 1;
  EXPECT_THROW(parse_config(j.dump()), Error);
}

TEST(Config, SchemaErrors) {
  nlohmann::json j = nlohmann::json::parse(slurp(config_file("tracking_equality")));
  j["controller"]["Q"] = {{1, 0, 0}};
  EXPECT_THROW(parse_config(j.dump()), Error);
  j = nlohmann::json::parse(slurp(config_file("tracking_equality")));
  j["scenario"]["schedule"] = {{{"k", 1}, {"y_sp", {0, 0}}}};
  j["scenario"].erase("y_sp");
  EXPECT_THROW(parse_config(j.dump()), Error);
  j = nlohmann::json::parse(slurp(config_file("tracking_equality")));
  j["lambda"] = 1.5;
  EXPECT_THROW(parse_config(j.dump()), Error);
  j = nlohmann::json::parse(slurp(config_file("tracking_equality")));
  j["controller"]["offset"] = {{"type", "two_norm"}, {"gamma", 1}};
  EXPECT_THROW(parse_config(j.dump()), Error);
}

TEST(Config, ReferenceConfigsParse) {
  for (const char* name : {"feasibility", "tracking_equality", "tracking_inequality", "exact_penalty"}) {
    EXPECT_NO_THROW(load_config(config_file(name))) << name;
  }
  const RunConfig ft = load_config(kConfigs + "/four_tank_template.json");
  EXPECT_EQ(ft.model.n(), 4);
  EXPECT_NE(slurp(kConfigs + "/four_tank_template.json").find("USER-SUPPLIED"), std::string::npos);
}

TEST(Config, ToleranceOverrides) {
  Tolerances t;
  t.set("convergence", "1e-4");
  t.set("qp_max_iter", "77");
  EXPECT_EQ(t.monitor.convergence, 1e-4);
  EXPECT_EQ(t.qp.max_iter, 77);
  EXPECT_THROW(t.set("qp_max_iter", "7.5"), Error);
  EXPECT_THROW(t.set("nope", "1"), Error);
  EXPECT_THROW(t.set("convergence", "-1"), Error);
  EXPECT_EQ(run("simulate", config_file("tracking_equality"), "tol_bad", {"bogus=1"}).code, kExitConfigError);
  EXPECT_EQ(run("simulate", config_file("tracking_equality"), "tol_bad2", {"convergence"}).code, kExitConfigError);
}

TEST(Analyze, DoubleIntegratorReport) {
  const RunResult r = run("analyze", config_file("feasibility"), "analyze");
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(slurp(r.out / "analysis.json"));
  EXPECT_EQ(j["controllability_index"], 1);
  EXPECT_EQ(j["output_rank"], true);
  EXPECT_EQ(j["stabilizable"], true);
  EXPECT_EQ(j["Y_sp"]["G"].size(), j["Y_sp"]["w"].size());
  EXPECT_EQ(j["steady_state_map"]["M_theta"].size(), 4u);
}

TEST(Analyze, MoreOutputsThanInputs) {
  nlohmann::json j = nlohmann::json::parse(slurp(config_file("tracking_equality")));
  j["model"]["C"] = {{1, 0}, {0, 1}, {1, 1}};
  j["model"]["D"] = {{0, 0}, {0, 0}, {0, 0}};
  j.erase("scenario");
  j["controller"]["offset"] = {{"type", "inf_norm"}, {"gamma", 10}};
  const RunResult r = run("analyze", write_config("p_gt_m", j.dump()), "analyze_p_gt_m");
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rep = nlohmann::json::parse(slurp(r.out / "analysis.json"));
  EXPECT_EQ(rep["output_rank"], false);
  EXPECT_TRUE(rep["Y_sp"].contains("subspace_basis"));
  EXPECT_EQ(rep["Y_sp"]["subspace_basis"].size(), 3u);
}

TEST(Sets, DoubleIntegratorAndScalar) {
  const RunResult r = run("sets", config_file("tracking_inequality"), "sets");
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(slurp(r.out / "sets.json"));
  EXPECT_GE(j["determinedness"].get<int>(), 1);
  EXPECT_EQ(j["iterations"].get<int>(), j["determinedness"].get<int>() + 1);
  EXPECT_TRUE(fs::exists(r.out / "ingredients.json"));
  EXPECT_TRUE(fs::exists(r.out / "omega_x_vertices.csv"));

  const RunResult s = run("sets", write_config("scalar", kScalarContraction), "sets_scalar");
  ASSERT_EQ(s.code, kExitOk) << s.err;
  EXPECT_LE(nlohmann::json::parse(slurp(s.out / "sets.json"))["determinedness"].get<int>(), 3);
}

TEST(Sets, EmptyConstraintSetIsNumericFailure) {
  nlohmann::json j = nlohmann::json::parse(kScalarContraction);
  j["constraints"] = {{"G", {{1, 0}, {-1, 0}}}, {"w", {-1, -1}}};
  const RunResult r = run("sets", write_config("empty", j.dump()), "sets_empty");
  EXPECT_EQ(r.code, kExitNumericFailure);
  EXPECT_NE(r.err.find("EmptySet"), std::string::npos) << r.err;
}

TEST(Sets, IterationCapIsNumericFailure) {
  const RunResult r = run("sets", config_file("tracking_inequality"), "sets_cap", {"mais_max_iter=2"});
  EXPECT_EQ(r.code, kExitNumericFailure);
  EXPECT_NE(r.err.find("MaxIterationsExceeded"), std::string::npos) << r.err;
}

TEST(Simulate, TrackingStrictPasses) {
  const RunResult r = run("simulate", config_file("tracking_equality"), "sim2", {}, true);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto s = nlohmann::json::parse(slurp(r.out / "summary.json"));
  EXPECT_EQ(s["all_monitors_pass"], true);
  EXPECT_LE(s["final_offset"].get<double>(), 1e-3);
}

TEST(Simulate, StrictFailsOnMonitorViolation) {
  const char* stuck = R"({
    "model": {"A": [[2]], "B": [[1]], "C": [[1]]},
    "constraints": {"G": [[0, 1], [0, -1]], "w": [1, 1]},
    "lambda": 1.0,
    "controller": {"N": 3, "Q": [[1]], "R": [[1]], "offset": {"type": "quadratic", "T": [[100]]}},
    "scenario": {"x0": [1], "y_sp": [0.5], "steps": 20}
  })";
  const std::string cfg = write_config("stuck", stuck);
  EXPECT_EQ(run("simulate", cfg, "stuck_strict", {}, true).code, kExitMonitorFailure);
  EXPECT_EQ(run("simulate", cfg, "stuck", {}, false).code, kExitOk);
}

TEST(Simulate, IngredientsRoundTripIsByteIdentical) {
  const RunResult sets = run("sets", config_file("tracking_inequality"), "rt_sets");
  ASSERT_EQ(sets.code, kExitOk) << sets.err;
  const std::string ing = (sets.out / "ingredients.json").string();
  const RunResult a = run("simulate", config_file("tracking_inequality"), "rt_a");
  const RunResult b = run("simulate", config_file("tracking_inequality"), "rt_b", {}, false, std::nullopt, ing);
  ASSERT_EQ(a.code, kExitOk);
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_EQ(slurp(a.out / "trace.csv"), slurp(b.out / "trace.csv"));

  const TerminalIngredients ti = ingredients_from_json(slurp(ing));
  EXPECT_EQ(ingredients_to_json(ti), slurp(ing));
}

TEST(SweepGamma, ExactPenaltyCase) {
  const RunResult r = run("sweep-gamma", config_file("exact_penalty"), "sweep", {}, true);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream csv(slurp(r.out / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  std::vector<double> gaps;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    gaps.push_back(std::stod(cells[3]));
  }
  ASSERT_EQ(gaps.size(), 8u);
  for (std::size_t i = 1; i < gaps.size(); ++i) EXPECT_LE(gaps[i], gaps[i - 1] + 1e-9);
  EXPECT_LE(gaps.back(), 1e-5);
}

TEST(Compare, SeedDeterminism) {
  nlohmann::json j = nlohmann::json::parse(slurp(config_file("feasibility")));
  j["compare"]["samples"] = 60;
  const std::string cfg = write_config("sampled", j.dump());
  const RunResult a = run("compare", cfg, "cmp_a", {}, true, 1u);
  const RunResult b = run("compare", cfg, "cmp_b", {}, true, 1u);
  const RunResult c = run("compare", cfg, "cmp_c", {}, true, 2u);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(slurp(a.out / "membership.csv"), slurp(b.out / "membership.csv"));
  EXPECT_NE(slurp(a.out / "membership.csv"), slurp(c.out / "membership.csv"));
}

TEST(Compare, GridContainment) {
  nlohmann::json j = nlohmann::json::parse(slurp(config_file("feasibility")));
  j["compare"]["per_axis"] = 11;
  const RunResult r = run("compare", write_config("grid", j.dump()), "cmp_grid", {}, true);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto s = nlohmann::json::parse(slurp(r.out / "compare.json"));
  EXPECT_EQ(s["points"], 121);
  EXPECT_TRUE(s["containment_violations"].empty());
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(MPCT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Binary, ExitCodes) {
  const std::string out = out_dir("binary").string();
  EXPECT_EQ(run_binary("--help"), 0);
  EXPECT_EQ(run_binary("simulate"), kExitConfigError);
  EXPECT_EQ(run_binary("simulate --config " + write_config("bin_bad", "[1, 2") + " --out " + out), kExitConfigError);
  EXPECT_EQ(run_binary("simulate --config " + config_file("tracking_equality") + " --out " + out + " --strict --tol-override convergence=1e-2"), 0);
  EXPECT_EQ(run_binary("--config " + config_file("tracking_equality") + " --out " + out + " --tol-override qp_max_iter=80 --tol-override convergence=1e-2 simulate"), 0);
}

}  // namespace
}  // namespace mpct
