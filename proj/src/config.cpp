#include "mpct/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "mpct/error.hpp"

namespace mpct {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, path + ": " + msg);
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(path, "unknown key \"" + key + "\"");
    }
  }
}

const json& require(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) fail(path, std::string("missing key \"") + key + "\"");
  return j.at(key);
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

VectorXd vector(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], path);
  return v;
}

MatrixXd matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) fail(path, "rows must be non-empty arrays");
  MatrixXd M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) fail(path, "rows must all have " + std::to_string(cols) + " entries");
    for (std::size_t c = 0; c < cols; ++c) {
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c], path);
    }
  }
  return M;
}

json to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const MatrixXd& M) {
  json a = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) a.push_back(to_json(VectorXd(M.row(i).transpose())));
  return a;
}

json to_json(const HPolytope& P) { return json{{"G", to_json(P.G())}, {"w", to_json(P.w())}}; }

HPolytope polytope(const json& j, const std::string& path) {
  check_keys(j, path, {"G", "w"});
  const MatrixXd G = matrix(require(j, path, "G"), path + ".G");
  const VectorXd w = vector(require(j, path, "w"), path + ".w");
  if (w.size() != G.rows()) fail(path, "w must have one entry per row of G");
  return HPolytope(G, w);
}

LtiModel parse_model(const json& j) {
  check_keys(j, "model", {"A", "B", "C", "D"});
  LtiModel m;
  m.A = matrix(require(j, "model", "A"), "model.A");
  m.B = matrix(require(j, "model", "B"), "model.B");
  m.C = matrix(require(j, "model", "C"), "model.C");
  m.D = j.contains("D") ? matrix(j["D"], "model.D") : MatrixXd::Zero(m.C.rows(), m.B.cols());
  try {
    m.validate();
  } catch (const Error& e) {
    fail("model", e.what());
  }
  return m;
}

ConstraintSet parse_constraints(const json& j, double lambda) {
  if (j.contains("box")) {
    check_keys(j, "constraints", {"box"});
    const json& b = j["box"];
    check_keys(b, "constraints.box", {"x_inf", "u_inf"});
    return ConstraintSet::box(vector(require(b, "constraints.box", "x_inf"), "constraints.box.x_inf"),
                              vector(require(b, "constraints.box", "u_inf"), "constraints.box.u_inf"), lambda);
  }
  return ConstraintSet{polytope(j, "constraints"), lambda};
}

OffsetCostSpec parse_offset(const json& j) {
  check_keys(j, "controller.offset", {"type", "T", "gamma"});
  const std::string type = string(require(j, "controller.offset", "type"), "controller.offset.type");
  if (type == "quadratic") {
    if (j.contains("gamma")) fail("controller.offset", "gamma does not apply to a quadratic offset");
    return OffsetCostSpec::quadratic(matrix(require(j, "controller.offset", "T"), "controller.offset.T"));
  }
  if (j.contains("T")) fail("controller.offset", "T applies only to a quadratic offset");
  const double g = number(require(j, "controller.offset", "gamma"), "controller.offset.gamma");
  if (type == "one_norm") return OffsetCostSpec::one_norm(g);
  if (type == "inf_norm") return OffsetCostSpec::inf_norm(g);
  fail("controller.offset.type", "expected quadratic, one_norm or inf_norm, got \"" + type + "\"");
}

TerminalKind parse_terminal(const json& j, const std::string& path) {
  const std::string t = string(j, path);
  if (t == "equality") return TerminalKind::Equality;
  if (t == "inequality") return TerminalKind::Inequality;
  fail(path, "expected equality or inequality, got \"" + t + "\"");
}

MpctConfig parse_controller(const json& j) {
  check_keys(j, "controller", {"N", "Q", "R", "terminal", "offset", "use_theta"});
  MpctConfig c;
  c.N = integer(require(j, "controller", "N"), "controller.N");
  if (c.N < 1) fail("controller.N", "must be positive");
  c.Q = matrix(require(j, "controller", "Q"), "controller.Q");
  c.R = matrix(require(j, "controller", "R"), "controller.R");
  if (j.contains("terminal")) c.terminal = parse_terminal(j["terminal"], "controller.terminal");
  c.offset = parse_offset(require(j, "controller", "offset"));
  if (j.contains("use_theta")) c.use_theta = boolean(j["use_theta"], "controller.use_theta");
  return c;
}

Scenario parse_scenario(const json& j) {
  check_keys(j, "scenario", {"x0", "y_sp", "schedule", "steps", "monitors"});
  Scenario s;
  s.x0 = vector(require(j, "scenario", "x0"), "scenario.x0");
  s.steps = integer(require(j, "scenario", "steps"), "scenario.steps");
  if (j.contains("y_sp") == j.contains("schedule")) fail("scenario", "give exactly one of y_sp or schedule");
  if (j.contains("y_sp")) {
    s.schedule = {{0, vector(j["y_sp"], "scenario.y_sp")}};
  } else {
    const json& sch = j["schedule"];
    if (!sch.is_array()) fail("scenario.schedule", "expected an array");
    for (std::size_t i = 0; i < sch.size(); ++i) {
      const std::string p = "scenario.schedule[" + std::to_string(i) + "]";
      check_keys(sch[i], p, {"k", "y_sp"});
      s.schedule.push_back({integer(require(sch[i], p, "k"), p + ".k"), vector(require(sch[i], p, "y_sp"), p + ".y_sp")});
    }
  }
  if (j.contains("monitors")) {
    const json& m = j["monitors"];
    check_keys(m, "scenario.monitors", {"constraints", "feasibility", "lyapunov", "admissibility", "convergence"});
    const auto flag = [&](const char* key, bool& out) {
      if (m.contains(key)) out = boolean(m[key], std::string("scenario.monitors.") + key);
    };
    flag("constraints", s.monitors.constraints);
    flag("feasibility", s.monitors.feasibility);
    flag("lyapunov", s.monitors.lyapunov);
    flag("admissibility", s.monitors.admissibility);
    flag("convergence", s.monitors.convergence);
  }
  return s;
}

SweepSpec parse_sweep(const json& j) {
  check_keys(j, "sweep", {"x0", "y_sp", "gammas"});
  SweepSpec s;
  s.x0 = vector(require(j, "sweep", "x0"), "sweep.x0");
  s.y_sp = vector(require(j, "sweep", "y_sp"), "sweep.y_sp");
  const VectorXd g = vector(require(j, "sweep", "gammas"), "sweep.gammas");
  s.gammas.assign(g.data(), g.data() + g.size());
  for (double v : s.gammas) {
    if (!(v > 0)) fail("sweep.gammas", "entries must be positive");
  }
  return s;
}

CompareSpec parse_compare(const json& j) {
  check_keys(j, "compare", {"configs", "lo", "hi", "per_axis", "samples"});
  CompareSpec s;
  s.lo = vector(require(j, "compare", "lo"), "compare.lo");
  s.hi = vector(require(j, "compare", "hi"), "compare.hi");
  if (s.lo.size() != s.hi.size()) fail("compare", "lo and hi must have the same length");
  if (j.contains("per_axis")) s.per_axis = integer(j["per_axis"], "compare.per_axis");
  if (j.contains("samples")) s.samples = integer(j["samples"], "compare.samples");
  if (s.per_axis < 0 || s.samples < 0) fail("compare", "per_axis and samples must be nonnegative");
  const json& cfgs = require(j, "compare", "configs");
  if (!cfgs.is_array()) fail("compare.configs", "expected an array");
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const std::string p = "compare.configs[" + std::to_string(i) + "]";
    check_keys(cfgs[i], p, {"name", "kind", "terminal", "N", "y_sp"});
    CompareEntry e;
    e.name = string(require(cfgs[i], p, "name"), p + ".name");
    const std::string kind = string(require(cfgs[i], p, "kind"), p + ".kind");
    if (kind != "regulation" && kind != "mpct") fail(p + ".kind", "expected regulation or mpct");
    e.regulation = kind == "regulation";
    if (cfgs[i].contains("terminal")) e.terminal = parse_terminal(cfgs[i]["terminal"], p + ".terminal");
    if (cfgs[i].contains("N")) e.N = integer(cfgs[i]["N"], p + ".N");
    if (e.regulation) e.y_sp = vector(require(cfgs[i], p, "y_sp"), p + ".y_sp");
    else if (cfgs[i].contains("y_sp")) fail(p, "y_sp applies only to regulation entries");
    s.entries.push_back(std::move(e));
  }
  return s;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos == value.size()) return v;
  } catch (const std::exception&) {
  }
  fail("tolerances." + key, "expected a number, got \"" + value + "\"");
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos == value.size()) return v;
  } catch (const std::exception&) {
  }
  fail("tolerances." + key, "expected an integer, got \"" + value + "\"");
}

}  // namespace

std::vector<std::string> Tolerances::keys() {
  return {"monitor_constraint", "monitor_lyapunov_rel", "monitor_admissibility", "convergence",
          "convergence_steps", "qp_max_iter", "qp_tol_feas", "qp_tol_gap", "qp_tol_stall",
          "mais_max_iter"};
}

void Tolerances::set(const std::string& key, const std::string& value) {
  const auto positive = [&](double v) {
    if (!(v > 0)) fail("tolerances." + key, "must be positive");
    return v;
  };
  const auto positive_int = [&](int v) {
    if (v < 1) fail("tolerances." + key, "must be a positive integer");
    return v;
  };
  if (key == "monitor_constraint") monitor.constraint = positive(parse_double(key, value));
  else if (key == "monitor_lyapunov_rel") monitor.lyapunov_rel = positive(parse_double(key, value));
  else if (key == "monitor_admissibility") monitor.admissibility = positive(parse_double(key, value));
  else if (key == "convergence") monitor.convergence = positive(parse_double(key, value));
  else if (key == "convergence_steps") monitor.convergence_steps = positive_int(parse_int(key, value));
  else if (key == "qp_max_iter") qp.max_iter = positive_int(parse_int(key, value));
  else if (key == "qp_tol_feas") qp.tol_feas = positive(parse_double(key, value));
  else if (key == "qp_tol_gap") qp.tol_gap = positive(parse_double(key, value));
  else if (key == "qp_tol_stall") qp.tol_stall = positive(parse_double(key, value));
  else if (key == "mais_max_iter") mais_max_iter = positive_int(parse_int(key, value));
  else fail("tolerances", "unknown key \"" + key + "\"");
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
    const std::size_t nl = text.rfind('\n', upto == 0 ? 0 : upto - 1);
    const std::size_t col = nl == std::string::npos || upto == 0 ? upto + 1 : upto - nl;
    throw Error(ErrorCode::ConfigError, "malformed JSON at line " + std::to_string(line) + ", column " +
                                            std::to_string(col) + ": " + e.what());
  }
  check_keys(j, "config", {"description", "model", "constraints", "lambda", "controller", "scenario",
                           "sweep", "compare", "tolerances", "seed"});
  RunConfig rc;
  if (j.contains("description")) string(j["description"], "description");
  rc.model = parse_model(require(j, "config", "model"));
  const double lambda = j.contains("lambda") ? number(j["lambda"], "lambda") : 0.99;
  rc.cons = parse_constraints(require(j, "config", "constraints"), lambda);
  rc.controller = parse_controller(require(j, "config", "controller"));
  if (j.contains("scenario")) rc.scenario = parse_scenario(j["scenario"]);
  if (j.contains("sweep")) rc.sweep = parse_sweep(j["sweep"]);
  if (j.contains("compare")) rc.compare = parse_compare(j["compare"]);
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    if (!t.is_object()) fail("tolerances", "expected an object");
    for (const auto& [key, val] : t.items()) {
      if (!val.is_number()) fail("tolerances." + key, "expected a number");
      rc.tol.set(key, val.dump());
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) fail("seed", "expected a nonnegative integer");
    rc.seed = j["seed"].get<unsigned>();
  }

  const Eigen::Index n = rc.model.n(), m = rc.model.m(), p = rc.model.p();
  try {
    rc.cons.validate(rc.model);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptySet) throw;
    fail("constraints", e.what());
  }
  if (rc.controller.Q.rows() != n || rc.controller.Q.cols() != n) fail("controller.Q", "must be n x n");
  if (rc.controller.R.rows() != m || rc.controller.R.cols() != m) fail("controller.R", "must be m x m");
  try {
    rc.controller.offset.validate(p);
  } catch (const Error& e) {
    fail("controller.offset", e.what());
  }
  if (rc.scenario) {
    try {
      rc.scenario->validate(n, p);
    } catch (const Error& e) {
      fail("scenario", e.what());
    }
  }
  if (rc.sweep && (rc.sweep->x0.size() != n || rc.sweep->y_sp.size() != p)) {
    fail("sweep", "x0 must have n entries and y_sp p entries");
  }
  if (rc.compare) {
    if (rc.compare->lo.size() != n) fail("compare", "lo and hi must have n entries");
    for (const auto& e : rc.compare->entries) {
      if (e.regulation && e.y_sp.size() != p) fail("compare.configs", "regulation y_sp must have p entries");
    }
  }
  return rc;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string ingredients_to_json(const TerminalIngredients& ti) {
  json j;
  j["K"] = to_json(ti.K);
  j["P"] = to_json(ti.P);
  j["Omega_a"] = to_json(ti.Omega_a);
  j["Omega_x"] = ti.Omega_x ? to_json(*ti.Omega_x) : json();
  j["determinedness"] = ti.determinedness;
  return j.dump(2) + "\n";
}

TerminalIngredients ingredients_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed ingredients file: ") + e.what());
  }
  check_keys(j, "ingredients", {"K", "P", "Omega_a", "Omega_x", "determinedness"});
  TerminalIngredients ti;
  ti.K = matrix(require(j, "ingredients", "K"), "ingredients.K");
  ti.P = matrix(require(j, "ingredients", "P"), "ingredients.P");
  ti.Omega_a = polytope(require(j, "ingredients", "Omega_a"), "ingredients.Omega_a");
  if (j.contains("Omega_x") && !j["Omega_x"].is_null()) ti.Omega_x = polytope(j["Omega_x"], "ingredients.Omega_x");
  ti.determinedness = integer(require(j, "ingredients", "determinedness"), "ingredients.determinedness");
  return ti;
}

}  // namespace mpct
