#include "mpct/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mpct/config.hpp"
#include "mpct/error.hpp"
#include "mpct/sim.hpp"

namespace mpct {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text, std::ostream& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
  out << text;
  log << "wrote " << path.string() << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string vertices_csv(const HPolytope& P) {
  std::ostringstream os;
  os << "x_1,x_2\n";
  for (const auto& v : vertices_2d(P)) os << num(v(0)) << ',' << num(v(1)) << '\n';
  return os.str();
}

// Orthonormal basis of range(M).
MatrixXd range_basis(const MatrixXd& M) {
  Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(numerical_rank(M));
}

struct Context {
  RunConfig rc;
  SteadyStateMap map;
  fs::path out;
};

Context prepare(const CliOptions& opts) {
  Context ctx;
  ctx.rc = load_config(opts.config_path);
  for (const std::string& kv : opts.tol_overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::ConfigError, "--tol-override expects KEY=VAL, got \"" + kv + "\"");
    }
    ctx.rc.tol.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed) ctx.rc.seed = *opts.seed;
  if (ctx.rc.scenario) ctx.rc.scenario->tol = ctx.rc.tol.monitor;
  ctx.out = opts.out_dir;
  fs::create_directories(ctx.out);
  return ctx;
}

TerminalIngredients ingredients_for(const Context& ctx, const CliOptions& opts, std::ostream& log) {
  const RunConfig& rc = ctx.rc;
  if (!opts.ingredients_path.empty()) {
    TerminalIngredients ti = ingredients_from_json(read_file(opts.ingredients_path));
    const Eigen::Index n = rc.model.n(), m = rc.model.m();
    if (ti.K.rows() != m || ti.K.cols() != n || ti.P.rows() != n || ti.Omega_a.dim() != n + m) {
      throw Error(ErrorCode::ConfigError, "ingredients file does not match the model dimensions");
    }
    log << "loaded terminal ingredients from " << opts.ingredients_path << "\n";
    return ti;
  }
  return compute_terminal_ingredients(rc.model, rc.cons, ctx.map, rc.controller.Q, rc.controller.R,
                                      rc.tol.mais_max_iter);
}

int cmd_analyze(const Context& ctx, std::ostream& log) {
  const RunConfig& rc = ctx.rc;
  const LtiModel& m = rc.model;
  json j;
  j["n"] = m.n();
  j["m"] = m.m();
  j["p"] = m.p();
  j["stabilizable"] = check_stabilizability(m);
  j["output_rank"] = check_output_rank(m);
  try {
    j["controllability_index"] = controllability_index(m);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotControllable) throw;
    j["controllability_index"] = nullptr;
    j["controllability_note"] = e.what();
  }
  const ReachableSets sets = reachable_steady_sets(m, rc.cons, ctx.map);
  j["steady_state_map"] = {{"M_theta", to_json(ctx.map.M_theta)}, {"N_theta", to_json(ctx.map.N_theta)}};
  j["theta_set"] = to_json(sets.theta_set);
  if (m.p() > m.m()) {
    j["Y_sp"] = {{"subspace_basis", to_json(range_basis(ctx.map.N_theta))},
                 {"note", "p > m: reachable outputs lie in the span of subspace_basis"}};
  } else if (sets.Y_sp) {
    j["Y_sp"] = to_json(*sets.Y_sp);
  } else {
    j["Y_sp"] = {{"note", "p > 3: Y_sp is described through theta_set and N_theta only"}};
  }
  if (sets.X_sp) j["X_sp"] = to_json(*sets.X_sp);
  write_file(ctx.out / "analysis.json", j.dump(2) + "\n", log);
  return kExitOk;
}

int cmd_sets(const Context& ctx, const CliOptions& opts, std::ostream& log) {
  const RunConfig& rc = ctx.rc;
  const TerminalIngredients ti = ingredients_for(ctx, opts, log);
  json j;
  j["K"] = to_json(ti.K);
  j["P"] = to_json(ti.P);
  j["determinedness"] = ti.determinedness;
  j["iterations"] = ti.determinedness + 1;
  j["Omega_a"] = to_json(ti.Omega_a);
  j["Omega_a_rows"] = ti.Omega_a.num_rows();
  j["Omega_x"] = ti.Omega_x ? to_json(*ti.Omega_x) : json();
  write_file(ctx.out / "sets.json", j.dump(2) + "\n", log);
  write_file(ctx.out / "ingredients.json", ingredients_to_json(ti), log);
  if (rc.model.n() == 2) {
    if (ti.Omega_x) write_file(ctx.out / "omega_x_vertices.csv", vertices_csv(*ti.Omega_x), log);
    const ReachableSets sets = reachable_steady_sets(rc.model, rc.cons, ctx.map);
    write_file(ctx.out / "x_sp_vertices.csv", vertices_csv(*sets.X_sp), log);
  }
  log << "determinedness index " << ti.determinedness << ", " << ti.Omega_a.num_rows() << " rows\n";
  return kExitOk;
}

MpctConfig controller_with_ingredients(const Context& ctx, const CliOptions& opts, std::ostream& log,
                                       bool need) {
  MpctConfig c = ctx.rc.controller;
  if (need) c.ingredients = ingredients_for(ctx, opts, log);
  return c;
}

int cmd_simulate(const Context& ctx, const CliOptions& opts, std::ostream& log) {
  const RunConfig& rc = ctx.rc;
  if (!rc.scenario) throw Error(ErrorCode::ConfigError, "config: simulate needs a scenario");
  const MpctConfig c =
      controller_with_ingredients(ctx, opts, log, rc.controller.terminal == TerminalKind::Inequality);
  const CondensedQp cq = condense(rc.model, rc.cons, c);
  const Trace tr = run_closed_loop(rc.model, cq, *rc.scenario, rc.tol.qp);
  write_file(ctx.out / "trace.csv", trace_csv(tr), log);
  write_file(ctx.out / "summary.json", trace_summary_json(tr), log);
  const bool pass = tr.all_monitors_pass();
  log << "monitors " << (pass ? "passed" : "FAILED") << "\n";
  return opts.strict && !pass ? kExitMonitorFailure : kExitOk;
}

int cmd_sweep(const Context& ctx, const CliOptions& opts, std::ostream& log) {
  const RunConfig& rc = ctx.rc;
  if (!rc.sweep) throw Error(ErrorCode::ConfigError, "config: sweep-gamma needs a sweep section");
  const MpctConfig c =
      controller_with_ingredients(ctx, opts, log, rc.controller.terminal == TerminalKind::Inequality);
  const auto rows = gamma_sweep(rc.model, rc.cons, c, rc.sweep->x0, rc.sweep->y_sp, rc.sweep->gammas);
  write_file(ctx.out / "sweep.csv", gamma_sweep_csv(rows), log);
  bool monotone = true, solved = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    solved = solved && rows[i].status == QpStatus::Optimal;
    if (i > 0 && rows[i].gap > rows[i - 1].gap + 1e-9) monotone = false;
  }
  json j;
  j["nu_one"] = rows.empty() ? 0.0 : rows.front().nu_one;
  j["nu_inf"] = rows.empty() ? 0.0 : rows.front().nu_inf;
  j["regulation_value"] = rows.empty() ? 0.0 : rows.front().regulation_value;
  j["gap_nonincreasing"] = monotone;
  j["all_optimal"] = solved;
  j["final_gap"] = rows.empty() ? 0.0 : rows.back().gap;
  write_file(ctx.out / "sweep.json", j.dump(2) + "\n", log);
  return opts.strict && !(monotone && solved) ? kExitMonitorFailure : kExitOk;
}

int cmd_compare(const Context& ctx, const CliOptions& opts, std::ostream& log) {
  const RunConfig& rc = ctx.rc;
  if (!rc.compare) throw Error(ErrorCode::ConfigError, "config: compare needs a compare section");
  const CompareSpec& spec = *rc.compare;
  bool need = false;
  for (const auto& e : spec.entries) need = need || e.terminal == TerminalKind::Inequality;
  const MpctConfig base = controller_with_ingredients(ctx, opts, log, need);

  std::vector<NamedProblem> problems;
  std::vector<int> horizons;
  for (const auto& e : spec.entries) {
    MpctConfig c = base;
    c.terminal = e.terminal;
    if (e.N) c.N = *e.N;
    horizons.push_back(c.N);
    problems.push_back({e.name, e.regulation ? build_regulation(rc.model, rc.cons, c, e.y_sp)
                                             : condense(rc.model, rc.cons, c)});
  }

  std::vector<VectorXd> points;
  if (spec.samples > 0) {
    std::mt19937 rng(rc.seed);
    for (int i = 0; i < spec.samples; ++i) {
      VectorXd x(spec.lo.size());
      for (Eigen::Index d = 0; d < x.size(); ++d) {
        x(d) = std::uniform_real_distribution<double>(spec.lo(d), spec.hi(d))(rng);
      }
      points.push_back(x);
    }
  } else {
    if (rc.model.n() != 2) throw Error(ErrorCode::ConfigError, "compare: grid mode needs n = 2, set samples");
    points = grid_points(spec.lo, spec.hi, spec.per_axis);
  }
  const MembershipTable t = feasible_set_compare(problems, points);
  write_file(ctx.out / "membership.csv", membership_csv(t), log);

  // Containment expected at equal horizon: a regulation set lies inside the tracking set,
  // and a terminal equality inside the terminal inequality of the same kind and target.
  bool contained = true;
  json j;
  j["points"] = t.points.size();
  j["feasible_counts"] = json::object();
  for (std::size_t a = 0; a < problems.size(); ++a) j["feasible_counts"][t.names[a]] = t.count(a);
  j["containment_violations"] = json::array();
  for (std::size_t a = 0; a < problems.size(); ++a) {
    for (std::size_t b = 0; b < problems.size(); ++b) {
      const auto& ea = spec.entries[a];
      const auto& eb = spec.entries[b];
      if (a == b || horizons[a] != horizons[b]) continue;
      if (!ea.regulation && eb.regulation) continue;
      if (ea.regulation && eb.regulation && ea.y_sp != eb.y_sp) continue;
      if (ea.terminal == TerminalKind::Inequality && eb.terminal == TerminalKind::Equality) continue;
      const std::size_t v = t.count_only(a, b);
      if (v > 0) {
        contained = false;
        j["containment_violations"].push_back({{"subset", t.names[a]}, {"superset", t.names[b]}, {"points", v}});
      }
    }
  }
  write_file(ctx.out / "compare.json", j.dump(2) + "\n", log);
  return opts.strict && !contained ? kExitMonitorFailure : kExitOk;
}

bool is_config_error(ErrorCode c) {
  return c == ErrorCode::ConfigError || c == ErrorCode::DimensionMismatch;
}

}  // namespace

int run_command(const CliOptions& opts, std::ostream& log, std::ostream& err) {
  try {
    Context ctx = prepare(opts);
    ctx.map = steady_state_basis(ctx.rc.model);
    if (opts.command == "analyze") return cmd_analyze(ctx, log);
    if (opts.command == "sets") return cmd_sets(ctx, opts, log);
    if (opts.command == "simulate") return cmd_simulate(ctx, opts, log);
    if (opts.command == "sweep-gamma") return cmd_sweep(ctx, opts, log);
    if (opts.command == "compare") return cmd_compare(ctx, opts, log);
    err << "unknown command \"" << opts.command << "\"\n";
    return kExitConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_config_error(e.code()) ? kExitConfigError : kExitNumericFailure;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

}  // namespace mpct
