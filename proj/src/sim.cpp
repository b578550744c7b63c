#include "mpct/sim.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mpct/error.hpp"

namespace mpct {

namespace {

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

VectorXd nan_vector(Eigen::Index size) {
  return VectorXd::Constant(size, std::numeric_limits<double>::quiet_NaN());
}

VectorXd joint(const VectorXd& a, const VectorXd& b) {
  VectorXd z(a.size() + b.size());
  z << a, b;
  return z;
}

nlohmann::json vec_json(const VectorXd& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

}  // namespace

void Scenario::validate(Eigen::Index n, Eigen::Index p) const {
  if (x0.size() != n) throw Error(ErrorCode::ConfigError, "scenario x0 must have n entries");
  if (steps < 1) throw Error(ErrorCode::ConfigError, "scenario steps must be positive");
  if (schedule.empty() || schedule.front().k != 0) {
    throw Error(ErrorCode::ConfigError, "setpoint schedule must start at k = 0");
  }
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i].y_sp.size() != p) throw Error(ErrorCode::ConfigError, "setpoint must have p entries");
    if (i > 0 && schedule[i].k <= schedule[i - 1].k) {
      throw Error(ErrorCode::ConfigError, "setpoint schedule steps must be strictly increasing");
    }
  }
  if (tol.convergence_steps < 1) throw Error(ErrorCode::ConfigError, "convergence_steps must be positive");
}

const VectorXd& Scenario::setpoint_at(int k) const {
  const SetpointChange* active = &schedule.front();
  for (const auto& c : schedule) {
    if (c.k <= k) active = &c;
  }
  return active->y_sp;
}

bool Trace::all_monitors_pass() const {
  if (monitors.feasibility && failed()) return false;
  if (summary.first_violation) return false;
  if (monitors.convergence && !summary.converged_at) return false;
  return true;
}

Trace run_closed_loop(const LtiModel& plant, const CondensedQp& cq, const Scenario& scenario,
                      const QpSettings& settings) {
  plant.validate();
  scenario.validate(plant.n(), plant.p());
  const MpctConfig& c = cq.config;
  const Eigen::Index n = plant.n(), m = plant.m(), p = plant.p();
  const HPolytope lz = cq.cons.shrunk();
  const ReachableSets sets = reachable_steady_sets(cq.model, cq.cons, cq.map);

  Trace trace;
  trace.monitors = scenario.monitors;
  VectorXd x = scenario.x0;
  VectorXd last_sp;
  VectorXd y_t;
  int in_band = 0;
  for (int k = 0; k < scenario.steps; ++k) {
    StepRecord rec;
    rec.k = k;
    rec.x = x;
    rec.y_sp = scenario.setpoint_at(k);
    if (last_sp.size() == 0 || rec.y_sp != last_sp) {
      y_t = cq.regulation ? cq.target
                          : equilibrium_for_setpoint(cq.model, cq.map, sets, rec.y_sp, c.offset).y_t;
      in_band = 0;
      trace.summary.converged_at.reset();
    }
    rec.y_t = y_t;

    const ControlResult r = solve_mpct(cq, x, rec.y_sp, settings);
    rec.status = r.status;
    rec.feasible_ok = r.optimal();
    if (!r.optimal()) {
      rec.u = nan_vector(m);
      rec.x_a = nan_vector(n);
      rec.u_a = nan_vector(m);
      rec.y_a = nan_vector(p);
      rec.y = nan_vector(p);
      rec.value = std::numeric_limits<double>::quiet_NaN();
      rec.tracking_error = std::numeric_limits<double>::quiet_NaN();
      trace.summary.infeasible_at = k;
      trace.steps.push_back(rec);
      break;
    }
    rec.u = r.u0;
    rec.x_a = r.x_a;
    rec.u_a = r.u_a;
    rec.y_a = r.y_a;
    rec.value = r.value;
    rec.y = plant.C * x + plant.D * r.u0;
    rec.constraint_ok = contains(cq.cons.Z, joint(x, r.u0), scenario.tol.constraint);
    rec.admissible_ok = contains(lz, joint(r.x_a, r.u_a), scenario.tol.admissibility);
    rec.tracking_error = inf_norm(rec.y - y_t);

    if (!trace.steps.empty()) {
      StepRecord& prev = trace.steps.back();
      if (prev.y_sp == rec.y_sp) {
        const VectorXd dx = prev.x - prev.x_a, du = prev.u - prev.u_a;
        const double bound = -dx.dot(c.Q * dx) - du.dot(c.R * du);
        prev.lyapunov_ok =
            rec.value - prev.value <= bound + scenario.tol.lyapunov_rel * (1.0 + std::abs(prev.value));
      }
    }

    if (rec.tracking_error <= scenario.tol.convergence) {
      if (++in_band == scenario.tol.convergence_steps) trace.summary.converged_at = k + 1 - in_band;
    } else {
      in_band = 0;
      trace.summary.converged_at.reset();
    }

    trace.steps.push_back(rec);
    last_sp = rec.y_sp;
    x = plant.A * x + plant.B * r.u0;
  }

  const MonitorSet& mon = scenario.monitors;
  for (const StepRecord& s : trace.steps) {
    const bool bad = (mon.constraints && !s.constraint_ok) || (mon.feasibility && !s.feasible_ok) ||
                     (mon.lyapunov && !s.lyapunov_ok) || (mon.admissibility && !s.admissible_ok);
    if (bad) {
      trace.summary.first_violation = s.k;
      break;
    }
  }
  if (!trace.steps.empty()) {
    const StepRecord& last = trace.steps.back();
    trace.summary.y_final = last.y;
    trace.summary.final_offset = inf_norm(last.y - last.y_sp);
  }
  return trace;
}

std::string trace_csv(const Trace& trace) {
  std::ostringstream os;
  if (trace.steps.empty()) return "k\n";
  const StepRecord& f = trace.steps.front();
  os << "k";
  const auto header = [&](const char* prefix, Eigen::Index size) {
    for (Eigen::Index i = 0; i < size; ++i) os << ',' << prefix << (i + 1);
  };
  header("x_", f.x.size());
  header("u_", f.u.size());
  header("xa_", f.x_a.size());
  header("ua_", f.u_a.size());
  header("ya_", f.y_a.size());
  header("y_", f.y.size());
  header("ysp_", f.y_sp.size());
  os << ",cost,status,mon_constraints,mon_feasibility,mon_lyapunov,mon_admissibility,tracking_error\n";
  for (const StepRecord& s : trace.steps) {
    os << s.k;
    for (const VectorXd* v : {&s.x, &s.u, &s.x_a, &s.u_a, &s.y_a, &s.y, &s.y_sp}) {
      for (Eigen::Index i = 0; i < v->size(); ++i) os << ',' << num((*v)(i));
    }
    os << ',' << num(s.value) << ',' << to_string(s.status) << ',' << s.constraint_ok << ','
       << s.feasible_ok << ',' << s.lyapunov_ok << ',' << s.admissible_ok << ',' << num(s.tracking_error)
       << '\n';
  }
  return os.str();
}

std::string trace_summary_json(const Trace& trace) {
  nlohmann::json j;
  j["steps"] = trace.steps.size();
  j["y_final"] = vec_json(trace.summary.y_final);
  j["final_offset"] = trace.summary.final_offset;
  const auto opt = [](const std::optional<int>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  j["first_violation"] = opt(trace.summary.first_violation);
  j["infeasible_at"] = opt(trace.summary.infeasible_at);
  j["converged_at"] = opt(trace.summary.converged_at);
  if (!trace.steps.empty()) j["y_t"] = vec_json(trace.steps.back().y_t);
  j["all_monitors_pass"] = trace.all_monitors_pass();
  return j.dump(2) + "\n";
}

std::vector<GammaSweepRow> gamma_sweep(const LtiModel& model, const ConstraintSet& cons,
                                       const MpctConfig& config, const VectorXd& x0,
                                       const VectorXd& y_sp, const std::vector<double>& gammas) {
  const CondensedQp reg_cq = build_regulation(model, cons, config, y_sp);
  const ControlResult reg = solve_mpct(reg_cq, x0, y_sp);
  if (!reg.optimal()) {
    throw Error(ErrorCode::RegulationInfeasible, "regulation problem is " + to_string(reg.status) + " at x0");
  }
  std::vector<GammaSweepRow> rows;
  rows.reserve(gammas.size());
  for (double g : gammas) {
    MpctConfig c = config;
    c.offset = OffsetCostSpec::one_norm(g);
    const ControlResult r = solve_mpct(condense(model, cons, c), x0, y_sp);
    GammaSweepRow row;
    row.gamma = g;
    row.status = r.status;
    row.value = r.value;
    row.regulation_value = reg.value;
    row.gap = std::abs(reg.value - r.value);
    row.nu_one = reg.nu_regulation.lpNorm<1>();
    row.nu_inf = inf_norm(reg.nu_regulation);
    rows.push_back(row);
  }
  return rows;
}

std::string gamma_sweep_csv(const std::vector<GammaSweepRow>& rows) {
  std::ostringstream os;
  os << "gamma,value,regulation_value,gap,nu_one,nu_inf,status\n";
  for (const auto& r : rows) {
    os << num(r.gamma) << ',' << num(r.value) << ',' << num(r.regulation_value) << ',' << num(r.gap) << ','
       << num(r.nu_one) << ',' << num(r.nu_inf) << ',' << to_string(r.status) << '\n';
  }
  return os.str();
}

std::size_t MembershipTable::count(std::size_t config) const {
  std::size_t c = 0;
  for (const auto& row : feasible) c += row[config];
  return c;
}

std::size_t MembershipTable::count_only(std::size_t a, std::size_t b) const {
  std::size_t c = 0;
  for (const auto& row : feasible) c += row[a] && !row[b];
  return c;
}

MembershipTable feasible_set_compare(const std::vector<NamedProblem>& problems,
                                     const std::vector<VectorXd>& points) {
  MembershipTable t;
  for (const auto& pr : problems) t.names.push_back(pr.name);
  t.points = points;
  t.feasible.reserve(points.size());
  for (const VectorXd& x : points) {
    std::vector<bool> row;
    row.reserve(problems.size());
    for (const auto& pr : problems) row.push_back(feasible(pr.cq, x));
    t.feasible.push_back(std::move(row));
  }
  return t;
}

std::vector<VectorXd> grid_points(const VectorXd& lo, const VectorXd& hi, int per_axis) {
  if (lo.size() != hi.size()) throw Error(ErrorCode::DimensionMismatch, "grid bounds differ in size");
  std::vector<VectorXd> pts;
  if (per_axis < 1 || lo.size() == 0) return pts;
  const Eigen::Index d = lo.size();
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    VectorXd x(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double t = per_axis == 1 ? 0.5 : static_cast<double>(idx[i]) / (per_axis - 1);
      x(i) = lo(i) + t * (hi(i) - lo(i));
    }
    pts.push_back(x);
    Eigen::Index i = 0;
    while (i < d && ++idx[i] == per_axis) idx[i++] = 0;
    if (i == d) break;
  }
  return pts;
}

std::string membership_csv(const MembershipTable& table) {
  std::ostringstream os;
  const Eigen::Index d = table.points.empty() ? 0 : table.points.front().size();
  std::vector<std::string> cols;
  for (Eigen::Index i = 0; i < d; ++i) cols.push_back("x_" + std::to_string(i + 1));
  cols.insert(cols.end(), table.names.begin(), table.names.end());
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (std::size_t r = 0; r < table.points.size(); ++r) {
    for (Eigen::Index i = 0; i < d; ++i) os << (i ? "," : "") << num(table.points[r](i));
    for (bool f : table.feasible[r]) os << ',' << f;
    os << '\n';
  }
  return os.str();
}

}  // namespace mpct
