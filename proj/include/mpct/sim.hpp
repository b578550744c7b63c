#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpct/controller.hpp"

namespace mpct {

struct MonitorSet {
  bool constraints = true;    // (x(k), u(k)) in Z
  bool feasibility = true;    // Optimal at every step
  bool lyapunov = true;       // optimal-cost decrease
  bool admissibility = true;  // (x_a, u_a) in lambda Z
  bool convergence = true;    // y(k) reaches the offset-optimal output y_t
};

struct MonitorTolerances {
  double constraint = 1e-7;
  double lyapunov_rel = 1e-6;  // slack is lyapunov_rel * (1 + V(k))
  double admissibility = 1e-7;
  double convergence = 1e-3;   // infinity norm
  int convergence_steps = 5;   // consecutive steps inside the band
};

struct SetpointChange {
  int k = 0;
  VectorXd y_sp;
};

struct Scenario {
  VectorXd x0;
  std::vector<SetpointChange> schedule;
  int steps = 0;
  MonitorSet monitors;
  MonitorTolerances tol;

  /// Throws ConfigError unless the schedule starts at k = 0, is strictly increasing and
  /// every vector has the right size.
  void validate(Eigen::Index n, Eigen::Index p) const;
  const VectorXd& setpoint_at(int k) const;
};

struct StepRecord {
  int k = 0;
  VectorXd x, u, x_a, u_a, y_a, y, y_sp, y_t;
  double value = 0.0;
  QpStatus status = QpStatus::MaxIter;
  bool constraint_ok = true;
  bool feasible_ok = true;
  bool lyapunov_ok = true;  // decrease from k to k+1; true on the last step and across setpoint changes
  bool admissible_ok = true;
  double tracking_error = 0.0;  // ||y(k) - y_t||_inf
};

struct TraceSummary {
  VectorXd y_final;
  double final_offset = 0.0;  // ||y_final - y_sp||_inf at the active setpoint
  std::optional<int> first_violation;
  std::optional<int> infeasible_at;
  std::optional<int> converged_at;  // first step of the last convergence window, if reached
};

struct Trace {
  std::vector<StepRecord> steps;
  TraceSummary summary;
  MonitorSet monitors;

  bool failed() const { return summary.infeasible_at.has_value(); }
  /// Every enabled monitor passed; convergence counts when enabled.
  bool all_monitors_pass() const;
};

/// Applies u0 of the controller to the plant each step. On a non-optimal solve the trace
/// ends with that step recorded and no input applied.
Trace run_closed_loop(const LtiModel& plant, const CondensedQp& cq, const Scenario& scenario,
                      const QpSettings& settings = {});

std::string trace_csv(const Trace& trace);
std::string trace_summary_json(const Trace& trace);

struct GammaSweepRow {
  double gamma = 0.0;
  double value = 0.0;             // tracking cost with gamma * ||.||_1 offset
  double regulation_value = 0.0;  // regulation cost to y_sp
  double gap = 0.0;
  double nu_one = 0.0;  // ||nu||_1 of the regulation equality y_a = y_sp
  double nu_inf = 0.0;  // ||nu||_inf, the dual norm of the 1-norm penalty
  QpStatus status = QpStatus::MaxIter;
};

/// Throws RegulationInfeasible if regulation to y_sp is not feasible at x0.
std::vector<GammaSweepRow> gamma_sweep(const LtiModel& model, const ConstraintSet& cons,
                                       const MpctConfig& config, const VectorXd& x0,
                                       const VectorXd& y_sp, const std::vector<double>& gammas);

std::string gamma_sweep_csv(const std::vector<GammaSweepRow>& rows);

struct NamedProblem {
  std::string name;
  CondensedQp cq;
};

struct MembershipTable {
  std::vector<std::string> names;
  std::vector<VectorXd> points;
  std::vector<std::vector<bool>> feasible;  // [point][config]

  std::size_t count(std::size_t config) const;
  /// Points feasible for config a but not for config b.
  std::size_t count_only(std::size_t a, std::size_t b) const;
};

MembershipTable feasible_set_compare(const std::vector<NamedProblem>& problems,
                                     const std::vector<VectorXd>& points);

/// Uniform grid on [lo, hi] with per_axis points along each coordinate.
std::vector<VectorXd> grid_points(const VectorXd& lo, const VectorXd& hi, int per_axis);

std::string membership_csv(const MembershipTable& table);

}  // namespace mpct
