#pragma once

#include <optional>

#include "mpct/model.hpp"
#include "mpct/qp.hpp"
#include "mpct/synthesis.hpp"

namespace mpct {

enum class TerminalKind { Equality, Inequality };

std::string to_string(TerminalKind kind);

struct MpctConfig {
  int N = 3;
  MatrixXd Q;
  MatrixXd R;
  TerminalKind terminal = TerminalKind::Equality;
  OffsetCostSpec offset;
  bool use_theta = false;
  /// Required for the inequality variant: K, P and Omega_a in (x, theta).
  std::optional<TerminalIngredients> ingredients;
};

/// Decision vector: [u(0..N-1) | (x_a, u_a) or theta | epigraph auxiliaries].
struct DecisionLayout {
  Eigen::Index num_u = 0;
  Eigen::Index eq_offset = 0;
  Eigen::Index eq_size = 0;
  Eigen::Index aux_offset = 0;
  Eigen::Index aux_size = 0;
  Eigen::Index total = 0;
  bool theta = false;
};

/// Canonical QP with parameter-affine data in (x, y_sp):
///   f = base.f + f_x x + f_sp y_sp,   r = x' r_x x + y_sp' r_sp y_sp,
///   W = base.W + W_x x + W_sp y_sp,   S = base.S + S_x x + S_sp y_sp.
/// H, G, F never change with the parameters.
struct CondensedQp {
  QpProblem base;
  MatrixXd f_x, f_sp, r_x, r_sp;
  MatrixXd W_x, W_sp, S_x, S_sp;

  // Prediction x = A_bold x0 + B_bold u and x(N) = A^N x0 + B_N u.
  MatrixXd A_bold, B_bold, B_N;
  // Deviations in terms of the decision vector z:
  //   stacked x(j) - x_a = B_e z + A_bold x0,  u(j) - u_a = I_e z,  y_a = F_e z.
  MatrixXd B_e, I_e, F_e;
  MatrixXd E_xu;     // (x_a, u_a) = E_xu z
  MatrixXd E_theta;  // theta = E_theta z
  MatrixXd Q_bold, R_bold;

  DecisionLayout layout;

  // Inequality rows in order: path, equilibrium admissibility, terminal set, epigraph.
  Eigen::Index rows_path = 0, rows_equilibrium = 0, rows_terminal = 0, rows_epigraph = 0;
  // Equality rows in order: steady state, terminal, regulation.
  Eigen::Index eq_steady = 0, eq_terminal = 0, eq_regulation = 0;

  bool regulation = false;
  VectorXd target;  // regulation setpoint used by feasible()

  LtiModel model;
  ConstraintSet cons;
  MpctConfig config;
  SteadyStateMap map;
};

struct ControlResult {
  QpStatus status = QpStatus::MaxIter;
  VectorXd u0;
  MatrixXd u_seq;  // N x m, row j = u(j)
  VectorXd x_a, u_a, y_a, theta;
  VectorXd aux;
  double value = 0.0;
  VectorXd z, nu, lam;
  VectorXd nu_regulation;  // multipliers of y_a = y_sp (regulation only)
  int iterations = 0;

  bool optimal() const { return status == QpStatus::Optimal; }
};

struct Prediction {
  MatrixXd A_bold;  // (N+1)n x n
  MatrixXd B_bold;  // (N+1)n x Nm
  MatrixXd B_N;     // n x Nm
};

Prediction build_prediction(const LtiModel& model, int N);

/// Condenses the tracking controller. Throws ConfigError (N < n_c with the equality
/// terminal, missing ingredients, bad weights) or DimensionMismatch.
CondensedQp condense(const LtiModel& model, const ConstraintSet& cons, const MpctConfig& config);

/// Regulation to y_sp: same cost without the offset term and with y_a = y_sp as equality
/// rows. Throws NoEquilibrium if y_sp is not the output of any equilibrium.
CondensedQp build_regulation(const LtiModel& model, const ConstraintSet& cons,
                             const MpctConfig& config, const VectorXd& y_sp);

/// QP data at the given parameters.
QpProblem instantiate(const CondensedQp& cq, const VectorXd& x, const VectorXd& y_sp);

ControlResult solve_mpct(const CondensedQp& cq, const VectorXd& x, const VectorXd& y_sp,
                         const QpSettings& settings = {});

/// Phase-1 verdict on the setpoint-independent constraints at state x (for regulation
/// problems the stored target is used).
bool feasible(const CondensedQp& cq, const VectorXd& x);

/// z = u_e + L_x x + L_sp y_sp turns the linear term into a constant:
///   min 1/2 z'Hz + f0'z  s.t.  G z <= W_bar + W_x x + W_sp y_sp,  F z = S_bar + S_x x + S_sp y_sp.
struct ParameterTransform {
  MatrixXd L_x, L_sp;
  MatrixXd H;
  VectorXd f0;
  MatrixXd G, F;
  VectorXd W_bar, S_bar;
  MatrixXd W_x, W_sp, S_x, S_sp;
};

/// Uses the pseudo-inverse of H; throws SingularH if f_x or f_sp leave range(H).
ParameterTransform parameter_transform(const CondensedQp& cq);

/// The z-form QP at (x, y_sp); its value equals the original optimal value.
QpProblem transformed_problem(const ParameterTransform& t, const CondensedQp& cq, const VectorXd& x,
                              const VectorXd& y_sp);

}  // namespace mpct
