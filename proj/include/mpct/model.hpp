#pragma once

#include <optional>

#include "mpct/linalg.hpp"
#include "mpct/polytope.hpp"

namespace mpct {

/// x+ = A x + B u,  y = C x + D u.
struct LtiModel {
  MatrixXd A, B, C, D;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return C.rows(); }

  /// Throws DimensionMismatch unless A is n x n, B n x m, C p x n, D p x m with n, m, p >= 1.
  void validate() const;
};

/// Joint state-input constraints (x, u) in Z and the steady-state shrink factor lambda.
struct ConstraintSet {
  HPolytope Z;
  double lambda = 0.99;

  /// Box shorthand |x_i| <= x_bound_i, |u_j| <= u_bound_j.
  static ConstraintSet box(const VectorXd& x_bound, const VectorXd& u_bound, double lambda = 0.99);

  /// Requires dim(Z) = n + m, lambda in (0, 1], origin in the interior of Z and every
  /// input coordinate bounded over Z. Throws ConfigError otherwise.
  void validate(const LtiModel& model) const;

  /// Z scaled by lambda.
  HPolytope shrunk() const { return Z.scaled(lambda); }
};

/// PBH test over the eigenvalues of A with modulus >= 1.
bool check_stabilizability(const LtiModel& model);

/// rank [[A-I, B], [C, D]] == n + p.
bool check_output_rank(const LtiModel& model);

/// Smallest n_c with rank [B, AB, ..., A^{n_c-1} B] = n. Throws NotControllable.
int controllability_index(const LtiModel& model);

/// (x_s, u_s) = M_theta * theta parameterizes every equilibrium; y_s = N_theta * theta.
struct SteadyStateMap {
  MatrixXd M_theta;    // (n+m) x m, orthonormal columns
  MatrixXd N_theta;    // p x m
  MatrixXd M_theta_x;  // n x m
  MatrixXd M_theta_u;  // m x m
};

/// Throws DegenerateNullSpace unless ker [(A-I) B] has dimension m.
SteadyStateMap steady_state_basis(const LtiModel& model);

struct ReachableSets {
  HPolytope theta_set;  // {theta : M_theta theta in lambda Z}
  HPolytope Z_sp;       // lambda Z intersected with the equilibrium subspace
  // Explicit images; absent when the image dimension exceeds 3.
  std::optional<HPolytope> X_sp, U_sp, Y_sp;
};

ReachableSets reachable_steady_sets(const LtiModel& model, const ConstraintSet& cons,
                                    const SteadyStateMap& map);

/// Offset cost V_O(y_a - y_sp).
struct OffsetCostSpec {
  enum class Kind { Quadratic, OneNorm, InfNorm };
  Kind kind = Kind::Quadratic;
  MatrixXd T;          // Quadratic: ||v||_T^2
  double gamma = 1.0;  // norms: gamma * ||v||

  static OffsetCostSpec quadratic(const MatrixXd& T);
  static OffsetCostSpec one_norm(double gamma);
  static OffsetCostSpec inf_norm(double gamma);

  double evaluate(const VectorXd& v) const;
  /// Throws ConfigError for gamma <= 0 or T not symmetric positive definite of size p.
  void validate(Eigen::Index p) const;
};

struct Equilibrium {
  VectorXd theta, x_s, u_s, y_t;
  double offset = 0.0;  // V_O(y_t - y_sp)
};

/// Admissible equilibrium whose output minimizes the offset cost to y_sp.
/// Throws EmptyReachableSet if theta_set is empty.
Equilibrium equilibrium_for_setpoint(const LtiModel& model, const SteadyStateMap& map,
                                     const ReachableSets& sets, const VectorXd& y_sp,
                                     const OffsetCostSpec& offset);

}  // namespace mpct
