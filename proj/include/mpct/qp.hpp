#pragma once

#include <string>

#include "mpct/linalg.hpp"

namespace mpct {

/// Canonical convex QP
///
///   min  1/2 z'Hz + f'z + r   s.t.  G z <= W,  F z = S.
///
/// Empty G/F (zero rows) mean "no such constraints"; their column count must still
/// match the decision dimension.
struct QpProblem {
  MatrixXd H;
  VectorXd f;
  double r = 0.0;
  MatrixXd G;
  VectorXd W;
  MatrixXd F;
  VectorXd S;

  Eigen::Index num_vars() const { return f.size(); }
  Eigen::Index num_ineq() const { return W.size(); }
  Eigen::Index num_eq() const { return S.size(); }

  /// Builds an unconstrained problem of dimension v with correctly shaped empty blocks.
  static QpProblem unconstrained(const MatrixXd& H, const VectorXd& f, double r = 0.0);
};

enum class QpStatus { Optimal, Infeasible, Unbounded, MaxIter };

std::string to_string(QpStatus status);

/// Multipliers follow H z + f + F'nu + G'lam = 0 with lam >= 0.
struct QpSolution {
  QpStatus status = QpStatus::MaxIter;
  VectorXd z;
  double value = 0.0;
  VectorXd nu;
  VectorXd lam;
  int iterations = 0;
  bool polished = false;

  // Infeasible: y >= 0 (rows of G), mu (rows of F) with G'y + F'mu = 0 and W'y + S'mu < 0.
  VectorXd certificate_y;
  VectorXd certificate_mu;
  double certificate_residual = 0.0;
  // Unbounded: direction d with Hd = 0, Gd <= 0, Fd = 0, f'd < 0.
  VectorXd ray;

  std::string diagnostics;

  bool optimal() const { return status == QpStatus::Optimal; }
};

struct QpSettings {
  int max_iter = 100;
  double proximal_reg = 1e-9;  // added to H inside the Newton matrix only
  double dual_reg = 1e-11;     // quasi-definite shift on the equality block
  double tol_feas = 1e-10;     // IPM stopping, scaled by (1 + data norm)
  double tol_gap = 1e-11;
  double tol_stall = 1e-7;     // best iterate accepted on stall, subject to the final KKT check
  bool polish = true;
  bool classify_failures = true;  // run phase-1 / ray LPs when the IPM fails
};

/// Residuals of a candidate primal-dual point, in the norms used for acceptance.
struct KktResiduals {
  double stationarity = 0.0;
  double primal_ineq = 0.0;
  double primal_eq = 0.0;
  double complementarity = 0.0;
};

KktResiduals kkt_residuals(const QpProblem& prob, const VectorXd& z, const VectorXd& nu,
                           const VectorXd& lam);

/// Dense primal-dual interior-point solver (Mehrotra predictor-corrector) with an
/// active-set polish. Holds scratch state only; not safe to share across threads.
class QpSolver {
 public:
  explicit QpSolver(QpSettings settings = {}) : settings_(settings) {}

  QpSolution solve(const QpProblem& prob);

  const QpSettings& settings() const { return settings_; }

 private:
  QpSolution interior_point(const QpProblem& prob);
  bool polish(const QpProblem& prob, QpSolution& sol);
  void classify_failure(const QpProblem& prob, QpSolution& sol);
  void finalize(const QpProblem& prob, QpSolution& sol);

  QpSettings settings_;
};

/// Validates shapes, symmetry and convexity; throws DimensionMismatch / NonConvex.
void validate(const QpProblem& prob);

QpSolution solve(const QpProblem& prob, const QpSettings& settings = {});

/// min f'z s.t. Gz <= W, Fz = S. Unbounded is reported as its own status.
QpSolution solve_lp(const VectorXd& f, const MatrixXd& G, const VectorXd& W,
                    const MatrixXd& F, const VectorXd& S, const QpSettings& settings = {});

/// Phase-1 verdict on {z : Gz <= W, Fz = S}; returns a solution whose status is
/// Optimal (feasible, z is a feasible point) or Infeasible (with certificate).
QpSolution find_feasible_point(const MatrixXd& G, const VectorXd& W, const MatrixXd& F,
                               const VectorXd& S, const QpSettings& settings = {});

/// JSON dump for external cross-checking.
std::string to_json(const QpProblem& prob);

}  // namespace mpct
