#pragma once

#include <optional>

#include "mpct/model.hpp"
#include "mpct/polytope.hpp"

namespace mpct {

struct LqrResult {
  MatrixXd K;  // u = K x
  MatrixXd P;
  int iterations = 0;
};

/// Discrete algebraic Riccati equation by fixed-point iteration from P = Q, stopping on
/// a relative change below 1e-12. K = -(R + B'PB)^{-1} B'PA.
/// Throws NoConvergence after `max_iter` iterations.
LqrResult dlqr(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
               int max_iter = 10000);

/// Infinity-norm residual of the Riccati equation at P.
double dare_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                     const MatrixXd& P);

/// Solves (A+BK)'P(A+BK) - P = -(Q + K'RK). Throws Unstable if rho(A+BK) >= 1 - 1e-9.
MatrixXd dlyap_for_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& K, const MatrixXd& Q,
                        const MatrixXd& R);

/// Closed-loop dynamics and constraint set of the terminal law u = K x + L theta in
/// (x, theta) coordinates, L = [-K I] M_theta.
struct TrackingLift {
  MatrixXd L;     // m x m
  MatrixXd Abar;  // (n+m) x (n+m)
  HPolytope Xbar;
};

TrackingLift tracking_lift(const LtiModel& model, const ConstraintSet& cons, const SteadyStateMap& map,
                           const MatrixXd& K);

struct TerminalIngredients {
  MatrixXd K;
  MatrixXd P;
  HPolytope Omega_a;  // in (x, theta)
  std::optional<HPolytope> Omega_x;
  int determinedness = 0;
};

/// Maximal admissible invariant set for tracking in (x, theta).
/// Propagates MaxIterationsExceeded from the recursion.
MaisResult build_invariant_set_for_tracking(const LtiModel& model, const ConstraintSet& cons,
                                            const SteadyStateMap& map, const MatrixXd& K,
                                            int max_iter = 200);

/// K and P from dlqr(A, B, Q, R), then the invariant set and its x-projection (n <= 3).
TerminalIngredients compute_terminal_ingredients(const LtiModel& model, const ConstraintSet& cons,
                                                 const SteadyStateMap& map, const MatrixXd& Q,
                                                 const MatrixXd& R, int max_iter = 200);

}  // namespace mpct
