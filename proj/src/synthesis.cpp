#include "mpct/synthesis.hpp"

#include "mpct/error.hpp"

namespace mpct {

namespace {

MatrixXd sym(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

MatrixXd riccati_step(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                      const MatrixXd& P) {
  const MatrixXd BtPA = B.transpose() * P * A;
  const MatrixXd S = R + B.transpose() * P * B;
  return sym(Q + A.transpose() * P * A - BtPA.transpose() * S.ldlt().solve(BtPA));
}

void check_lqr_shapes(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R) {
  const Eigen::Index n = A.rows(), m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m ||
      R.cols() != m) {
    throw Error(ErrorCode::DimensionMismatch, "dlqr: inconsistent A, B, Q, R shapes");
  }
}

}  // namespace

LqrResult dlqr(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
               int max_iter) {
  check_lqr_shapes(A, B, Q, R);
  LqrResult res;
  MatrixXd P = sym(Q);
  for (int it = 1; it <= max_iter; ++it) {
    const MatrixXd Pn = riccati_step(A, B, Q, R, P);
    const double change = (Pn - P).cwiseAbs().maxCoeff() / std::max(1.0, Pn.cwiseAbs().maxCoeff());
    P = Pn;
    if (change <= 1e-12) {
      res.iterations = it;
      res.P = P;
      res.K = -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
      return res;
    }
  }
  throw Error(ErrorCode::NoConvergence,
              "Riccati iteration did not converge in " + std::to_string(max_iter) + " steps");
}

double dare_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R,
                     const MatrixXd& P) {
  return (riccati_step(A, B, Q, R, P) - P).cwiseAbs().maxCoeff();
}

MatrixXd dlyap_for_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& K, const MatrixXd& Q,
                        const MatrixXd& R) {
  check_lqr_shapes(A, B, Q, R);
  const Eigen::Index n = A.rows();
  if (K.rows() != B.cols() || K.cols() != n) throw Error(ErrorCode::DimensionMismatch, "K must be m x n");
  const MatrixXd Acl = A + B * K;
  const double rho = spectral_radius(Acl);
  if (rho >= 1.0 - 1e-9) {
    throw Error(ErrorCode::Unstable, "spectral radius of A+BK is " + std::to_string(rho));
  }
  const MatrixXd Qbar = Q + K.transpose() * R * K;
  // vec(Acl' P Acl) = kron(Acl', Acl') vec(P) in column-major order.
  const MatrixXd At = Acl.transpose();
  MatrixXd kron(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = At(i, j) * At;
  const MatrixXd L = MatrixXd::Identity(n * n, n * n) - kron;
  const VectorXd q = Eigen::Map<const VectorXd>(Qbar.data(), n * n);
  const VectorXd p = L.partialPivLu().solve(q);
  return sym(Eigen::Map<const MatrixXd>(p.data(), n, n));
}

TrackingLift tracking_lift(const LtiModel& model, const ConstraintSet& cons, const SteadyStateMap& map,
                           const MatrixXd& K) {
  const Eigen::Index n = model.n(), m = model.m();
  if (K.rows() != m || K.cols() != n) throw Error(ErrorCode::DimensionMismatch, "K must be m x n");
  TrackingLift lift;
  MatrixXd KI(m, n + m);
  KI << -K, MatrixXd::Identity(m, m);
  lift.L = KI * map.M_theta;
  lift.Abar = MatrixXd::Zero(n + m, n + m);
  lift.Abar.topLeftCorner(n, n) = model.A + model.B * K;
  lift.Abar.topRightCorner(n, m) = model.B * lift.L;
  lift.Abar.bottomRightCorner(m, m).setIdentity();

  // (x, Kx + L theta) in Z  and  M_theta theta in lambda Z.
  MatrixXd T = MatrixXd::Zero(n + m, n + m);
  T.topLeftCorner(n, n).setIdentity();
  T.bottomLeftCorner(m, n) = K;
  T.bottomRightCorner(m, m) = lift.L;
  const HPolytope& Z = cons.Z;
  MatrixXd G(2 * Z.num_rows(), n + m);
  VectorXd w(2 * Z.num_rows());
  G.topRows(Z.num_rows()) = Z.G() * T;
  G.bottomRows(Z.num_rows()) << MatrixXd::Zero(Z.num_rows(), n), Z.G() * map.M_theta;
  w << Z.w(), cons.lambda * Z.w();
  lift.Xbar = remove_redundant(HPolytope(G, w));
  return lift;
}

MaisResult build_invariant_set_for_tracking(const LtiModel& model, const ConstraintSet& cons,
                                            const SteadyStateMap& map, const MatrixXd& K,
                                            int max_iter) {
  const TrackingLift lift = tracking_lift(model, cons, map, K);
  return mais(lift.Abar, lift.Xbar, max_iter);
}

TerminalIngredients compute_terminal_ingredients(const LtiModel& model, const ConstraintSet& cons,
                                                 const SteadyStateMap& map, const MatrixXd& Q,
                                                 const MatrixXd& R, int max_iter) {
  const LqrResult lqr = dlqr(model.A, model.B, Q, R);
  TerminalIngredients ti;
  ti.K = lqr.K;
  ti.P = lqr.P;
  const MaisResult m = build_invariant_set_for_tracking(model, cons, map, lqr.K, max_iter);
  ti.Omega_a = m.set;
  ti.determinedness = m.determinedness;
  if (model.n() <= 3) {
    std::vector<int> keep;
    for (int i = 0; i < model.n(); ++i) keep.push_back(i);
    ti.Omega_x = fm_project(ti.Omega_a, keep);
  }
  return ti;
}

}  // namespace mpct
