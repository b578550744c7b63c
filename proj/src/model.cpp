#include "mpct/model.hpp"

#include <complex>

#include <Eigen/Eigenvalues>

#include "mpct/error.hpp"
#include "mpct/qp.hpp"

namespace mpct {

namespace {

std::string shape(const MatrixXd& M) {
  return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

int complex_rank(const Eigen::MatrixXcd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) r += sv(i) > kRankTol * sv(0);
  return r;
}

}  // namespace

void LtiModel::validate() const {
  const Eigen::Index nn = A.rows();
  if (nn < 1 || A.cols() != nn) throw Error(ErrorCode::DimensionMismatch, "A must be square, got " + shape(A));
  if (B.rows() != nn || B.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "B must be n x m, got " + shape(B));
  if (C.cols() != nn || C.rows() < 1) throw Error(ErrorCode::DimensionMismatch, "C must be p x n, got " + shape(C));
  if (D.rows() != C.rows() || D.cols() != B.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "D must be p x m, got " + shape(D));
  }
}

ConstraintSet ConstraintSet::box(const VectorXd& x_bound, const VectorXd& u_bound, double lambda) {
  VectorXd b(x_bound.size() + u_bound.size());
  b << x_bound, u_bound;
  return ConstraintSet{HPolytope::symmetric_box(b), lambda};
}

void ConstraintSet::validate(const LtiModel& model) const {
  const Eigen::Index n = model.n(), m = model.m();
  if (Z.dim() != n + m) {
    throw Error(ErrorCode::ConfigError, "constraint set has dimension " + std::to_string(Z.dim()) +
                                            ", expected n+m = " + std::to_string(n + m));
  }
  if (!(lambda > 0.0 && lambda <= 1.0)) throw Error(ErrorCode::ConfigError, "lambda must lie in (0, 1]");
  if (is_empty(Z)) throw Error(ErrorCode::EmptySet, "constraint set is empty");
  for (Eigen::Index i = 0; i < Z.num_rows(); ++i) {
    if (Z.G().row(i).norm() > 0 && Z.w()(i) <= 0.0) {
      throw Error(ErrorCode::ConfigError, "origin is not in the interior of the constraint set (row " +
                                              std::to_string(i) + ")");
    }
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    for (double sign : {1.0, -1.0}) {
      VectorXd f = VectorXd::Zero(n + m);
      f(n + j) = -sign;
      const QpSolution s = solve_lp(f, Z.G(), Z.w(), MatrixXd(0, n + m), VectorXd(0));
      if (s.status != QpStatus::Optimal) {
        throw Error(ErrorCode::ConfigError, "input " + std::to_string(j) + " is unbounded over the constraint set");
      }
    }
  }
}

bool check_stabilizability(const LtiModel& model) {
  model.validate();
  const Eigen::Index n = model.n();
  Eigen::EigenSolver<MatrixXd> es(model.A, false);
  const Eigen::MatrixXcd Ac = model.A.cast<std::complex<double>>();
  const Eigen::MatrixXcd Bc = model.B.cast<std::complex<double>>();
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> ev = es.eigenvalues()(i);
    if (std::abs(ev) < 1.0 - 1e-12) continue;
    Eigen::MatrixXcd pbh(n, n + model.m());
    pbh << ev * Eigen::MatrixXcd::Identity(n, n) - Ac, Bc;
    if (complex_rank(pbh) < n) return false;
  }
  return true;
}

bool check_output_rank(const LtiModel& model) {
  model.validate();
  const Eigen::Index n = model.n(), m = model.m(), p = model.p();
  if (p > m) return false;
  MatrixXd E(n + p, n + m);
  E << model.A - MatrixXd::Identity(n, n), model.B, model.C, model.D;
  return numerical_rank(E) == n + p;
}

int controllability_index(const LtiModel& model) {
  model.validate();
  const Eigen::Index n = model.n(), m = model.m();
  MatrixXd ctrb(n, 0);
  MatrixXd blk = model.B;
  for (Eigen::Index nc = 1; nc <= n; ++nc) {
    MatrixXd next(n, nc * m);
    next << ctrb, blk;
    ctrb = next;
    if (numerical_rank(ctrb) == n) return static_cast<int>(nc);
    blk = model.A * blk;
  }
  throw Error(ErrorCode::NotControllable, "controllability matrix has rank " +
                                              std::to_string(numerical_rank(ctrb)) + " < n");
}

SteadyStateMap steady_state_basis(const LtiModel& model) {
  model.validate();
  const Eigen::Index n = model.n(), m = model.m();
  MatrixXd E(n, n + m);
  E << model.A - MatrixXd::Identity(n, n), model.B;
  const MatrixXd Mt = null_space(E);
  if (Mt.cols() != m) {
    throw Error(ErrorCode::DegenerateNullSpace, "equilibrium subspace has dimension " +
                                                    std::to_string(Mt.cols()) + ", expected m = " +
                                                    std::to_string(m));
  }
  SteadyStateMap map;
  map.M_theta = Mt;
  map.M_theta_x = Mt.topRows(n);
  map.M_theta_u = Mt.bottomRows(m);
  MatrixXd CD(model.p(), n + m);
  CD << model.C, model.D;
  map.N_theta = CD * Mt;
  return map;
}

ReachableSets reachable_steady_sets(const LtiModel& model, const ConstraintSet& cons,
                                    const SteadyStateMap& map) {
  const Eigen::Index n = model.n(), m = model.m();
  if (cons.Z.dim() != n + m) throw Error(ErrorCode::DimensionMismatch, "constraint set dimension");
  const HPolytope lz = cons.shrunk();
  ReachableSets sets;
  sets.theta_set = remove_redundant(HPolytope(lz.G() * map.M_theta, lz.w()));

  MatrixXd E(n, n + m);
  E << model.A - MatrixXd::Identity(n, n), model.B;
  MatrixXd Ge(2 * n, n + m);
  Ge << E, -E;
  sets.Z_sp = intersect(lz, HPolytope(Ge, VectorXd::Zero(2 * n)));

  if (n <= 3) sets.X_sp = affine_image(sets.theta_set, map.M_theta_x);
  if (m <= 3) sets.U_sp = affine_image(sets.theta_set, map.M_theta_u);
  if (model.p() <= 3) sets.Y_sp = affine_image(sets.theta_set, map.N_theta);
  return sets;
}

OffsetCostSpec OffsetCostSpec::quadratic(const MatrixXd& T) {
  OffsetCostSpec s;
  s.kind = Kind::Quadratic;
  s.T = T;
  return s;
}

OffsetCostSpec OffsetCostSpec::one_norm(double gamma) {
  OffsetCostSpec s;
  s.kind = Kind::OneNorm;
  s.gamma = gamma;
  return s;
}

OffsetCostSpec OffsetCostSpec::inf_norm(double gamma) {
  OffsetCostSpec s;
  s.kind = Kind::InfNorm;
  s.gamma = gamma;
  return s;
}

double OffsetCostSpec::evaluate(const VectorXd& v) const {
  switch (kind) {
    case Kind::Quadratic: return v.dot(T * v);
    case Kind::OneNorm: return gamma * v.lpNorm<1>();
    case Kind::InfNorm: return v.size() == 0 ? 0.0 : gamma * v.lpNorm<Eigen::Infinity>();
  }
  return 0.0;
}

void OffsetCostSpec::validate(Eigen::Index p) const {
  if (kind == Kind::Quadratic) {
    if (T.rows() != p || T.cols() != p) throw Error(ErrorCode::ConfigError, "offset weight T must be p x p");
    if (!is_symmetric(T, 1e-10)) throw Error(ErrorCode::ConfigError, "offset weight T must be symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(T, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0) {
      throw Error(ErrorCode::ConfigError, "offset weight T must be positive definite");
    }
  } else if (!(gamma > 0.0)) {
    throw Error(ErrorCode::ConfigError, "offset gamma must be positive");
  }
}

Equilibrium equilibrium_for_setpoint(const LtiModel& model, const SteadyStateMap& map,
                                     const ReachableSets& sets, const VectorXd& y_sp,
                                     const OffsetCostSpec& offset) {
  const Eigen::Index m = model.m(), p = model.p();
  if (y_sp.size() != p) throw Error(ErrorCode::DimensionMismatch, "setpoint must have p entries");
  offset.validate(p);
  const MatrixXd& Nt = map.N_theta;
  const HPolytope& Th = sets.theta_set;
  if (is_empty(Th)) throw Error(ErrorCode::EmptyReachableSet, "no admissible equilibrium");

  QpProblem qp;
  Eigen::Index aux = 0;
  switch (offset.kind) {
    case OffsetCostSpec::Kind::Quadratic: {
      qp = QpProblem::unconstrained(2.0 * Nt.transpose() * offset.T * Nt,
                                    -2.0 * Nt.transpose() * offset.T * y_sp, y_sp.dot(offset.T * y_sp));
      qp.H = 0.5 * (qp.H + qp.H.transpose());
      qp.G = Th.G();
      qp.W = Th.w();
      break;
    }
    case OffsetCostSpec::Kind::OneNorm:
    case OffsetCostSpec::Kind::InfNorm: {
      aux = offset.kind == OffsetCostSpec::Kind::OneNorm ? p : 1;
      const Eigen::Index v = m + aux;
      VectorXd f = VectorXd::Zero(v);
      f.tail(aux).setConstant(offset.gamma);
      qp = QpProblem::unconstrained(MatrixXd::Zero(v, v), f);
      const Eigen::Index k = Th.num_rows() + 2 * p;
      qp.G = MatrixXd::Zero(k, v);
      qp.W = VectorXd::Zero(k);
      qp.G.topLeftCorner(Th.num_rows(), m) = Th.G();
      qp.W.head(Th.num_rows()) = Th.w();
      // +-(N theta - y_sp) <= s
      const MatrixXd S = aux == 1 ? MatrixXd(MatrixXd::Ones(p, 1)) : MatrixXd(MatrixXd::Identity(p, p));
      qp.G.block(Th.num_rows(), 0, p, m) = Nt;
      qp.G.block(Th.num_rows(), m, p, aux) = -S;
      qp.W.segment(Th.num_rows(), p) = y_sp;
      qp.G.block(Th.num_rows() + p, 0, p, m) = -Nt;
      qp.G.block(Th.num_rows() + p, m, p, aux) = -S;
      qp.W.segment(Th.num_rows() + p, p) = -y_sp;
      break;
    }
  }
  const QpSolution s = solve(qp);
  if (s.status == QpStatus::Infeasible) throw Error(ErrorCode::EmptyReachableSet, "no admissible equilibrium");
  if (s.status != QpStatus::Optimal) {
    throw Error(ErrorCode::SolverError, "equilibrium_for_setpoint: " + to_string(s.status));
  }
  Equilibrium eq;
  eq.theta = s.z.head(m);
  const VectorXd xu = map.M_theta * eq.theta;
  eq.x_s = xu.head(model.n());
  eq.u_s = xu.tail(m);
  eq.y_t = Nt * eq.theta;
  eq.offset = offset.evaluate(eq.y_t - y_sp);
  return eq;
}

}  // namespace mpct
