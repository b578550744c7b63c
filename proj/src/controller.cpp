#include "mpct/controller.hpp"

#include <Eigen/Eigenvalues>

#include "mpct/error.hpp"

namespace mpct {

namespace {

MatrixXd sym(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

void check_weights(const LtiModel& model, const MpctConfig& config) {
  const Eigen::Index n = model.n(), m = model.m();
  if (config.N < 1) throw Error(ErrorCode::ConfigError, "horizon N must be at least 1");
  if (config.Q.rows() != n || config.Q.cols() != n) throw Error(ErrorCode::ConfigError, "Q must be n x n");
  if (config.R.rows() != m || config.R.cols() != m) throw Error(ErrorCode::ConfigError, "R must be m x m");
  if (!is_symmetric(config.Q, 1e-10) || !is_symmetric(config.R, 1e-10)) {
    throw Error(ErrorCode::ConfigError, "Q and R must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eq(config.Q, Eigen::EigenvaluesOnly);
  if (eq.eigenvalues().minCoeff() < -1e-12) throw Error(ErrorCode::ConfigError, "Q must be positive semidefinite");
  Eigen::SelfAdjointEigenSolver<MatrixXd> er(config.R, Eigen::EigenvaluesOnly);
  if (er.eigenvalues().minCoeff() <= 0.0) throw Error(ErrorCode::ConfigError, "R must be positive definite");
}

// Row-stacks matrices with a common column count.
MatrixXd vstack(const std::vector<MatrixXd>& blocks, Eigen::Index cols) {
  Eigen::Index rows = 0;
  for (const auto& b : blocks) rows += b.rows();
  MatrixXd out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    out.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return out;
}

VectorXd vstack(const std::vector<VectorXd>& blocks) {
  Eigen::Index rows = 0;
  for (const auto& b : blocks) rows += b.size();
  VectorXd out(rows);
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    out.segment(r, b.size()) = b;
    r += b.size();
  }
  return out;
}

void check_setpoint_reachable(const SteadyStateMap& map, const VectorXd& y_sp) {
  const VectorXd th = map.N_theta.completeOrthogonalDecomposition().solve(y_sp);
  const double res = (map.N_theta * th - y_sp).cwiseAbs().maxCoeff();
  if (res > 1e-8) {
    throw Error(ErrorCode::NoEquilibrium,
                "setpoint is not the output of any equilibrium (residual " + std::to_string(res) + ")");
  }
}

CondensedQp condense_impl(const LtiModel& model, const ConstraintSet& cons, const MpctConfig& config,
                          bool regulation) {
  model.validate();
  check_weights(model, config);
  const Eigen::Index n = model.n(), m = model.m(), p = model.p();
  const int N = config.N;
  if (cons.Z.dim() != n + m) throw Error(ErrorCode::DimensionMismatch, "constraint set must live in (x, u)");
  if (!regulation) config.offset.validate(p);

  if (config.terminal == TerminalKind::Equality) {
    const int nc = controllability_index(model);
    if (N < nc) {
      throw Error(ErrorCode::ConfigError, "equality terminal needs N >= n_c = " + std::to_string(nc));
    }
  } else {
    if (!config.ingredients) throw Error(ErrorCode::ConfigError, "inequality terminal needs terminal ingredients");
    const auto& ti = *config.ingredients;
    if (ti.P.rows() != n || ti.P.cols() != n || ti.Omega_a.dim() != n + m) {
      throw Error(ErrorCode::ConfigError, "terminal ingredients have inconsistent dimensions");
    }
  }

  CondensedQp cq;
  cq.model = model;
  cq.cons = cons;
  cq.config = config;
  cq.regulation = regulation;
  cq.map = steady_state_basis(model);
  const SteadyStateMap& map = cq.map;

  const Prediction pred = build_prediction(model, N);
  cq.A_bold = pred.A_bold;
  cq.B_bold = pred.B_bold;
  cq.B_N = pred.B_N;

  DecisionLayout& L = cq.layout;
  L.theta = config.use_theta;
  L.num_u = N * m;
  L.eq_offset = L.num_u;
  L.eq_size = L.theta ? m : n + m;
  L.aux_offset = L.eq_offset + L.eq_size;
  if (!regulation && config.offset.kind == OffsetCostSpec::Kind::OneNorm) L.aux_size = p;
  if (!regulation && config.offset.kind == OffsetCostSpec::Kind::InfNorm) L.aux_size = 1;
  L.total = L.aux_offset + L.aux_size;
  const Eigen::Index v = L.total;

  MatrixXd Su = MatrixXd::Zero(L.num_u, v);
  Su.leftCols(L.num_u).setIdentity();
  cq.E_xu = MatrixXd::Zero(n + m, v);
  cq.E_theta = MatrixXd::Zero(m, v);
  if (L.theta) {
    cq.E_xu.middleCols(L.eq_offset, m) = map.M_theta;
    cq.E_theta.middleCols(L.eq_offset, m).setIdentity();
  } else {
    cq.E_xu.middleCols(L.eq_offset, n + m).setIdentity();
    cq.E_theta = map.M_theta.transpose() * cq.E_xu;
  }
  const MatrixXd Ex = cq.E_xu.topRows(n);
  const MatrixXd Eu = cq.E_xu.bottomRows(m);
  MatrixXd CD(p, n + m);
  CD << model.C, model.D;

  cq.B_e = cq.B_bold * Su - repeat_rows(MatrixXd::Identity(n, n), N + 1) * Ex;
  cq.I_e = Su - repeat_rows(MatrixXd::Identity(m, m), N) * Eu;
  cq.F_e = CD * cq.E_xu;

  const MatrixXd P_term = config.terminal == TerminalKind::Inequality ? config.ingredients->P
                                                                      : MatrixXd::Zero(n, n);
  cq.Q_bold = MatrixXd::Zero((N + 1) * n, (N + 1) * n);
  cq.Q_bold.topLeftCorner(N * n, N * n) = repeat_diag(config.Q, N);
  cq.Q_bold.bottomRightCorner(n, n) = P_term;
  cq.R_bold = repeat_diag(config.R, N);

  // Cost.
  MatrixXd H = cq.B_e.transpose() * cq.Q_bold * cq.B_e + cq.I_e.transpose() * cq.R_bold * cq.I_e;
  cq.f_x = 2.0 * cq.B_e.transpose() * cq.Q_bold * cq.A_bold;
  cq.r_x = sym(cq.A_bold.transpose() * cq.Q_bold * cq.A_bold);
  cq.f_sp = MatrixXd::Zero(v, p);
  cq.r_sp = MatrixXd::Zero(p, p);
  VectorXd f0 = VectorXd::Zero(v);
  if (!regulation) {
    switch (config.offset.kind) {
      case OffsetCostSpec::Kind::Quadratic:
        H += cq.F_e.transpose() * config.offset.T * cq.F_e;
        cq.f_sp = -2.0 * cq.F_e.transpose() * config.offset.T;
        cq.r_sp = config.offset.T;
        break;
      case OffsetCostSpec::Kind::OneNorm:
      case OffsetCostSpec::Kind::InfNorm:
        f0.segment(L.aux_offset, L.aux_size).setConstant(config.offset.gamma);
        break;
    }
  }
  cq.base = QpProblem::unconstrained(sym(2.0 * H), f0, 0.0);

  // Inequalities.
  const HPolytope& Z = cons.Z;
  const Eigen::Index kz = Z.num_rows();
  const MatrixXd Gzx = Z.G().leftCols(n), Gzu = Z.G().rightCols(m);
  std::vector<MatrixXd> G_blocks, Wx_blocks, Wsp_blocks;
  std::vector<VectorXd> W_blocks;

  {
    const MatrixXd GX = repeat_diag(Gzx, N);
    const MatrixXd GU = repeat_diag(Gzu, N);
    const MatrixXd Bpath = cq.B_bold.topRows(N * n);
    G_blocks.push_back((GX * Bpath + GU) * Su);
    W_blocks.push_back(repeat_rows(Z.w(), N).col(0));
    Wx_blocks.push_back(-GX * cq.A_bold.topRows(N * n));
    Wsp_blocks.push_back(MatrixXd::Zero(N * kz, p));
    cq.rows_path = N * kz;
  }
  if (config.terminal == TerminalKind::Equality) {
    G_blocks.push_back(Z.G() * cq.E_xu);
    W_blocks.push_back(cons.lambda * Z.w());
    Wx_blocks.push_back(MatrixXd::Zero(kz, n));
    Wsp_blocks.push_back(MatrixXd::Zero(kz, p));
    cq.rows_equilibrium = kz;
  } else {
    const HPolytope& Om = config.ingredients->Omega_a;
    const MatrixXd Gox = Om.G().leftCols(n), Got = Om.G().rightCols(m);
    const MatrixXd AN = cq.A_bold.bottomRows(n);
    G_blocks.push_back(Gox * cq.B_N * Su + Got * cq.E_theta);
    W_blocks.push_back(Om.w());
    Wx_blocks.push_back(-Gox * AN);
    Wsp_blocks.push_back(MatrixXd::Zero(Om.num_rows(), p));
    cq.rows_terminal = Om.num_rows();
  }
  if (L.aux_size > 0) {
    // +-(y_a - y_sp) <= s  (one scalar per output, or a single bound for the inf-norm).
    const MatrixXd Saux = L.aux_size == 1 ? MatrixXd(MatrixXd::Ones(p, 1)) : MatrixXd(MatrixXd::Identity(p, p));
    MatrixXd Aux = MatrixXd::Zero(p, v);
    Aux.middleCols(L.aux_offset, L.aux_size) = Saux;
    MatrixXd Ge(2 * p, v);
    Ge << cq.F_e - Aux, -cq.F_e - Aux;
    MatrixXd Wsp(2 * p, p);
    Wsp << MatrixXd::Identity(p, p), -MatrixXd::Identity(p, p);
    if (L.aux_size == 1) {
      MatrixXd nonneg = MatrixXd::Zero(1, v);
      nonneg(0, L.aux_offset) = -1.0;
      Ge.conservativeResize(2 * p + 1, v);
      Ge.row(2 * p) = nonneg;
      Wsp.conservativeResize(2 * p + 1, p);
      Wsp.row(2 * p).setZero();
    }
    G_blocks.push_back(Ge);
    W_blocks.push_back(VectorXd::Zero(Ge.rows()));
    Wx_blocks.push_back(MatrixXd::Zero(Ge.rows(), n));
    Wsp_blocks.push_back(Wsp);
    cq.rows_epigraph = Ge.rows();
  }
  cq.base.G = vstack(G_blocks, v);
  cq.base.W = vstack(W_blocks);
  cq.W_x = vstack(Wx_blocks, n);
  cq.W_sp = vstack(Wsp_blocks, p);

  // Equalities.
  std::vector<MatrixXd> F_blocks, Sx_blocks, Ssp_blocks;
  if (!L.theta) {
    MatrixXd E(n, n + m);
    E << model.A - MatrixXd::Identity(n, n), model.B;
    F_blocks.push_back(E * cq.E_xu);
    Sx_blocks.push_back(MatrixXd::Zero(n, n));
    Ssp_blocks.push_back(MatrixXd::Zero(n, p));
    cq.eq_steady = n;
  }
  if (config.terminal == TerminalKind::Equality) {
    F_blocks.push_back(cq.B_N * Su - Ex);
    Sx_blocks.push_back(-cq.A_bold.bottomRows(n));
    Ssp_blocks.push_back(MatrixXd::Zero(n, p));
    cq.eq_terminal = n;
  }
  if (regulation) {
    F_blocks.push_back(cq.F_e);
    Sx_blocks.push_back(MatrixXd::Zero(p, n));
    Ssp_blocks.push_back(MatrixXd::Identity(p, p));
    cq.eq_regulation = p;
  }
  cq.base.F = vstack(F_blocks, v);
  cq.base.S = VectorXd::Zero(cq.base.F.rows());
  cq.S_x = vstack(Sx_blocks, n);
  cq.S_sp = vstack(Ssp_blocks, p);
  return cq;
}

}  // namespace

std::string to_string(TerminalKind kind) {
  return kind == TerminalKind::Equality ? "equality" : "inequality";
}

Prediction build_prediction(const LtiModel& model, int N) {
  model.validate();
  if (N < 1) throw Error(ErrorCode::ConfigError, "horizon N must be at least 1");
  const Eigen::Index n = model.n(), m = model.m();
  Prediction pr;
  pr.A_bold = MatrixXd::Zero((N + 1) * n, n);
  pr.B_bold = MatrixXd::Zero((N + 1) * n, N * m);
  MatrixXd Ak = MatrixXd::Identity(n, n);
  for (int j = 0; j <= N; ++j) {
    pr.A_bold.middleRows(j * n, n) = Ak;
    Ak = model.A * Ak;
  }
  for (int j = 1; j <= N; ++j) {
    for (int i = 0; i < j; ++i) {
      pr.B_bold.block(j * n, i * m, n, m) = pr.A_bold.middleRows((j - 1 - i) * n, n) * model.B;
    }
  }
  pr.B_N = pr.B_bold.bottomRows(n);
  return pr;
}

CondensedQp condense(const LtiModel& model, const ConstraintSet& cons, const MpctConfig& config) {
  return condense_impl(model, cons, config, false);
}

CondensedQp build_regulation(const LtiModel& model, const ConstraintSet& cons,
                             const MpctConfig& config, const VectorXd& y_sp) {
  if (y_sp.size() != model.p()) throw Error(ErrorCode::DimensionMismatch, "setpoint must have p entries");
  CondensedQp cq = condense_impl(model, cons, config, true);
  check_setpoint_reachable(cq.map, y_sp);
  cq.target = y_sp;
  return cq;
}

QpProblem instantiate(const CondensedQp& cq, const VectorXd& x, const VectorXd& y_sp) {
  if (x.size() != cq.model.n()) throw Error(ErrorCode::DimensionMismatch, "state must have n entries");
  if (y_sp.size() != cq.model.p()) throw Error(ErrorCode::DimensionMismatch, "setpoint must have p entries");
  QpProblem q = cq.base;
  q.f += cq.f_x * x + cq.f_sp * y_sp;
  q.r = x.dot(cq.r_x * x) + y_sp.dot(cq.r_sp * y_sp);
  q.W += cq.W_x * x + cq.W_sp * y_sp;
  q.S += cq.S_x * x + cq.S_sp * y_sp;
  return q;
}

ControlResult solve_mpct(const CondensedQp& cq, const VectorXd& x, const VectorXd& y_sp,
                         const QpSettings& settings) {
  if (cq.regulation) check_setpoint_reachable(cq.map, y_sp);
  const QpProblem q = instantiate(cq, x, y_sp);
  QpSolver solver(settings);
  const QpSolution s = solver.solve(q);
  ControlResult res;
  res.status = s.status;
  res.iterations = s.iterations;
  if (s.status != QpStatus::Optimal) return res;

  const Eigen::Index n = cq.model.n(), m = cq.model.m();
  const DecisionLayout& L = cq.layout;
  res.z = s.z;
  res.value = s.value;
  res.nu = s.nu;
  res.lam = s.lam;
  res.u_seq = Eigen::Map<const MatrixXd>(s.z.data(), m, cq.config.N).transpose();
  res.u0 = s.z.head(m);
  const VectorXd xu = cq.E_xu * s.z;
  res.x_a = xu.head(n);
  res.u_a = xu.tail(m);
  res.y_a = cq.F_e * s.z;
  res.theta = cq.E_theta * s.z;
  res.aux = s.z.segment(L.aux_offset, L.aux_size);
  if (cq.eq_regulation > 0) res.nu_regulation = s.nu.tail(cq.eq_regulation);
  return res;
}

bool feasible(const CondensedQp& cq, const VectorXd& x) {
  const VectorXd y = cq.regulation ? cq.target : VectorXd(VectorXd::Zero(cq.model.p()));
  const QpProblem q = instantiate(cq, x, y);
  const Eigen::Index keep = q.num_ineq() - cq.rows_epigraph;
  const QpSolution s = find_feasible_point(q.G.topRows(keep), q.W.head(keep), q.F, q.S);
  return s.status == QpStatus::Optimal;
}

ParameterTransform parameter_transform(const CondensedQp& cq) {
  ParameterTransform t;
  const MatrixXd& H = cq.base.H;
  const MatrixXd Hp = pseudo_inverse(H);
  t.L_x = Hp * cq.f_x;
  t.L_sp = Hp * cq.f_sp;
  const double scale = 1.0 + std::max(cq.f_x.cwiseAbs().maxCoeff(),
                                      cq.f_sp.size() ? cq.f_sp.cwiseAbs().maxCoeff() : 0.0);
  const double rx = (H * t.L_x - cq.f_x).cwiseAbs().maxCoeff();
  const double rs = cq.f_sp.size() ? (H * t.L_sp - cq.f_sp).cwiseAbs().maxCoeff() : 0.0;
  if (std::max(rx, rs) > 1e-8 * scale) {
    throw Error(ErrorCode::SingularH, "parameter-dependent linear term is not in range(H)");
  }
  t.H = H;
  t.f0 = cq.base.f;
  t.G = cq.base.G;
  t.F = cq.base.F;
  t.W_bar = cq.base.W;
  t.S_bar = cq.base.S;
  t.W_x = cq.W_x + cq.base.G * t.L_x;
  t.W_sp = cq.W_sp + cq.base.G * t.L_sp;
  t.S_x = cq.S_x + cq.base.F * t.L_x;
  t.S_sp = cq.S_sp + cq.base.F * t.L_sp;
  return t;
}

QpProblem transformed_problem(const ParameterTransform& t, const CondensedQp& cq, const VectorXd& x,
                              const VectorXd& y_sp) {
  QpProblem q;
  q.H = t.H;
  q.f = t.f0;
  const VectorXd a = t.L_x * x + t.L_sp * y_sp;
  const double r = x.dot(cq.r_x * x) + y_sp.dot(cq.r_sp * y_sp);
  q.r = r - 0.5 * a.dot(t.H * a) - t.f0.dot(a);
  q.G = t.G;
  q.W = t.W_bar + t.W_x * x + t.W_sp * y_sp;
  q.F = t.F;
  q.S = t.S_bar + t.S_x * x + t.S_sp * y_sp;
  return q;
}

}  // namespace mpct
