#include "mpct/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "mpct/error.hpp"

namespace mpct {

namespace {

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double max_positive(const VectorXd& v) {
  return v.size() == 0 ? 0.0 : std::max(0.0, v.maxCoeff());
}

// Largest step in (0, 1] that keeps v + alpha * dv >= 0.
double step_to_boundary(const VectorXd& v, const VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

QpProblem select_equalities(const QpProblem& prob, const std::vector<Eigen::Index>& rows) {
  QpProblem out = prob;
  out.F.resize(static_cast<Eigen::Index>(rows.size()), prob.num_vars());
  out.S.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.F.row(static_cast<Eigen::Index>(i)) = prob.F.row(rows[i]);
    out.S(static_cast<Eigen::Index>(i)) = prob.S(rows[i]);
  }
  return out;
}

}  // namespace

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::Unbounded: return "Unbounded";
    case QpStatus::MaxIter: return "MaxIter";
  }
  return "Unknown";
}

QpProblem QpProblem::unconstrained(const MatrixXd& H, const VectorXd& f, double r) {
  QpProblem p;
  p.H = H;
  p.f = f;
  p.r = r;
  p.G.resize(0, f.size());
  p.W.resize(0);
  p.F.resize(0, f.size());
  p.S.resize(0);
  return p;
}

void validate(const QpProblem& prob) {
  const Eigen::Index v = prob.f.size();
  if (prob.H.rows() != v || prob.H.cols() != v) {
    throw Error(ErrorCode::DimensionMismatch, "H must be v x v with v = len(f)");
  }
  if (prob.G.cols() != v || prob.G.rows() != prob.W.size()) {
    throw Error(ErrorCode::DimensionMismatch, "G must be k x v with k = len(W)");
  }
  if (prob.F.cols() != v || prob.F.rows() != prob.S.size()) {
    throw Error(ErrorCode::DimensionMismatch, "F must be e x v with e = len(S)");
  }
  if (v > 0 && !is_symmetric(prob.H, 1e-10 * std::max(1.0, prob.H.cwiseAbs().maxCoeff()))) {
    throw Error(ErrorCode::DimensionMismatch, "H is not symmetric");
  }
  if (v > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(prob.H, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8) {
      throw Error(ErrorCode::NonConvex, "H has a negative eigenvalue");
    }
  }
}

KktResiduals kkt_residuals(const QpProblem& prob, const VectorXd& z, const VectorXd& nu,
                           const VectorXd& lam) {
  KktResiduals res;
  VectorXd grad = prob.H * z + prob.f;
  if (prob.num_eq() > 0) grad += prob.F.transpose() * nu;
  if (prob.num_ineq() > 0) grad += prob.G.transpose() * lam;
  res.stationarity = inf_norm(grad);
  if (prob.num_ineq() > 0) {
    const VectorXd slack = prob.G * z - prob.W;
    res.primal_ineq = max_positive(slack);
    res.complementarity = inf_norm(lam.cwiseProduct(slack));
  }
  if (prob.num_eq() > 0) res.primal_eq = inf_norm(prob.F * z - prob.S);
  return res;
}

QpSolution QpSolver::solve(const QpProblem& prob) {
  validate(prob);
  const Eigen::Index e = prob.num_eq();

  // Equality preprocessing: detect inconsistency, drop dependent rows.
  if (e > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(prob.F.transpose());
    qr.setThreshold(kRankTol);
    const Eigen::Index rank = qr.rank();
    const VectorXd z_ls = prob.F.completeOrthogonalDecomposition().solve(prob.S);
    const VectorXd eq_res = prob.S - prob.F * z_ls;
    if (inf_norm(eq_res) > 1e-9 * (1.0 + inf_norm(prob.S))) {
      QpSolution sol;
      sol.status = QpStatus::Infeasible;
      sol.z = z_ls;
      sol.nu = VectorXd::Zero(e);
      sol.lam = VectorXd::Zero(prob.num_ineq());
      sol.certificate_y = VectorXd::Zero(prob.num_ineq());
      sol.certificate_mu = -eq_res / inf_norm(eq_res);
      sol.certificate_residual = inf_norm(prob.F.transpose() * sol.certificate_mu);
      sol.diagnostics = "equality constraints inconsistent";
      return sol;
    }
    if (rank < e) {
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = 0; i < rank; ++i) keep.push_back(qr.colsPermutation().indices()(i));
      std::sort(keep.begin(), keep.end());
      QpSolution reduced = solve(select_equalities(prob, keep));
      VectorXd nu = VectorXd::Zero(e);
      for (std::size_t i = 0; i < keep.size(); ++i) nu(keep[i]) = reduced.nu(static_cast<Eigen::Index>(i));
      reduced.nu = nu;
      if (reduced.certificate_mu.size() > 0) {
        VectorXd mu = VectorXd::Zero(e);
        for (std::size_t i = 0; i < keep.size(); ++i) {
          mu(keep[i]) = reduced.certificate_mu(static_cast<Eigen::Index>(i));
        }
        reduced.certificate_mu = mu;
      }
      return reduced;
    }
  }

  QpSolution sol = interior_point(prob);
  if (sol.status == QpStatus::Optimal && settings_.polish) polish(prob, sol);
  finalize(prob, sol);
  if (sol.status != QpStatus::Optimal && settings_.classify_failures) classify_failure(prob, sol);
  return sol;
}

QpSolution QpSolver::interior_point(const QpProblem& prob) {
  const Eigen::Index v = prob.num_vars();
  const Eigen::Index k = prob.num_ineq();
  const Eigen::Index e = prob.num_eq();
  const MatrixXd& H = prob.H;
  const MatrixXd& G = prob.G;
  const MatrixXd& F = prob.F;

  QpSolution sol;
  VectorXd z = VectorXd::Zero(v);
  VectorXd nu = VectorXd::Zero(e);
  if (e > 0) z = F.completeOrthogonalDecomposition().solve(prob.S);
  VectorXd s(k), lam(k);
  if (k > 0) {
    const VectorXd slack = prob.W - G * z;
    for (Eigen::Index i = 0; i < k; ++i) s(i) = std::max(1.0, slack(i));
    lam.setOnes();
  }

  const double fscale = 1.0 + inf_norm(prob.f) + (v > 0 ? H.cwiseAbs().maxCoeff() : 0.0);
  const double pscale = 1.0 + std::max(inf_norm(prob.W), inf_norm(prob.S));
  const int n_kkt = static_cast<int>(v + e);

  MatrixXd K(n_kkt, n_kkt);
  MatrixXd K0(n_kkt, n_kkt);
  VectorXd rhs(n_kkt), sol_vec(n_kkt);

  // Best iterate by scaled merit; returned when the iteration stalls near a solution.
  double best_merit = std::numeric_limits<double>::infinity();
  VectorXd best_z = z, best_nu = nu, best_lam = k > 0 ? lam : VectorXd();

  int it = 0;
  bool converged = false;
  for (; it < settings_.max_iter; ++it) {
    VectorXd r_d = H * z + prob.f;
    if (e > 0) r_d += F.transpose() * nu;
    if (k > 0) r_d += G.transpose() * lam;
    const VectorXd r_e = e > 0 ? VectorXd(F * z - prob.S) : VectorXd();
    const VectorXd r_i = k > 0 ? VectorXd(G * z + s - prob.W) : VectorXd();
    const double mu = k > 0 ? s.dot(lam) / static_cast<double>(k) : 0.0;

    const bool dual_ok = inf_norm(r_d) <= settings_.tol_feas * fscale;
    const bool primal_ok = inf_norm(r_e) <= settings_.tol_feas * pscale &&
                           inf_norm(r_i) <= settings_.tol_feas * pscale;
    if (dual_ok && primal_ok && mu <= settings_.tol_gap) {
      converged = true;
      break;
    }
    const double merit = std::max({inf_norm(r_d) / fscale, inf_norm(r_e) / pscale,
                                   inf_norm(r_i) / pscale, mu});
    if (merit < best_merit) {
      best_merit = merit;
      best_z = z;
      best_nu = nu;
      if (k > 0) best_lam = lam;
    }
    if (k > 0 && mu < 1e-20) break;
    if ((k > 0 && inf_norm(lam) > 1e13) || inf_norm(z) > 1e13) break;

    // Newton matrix: [H + G'DG + eps I, F'; F, -delta I].
    VectorXd d = k > 0 ? VectorXd(lam.cwiseQuotient(s)) : VectorXd();
    K0.setZero();
    K0.topLeftCorner(v, v) = H;
    if (k > 0) K0.topLeftCorner(v, v) += G.transpose() * d.asDiagonal() * G;
    if (e > 0) {
      K0.topRightCorner(v, e) = F.transpose();
      K0.bottomLeftCorner(e, v) = F;
    }
    K = K0;
    K.topLeftCorner(v, v).diagonal().array() += settings_.proximal_reg;
    if (e > 0) K.bottomRightCorner(e, e).diagonal().array() -= settings_.dual_reg;
    Eigen::PartialPivLU<MatrixXd> lu(K);
    // Degenerate faces can drive the reduced matrix to an exact zero pivot; the
    // rank-revealing fallback then returns the minimum-norm step.
    std::optional<Eigen::CompleteOrthogonalDecomposition<MatrixXd>> cod;
    auto kkt_solve = [&](const VectorXd& b) -> VectorXd {
      if (!cod) {
        VectorXd x = lu.solve(b);
        if (x.allFinite()) return x;
        cod.emplace(K);
      }
      return cod->solve(b);
    };

    auto newton = [&](const VectorXd& r_c, VectorXd& dz, VectorXd& dnu, VectorXd& ds,
                      VectorXd& dlam) {
      rhs.setZero();
      rhs.head(v) = -r_d;
      if (k > 0) {
        const VectorXd tmp = (-r_c + lam.cwiseProduct(r_i)).cwiseQuotient(s);
        rhs.head(v) -= G.transpose() * tmp;
      }
      if (e > 0) rhs.tail(e) = -r_e;
      sol_vec = kkt_solve(rhs);
      for (int ref = 0; ref < 3; ++ref) {
        const VectorXd res = rhs - K0 * sol_vec;
        sol_vec += kkt_solve(res);
      }
      dz = sol_vec.head(v);
      dnu = e > 0 ? VectorXd(sol_vec.tail(e)) : VectorXd();
      if (k > 0) {
        ds = -r_i - G * dz;
        dlam = (-r_c - lam.cwiseProduct(ds)).cwiseQuotient(s);
      }
    };

    VectorXd dz, dnu, ds, dlam;
    if (k == 0) {
      newton(VectorXd(), dz, dnu, ds, dlam);
      z += dz;
      if (e > 0) nu += dnu;
      continue;
    }

    // Predictor.
    newton(s.cwiseProduct(lam), dz, dnu, ds, dlam);
    const double alpha_aff = std::min(step_to_boundary(s, ds), step_to_boundary(lam, dlam));
    const double mu_aff =
        (s + alpha_aff * ds).dot(lam + alpha_aff * dlam) / static_cast<double>(k);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    // Corrector.
    const VectorXd r_c = s.cwiseProduct(lam) + ds.cwiseProduct(dlam) -
                         VectorXd::Constant(k, sigma * mu);
    newton(r_c, dz, dnu, ds, dlam);
    double alpha = std::min(step_to_boundary(s, ds), step_to_boundary(lam, dlam));
    alpha = std::min(1.0, 0.995 * alpha);
    {
      // mu(alpha) = (a + b alpha + c alpha^2) / k; stop at its minimizer when it comes first.
      const double b = s.dot(dlam) + ds.dot(lam), c = ds.dot(dlam);
      if (c > 0 && -b / (2 * c) > 0) alpha = std::min(alpha, std::max(0.1 * alpha, -b / (2 * c)));
    }
    if (!dz.allFinite() || !dlam.allFinite() || !ds.allFinite()) break;

    z += alpha * dz;
    if (e > 0) nu += alpha * dnu;
    s += alpha * ds;
    lam += alpha * dlam;
    // Keep strictly interior.
    s = s.cwiseMax(1e-300);
    lam = lam.cwiseMax(1e-300);
  }

  if (!converged && best_merit <= settings_.tol_stall) {
    z = best_z;
    nu = best_nu;
    if (k > 0) lam = best_lam;
    converged = true;
  }
  sol.iterations = it;
  sol.z = z;
  sol.nu = nu;
  sol.lam = k > 0 ? lam : VectorXd();
  sol.status = converged ? QpStatus::Optimal : QpStatus::MaxIter;
  if (!converged) {
    std::ostringstream os;
    os << "interior point stopped after " << it << " iterations";
    sol.diagnostics = os.str();
  }
  return sol;
}

bool QpSolver::polish(const QpProblem& prob, QpSolution& sol) {
  const Eigen::Index v = prob.num_vars();
  const Eigen::Index k = prob.num_ineq();
  const Eigen::Index e = prob.num_eq();
  if (k == 0 && e == 0) return false;

  const VectorXd slack = k > 0 ? VectorXd(prob.W - prob.G * sol.z) : VectorXd();
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (sol.lam(i) > slack(i)) candidates.push_back(i);
  }
  std::sort(candidates.begin(), candidates.end(),
            [&](Eigen::Index a, Eigen::Index b) { return sol.lam(a) > sol.lam(b); });

  // Greedy independent subset of active rows on top of the equality rows.
  std::vector<Eigen::Index> active;
  MatrixXd A(e, v);
  if (e > 0) A = prob.F;
  int current_rank = e > 0 ? numerical_rank(A) : 0;
  for (Eigen::Index i : candidates) {
    if (current_rank >= v) break;
    MatrixXd trial(A.rows() + 1, v);
    trial << A, prob.G.row(i);
    const int r = numerical_rank(trial);
    if (r > current_rank) {
      A = std::move(trial);
      current_rank = r;
      active.push_back(i);
    }
  }

  const Eigen::Index na = static_cast<Eigen::Index>(active.size());
  const Eigen::Index m = e + na;
  MatrixXd KKT = MatrixXd::Zero(v + m, v + m);
  KKT.topLeftCorner(v, v) = prob.H;
  KKT.topRightCorner(v, m) = A.transpose();
  KKT.bottomLeftCorner(m, v) = A;
  VectorXd rhs(v + m);
  rhs.head(v) = -prob.f;
  if (e > 0) rhs.segment(v, e) = prob.S;
  for (Eigen::Index j = 0; j < na; ++j) rhs(v + e + j) = prob.W(active[static_cast<std::size_t>(j)]);

  Eigen::FullPivLU<MatrixXd> lu(KKT);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) return false;
  VectorXd x = lu.solve(rhs);
  for (int ref = 0; ref < 2; ++ref) x += lu.solve(VectorXd(rhs - KKT * x));

  VectorXd z = x.head(v);
  VectorXd nu = e > 0 ? VectorXd(x.segment(v, e)) : VectorXd();
  VectorXd lam = VectorXd::Zero(k);
  for (Eigen::Index j = 0; j < na; ++j) {
    const double l = x(v + e + j);
    if (l < -1e-9 * (1.0 + inf_norm(prob.f))) return false;
    lam(active[static_cast<std::size_t>(j)]) = std::max(0.0, l);
  }
  if (k > 0) {
    const double viol = max_positive(prob.G * z - prob.W);
    if (viol > 1e-9 * (1.0 + inf_norm(prob.W))) return false;
  }
  const auto objective = [&](const VectorXd& zz) {
    return 0.5 * zz.dot(prob.H * zz) + prob.f.dot(zz);
  };
  if (objective(z) > objective(sol.z) + 1e-7 * (1.0 + std::abs(objective(sol.z)))) return false;

  sol.z = z;
  sol.nu = nu;
  sol.lam = lam;
  sol.polished = true;
  return true;
}

void QpSolver::finalize(const QpProblem& prob, QpSolution& sol) {
  sol.value = 0.5 * sol.z.dot(prob.H * sol.z) + prob.f.dot(sol.z) + prob.r;
  if (sol.status != QpStatus::Optimal) return;
  const KktResiduals res = kkt_residuals(prob, sol.z, sol.nu, sol.lam);
  const bool ok = res.stationarity <= 1e-6 * (1.0 + inf_norm(prob.f)) &&
                  res.primal_ineq <= 1e-8 && res.primal_eq <= 1e-8 &&
                  res.complementarity <= 1e-6;
  if (!ok) {
    std::ostringstream os;
    os << "KKT residuals out of tolerance (stat=" << res.stationarity
       << ", pineq=" << res.primal_ineq << ", peq=" << res.primal_eq
       << ", comp=" << res.complementarity << ")";
    sol.status = QpStatus::MaxIter;
    sol.diagnostics = os.str();
  }
}

void QpSolver::classify_failure(const QpProblem& prob, QpSolution& sol) {
  QpSettings sub = settings_;
  sub.classify_failures = false;
  const QpSolution phase1 = find_feasible_point(prob.G, prob.W, prob.F, prob.S, sub);
  if (phase1.status == QpStatus::Infeasible) {
    sol.status = QpStatus::Infeasible;
    sol.certificate_y = phase1.certificate_y;
    sol.certificate_mu = phase1.certificate_mu;
    sol.certificate_residual = phase1.certificate_residual;
    sol.diagnostics = "phase-1 certificate of infeasibility";
    return;
  }
  if (phase1.status != QpStatus::Optimal) {
    sol.diagnostics += "; phase-1 inconclusive";
    return;
  }

  // Feasible: look for a recession direction along which the objective decreases.
  const MatrixXd NH = null_space(prob.H);
  if (NH.cols() == 0) return;
  const Eigen::Index v = prob.num_vars();
  const Eigen::Index w = NH.cols();
  const Eigen::Index k = prob.num_ineq();
  MatrixXd Gr(k + 2 * v, w);
  VectorXd Wr = VectorXd::Zero(k + 2 * v);
  if (k > 0) Gr.topRows(k) = prob.G * NH;
  Gr.middleRows(k, v) = NH;
  Gr.bottomRows(v) = -NH;
  Wr.tail(2 * v).setOnes();
  const MatrixXd Fr = prob.F * NH;
  const VectorXd Sr = VectorXd::Zero(prob.num_eq());
  QpProblem ray;
  ray.H = MatrixXd::Zero(w, w);
  ray.f = NH.transpose() * prob.f;
  ray.G = Gr;
  ray.W = Wr;
  ray.F = Fr;
  ray.S = Sr;
  QpSolver inner(sub);
  const QpSolution rs = inner.solve(ray);
  if (rs.status == QpStatus::Optimal && rs.value < -1e-9 * (1.0 + inf_norm(prob.f))) {
    sol.status = QpStatus::Unbounded;
    sol.ray = NH * rs.z;
    sol.diagnostics = "objective unbounded below along recession direction";
  }
}

QpSolution solve(const QpProblem& prob, const QpSettings& settings) {
  QpSolver solver(settings);
  return solver.solve(prob);
}

QpSolution solve_lp(const VectorXd& f, const MatrixXd& G, const VectorXd& W, const MatrixXd& F,
                    const VectorXd& S, const QpSettings& settings) {
  QpProblem p;
  p.H = MatrixXd::Zero(f.size(), f.size());
  p.f = f;
  p.G = G.size() == 0 ? MatrixXd(0, f.size()) : G;
  p.W = W;
  p.F = F.size() == 0 ? MatrixXd(0, f.size()) : F;
  p.S = S;
  return solve(p, settings);
}

QpSolution find_feasible_point(const MatrixXd& G, const VectorXd& W, const MatrixXd& F,
                               const VectorXd& S, const QpSettings& settings) {
  const Eigen::Index v = std::max(G.cols(), F.cols());
  const Eigen::Index k = W.size();
  const Eigen::Index e = S.size();
  QpSettings sub = settings;
  sub.classify_failures = false;

  // Variables (z, t): min t  s.t.  Gz - t <= W,  -t <= 1,  Fz = S.
  QpProblem p;
  p.H = MatrixXd::Zero(v + 1, v + 1);
  p.f = VectorXd::Zero(v + 1);
  p.f(v) = 1.0;
  p.G = MatrixXd::Zero(k + 1, v + 1);
  if (k > 0) p.G.topLeftCorner(k, v) = G;
  p.G.block(0, v, k, 1).setConstant(-1.0);
  p.G(k, v) = -1.0;
  p.W.resize(k + 1);
  p.W.head(k) = W;
  p.W(k) = 1.0;
  p.F = MatrixXd::Zero(e, v + 1);
  if (e > 0) p.F.leftCols(v) = F;
  p.S = S;

  QpSolver solver(sub);
  const QpSolution ph = solver.solve(p);

  QpSolution out;
  out.iterations = ph.iterations;
  out.z = ph.z.size() == v + 1 ? VectorXd(ph.z.head(v)) : VectorXd::Zero(v);
  if (ph.status == QpStatus::Infeasible) {
    // Only the equality block can make the phase-1 problem infeasible.
    out.status = QpStatus::Infeasible;
    out.certificate_y = VectorXd::Zero(k);
    out.certificate_mu = ph.certificate_mu;
    out.certificate_residual = ph.certificate_residual;
    out.diagnostics = ph.diagnostics;
    return out;
  }
  if (ph.status != QpStatus::Optimal) {
    out.status = QpStatus::MaxIter;
    out.diagnostics = "phase-1 LP did not converge: " + ph.diagnostics;
    return out;
  }
  const double t = ph.z(v);
  if (t <= 1e-9) {
    out.status = QpStatus::Optimal;
    out.value = t;
    return out;
  }
  out.status = QpStatus::Infeasible;
  out.value = t;
  VectorXd y = ph.lam.head(k);
  VectorXd mu = ph.nu;
  const double scale = y.sum();
  if (scale > 0.0) {
    y /= scale;
    if (e > 0) mu /= scale;
  }
  out.certificate_y = y;
  out.certificate_mu = mu;
  VectorXd comb = VectorXd::Zero(v);
  if (k > 0) comb += G.transpose() * y;
  if (e > 0) comb += F.transpose() * mu;
  out.certificate_residual = inf_norm(comb);
  std::ostringstream os;
  os << "phase-1 minimum violation " << t;
  out.diagnostics = os.str();
  return out;
}

std::string to_json(const QpProblem& prob) {
  auto mat = [](const MatrixXd& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  auto vec = [](const VectorXd& x) {
    return nlohmann::json(std::vector<double>(x.data(), x.data() + x.size()));
  };
  nlohmann::json j;
  j["H"] = mat(prob.H);
  j["f"] = vec(prob.f);
  j["r"] = prob.r;
  j["G"] = mat(prob.G);
  j["W"] = vec(prob.W);
  j["F"] = mat(prob.F);
  j["S"] = vec(prob.S);
  return j.dump();
}

}  // namespace mpct
