#pragma once

// Test-only reference computations. Nothing here calls into the solver paths it
// is used to check.

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mpct/qp.hpp"

namespace mpct::testing_oracles {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct BruteForceResult {
  bool feasible = false;
  VectorXd z;
  double value = std::numeric_limits<double>::infinity();
};

/// Enumerates every subset of inequality rows as the active set, solves the
/// equality-constrained KKT system, keeps primal/dual feasible points and returns
/// the best. Exponential in the number of inequalities; intended for k <= 10.
inline BruteForceResult brute_force_qp(const QpProblem& p) {
  const int v = static_cast<int>(p.num_vars());
  const int k = static_cast<int>(p.num_ineq());
  const int e = static_cast<int>(p.num_eq());
  BruteForceResult best;
  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < k; ++i) {
      if (mask & (1u << i)) act.push_back(i);
    }
    const int m = e + static_cast<int>(act.size());
    if (m > v) continue;
    MatrixXd A(m, v);
    VectorXd b(m);
    if (e > 0) {
      A.topRows(e) = p.F;
      b.head(e) = p.S;
    }
    for (std::size_t j = 0; j < act.size(); ++j) {
      A.row(e + static_cast<int>(j)) = p.G.row(act[j]);
      b(e + static_cast<int>(j)) = p.W(act[j]);
    }
    MatrixXd K = MatrixXd::Zero(v + m, v + m);
    K.topLeftCorner(v, v) = p.H;
    K.topRightCorner(v, m) = A.transpose();
    K.bottomLeftCorner(m, v) = A;
    VectorXd rhs(v + m);
    rhs.head(v) = -p.f;
    rhs.tail(m) = b;
    Eigen::FullPivLU<MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const VectorXd x = lu.solve(rhs);
    const VectorXd z = x.head(v);
    bool ok = true;
    for (std::size_t j = 0; j < act.size(); ++j) {
      if (x(v + e + static_cast<int>(j)) < -1e-9) ok = false;
    }
    if (k > 0 && (p.G * z - p.W).maxCoeff() > 1e-9) ok = false;
    if (!ok) continue;
    const double val = 0.5 * z.dot(p.H * z) + p.f.dot(z) + p.r;
    if (val < best.value) {
      best.feasible = true;
      best.value = val;
      best.z = z;
    }
  }
  return best;
}

/// Random strictly convex QP with v <= max_v, k <= max_k, e <= max_e (e < v).
/// Roughly one in ten instances has right-hand sides drawn independently of any
/// feasible point, which makes many of those infeasible.
inline QpProblem random_strictly_convex_qp(std::mt19937& rng, int max_v, int max_k, int max_e) {
  std::uniform_int_distribution<int> dv(1, max_v);
  const int v = dv(rng);
  std::uniform_int_distribution<int> dk(0, max_k);
  std::uniform_int_distribution<int> de(0, std::min(max_e, v - 1));
  const int k = dk(rng);
  const int e = de(rng);
  std::normal_distribution<double> nrm(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto randm = [&](int r, int c) {
    MatrixXd M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = nrm(rng);
    return M;
  };
  QpProblem p;
  const MatrixXd L = randm(v, v);
  p.H = L * L.transpose() + 0.1 * MatrixXd::Identity(v, v);
  p.H = 0.5 * (p.H + p.H.transpose());
  p.f = 3.0 * randm(v, 1).col(0);
  p.r = nrm(rng);
  p.G = randm(k, v);
  p.F = randm(e, v);
  const VectorXd z0 = randm(v, 1).col(0);
  const bool wild = uni(rng) < 0.1;
  p.W.resize(k);
  for (int i = 0; i < k; ++i) {
    p.W(i) = wild ? nrm(rng) - 1.0 : p.G.row(i).dot(z0) + uni(rng);
  }
  p.S = p.F * z0;
  return p;
}

/// Rank by Gaussian elimination with partial pivoting and an absolute pivot threshold.
inline int elimination_rank(MatrixXd M, double tol = 1e-10) {
  int rank = 0;
  const int rows = static_cast<int>(M.rows());
  const int cols = static_cast<int>(M.cols());
  for (int c = 0; c < cols && rank < rows; ++c) {
    int piv = rank;
    for (int r = rank + 1; r < rows; ++r) {
      if (std::abs(M(r, c)) > std::abs(M(piv, c))) piv = r;
    }
    if (std::abs(M(piv, c)) <= tol) continue;
    M.row(piv).swap(M.row(rank));
    for (int r = rank + 1; r < rows; ++r) M.row(r) -= (M(r, c) / M(rank, c)) * M.row(rank);
    ++rank;
  }
  return rank;
}

/// Null-space basis from reduced row echelon form (not orthonormal).
inline MatrixXd elimination_null_space(MatrixXd M, double tol = 1e-10) {
  const int rows = static_cast<int>(M.rows());
  const int cols = static_cast<int>(M.cols());
  std::vector<int> pivot_cols;
  int r = 0;
  for (int c = 0; c < cols && r < rows; ++c) {
    int piv = r;
    for (int i = r + 1; i < rows; ++i) {
      if (std::abs(M(i, c)) > std::abs(M(piv, c))) piv = i;
    }
    if (std::abs(M(piv, c)) <= tol) continue;
    M.row(piv).swap(M.row(r));
    M.row(r) /= M(r, c);
    for (int i = 0; i < rows; ++i) {
      if (i != r) M.row(i) -= M(i, c) * M.row(r);
    }
    pivot_cols.push_back(c);
    ++r;
  }
  std::vector<int> free_cols;
  for (int c = 0; c < cols; ++c) {
    bool is_pivot = false;
    for (int pc : pivot_cols) is_pivot |= (pc == c);
    if (!is_pivot) free_cols.push_back(c);
  }
  MatrixXd N = MatrixXd::Zero(cols, static_cast<int>(free_cols.size()));
  for (std::size_t j = 0; j < free_cols.size(); ++j) {
    N(free_cols[j], static_cast<int>(j)) = 1.0;
    for (std::size_t i = 0; i < pivot_cols.size(); ++i) {
      N(pivot_cols[i], static_cast<int>(j)) = -M(static_cast<int>(i), free_cols[j]);
    }
  }
  return N;
}

/// True when span(a) == span(b) (mutual least-squares residual below tol).
inline bool same_span(const MatrixXd& a, const MatrixXd& b, double tol = 1e-8) {
  if (a.cols() != b.cols()) return false;
  auto residual = [](const MatrixXd& basis, const MatrixXd& target) {
    const MatrixXd c = basis.colPivHouseholderQr().solve(target);
    return (basis * c - target).cwiseAbs().maxCoeff();
  };
  return residual(a, b) <= tol && residual(b, a) <= tol;
}

/// Scalar discrete Riccati fixed point by bisection on p = q + a^2 p - (abp)^2/(r + b^2 p).
inline double scalar_dare_bisection(double a, double b, double q, double r) {
  auto g = [&](double p) { return q + a * a * p - (a * b * p) * (a * b * p) / (r + b * b * p) - p; };
  double lo = 0.0, hi = 1e6;
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace mpct::testing_oracles
