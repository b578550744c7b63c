#pragma once

#include <Eigen/Dense>

namespace mpct {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Relative singular-value threshold used for every rank decision.
inline constexpr double kRankTol = 1e-9;

/// Numerical rank: count of singular values above kRankTol * sigma_max.
int numerical_rank(const MatrixXd& M, double rel_tol = kRankTol);

/// Orthonormal basis of ker(M) from the SVD (columns are right singular vectors).
MatrixXd null_space(const MatrixXd& M, double rel_tol = kRankTol);

/// Largest eigenvalue magnitude of a square matrix.
double spectral_radius(const MatrixXd& A);

/// Moore-Penrose pseudo-inverse with the same rank rule as numerical_rank.
MatrixXd pseudo_inverse(const MatrixXd& M, double rel_tol = kRankTol);

/// Block-diagonal matrix with `count` copies of `block`.
MatrixXd repeat_diag(const MatrixXd& block, int count);

/// Vertical stack of `count` copies of `block`.
MatrixXd repeat_rows(const MatrixXd& block, int count);

/// Residual of the least-squares fit of the columns of `target` by span(basis),
/// as the max-abs entry of (I - P_basis) target.
double span_residual(const MatrixXd& basis, const MatrixXd& target);

inline bool is_symmetric(const MatrixXd& M, double tol = 1e-10) {
  return M.rows() == M.cols() && (M - M.transpose()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace mpct
