#include "mpct/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace mpct {

namespace {

int rank_from_singular_values(const VectorXd& sv, double rel_tol) {
  if (sv.size() == 0) return 0;
  const double cutoff = rel_tol * sv(0);
  if (sv(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) ++r;
  }
  return r;
}

}  // namespace

int numerical_rank(const MatrixXd& M, double rel_tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(M);
  return rank_from_singular_values(svd.singularValues(), rel_tol);
}

MatrixXd null_space(const MatrixXd& M, double rel_tol) {
  const Eigen::Index cols = M.cols();
  if (M.rows() == 0) return MatrixXd::Identity(cols, cols);
  Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeFullV);
  const int r = rank_from_singular_values(svd.singularValues(), rel_tol);
  return svd.matrixV().rightCols(cols - r);
}

double spectral_radius(const MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

MatrixXd pseudo_inverse(const MatrixXd& M, double rel_tol) {
  Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  const int r = rank_from_singular_values(sv, rel_tol);
  MatrixXd out = MatrixXd::Zero(M.cols(), M.rows());
  for (int i = 0; i < r; ++i) {
    out += svd.matrixV().col(i) * (1.0 / sv(i)) * svd.matrixU().col(i).transpose();
  }
  return out;
}

MatrixXd repeat_diag(const MatrixXd& block, int count) {
  MatrixXd out = MatrixXd::Zero(block.rows() * count, block.cols() * count);
  for (int i = 0; i < count; ++i) {
    out.block(i * block.rows(), i * block.cols(), block.rows(), block.cols()) = block;
  }
  return out;
}

MatrixXd repeat_rows(const MatrixXd& block, int count) {
  MatrixXd out(block.rows() * count, block.cols());
  for (int i = 0; i < count; ++i) out.middleRows(i * block.rows(), block.rows()) = block;
  return out;
}

double span_residual(const MatrixXd& basis, const MatrixXd& target) {
  if (target.size() == 0) return 0.0;
  if (basis.cols() == 0) return target.cwiseAbs().maxCoeff();
  const MatrixXd coeffs = basis.completeOrthogonalDecomposition().solve(target);
  return (basis * coeffs - target).cwiseAbs().maxCoeff();
}

}  // namespace mpct
