#include "mpct/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mpct/error.hpp"
#include "mpct/qp.hpp"

namespace mpct {

namespace {

constexpr double kRedundancySlack = 1e-9;
constexpr double kZeroRow = 1e-12;
constexpr double kDuplicateTol = 1e-10;
constexpr double kSearchBox = 1e6;

void check_dims(const MatrixXd& G, const VectorXd& w) {
  if (G.rows() != w.size()) {
    throw Error(ErrorCode::DimensionMismatch, "polytope: G has " + std::to_string(G.rows()) +
                                                  " rows but w has " + std::to_string(w.size()));
  }
}

MatrixXd no_eq(Eigen::Index d) { return MatrixXd(0, d); }

// max g'z over {Gz <= w} with the extra cap g'z <= cap. Returns nullopt when the set is empty.
std::optional<double> max_over(const MatrixXd& G, const VectorXd& w, const VectorXd& g,
                               double cap) {
  MatrixXd Gc(G.rows() + 1, G.cols());
  VectorXd wc(w.size() + 1);
  Gc << G, g.transpose();
  wc << w, cap;
  QpSolution s = solve_lp(-g, Gc, wc, no_eq(G.cols()), VectorXd(0));
  if (s.status == QpStatus::MaxIter) {
    // Unbounded optimal faces stall the interior point; confine the search.
    const Eigen::Index d = G.cols();
    MatrixXd Gb(Gc.rows() + 2 * d, d);
    VectorXd wb(wc.size() + 2 * d);
    Gb << Gc, MatrixXd::Identity(d, d), -MatrixXd::Identity(d, d);
    wb << wc, VectorXd::Constant(2 * d, kSearchBox);
    s = solve_lp(-g, Gb, wb, no_eq(d), VectorXd(0));
  }
  if (s.status == QpStatus::Infeasible) return std::nullopt;
  if (s.status != QpStatus::Optimal) {
    throw Error(ErrorCode::SolverError, "polytope LP: " + to_string(s.status) + " " + s.diagnostics);
  }
  return -s.value;
}

// Scales rows to unit 2-norm, drops trivially satisfied zero rows and merges duplicates
// (keeping the tightest bound). Sets `empty` if a zero row has a negative bound.
HPolytope normalize_rows(const MatrixXd& G, const VectorXd& w, bool& empty) {
  empty = false;
  const Eigen::Index d = G.cols();
  std::vector<VectorXd> rows;
  std::vector<double> rhs;
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    const double nrm = G.row(i).norm();
    if (nrm <= kZeroRow) {
      if (w(i) < -kZeroRow) empty = true;
      continue;
    }
    const VectorXd g = G.row(i).transpose() / nrm;
    const double b = w(i) / nrm;
    bool merged = false;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if ((rows[j] - g).cwiseAbs().maxCoeff() <= kDuplicateTol) {
        rhs[j] = std::min(rhs[j], b);
        merged = true;
        break;
      }
    }
    if (!merged) {
      rows.push_back(g);
      rhs.push_back(b);
    }
  }
  MatrixXd Gn(static_cast<Eigen::Index>(rows.size()), d);
  VectorXd wn(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    Gn.row(static_cast<Eigen::Index>(j)) = rows[j].transpose();
    wn(static_cast<Eigen::Index>(j)) = rhs[j];
  }
  return HPolytope(Gn, wn);
}

MatrixXd drop_column(const MatrixXd& G, Eigen::Index col) {
  MatrixXd out(G.rows(), G.cols() - 1);
  out.leftCols(col) = G.leftCols(col);
  out.rightCols(G.cols() - col - 1) = G.rightCols(G.cols() - col - 1);
  return out;
}

// One Fourier-Motzkin step removing column `col` (the result has one fewer dimension).
HPolytope fm_eliminate(const HPolytope& P, Eigen::Index col) {
  const MatrixXd& G = P.G();
  const VectorXd& w = P.w();
  std::vector<Eigen::Index> pos, neg, zero;
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    const double c = G(i, col);
    if (c > kZeroRow) {
      pos.push_back(i);
    } else if (c < -kZeroRow) {
      neg.push_back(i);
    } else {
      zero.push_back(i);
    }
  }
  const Eigen::Index k = static_cast<Eigen::Index>(zero.size() + pos.size() * neg.size());
  MatrixXd Gn(k, G.cols());
  VectorXd wn(k);
  Eigen::Index r = 0;
  for (Eigen::Index i : zero) {
    Gn.row(r) = G.row(i);
    Gn(r, col) = 0.0;
    wn(r++) = w(i);
  }
  for (Eigen::Index p : pos) {
    for (Eigen::Index n : neg) {
      const double a = G(p, col);
      const double b = -G(n, col);
      Gn.row(r) = b * G.row(p) + a * G.row(n);
      Gn(r, col) = 0.0;
      wn(r++) = b * w(p) + a * w(n);
    }
  }
  return HPolytope(drop_column(Gn, col), wn);
}

// Eliminates every column not in `keep` and reorders the survivors to match `keep`.
HPolytope eliminate_all_but(HPolytope P, const std::vector<int>& keep) {
  std::vector<int> cols(static_cast<std::size_t>(P.dim()));
  for (int i = 0; i < P.dim(); ++i) cols[static_cast<std::size_t>(i)] = i;
  auto kept = [&](int c) { return std::find(keep.begin(), keep.end(), c) != keep.end(); };
  while (true) {
    // Cheapest column first: fewest generated rows.
    int best = -1;
    long best_cost = std::numeric_limits<long>::max();
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (kept(cols[j])) continue;
      long np = 0, nn = 0;
      for (Eigen::Index i = 0; i < P.num_rows(); ++i) {
        const double c = P.G()(i, static_cast<Eigen::Index>(j));
        if (c > kZeroRow) ++np;
        if (c < -kZeroRow) ++nn;
      }
      const long cost = np * nn - np - nn;
      if (cost < best_cost) {
        best_cost = cost;
        best = static_cast<int>(j);
      }
    }
    if (best < 0) break;
    P = remove_redundant(fm_eliminate(P, best));
    if (P.num_rows() == 1 && P.G().row(0).isZero() && P.w()(0) < 0) {
      return HPolytope::empty(static_cast<Eigen::Index>(keep.size()));
    }
    cols.erase(cols.begin() + best);
  }
  MatrixXd G(P.num_rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const auto it = std::find(cols.begin(), cols.end(), keep[j]);
    G.col(static_cast<Eigen::Index>(j)) = P.G().col(it - cols.begin());
  }
  return HPolytope(G, P.w());
}

}  // namespace

HPolytope::HPolytope(MatrixXd G, VectorXd w) : G_(std::move(G)), w_(std::move(w)) {
  check_dims(G_, w_);
}

HPolytope::HPolytope(Eigen::Index dim) : G_(0, dim), w_(0) {}

HPolytope HPolytope::box(const VectorXd& lo, const VectorXd& hi) {
  if (lo.size() != hi.size()) throw Error(ErrorCode::DimensionMismatch, "box bounds differ in size");
  const Eigen::Index d = lo.size();
  MatrixXd G(2 * d, d);
  G << MatrixXd::Identity(d, d), -MatrixXd::Identity(d, d);
  VectorXd w(2 * d);
  w << hi, -lo;
  return HPolytope(G, w);
}

HPolytope HPolytope::symmetric_box(const VectorXd& bound) { return box(-bound, bound); }

HPolytope HPolytope::empty(Eigen::Index dim) {
  return HPolytope(MatrixXd::Zero(1, dim), VectorXd::Constant(1, -1.0));
}

HPolytope HPolytope::scaled(double s) const { return HPolytope(G_, s * w_); }

bool contains(const HPolytope& P, const VectorXd& z, double tol) {
  if (z.size() != P.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "contains: point has dimension " +
                                                  std::to_string(z.size()) + ", polytope " +
                                                  std::to_string(P.dim()));
  }
  if (P.num_rows() == 0) return true;
  return ((P.G() * z - P.w()).array() <= tol).all();
}

bool is_empty(const HPolytope& P) {
  if (P.num_rows() == 0) return false;
  const QpSolution s = find_feasible_point(P.G(), P.w(), no_eq(P.dim()), VectorXd(0));
  if (s.status == QpStatus::Optimal) return false;
  if (s.status == QpStatus::Infeasible) return true;
  throw Error(ErrorCode::SolverError, "is_empty: " + to_string(s.status));
}

bool is_redundant_row(const HPolytope& P, const VectorXd& g, double b, double slack) {
  const double nrm = g.norm();
  if (nrm <= kZeroRow) return b >= -slack;
  const VectorXd gn = g / nrm;
  const double bn = b / nrm;
  if (P.num_rows() == 0) return false;
  const auto m = max_over(P.G(), P.w(), gn, bn + 1.0);
  if (!m) return true;  // implied by the empty set
  return *m <= bn + slack;
}

HPolytope remove_redundant(const HPolytope& P) {
  bool empty = false;
  HPolytope N = normalize_rows(P.G(), P.w(), empty);
  if (empty || is_empty(N)) return HPolytope::empty(P.dim());
  const Eigen::Index k = N.num_rows();
  std::vector<bool> keep(static_cast<std::size_t>(k), true);
  for (Eigen::Index i = 0; i < k; ++i) {
    std::vector<Eigen::Index> others;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j != i && keep[static_cast<std::size_t>(j)]) others.push_back(j);
    }
    if (others.empty()) continue;
    MatrixXd G(static_cast<Eigen::Index>(others.size()), N.dim());
    VectorXd w(static_cast<Eigen::Index>(others.size()));
    for (std::size_t r = 0; r < others.size(); ++r) {
      G.row(static_cast<Eigen::Index>(r)) = N.G().row(others[r]);
      w(static_cast<Eigen::Index>(r)) = N.w()(others[r]);
    }
    const VectorXd g = N.G().row(i).transpose();
    const auto m = max_over(G, w, g, N.w()(i) + 1.0);
    if (m && *m <= N.w()(i) + kRedundancySlack) keep[static_cast<std::size_t>(i)] = false;
  }
  const auto count = std::count(keep.begin(), keep.end(), true);
  MatrixXd G(count, N.dim());
  VectorXd w(count);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!keep[static_cast<std::size_t>(i)]) continue;
    G.row(r) = N.G().row(i);
    w(r++) = N.w()(i);
  }
  return HPolytope(G, w);
}

HPolytope intersect(const HPolytope& a, const HPolytope& b) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::DimensionMismatch, "intersect: dimensions differ");
  MatrixXd G(a.num_rows() + b.num_rows(), a.dim());
  VectorXd w(a.num_rows() + b.num_rows());
  G << a.G(), b.G();
  w << a.w(), b.w();
  return remove_redundant(HPolytope(G, w));
}

HPolytope fm_project(const HPolytope& P, const std::vector<int>& keep) {
  if (keep.size() > 3) {
    throw Error(ErrorCode::ProjectionDimTooHigh,
                "fm_project keeps " + std::to_string(keep.size()) + " coordinates (max 3)");
  }
  for (int c : keep) {
    if (c < 0 || c >= P.dim()) throw Error(ErrorCode::DimensionMismatch, "fm_project: bad index");
  }
  return eliminate_all_but(remove_redundant(P), keep);
}

HPolytope affine_image(const HPolytope& P, const MatrixXd& M) {
  if (M.cols() != P.dim()) throw Error(ErrorCode::DimensionMismatch, "affine_image: M has wrong width");
  const Eigen::Index d = P.dim();
  const Eigen::Index e = M.rows();
  if (e > 3) {
    throw Error(ErrorCode::ProjectionDimTooHigh,
                "affine_image to dimension " + std::to_string(e) + " (max 3)");
  }
  // Lifted variables (z, y) with y = M z; substitute z through the equalities first.
  MatrixXd Gi(P.num_rows(), d + e);
  Gi << P.G(), MatrixXd::Zero(P.num_rows(), e);
  VectorXd wi = P.w();
  MatrixXd Eq(e, d + e);
  Eq << M, -MatrixXd::Identity(e, e);
  std::vector<bool> eq_used(static_cast<std::size_t>(e), false);
  for (Eigen::Index r = 0; r < e; ++r) {
    Eigen::Index piv;
    const double a = Eq.row(r).head(d).cwiseAbs().maxCoeff(&piv);
    if (a <= 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff())) continue;
    const Eigen::RowVectorXd row = Eq.row(r) / Eq(r, piv);
    Gi -= Gi.col(piv) * row;
    for (Eigen::Index q = 0; q < e; ++q) {
      if (q != r && !eq_used[static_cast<std::size_t>(q)]) Eq.row(q) -= Eq(q, piv) * row;
    }
    eq_used[static_cast<std::size_t>(r)] = true;
  }
  // Equalities left over involve y only (rank-deficient M): keep them as paired rows.
  std::vector<Eigen::Index> rest;
  for (Eigen::Index r = 0; r < e; ++r) {
    if (!eq_used[static_cast<std::size_t>(r)]) rest.push_back(r);
  }
  const Eigen::Index k = Gi.rows() + 2 * static_cast<Eigen::Index>(rest.size());
  MatrixXd G(k, d + e);
  VectorXd w(k);
  G.topRows(Gi.rows()) = Gi;
  w.head(Gi.rows()) = wi;
  for (std::size_t j = 0; j < rest.size(); ++j) {
    const Eigen::Index r0 = Gi.rows() + 2 * static_cast<Eigen::Index>(j);
    G.row(r0) = Eq.row(rest[j]);
    G.row(r0 + 1) = -Eq.row(rest[j]);
    w(r0) = 0.0;
    w(r0 + 1) = 0.0;
  }
  std::vector<int> keep;
  for (Eigen::Index j = 0; j < e; ++j) keep.push_back(static_cast<int>(d + j));
  return eliminate_all_but(remove_redundant(HPolytope(G, w)), keep);
}

bool projection_contains(const HPolytope& P, const std::vector<int>& keep, const VectorXd& y,
                         double tol) {
  if (static_cast<Eigen::Index>(keep.size()) != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, "projection_contains: index/point size differ");
  }
  std::vector<int> free;
  for (int c = 0; c < P.dim(); ++c) {
    if (std::find(keep.begin(), keep.end(), c) == keep.end()) free.push_back(c);
  }
  VectorXd rhs = P.w() + VectorXd::Constant(P.num_rows(), tol);
  for (std::size_t j = 0; j < keep.size(); ++j) rhs -= P.G().col(keep[j]) * y(static_cast<Eigen::Index>(j));
  if (free.empty()) return P.num_rows() == 0 || (rhs.array() >= 0.0).all();
  MatrixXd G(P.num_rows(), static_cast<Eigen::Index>(free.size()));
  for (std::size_t j = 0; j < free.size(); ++j) G.col(static_cast<Eigen::Index>(j)) = P.G().col(free[j]);
  return find_feasible_point(G, rhs, no_eq(G.cols()), VectorXd(0)).status == QpStatus::Optimal;
}

std::optional<ChebyshevBall> chebyshev_ball(const HPolytope& P) {
  const Eigen::Index d = P.dim();
  const Eigen::Index k = P.num_rows();
  MatrixXd G = MatrixXd::Zero(k + 1, d + 1);
  VectorXd w(k + 1);
  G.topLeftCorner(k, d) = P.G();
  G.topRightCorner(k, 1) = P.G().rowwise().norm();
  G(k, d) = 1.0;
  w << P.w(), 1e6;
  VectorXd f = VectorXd::Zero(d + 1);
  f(d) = -1.0;
  const QpSolution s = solve_lp(f, G, w, no_eq(d + 1), VectorXd(0));
  if (s.status != QpStatus::Optimal || s.z(d) < -1e-12) return std::nullopt;
  return ChebyshevBall{s.z.head(d), std::max(0.0, s.z(d))};
}

std::optional<std::pair<VectorXd, VectorXd>> bounding_box(const HPolytope& P) {
  const Eigen::Index d = P.dim();
  VectorXd lo(d), hi(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (double sign : {1.0, -1.0}) {
      VectorXd f = VectorXd::Zero(d);
      f(i) = sign;
      const QpSolution s = solve_lp(f, P.G(), P.w(), no_eq(d), VectorXd(0));
      if (s.status != QpStatus::Optimal) return std::nullopt;
      (sign > 0 ? lo : hi)(i) = s.z(i);
    }
  }
  return std::make_pair(lo, hi);
}

std::vector<VectorXd> sample_points(const HPolytope& P, std::mt19937& rng, int count,
                                    int max_tries) {
  std::vector<VectorXd> out;
  const auto bb = bounding_box(P);
  if (!bb) return out;
  const VectorXd& lo = bb->first;
  const VectorXd& hi = bb->second;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int t = 0; t < max_tries && static_cast<int>(out.size()) < count; ++t) {
    VectorXd z(P.dim());
    for (Eigen::Index i = 0; i < P.dim(); ++i) z(i) = lo(i) + (hi(i) - lo(i)) * uni(rng);
    if (contains(P, z, 0.0)) out.push_back(z);
  }
  return out;
}

std::vector<Eigen::Vector2d> vertices_2d(const HPolytope& P) {
  if (P.dim() != 2) throw Error(ErrorCode::DimensionMismatch, "vertices_2d needs a 2-D polytope");
  std::vector<Eigen::Vector2d> pts;
  const Eigen::Index k = P.num_rows();
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      Eigen::Matrix2d A;
      A << P.G().row(i), P.G().row(j);
      if (std::abs(A.determinant()) <= 1e-12) continue;
      const Eigen::Vector2d v = A.partialPivLu().solve(Eigen::Vector2d(P.w()(i), P.w()(j)));
      if (!contains(P, v, 1e-8)) continue;
      bool dup = false;
      for (const auto& q : pts) dup |= (q - v).cwiseAbs().maxCoeff() <= 1e-9;
      if (!dup) pts.push_back(v);
    }
  }
  if (pts.empty()) return pts;
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& q : pts) c += q;
  c /= static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(), [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return std::atan2(a.y() - c.y(), a.x() - c.x()) < std::atan2(b.y() - c.y(), b.x() - c.x());
  });
  return pts;
}

MaisResult mais(const MatrixXd& Abar, const HPolytope& Xbar, int max_iter, bool keep_history) {
  if (Abar.rows() != Abar.cols() || Abar.cols() != Xbar.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "mais: Abar and Xbar dimensions differ");
  }
  MaisResult res;
  if (spectral_radius(Abar) > 1.0 + 1e-9) {
    res.warning = "spectral radius of Abar exceeds 1; the recursion may not terminate";
  }
  const HPolytope X = remove_redundant(Xbar);
  if (is_empty(X)) throw Error(ErrorCode::EmptySet, "mais: constraint set is empty");
  HPolytope O = X;
  if (keep_history) res.history.push_back(O);
  MatrixXd Apow = Abar;
  for (int j = 0; j < max_iter; ++j) {
    const MatrixXd cand = X.G() * Apow;
    std::vector<Eigen::Index> fresh;
    for (Eigen::Index i = 0; i < cand.rows(); ++i) {
      if (!is_redundant_row(O, cand.row(i).transpose(), X.w()(i))) fresh.push_back(i);
    }
    if (fresh.empty()) {
      res.set = O;
      res.determinedness = j;
      res.iterations = j + 1;
      return res;
    }
    MatrixXd Gn(static_cast<Eigen::Index>(fresh.size()), X.dim());
    VectorXd wn(static_cast<Eigen::Index>(fresh.size()));
    for (std::size_t r = 0; r < fresh.size(); ++r) {
      Gn.row(static_cast<Eigen::Index>(r)) = cand.row(fresh[r]);
      wn(static_cast<Eigen::Index>(r)) = X.w()(fresh[r]);
    }
    O = intersect(O, HPolytope(Gn, wn));
    if (keep_history) res.history.push_back(O);
    Apow = Abar * Apow;
  }
  throw Error(ErrorCode::MaxIterationsExceeded,
              "mais did not terminate within " + std::to_string(max_iter) + " steps");
}

}  // namespace mpct
