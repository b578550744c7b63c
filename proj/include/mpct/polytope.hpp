#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mpct/linalg.hpp"

namespace mpct {

/// Half-space polytope {z : G z <= w} in dimension `dim()`.
class HPolytope {
 public:
  HPolytope() = default;
  HPolytope(MatrixXd G, VectorXd w);
  /// Ambient dimension with no rows (the whole space).
  explicit HPolytope(Eigen::Index dim);

  static HPolytope box(const VectorXd& lo, const VectorXd& hi);
  /// Symmetric box |z_i| <= bound_i.
  static HPolytope symmetric_box(const VectorXd& bound);
  /// Canonical representation of the empty set: 0'z <= -1.
  static HPolytope empty(Eigen::Index dim);

  const MatrixXd& G() const { return G_; }
  const VectorXd& w() const { return w_; }
  Eigen::Index dim() const { return G_.cols(); }
  Eigen::Index num_rows() const { return G_.rows(); }

  /// {z : G z <= s w} (scaling about the origin).
  HPolytope scaled(double s) const;

 private:
  MatrixXd G_;
  VectorXd w_;
};

/// G z <= w + tol. Throws DimensionMismatch if z has the wrong size.
bool contains(const HPolytope& P, const VectorXd& z, double tol = 1e-9);

bool is_empty(const HPolytope& P);

/// Normalizes rows, merges duplicates and drops every row i with
/// max{g_i'z : other rows} <= w_i + 1e-9. Empty input yields HPolytope::empty.
/// For unbounded sets the LPs fall back to the box |z|_inf <= 1e6 when the interior
/// point stalls on an unbounded optimal face.
HPolytope remove_redundant(const HPolytope& P);

/// True when row (g, b) is implied by P (max g'z over P <= b + slack).
bool is_redundant_row(const HPolytope& P, const VectorXd& g, double b, double slack = 1e-9);

HPolytope intersect(const HPolytope& a, const HPolytope& b);

/// Fourier-Motzkin projection onto the coordinates in `keep` (in that order).
/// Throws ProjectionDimTooHigh if keep.size() > 3.
HPolytope fm_project(const HPolytope& P, const std::vector<int>& keep);

/// {M z : z in P} for M with at most 3 rows. Throws ProjectionDimTooHigh otherwise.
HPolytope affine_image(const HPolytope& P, const MatrixXd& M);

/// Feasibility LP: does some z in P have z[keep] == y ? Works in any dimension.
bool projection_contains(const HPolytope& P, const std::vector<int>& keep, const VectorXd& y,
                         double tol = 1e-9);

struct ChebyshevBall {
  VectorXd center;
  double radius = 0.0;
};

/// Largest inscribed ball (radius capped at 1e6 for unbounded sets).
std::optional<ChebyshevBall> chebyshev_ball(const HPolytope& P);

/// Axis-aligned bounds per coordinate; nullopt if empty or unbounded.
std::optional<std::pair<VectorXd, VectorXd>> bounding_box(const HPolytope& P);

/// Rejection samples from the bounding box. Returns fewer points than requested only
/// if `max_tries` is exhausted.
std::vector<VectorXd> sample_points(const HPolytope& P, std::mt19937& rng, int count,
                                    int max_tries = 1000000);

/// Vertices of a bounded 2-D polytope in counter-clockwise order.
std::vector<Eigen::Vector2d> vertices_2d(const HPolytope& P);

struct MaisResult {
  HPolytope set;
  int determinedness = 0;  // M with O_inf = O_M
  int iterations = 0;      // recursion steps performed, including the confirming one
  std::string warning;
  std::vector<HPolytope> history;  // O_0, O_1, ... when requested
};

/// Maximal admissible invariant set of x+ = Abar x inside Xbar via
/// O_{j+1} = O_j ∩ {x : Abar^{j+1} x in Xbar}, stopping when every new row is
/// redundant. Throws MaxIterationsExceeded after max_iter steps.
MaisResult mais(const MatrixXd& Abar, const HPolytope& Xbar, int max_iter = 200,
                bool keep_history = false);

}  // namespace mpct
