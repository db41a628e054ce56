#pragma once

// Numerical kernels shared by every model variant: PCA, null spaces,
// principal angles, the subspace disagreement measure, the group-lasso
// proximal solver, the norm-constrained dictionary solver and ridge least
// squares.

#include <optional>
#include <utility>
#include <vector>

#include "froda/common.hpp"

namespace froda {

/// Condition number above which a Gram matrix is treated as singular.
inline constexpr double kSingularCondition = 1e12;

/// Half-open row range [begin, end) of a coefficient matrix.
struct RowRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
  Eigen::Index size() const { return end - begin; }
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

/// Partition of coefficient rows into disjoint contiguous blocks.
///
/// Construction validates that the ranges are non-empty, ordered, contiguous
/// and start at row 0; rows() is then the number of rows they cover.
class GroupSpec {
 public:
  explicit GroupSpec(std::vector<RowRange> groups);

  /// `count` consecutive groups of `width` rows each.
  static GroupSpec uniform(Eigen::Index count, Eigen::Index width);

  const std::vector<RowRange>& groups() const { return groups_; }
  Eigen::Index rows() const { return groups_.back().end; }
  std::size_t size() const { return groups_.size(); }
  const RowRange& operator[](std::size_t i) const { return groups_[i]; }

 private:
  std::vector<RowRange> groups_;
};

struct SolverConfig {
  double tol = 1e-8;       ///< relative objective change for iterative solvers
  int max_iter = 500;
  double ridge = 1e-8;     ///< floor used when a Gram matrix is ill-conditioned
  double dual_tol = 1e-10; ///< KKT tolerance of the dictionary dual solve

  /// Throws InvalidArgument on tol <= 0, dual_tol <= 0, max_iter < 1 or ridge < 0.
  void validate() const;
};

// ---------------------------------------------------------------------------
// PCA and subspace geometry

/// Either a fixed number of components or a cumulative variance fraction.
struct PcaRequest {
  std::optional<Eigen::Index> dim;
  std::optional<double> variance_fraction;
  /// When false the decomposition runs on the raw second moments and the
  /// reported mean is zero.
  bool center = true;

  static PcaRequest components(Eigen::Index d) { return {d, std::nullopt}; }
  static PcaRequest fraction(double f) { return {std::nullopt, f}; }
  PcaRequest uncentered() const {
    PcaRequest r = *this;
    r.center = false;
    return r;
  }
};

struct PcaResult {
  Matrix basis;        ///< D x d, orthonormal columns
  Vector mean;         ///< D, subtracted before the decomposition
  Vector variances;    ///< per-component sample variance, non-increasing
  Vector singular_values;  ///< of the centred data, numerically non-zero only
};

/// Principal directions of the mean-centred columns of `X`.
///
/// Columns are sign-normalised so that each column's largest-magnitude entry
/// is non-negative. A fixed `dim` beyond the numerical rank raises
/// RankDeficient carrying the attainable rank; zero-variance data raises
/// RankDeficient with attainable rank 0.
PcaResult pca_basis(const Matrix& X, const PcaRequest& request);

/// Like pca_basis with a fixed dimension, but pads beyond the numerical rank
/// with deterministic directions of the orthogonal complement instead of
/// failing. Zero-variance data still raises.
Matrix padded_principal_directions(const Matrix& X, Eigen::Index dim);

/// Flips column signs in place so the largest-magnitude entry of each column
/// is non-negative (first such entry on ties).
void normalize_signs(Matrix& basis);

/// Projection learnt by PCA on the column concatenation of two domains.
struct JointProjection {
  Matrix basis;  ///< D x D'
  Vector mean;   ///< D

  /// basis^T (X - mean), column-wise.
  Matrix apply(const Matrix& X) const;
  Eigen::Index input_dim() const { return basis.rows(); }
  Eigen::Index output_dim() const { return basis.cols(); }
};

struct JointReduction {
  Matrix source;
  Matrix target;
  JointProjection projection;
};

/// Uncentred PCA on [Xs, Xt] keeping `variance_fraction` of the energy; both
/// domains are projected linearly on the joint basis. Subtracting a joint
/// mean would add the same offset to every sample and leak the target-private
/// directions into the source data, so the stored mean is zero.
JointReduction joint_pca_reduce(const Matrix& Xs, const Matrix& Xt, double variance_fraction);

/// `d` orthonormal vectors spanning part of the orthogonal complement of
/// span(V), taken in the order of the full SVD of V and sign-normalised.
Matrix truncated_null_space(const Matrix& V, Eigen::Index d);

/// Principal angles (radians, ascending) between the column spans of two
/// orthonormal bases.
Vector principal_angles(const Matrix& A, const Matrix& B);

/// Subspace dimension selected by the subspace disagreement measure.
///
/// For d = 1..d_max, D(d) = (sin a_d + sin b_d) / 2 where a_d (b_d) is the
/// largest principal angle between the first d source (target) principal
/// directions and the first d joint ones. Returns the first d with
/// D(d) >= 1 - 1e-6, minus one, clamped to [1, d_max]; d_max if no d
/// reaches the threshold.
Eigen::Index subspace_disagreement_dim(const Matrix& Xs, const Matrix& Xt, Eigen::Index d_max);

/// The disagreement curve D(1..d_max) behind subspace_disagreement_dim.
Vector subspace_disagreement_curve(const Matrix& Xs, const Matrix& Xt, Eigen::Index d_max);

// ---------------------------------------------------------------------------
// Group lasso

/// Block soft-thresholding, the proximal operator of tau * sum_g ||t_g||.
Vector block_soft_threshold(const Vector& t, const GroupSpec& groups, double tau);

/// In-place column variant used by the solvers.
void block_soft_threshold_inplace(Eigen::Ref<Vector> t, const GroupSpec& groups, double tau);

/// sum_g ||t_g||_2 for one coefficient column.
double group_norm_sum(const Eigen::Ref<const Vector>& t, const GroupSpec& groups);

struct GroupLassoResult {
  Matrix coefficients;
  int max_iterations = 0;           ///< largest per-column iteration count
  bool zero_dictionary = false;     ///< B == 0: coefficients set to zero
};

/// Minimises ||X - B T||_F^2 + lambda * sum_i sum_g ||T_i^g||_2.
///
/// Columns are solved independently by accelerated proximal gradient with
/// fixed step 1/L, L = 2 sigma_max(B)^2, and function-value momentum
/// restarts, so each column's objective never increases. A column stops
/// when its relative objective change drops below cfg.tol or after
/// cfg.max_iter iterations. Zero-initialised unless `warm_start` is given.
GroupLassoResult group_lasso_solve(const Matrix& X, const Matrix& B, const GroupSpec& groups,
                                   double lambda, const SolverConfig& cfg,
                                   const Matrix* warm_start = nullptr);

/// ||X - B T||_F^2 + lambda * sum of group norms.
double group_lasso_objective(const Matrix& X, const Matrix& B, const Matrix& T,
                             const GroupSpec& groups, double lambda);

// ---------------------------------------------------------------------------
// Norm-constrained dictionary

struct DictionaryResult {
  Matrix dictionary;   ///< D x k, every column norm <= 1
  Vector multipliers;  ///< dual variables, one per column
  int newton_iterations = 0;
  double kkt_residual = 0.0;
  bool ridge_applied = false;
  bool kept_warm_start = false;  ///< the warm start was strictly better
};

/// Minimises ||A - U T||_F^2 subject to ||U_j||_2 <= 1 for every column j.
///
/// Solved through the Lagrange dual: U = A T^T (T T^T + diag(mu))^{-1}, with
/// mu >= 0 maximising the dual by projected Newton iterations until the KKT
/// residual falls below cfg.dual_tol. Columns whose coefficient row in T is
/// identically zero do not affect the objective; they keep the warm-start
/// column (zero without one). With a feasible warm start the returned
/// dictionary never has a larger objective than the warm start.
DictionaryResult dictionary_update(const Matrix& A, const Matrix& T, const SolverConfig& cfg,
                                   const Matrix* warm_start = nullptr);

// ---------------------------------------------------------------------------
// Least squares

/// argmin_S ||X - V S||_F^2 + ridge ||S||_F^2 via (V^T V + ridge I) S = V^T X.
/// Throws RankDeficient when ridge == 0 and V^T V is singular.
Matrix ridge_least_squares(const Matrix& V, const Matrix& X, double ridge);

/// ridge_least_squares with ridge 0, falling back to `ridge_floor` when the
/// Gram matrix condition number exceeds kSingularCondition.
Matrix least_squares_with_floor(const Matrix& V, const Matrix& X, double ridge_floor);

/// Condition number of a symmetric positive semi-definite matrix
/// (infinity when singular).
double spd_condition(const Matrix& gram);

}  // namespace froda
