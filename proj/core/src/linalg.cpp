#include "froda/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace froda {

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (!std::isfinite(m(i, j))) {
          throw InvalidArgument(std::string(what) + ": non-finite value at row " +
                                std::to_string(i) + ", column " + std::to_string(j));
        }
      }
    }
  }
}

void require_features(const Matrix& m, std::string_view what) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw InvalidArgument(std::string(what) + ": feature matrix must have at least one row and one column");
  }
  require_finite(m, what);
}

// ---------------------------------------------------------------------------

GroupSpec::GroupSpec(std::vector<RowRange> groups) : groups_(std::move(groups)) {
  if (groups_.empty()) throw InvalidArgument("GroupSpec: at least one group is required");
  Eigen::Index expected = 0;
  for (const auto& g : groups_) {
    if (g.begin != expected) {
      throw InvalidArgument("GroupSpec: groups must be contiguous, ordered and start at row 0");
    }
    if (g.end <= g.begin) throw InvalidArgument("GroupSpec: empty group");
    expected = g.end;
  }
}

GroupSpec GroupSpec::uniform(Eigen::Index count, Eigen::Index width) {
  if (count < 1 || width < 1) throw InvalidArgument("GroupSpec::uniform: count and width must be >= 1");
  std::vector<RowRange> groups;
  groups.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index g = 0; g < count; ++g) groups.push_back({g * width, (g + 1) * width});
  return GroupSpec(std::move(groups));
}

void SolverConfig::validate() const {
  if (!(tol > 0.0)) throw InvalidArgument("SolverConfig: tol must be > 0");
  if (!(dual_tol > 0.0)) throw InvalidArgument("SolverConfig: dual_tol must be > 0");
  if (max_iter < 1) throw InvalidArgument("SolverConfig: max_iter must be >= 1");
  if (!(ridge >= 0.0)) throw InvalidArgument("SolverConfig: ridge must be >= 0");
}

// ---------------------------------------------------------------------------

void normalize_signs(Matrix& basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < basis.rows(); ++i) {
      const double a = std::abs(basis(i, j));
      // Strict comparison keeps the first entry on near ties; the 1e-12
      // slack stops round-off from deciding between equal magnitudes.
      if (a > best_abs + 1e-12) {
        best_abs = a;
        best = i;
      }
    }
    if (basis(best, j) < 0.0) basis.col(j) *= -1.0;
  }
}

namespace {

struct CenteredSvd {
  Matrix left;    // D x r, r = numerical rank
  Vector sigma;   // r
  Vector mean;
  Eigen::Index samples = 0;
};

CenteredSvd centered_svd(const Matrix& X, bool center) {
  require_features(X, "pca");
  CenteredSvd out;
  out.mean = center ? Vector(X.rowwise().mean()) : Vector::Zero(X.rows());
  out.samples = X.cols();
  const Matrix centered = X.colwise() - out.mean;
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  if (!(smax > 0.0)) throw RankDeficient("pca: zero variance in data", 0);
  const double cutoff = smax * static_cast<double>(std::max(X.rows(), X.cols())) *
                        std::numeric_limits<double>::epsilon();
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  out.left = svd.matrixU().leftCols(rank);
  out.sigma = s.head(rank);
  return out;
}

}  // namespace

PcaResult pca_basis(const Matrix& X, const PcaRequest& request) {
  if (request.dim.has_value() == request.variance_fraction.has_value()) {
    throw InvalidArgument("pca: specify exactly one of dim or variance_fraction");
  }
  if (request.dim) {
    const Eigen::Index d = *request.dim;
    if (d < 1 || d > std::min(X.rows(), X.cols())) {
      throw InvalidArgument("pca: dim must lie in [1, min(D, n)] = [1, " +
                            std::to_string(std::min(X.rows(), X.cols())) + "]");
    }
  } else {
    const double f = *request.variance_fraction;
    if (!(f > 0.0 && f <= 1.0)) throw InvalidArgument("pca: variance_fraction must lie in (0, 1]");
  }

  const CenteredSvd svd = centered_svd(X, request.center);
  const Eigen::Index rank = svd.sigma.size();
  Eigen::Index keep = 0;
  if (request.dim) {
    keep = *request.dim;
    if (keep > rank) {
      throw RankDeficient("pca: requested " + std::to_string(keep) +
                              " components but the centred data has rank " + std::to_string(rank),
                          rank);
    }
  } else {
    const Vector energy = svd.sigma.array().square();
    double total = 0.0;
    for (Eigen::Index i = 0; i < rank; ++i) total += energy(i);
    const double target = *request.variance_fraction * total;
    double cumulative = 0.0;
    keep = rank;
    for (Eigen::Index i = 0; i < rank; ++i) {
      cumulative += energy(i);
      if (cumulative >= target) {
        keep = i + 1;
        break;
      }
    }
  }

  PcaResult out;
  out.basis = svd.left.leftCols(keep);
  normalize_signs(out.basis);
  out.mean = svd.mean;
  out.singular_values = svd.sigma;
  const double dof = static_cast<double>(std::max<Eigen::Index>(svd.samples - 1, 1));
  out.variances = svd.sigma.head(keep).array().square() / dof;
  return out;
}

Matrix padded_principal_directions(const Matrix& X, Eigen::Index dim) {
  if (dim < 1 || dim > X.rows()) throw InvalidArgument("pca: dim must lie in [1, D]");
  const CenteredSvd svd = centered_svd(X, true);
  const Eigen::Index rank = svd.sigma.size();
  if (dim <= rank) {
    Matrix basis = svd.left.leftCols(dim);
    normalize_signs(basis);
    return basis;
  }
  Matrix basis(X.rows(), dim);
  basis.leftCols(rank) = svd.left;
  basis.rightCols(dim - rank) = truncated_null_space(svd.left, dim - rank);
  normalize_signs(basis);
  return basis;
}

Matrix JointProjection::apply(const Matrix& X) const {
  if (X.rows() != basis.rows()) {
    throw DimensionMismatch("projection: expected " + std::to_string(basis.rows()) +
                            " feature rows, got " + std::to_string(X.rows()));
  }
  return basis.transpose() * (X.colwise() - mean);
}

JointReduction joint_pca_reduce(const Matrix& Xs, const Matrix& Xt, double variance_fraction) {
  if (Xs.rows() != Xt.rows()) {
    throw DimensionMismatch("joint_pca_reduce: source has " + std::to_string(Xs.rows()) +
                            " features, target has " + std::to_string(Xt.rows()));
  }
  require_features(Xs, "source");
  require_features(Xt, "target");
  Matrix joint(Xs.rows(), Xs.cols() + Xt.cols());
  joint << Xs, Xt;
  PcaResult pca = pca_basis(joint, PcaRequest::fraction(variance_fraction).uncentered());
  JointReduction out;
  out.projection.basis = std::move(pca.basis);
  out.projection.mean = std::move(pca.mean);
  out.source = out.projection.apply(Xs);
  out.target = out.projection.apply(Xt);
  return out;
}

Matrix truncated_null_space(const Matrix& V, Eigen::Index d) {
  const Eigen::Index D = V.rows();
  if (d < 1) throw InvalidArgument("truncated_null_space: d must be >= 1");
  Eigen::JacobiSVD<Matrix> svd(V, Eigen::ComputeFullU);
  const Vector& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  const double cutoff = smax * static_cast<double>(std::max(V.rows(), V.cols())) *
                        std::numeric_limits<double>::epsilon();
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  if (d > D - rank) {
    throw RankDeficient("truncated_null_space: requested " + std::to_string(d) +
                            " directions but the complement has dimension " + std::to_string(D - rank),
                        D - rank);
  }
  Matrix out = svd.matrixU().middleCols(rank, d);
  normalize_signs(out);
  return out;
}

Vector principal_angles(const Matrix& A, const Matrix& B) {
  if (A.rows() != B.rows()) throw DimensionMismatch("principal_angles: ambient dimensions differ");
  Eigen::JacobiSVD<Matrix> svd(A.transpose() * B);
  const Vector& cosines = svd.singularValues();  // descending
  Vector angles(cosines.size());
  for (Eigen::Index i = 0; i < cosines.size(); ++i) {
    angles(i) = std::acos(std::clamp(cosines(i), 0.0, 1.0));
  }
  return angles;
}

Vector subspace_disagreement_curve(const Matrix& Xs, const Matrix& Xt, Eigen::Index d_max) {
  if (Xs.rows() != Xt.rows()) throw DimensionMismatch("subspace_disagreement: feature dimensions differ");
  if (d_max < 1 || d_max > Xs.rows()) throw InvalidArgument("subspace_disagreement: d_max must lie in [1, D]");
  Matrix joint(Xs.rows(), Xs.cols() + Xt.cols());
  joint << Xs, Xt;
  const Matrix ps = padded_principal_directions(Xs, d_max);
  const Matrix pt = padded_principal_directions(Xt, d_max);
  const Matrix pst = padded_principal_directions(joint, d_max);
  Vector curve(d_max);
  for (Eigen::Index d = 1; d <= d_max; ++d) {
    const double a = principal_angles(ps.leftCols(d), pst.leftCols(d)).maxCoeff();
    const double b = principal_angles(pt.leftCols(d), pst.leftCols(d)).maxCoeff();
    curve(d - 1) = 0.5 * (std::sin(a) + std::sin(b));
  }
  return curve;
}

Eigen::Index subspace_disagreement_dim(const Matrix& Xs, const Matrix& Xt, Eigen::Index d_max) {
  const Vector curve = subspace_disagreement_curve(Xs, Xt, d_max);
  constexpr double kThreshold = 1.0 - 1e-6;
  for (Eigen::Index d = 1; d <= d_max; ++d) {
    if (curve(d - 1) >= kThreshold) return std::clamp<Eigen::Index>(d - 1, 1, d_max);
  }
  return d_max;
}

// ---------------------------------------------------------------------------

void block_soft_threshold_inplace(Eigen::Ref<Vector> t, const GroupSpec& groups, double tau) {
  for (const auto& g : groups.groups()) {
    auto block = t.segment(g.begin, g.size());
    const double norm = block.norm();
    if (norm <= tau || norm == 0.0) {
      block.setZero();
    } else {
      block *= 1.0 - tau / norm;
    }
  }
}

Vector block_soft_threshold(const Vector& t, const GroupSpec& groups, double tau) {
  if (t.size() != groups.rows()) throw DimensionMismatch("block_soft_threshold: vector length differs from group rows");
  if (!(tau >= 0.0)) throw InvalidArgument("block_soft_threshold: tau must be >= 0");
  Vector out = t;
  if (tau == 0.0) return out;
  block_soft_threshold_inplace(out, groups, tau);
  return out;
}

double group_norm_sum(const Eigen::Ref<const Vector>& t, const GroupSpec& groups) {
  double s = 0.0;
  for (const auto& g : groups.groups()) s += t.segment(g.begin, g.size()).norm();
  return s;
}

// ---------------------------------------------------------------------------

double spd_condition(const Matrix& gram) {
  if (gram.rows() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const Vector& ev = eig.eigenvalues();  // ascending
  const double hi = ev(ev.size() - 1);
  const double lo = ev(0);
  if (!(hi > 0.0) || !(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

Matrix ridge_least_squares(const Matrix& V, const Matrix& X, double ridge) {
  if (V.rows() != X.rows()) {
    throw DimensionMismatch("ridge_least_squares: V has " + std::to_string(V.rows()) + " rows, X has " +
                            std::to_string(X.rows()));
  }
  if (!(ridge >= 0.0)) throw InvalidArgument("ridge_least_squares: ridge must be >= 0");
  Matrix gram = V.transpose() * V;
  if (ridge == 0.0 && spd_condition(gram) > kSingularCondition) {
    throw RankDeficient("ridge_least_squares: normal equations are singular; use a positive ridge", 0);
  }
  gram.diagonal().array() += ridge;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw RankDeficient("ridge_least_squares: normal equations are singular; use a positive ridge", 0);
  }
  return llt.solve(V.transpose() * X);
}

Matrix least_squares_with_floor(const Matrix& V, const Matrix& X, double ridge_floor) {
  const Matrix gram = V.transpose() * V;
  const double ridge = spd_condition(gram) > kSingularCondition ? ridge_floor : 0.0;
  return ridge_least_squares(V, X, ridge);
}

}  // namespace froda
