#include "froda/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace froda {

namespace {

// Objective of one column expressed through the Gram quantities:
// ||x||^2 - 2 t^T c + t^T G t + lambda * sum_g ||t_g||.
double column_objective(const Matrix& gram, const Eigen::Ref<const Vector>& c, double x_norm2,
                        const Vector& t, const GroupSpec& groups, double lambda) {
  const double smooth = x_norm2 - 2.0 * t.dot(c) + t.dot(gram * t);
  return std::max(smooth, 0.0) + lambda * group_norm_sum(t, groups);
}

}  // namespace

double group_lasso_objective(const Matrix& X, const Matrix& B, const Matrix& T, const GroupSpec& groups,
                             double lambda) {
  double penalty = 0.0;
  for (Eigen::Index i = 0; i < T.cols(); ++i) penalty += group_norm_sum(T.col(i), groups);
  return (X - B * T).squaredNorm() + lambda * penalty;
}

GroupLassoResult group_lasso_solve(const Matrix& X, const Matrix& B, const GroupSpec& groups, double lambda,
                                   const SolverConfig& cfg, const Matrix* warm_start) {
  cfg.validate();
  if (B.cols() != groups.rows()) {
    throw DimensionMismatch("group_lasso_solve: dictionary has " + std::to_string(B.cols()) +
                            " columns but groups cover " + std::to_string(groups.rows()) + " rows");
  }
  if (X.rows() != B.rows()) throw DimensionMismatch("group_lasso_solve: X and B row counts differ");
  if (!(lambda >= 0.0)) throw InvalidArgument("group_lasso_solve: lambda must be >= 0");
  require_finite(X, "group_lasso_solve X");
  require_finite(B, "group_lasso_solve B");
  if (warm_start && (warm_start->rows() != B.cols() || warm_start->cols() != X.cols())) {
    throw DimensionMismatch("group_lasso_solve: warm start shape mismatch");
  }

  const Eigen::Index k = B.cols();
  const Eigen::Index n = X.cols();
  GroupLassoResult out;
  out.coefficients = Matrix::Zero(k, n);

  const Matrix gram = B.transpose() * B;
  const double sigma2 =
      k > 0 ? Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff() : 0.0;
  if (!(sigma2 > 0.0)) {
    out.zero_dictionary = true;
    return out;
  }
  const double lipschitz = 2.0 * sigma2;
  const double step = 1.0 / lipschitz;
  const double tau = lambda * step;
  const Matrix correlations = B.transpose() * X;

  Vector x(k), y(k), x_next(k), grad(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = correlations.col(i);
    const double x_norm2 = X.col(i).squaredNorm();
    if (warm_start) {
      x = warm_start->col(i);
    } else {
      x.setZero();
    }
    double fx = column_objective(gram, c, x_norm2, x, groups, lambda);
    y = x;
    double momentum = 1.0;
    int iter = 0;
    while (iter < cfg.max_iter) {
      ++iter;
      grad.noalias() = 2.0 * (gram * y - c);
      x_next = y - step * grad;
      block_soft_threshold_inplace(x_next, groups, tau);
      double f_next = column_objective(gram, c, x_norm2, x_next, groups, lambda);
      if (f_next > fx) {
        // Momentum overshot: restart with a plain proximal step from x.
        grad.noalias() = 2.0 * (gram * x - c);
        x_next = x - step * grad;
        block_soft_threshold_inplace(x_next, groups, tau);
        f_next = column_objective(gram, c, x_norm2, x_next, groups, lambda);
        momentum = 1.0;
        if (f_next > fx) break;  // round-off floor reached at x
        y = x_next;
      } else {
        const double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        y = x_next + ((momentum - 1.0) / momentum_next) * (x_next - x);
        momentum = momentum_next;
      }
      const double change = fx - f_next;
      x.swap(x_next);
      const double scale = std::max(fx, 1e-300);
      fx = f_next;
      if (change <= cfg.tol * scale) break;
    }
    out.coefficients.col(i) = x;
    out.max_iterations = std::max(out.max_iterations, iter);
  }
  return out;
}

}  // namespace froda
