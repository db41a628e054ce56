#include "froda/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace froda {

namespace {

// Lagrange dual of min ||A - U T||^2 s.t. ||U_j||^2 <= 1 restricted to the
// columns with non-zero coefficient rows. With K = A T^T and
// M = T T^T + diag(mu) + ridge I the primal minimiser is U = K M^{-1}, the
// dual value is -<U, K> - sum(mu), the gradient diag(U^T U) - 1 and the
// Hessian -2 (U^T U) .* M^{-1}. U is formed explicitly: going through
// K^T K squares the conditioning and stalls the gradient near 1e-9.
class DictionaryDual {
 public:
  DictionaryDual(Matrix gram, const Matrix& projected, double ridge)
      : gram_(std::move(gram)), projected_(&projected), ridge_(ridge) {}

  bool evaluate(const Vector& mu) {
    Matrix m = gram_;
    m.diagonal() += mu;
    m.diagonal().array() += ridge_;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return false;
    inverse_ = llt.solve(Matrix::Identity(m.rows(), m.cols()));
    inverse_ = 0.5 * (inverse_ + inverse_.transpose());
    primal_ = llt.solve(projected_->transpose()).transpose();
    utu_ = primal_.transpose() * primal_;
    gradient_ = utu_.diagonal().array() - 1.0;
    value_ = -primal_.cwiseProduct(*projected_).sum() - mu.sum();
    return std::isfinite(value_);
  }

  double value() const { return value_; }
  const Vector& gradient() const { return gradient_; }
  const Matrix& primal() const { return primal_; }
  Matrix hessian() const { return -2.0 * utu_.cwiseProduct(inverse_); }

 private:
  Matrix gram_;              // T T^T
  const Matrix* projected_;  // K = A T^T
  double ridge_;
  Matrix inverse_, primal_, utu_;
  Vector gradient_;
  double value_ = 0.0;
};

double kkt_residual(const Vector& mu, const Vector& grad) {
  double r = 0.0;
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    r = std::max(r, mu(j) > 0.0 ? std::abs(grad(j)) : std::max(grad(j), 0.0));
  }
  return r;
}

}  // namespace

DictionaryResult dictionary_update(const Matrix& A, const Matrix& T, const SolverConfig& cfg,
                                   const Matrix* warm_start) {
  cfg.validate();
  if (A.cols() != T.cols()) {
    throw DimensionMismatch("dictionary_update: A has " + std::to_string(A.cols()) + " columns, T has " +
                            std::to_string(T.cols()));
  }
  require_finite(A, "dictionary_update A");
  require_finite(T, "dictionary_update T");
  const Eigen::Index D = A.rows();
  const Eigen::Index k = T.rows();
  if (warm_start && (warm_start->rows() != D || warm_start->cols() != k)) {
    throw DimensionMismatch("dictionary_update: warm start shape mismatch");
  }

  DictionaryResult out;
  out.dictionary = warm_start ? *warm_start : Matrix::Zero(D, k);
  out.multipliers = Vector::Zero(k);

  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (T.row(j).squaredNorm() > 0.0) active.push_back(j);
  }
  const auto m = static_cast<Eigen::Index>(active.size());
  if (m > 0) {
    Matrix coeffs(m, T.cols());
    for (Eigen::Index a = 0; a < m; ++a) coeffs.row(a) = T.row(active[static_cast<std::size_t>(a)]);
    const Matrix projected = A * coeffs.transpose();  // K = A T^T, D x m
    Matrix gram = coeffs * coeffs.transpose();
    double ridge = 0.0;
    if (spd_condition(gram) > kSingularCondition) {
      ridge = cfg.ridge > 0.0 ? cfg.ridge : 1e-8;
      out.ridge_applied = true;
    }
    DictionaryDual dual(gram, projected, ridge);
    Vector mu = Vector::Zero(m);
    if (!dual.evaluate(mu)) throw Error("dictionary_update: dual evaluation failed");

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
      const Vector grad = dual.gradient();
      out.kkt_residual = kkt_residual(mu, grad);
      if (out.kkt_residual < cfg.dual_tol) break;
      ++out.newton_iterations;

      std::vector<Eigen::Index> free;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (mu(j) > 0.0 || grad(j) > 0.0) free.push_back(j);
      }
      const auto f = static_cast<Eigen::Index>(free.size());
      const Matrix hess = dual.hessian();
      Matrix neg_h(f, f);
      Vector g_free(f);
      for (Eigen::Index a = 0; a < f; ++a) {
        g_free(a) = grad(free[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < f; ++b) {
          neg_h(a, b) = -hess(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
        }
      }
      Eigen::LDLT<Matrix> ldlt(neg_h);
      Vector step_free = ldlt.solve(g_free);
      if (ldlt.info() != Eigen::Success || !step_free.allFinite() || step_free.dot(g_free) <= 0.0) {
        step_free = g_free;
      }
      Vector direction = Vector::Zero(m);
      for (Eigen::Index a = 0; a < f; ++a) direction(free[static_cast<std::size_t>(a)]) = step_free(a);

      const double current = dual.value();
      const double previous_kkt = out.kkt_residual;
      bool accepted = false;
      double scale = 1.0;
      for (int ls = 0; ls < 60; ++ls, scale *= 0.5) {
        const Vector trial = (mu + scale * direction).cwiseMax(0.0);
        DictionaryDual probe = dual;
        if (!probe.evaluate(trial)) continue;
        if (probe.value() >= current + 1e-4 * grad.dot(trial - mu)) {
          mu = trial;
          dual = std::move(probe);
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        out.kkt_residual = kkt_residual(mu, dual.gradient());
        break;
      }
      // Rounding floor: the dual value no longer moves and neither does KKT.
      if (dual.value() - current <= 1e-15 * std::abs(current) &&
          kkt_residual(mu, dual.gradient()) >= 0.5 * previous_kkt) {
        out.kkt_residual = kkt_residual(mu, dual.gradient());
        break;
      }
    }
    if (out.newton_iterations == cfg.max_iter) out.kkt_residual = kkt_residual(mu, dual.gradient());

    Matrix solved = dual.primal();
    for (Eigen::Index a = 0; a < m; ++a) {
      // Clip the O(dual_tol) excess of binding columns back onto the ball.
      const double norm = solved.col(a).norm();
      if (norm > 1.0) solved.col(a) /= norm;
      const auto j = active[static_cast<std::size_t>(a)];
      out.dictionary.col(j) = solved.col(a);
      out.multipliers(j) = mu(a);
    }
  }

  if (warm_start) {
    const bool feasible = (warm_start->colwise().norm().array() <= 1.0 + 1e-9).all();
    if (feasible && (A - out.dictionary * T).squaredNorm() > (A - *warm_start * T).squaredNorm()) {
      out.dictionary = *warm_start;
      out.kept_warm_start = true;
    }
  }
  return out;
}

}  // namespace froda
