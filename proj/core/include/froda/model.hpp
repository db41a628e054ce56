#pragma once

// Block-coordinate fitting of the factorised shared/private subspace models.
//
// Three variants share one alternating scheme:
//   froda     ||Xt - B T||^2 + a ||Xs - V S||^2 + l1 sum_i (||T_i^v|| + ||T_i^u||)
//   dfroda    froda + b ||L - W S||^2
//   dfroda_u  ||Xt - B T||^2 + a ||Xs' - B' S'||^2 + b ||L - W' S'||^2
//             + l1 sum_i (||T_i^v|| + ||T_i^u||) + l2 sum_i (||S'_i^v|| + ||S'_i^u||)
// with B = [V, U], B' = [V, U'] and every dictionary column norm <= 1.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "froda/linalg.hpp"

namespace froda {

enum class Variant { Froda, DFroda, DFrodaU };

std::string_view to_string(Variant v);
/// Accepts "froda", "dfroda" and "dfroda_u".
Variant parse_variant(std::string_view name);

struct HyperParams {
  double alpha = 0.1;     ///< weight of the source reconstruction
  double beta = 0.01;     ///< weight of the classification term
  double lambda1 = 0.001; ///< target group sparsity
  double lambda2 = 0.001; ///< source group sparsity (dfroda_u)
  double epsilon = 0.2;   ///< known/unknown ratio threshold
  Eigen::Index d = 0;     ///< subspace dimension, 0 = subspace disagreement measure
  int outer_max_iter = 200;
  double outer_tol = 1e-6;
  double pca_variance = 0.99;
  SolverConfig inner{};

  void validate() const;
};

/// One-hot label matrix, classes x samples, built from 1-based class ids.
class LabelMatrix {
 public:
  static LabelMatrix from_labels(std::span<const int> labels, int classes);

  const Matrix& onehot() const { return onehot_; }
  const std::vector<int>& labels() const { return labels_; }
  int classes() const { return static_cast<int>(onehot_.rows()); }
  Eigen::Index samples() const { return onehot_.cols(); }

 private:
  Matrix onehot_;
  std::vector<int> labels_;
};

/// Learnt subspaces, coefficients and fit diagnostics. Immutable after fit.
struct FactorizedModel {
  Variant variant = Variant::Froda;
  HyperParams hp{};
  Eigen::Index d = 0;
  int classes = 0;  ///< C, known classes (0 when fitted without labels)

  Matrix V;  ///< shared, D x d
  Matrix U;  ///< target private, D x d
  std::optional<Matrix> U_src;  ///< source private (dfroda_u)
  Matrix S;  ///< d x n_s, or 2d x n_s' grouped v/u (dfroda_u)
  Matrix T;  ///< 2d x n_t grouped v/u
  std::optional<Matrix> W;  ///< C x d (dfroda) or (C+1) x 2d (dfroda_u)

  std::vector<double> objective_trace;  ///< after initialisation, then once per outer iteration
  int n_outer_iters = 0;
  double outer_loop_seconds = 0.0;

  std::optional<JointProjection> preprocessing;
  Matrix source_data;  ///< source samples in model space (Xs, or [Xs_known, Xs_unknown])
  Matrix target_data;
  std::vector<int> source_labels;  ///< 1-based; C+1 marks unknown source samples

  GroupSpec groups() const { return GroupSpec::uniform(2, d); }
  Eigen::Index source_count() const { return S.cols(); }
  Eigen::Index target_count() const { return T.cols(); }
  /// Shared-subspace coefficients of the training targets, T^v.
  Matrix shared_target() const { return T.topRows(d); }
  /// Shared-subspace coefficients of the training sources (S, or S'^v).
  Matrix shared_source() const { return S.topRows(d); }
};

/// Names the block update after which an observer is invoked.
enum class Block { Init, U, USource, V, T, S, W };
std::string_view to_string(Block b);

struct FitOptions {
  /// Called after initialisation and after every block update with the
  /// variant's full objective. Costs one objective evaluation per block.
  std::function<void(Block, int iteration, double objective)> observer;
  /// Called alongside the observer with the model as the block left it.
  std::function<void(Block, const FactorizedModel&)> inspector;
  /// Called once per outer iteration with the objective at its end.
  std::function<void(int iteration, double objective)> on_iteration;
};

double objective_froda(const Matrix& V, const Matrix& U, const Matrix& S, const Matrix& T, const Matrix& Xs,
                       const Matrix& Xt, const HyperParams& hp);
double objective_froda(const FactorizedModel& model, const Matrix& Xs, const Matrix& Xt, const HyperParams& hp);

/// froda objective plus beta ||L - W S||^2.
double objective_dfroda(const FactorizedModel& model, const Matrix& Xs, const Matrix& Xt, const Matrix& onehot,
                        const HyperParams& hp);

/// Full dfroda_u objective; `Xs_all` is [Xs_known, Xs_unknown] and `onehot`
/// has C+1 rows.
double objective_dfroda_u(const FactorizedModel& model, const Matrix& Xs_all, const Matrix& Xt,
                          const Matrix& onehot, const HyperParams& hp);

/// The objective of whichever variant `model` was fitted with, on its own
/// training data.
double model_objective(const FactorizedModel& model);

FactorizedModel fit_froda(const Matrix& Xs, const Matrix& Xt, const HyperParams& hp, const FitOptions& opts = {});

FactorizedModel fit_dfroda(const Matrix& Xs, const Matrix& Xt, const LabelMatrix& labels, const HyperParams& hp,
                           const FitOptions& opts = {});

/// `labels_with_unknown` covers [Xs_known, Xs_unknown] column-wise with C+1
/// classes; every unknown source sample must carry class C+1.
FactorizedModel fit_dfroda_u(const Matrix& Xs_known, const Matrix& Xs_unknown, const Matrix& Xt,
                             const LabelMatrix& labels_with_unknown, const HyperParams& hp,
                             const FitOptions& opts = {});

struct FitInputs {
  Matrix source;                      ///< known-class source samples, original feature space
  Matrix target;
  std::vector<int> source_labels;     ///< 1..C, required for dfroda and dfroda_u
  int classes = 0;                    ///< C; inferred from labels when 0
  std::optional<Matrix> source_unknown;  ///< dfroda_u only
};

/// Joint PCA at hp.pca_variance, subspace dimension by the disagreement
/// measure when hp.d == 0, then the matching fit. The projection is stored
/// in the model for encoding new samples.
FactorizedModel fit_auto(const FitInputs& inputs, Variant variant, const HyperParams& hp,
                         const FitOptions& opts = {});

/// Largest d the given variant admits in a D-dimensional model space
/// (floor(D/2), or floor(D/3) for dfroda_u).
Eigen::Index max_subspace_dim(Variant variant, Eigen::Index D);

}  // namespace froda
