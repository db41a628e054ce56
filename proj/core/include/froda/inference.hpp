#pragma once

// Known/unknown separation from coefficient ratios and (C+1)-way
// classification of the targets.

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

#include "froda/model.hpp"

namespace froda {

/// Per-target known/unknown decision. A target is unknown iff
/// ||T_i^v|| / ||T_i^u|| <= epsilon; the ratio is +inf when only the private
/// part vanishes, and 0 (flagged degenerate) when both vanish.
struct OpenSetAssignment {
  std::vector<bool> is_unknown;
  std::vector<double> ratio;
  std::vector<bool> degenerate;
  double epsilon = 0.0;

  std::size_t size() const { return ratio.size(); }
  std::size_t unknown_count() const;
};

OpenSetAssignment assign_known_unknown(const FactorizedModel& model, double epsilon);

/// The same rule applied to any 2d x n coefficient matrix split at row d.
OpenSetAssignment assign_from_coefficients(const Matrix& T, Eigen::Index d, double epsilon);

enum class SampleRole { Source, Target };

/// Full target coefficients (2d x n) of samples given in the model's input
/// feature space, by a fresh group-lasso solve against B = [V, U].
Matrix encode_targets(const FactorizedModel& model, const Matrix& X);

/// Shared-subspace coefficients (d x n) of samples in the model's input
/// feature space. The stored preprocessing is applied first. Source samples
/// are coded by least squares against V, targets by their T^v from a
/// group-lasso solve; inputs equal to the training matrices return the
/// coefficients learnt by the fit.
Matrix embed_shared(const FactorizedModel& model, const Matrix& X, SampleRole role);

enum class ClassifierKind { Knn, LearntW, LinearSvmOvo };
enum class FeatureSpace { Embedding, Raw };

std::string_view to_string(ClassifierKind k);
/// Accepts "knn", "learnt_w" and "svm".
ClassifierKind parse_classifier(std::string_view name);

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::Knn;
  int k = 3;
  double svm_c = 1.0;
  int svm_epochs = 1000;
  std::uint64_t seed = 0;
  /// Embedding: shared coefficients (S / S'^v for sources, T^v for targets).
  /// Raw: the model-space features themselves.
  FeatureSpace space = FeatureSpace::Embedding;

  void validate() const;
};

/// k nearest neighbours under the Euclidean distance. Distance ties go to the
/// lower training index; vote ties to the smaller summed distance, then the
/// smaller label.
class KnnClassifier {
 public:
  KnnClassifier(Matrix points, std::vector<int> labels, int k);

  /// Only training points with label <= max_label take part.
  int predict(const Eigen::Ref<const Vector>& x, int max_label) const;

 private:
  Matrix points_;
  std::vector<int> labels_;
  int k_;
};

/// Binary linear classifier w^T x + b trained on the squared hinge loss
/// 0.5 ||w||^2 + c sum_i max(0, 1 - y_i (w^T x_i + b))^2 by full-batch
/// accelerated gradient descent with a fixed step 1/L and a fixed epoch count.
struct LinearSvm {
  Vector w;
  double bias = 0.0;

  static LinearSvm train(const Matrix& X, const std::vector<double>& y, double c, int epochs);
  double decision(const Eigen::Ref<const Vector>& x) const { return w.dot(x) + bias; }
};

/// One-vs-one voting over every pair of classes present in training. Each
/// prediction restricted to labels <= max_label receives one vote per
/// eligible pair; ties go to the smallest class index.
class OvoSvmClassifier {
 public:
  OvoSvmClassifier(const Matrix& points, const std::vector<int>& labels, double c, int epochs);

  int predict(const Eigen::Ref<const Vector>& x, int max_label) const;
  /// Votes indexed by class - 1 (length = largest training label).
  std::vector<int> votes(const Eigen::Ref<const Vector>& x, int max_label) const;

 private:
  struct Pair {
    int a, b;  // +1 side votes a, -1 side votes b
    LinearSvm svm;
  };
  std::vector<Pair> pairs_;
  int max_class_ = 0;
};

/// argmax over the rows of a learnt linear map.
class LinearMapClassifier {
 public:
  explicit LinearMapClassifier(Matrix weights) : weights_(std::move(weights)) {}
  int predict(const Eigen::Ref<const Vector>& x, int max_label) const;
  const Matrix& weights() const { return weights_; }

 private:
  Matrix weights_;
};

class OpenSetClassifier {
 public:
  using Impl = std::variant<KnnClassifier, OvoSvmClassifier, LinearMapClassifier>;

  OpenSetClassifier(Impl impl, int classes, ClassifierSpec spec)
      : impl_(std::move(impl)), classes_(classes), spec_(spec) {}

  /// Class in 1..max_label for one feature column.
  int predict(const Eigen::Ref<const Vector>& x, int max_label) const;
  int classes() const { return classes_; }
  const ClassifierSpec& spec() const { return spec_; }
  const Impl& impl() const { return impl_; }

 private:
  Impl impl_;
  int classes_;
  ClassifierSpec spec_;
};

/// Trains the (C+1)-way classifier on the model's source samples (labels
/// 1..C, C+1 for unknown sources of dfroda_u) augmented with the targets the
/// assignment marks unknown, labelled C+1. With no unknown-assigned targets
/// the classifier is effectively C-way; C+1 still comes from the ratio rule.
OpenSetClassifier train_open_classifier(const FactorizedModel& model, const OpenSetAssignment& assignment,
                                        const ClassifierSpec& spec);

/// As above with explicitly supplied source samples (model input space) and
/// labels instead of the ones stored in the model.
OpenSetClassifier train_open_classifier(const FactorizedModel& model, const Matrix& Xs,
                                        const std::vector<int>& source_labels,
                                        const OpenSetAssignment& assignment, const ClassifierSpec& spec);

/// Labels in 1..C+1 for the model's training targets: unknown-assigned
/// targets get C+1, the others the classifier's choice among 1..C.
std::vector<int> predict(const FactorizedModel& model, const OpenSetClassifier& classifier,
                         const OpenSetAssignment& assignment);

/// As above for target samples given in the model input space.
std::vector<int> predict(const FactorizedModel& model, const OpenSetClassifier& classifier,
                         const OpenSetAssignment& assignment, const Matrix& Xt);

}  // namespace froda
