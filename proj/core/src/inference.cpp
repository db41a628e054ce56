#include "froda/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>

namespace froda {

std::size_t OpenSetAssignment::unknown_count() const {
  return static_cast<std::size_t>(std::count(is_unknown.begin(), is_unknown.end(), true));
}

OpenSetAssignment assign_from_coefficients(const Matrix& T, Eigen::Index d, double epsilon) {
  if (T.rows() != 2 * d) throw DimensionMismatch("assignment: coefficient matrix must have 2d rows");
  if (!(epsilon >= 0.0)) throw InvalidArgument("assignment: epsilon must be >= 0");
  OpenSetAssignment out;
  out.epsilon = epsilon;
  const auto n = static_cast<std::size_t>(T.cols());
  out.is_unknown.resize(n);
  out.ratio.resize(n);
  out.degenerate.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto col = T.col(static_cast<Eigen::Index>(i));
    const double shared = col.head(d).norm();
    const double priv = col.tail(d).norm();
    double ratio;
    if (priv == 0.0) {
      ratio = shared > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      out.degenerate[i] = shared == 0.0;
    } else {
      ratio = shared / priv;
    }
    out.ratio[i] = ratio;
    out.is_unknown[i] = ratio <= epsilon;
  }
  return out;
}

OpenSetAssignment assign_known_unknown(const FactorizedModel& model, double epsilon) {
  return assign_from_coefficients(model.T, model.d, epsilon);
}

// ---------------------------------------------------------------------------

namespace {

Matrix to_model_space(const FactorizedModel& model, const Matrix& X) {
  if (model.preprocessing) return model.preprocessing->apply(X);
  if (X.rows() != model.V.rows()) {
    throw DimensionMismatch("expected " + std::to_string(model.V.rows()) + " feature rows, got " +
                            std::to_string(X.rows()));
  }
  return X;
}

bool same_samples(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.size() == 0) return false;
  const double scale = 1.0 + b.cwiseAbs().maxCoeff();
  return (a - b).cwiseAbs().maxCoeff() <= 1e-10 * scale;
}

}  // namespace

Matrix encode_targets(const FactorizedModel& model, const Matrix& X) {
  const Matrix Xp = to_model_space(model, X);
  if (Xp.cols() == 0) return Matrix(2 * model.d, 0);
  Matrix B(model.V.rows(), 2 * model.d);
  B << model.V, model.U;
  return group_lasso_solve(Xp, B, model.groups(), model.hp.lambda1, model.hp.inner).coefficients;
}

Matrix embed_shared(const FactorizedModel& model, const Matrix& X, SampleRole role) {
  const Matrix Xp = to_model_space(model, X);
  if (Xp.cols() == 0) return Matrix(model.d, 0);
  require_finite(Xp, "embed_shared");
  if (role == SampleRole::Source) {
    if (same_samples(Xp, model.source_data)) return model.shared_source();
    return least_squares_with_floor(model.V, Xp, model.hp.inner.ridge);
  }
  if (same_samples(Xp, model.target_data)) return model.shared_target();
  Matrix B(model.V.rows(), 2 * model.d);
  B << model.V, model.U;
  return group_lasso_solve(Xp, B, model.groups(), model.hp.lambda1, model.hp.inner).coefficients.topRows(model.d);
}

// ---------------------------------------------------------------------------

std::string_view to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::Knn: return "knn";
    case ClassifierKind::LearntW: return "learnt_w";
    case ClassifierKind::LinearSvmOvo: return "svm";
  }
  return "?";
}

ClassifierKind parse_classifier(std::string_view name) {
  if (name == "knn") return ClassifierKind::Knn;
  if (name == "learnt_w") return ClassifierKind::LearntW;
  if (name == "svm") return ClassifierKind::LinearSvmOvo;
  throw InvalidArgument("unknown classifier '" + std::string(name) + "' (expected knn, learnt_w or svm)");
}

void ClassifierSpec::validate() const {
  if (k < 1) throw InvalidArgument("classifier: k must be >= 1");
  if (!(svm_c > 0.0)) throw InvalidArgument("classifier: svm_c must be > 0");
  if (svm_epochs < 1) throw InvalidArgument("classifier: svm_epochs must be >= 1");
}

KnnClassifier::KnnClassifier(Matrix points, std::vector<int> labels, int k)
    : points_(std::move(points)), labels_(std::move(labels)), k_(k) {
  if (static_cast<Eigen::Index>(labels_.size()) != points_.cols()) {
    throw DimensionMismatch("knn: label count differs from point count");
  }
  if (k_ < 1) throw InvalidArgument("knn: k must be >= 1");
}

int KnnClassifier::predict(const Eigen::Ref<const Vector>& x, int max_label) const {
  std::vector<std::pair<double, Eigen::Index>> candidates;
  candidates.reserve(labels_.size());
  for (Eigen::Index i = 0; i < points_.cols(); ++i) {
    if (labels_[static_cast<std::size_t>(i)] > max_label) continue;
    candidates.emplace_back((points_.col(i) - x).squaredNorm(), i);
  }
  if (candidates.empty()) throw InvalidArgument("knn: no training point with an eligible label");
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(k_), candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end());

  struct Tally {
    int votes = 0;
    double distance = 0.0;
  };
  std::map<int, Tally> tally;
  for (std::size_t j = 0; j < k; ++j) {
    auto& t = tally[labels_[static_cast<std::size_t>(candidates[j].second)]];
    ++t.votes;
    t.distance += std::sqrt(candidates[j].first);
  }
  int best = 0;
  Tally best_tally{-1, 0.0};
  for (const auto& [label, t] : tally) {  // ascending labels
    if (t.votes > best_tally.votes || (t.votes == best_tally.votes && t.distance < best_tally.distance)) {
      best = label;
      best_tally = t;
    }
  }
  return best;
}

LinearSvm LinearSvm::train(const Matrix& X, const std::vector<double>& y, double c, int epochs) {
  const Eigen::Index p = X.rows();
  const Eigen::Index n = X.cols();
  Matrix Z(p + 1, n);
  Z.topRows(p) = X;
  Z.row(p).setOnes();
  const Vector labels = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  const double zmax =
      Eigen::SelfAdjointEigenSolver<Matrix>(Z * Z.transpose(), Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double step = 1.0 / (1.0 + 2.0 * c * zmax);

  auto gradient = [&](const Vector& theta) {
    const Vector margins = (Z.transpose() * theta).cwiseProduct(labels);
    const Vector slack = (1.0 - margins.array()).max(0.0).matrix();
    Vector g = -2.0 * c * (Z * slack.cwiseProduct(labels));
    g.head(p) += theta.head(p);
    return g;
  };

  Vector theta = Vector::Zero(p + 1);
  Vector previous = theta;
  for (int k = 1; k <= epochs; ++k) {
    const Vector look = theta + (static_cast<double>(k - 1) / static_cast<double>(k + 2)) * (theta - previous);
    previous = theta;
    theta = look - step * gradient(look);
  }
  LinearSvm out;
  out.w = theta.head(p);
  out.bias = theta(p);
  return out;
}

OvoSvmClassifier::OvoSvmClassifier(const Matrix& points, const std::vector<int>& labels, double c, int epochs) {
  if (static_cast<Eigen::Index>(labels.size()) != points.cols()) {
    throw DimensionMismatch("svm: label count differs from point count");
  }
  const std::set<int> present(labels.begin(), labels.end());
  if (present.empty()) throw InvalidArgument("svm: empty training set");
  max_class_ = *present.rbegin();
  for (auto a = present.begin(); a != present.end(); ++a) {
    for (auto b = std::next(a); b != present.end(); ++b) {
      std::vector<Eigen::Index> idx;
      std::vector<double> y;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == *a || labels[i] == *b) {
          idx.push_back(static_cast<Eigen::Index>(i));
          y.push_back(labels[i] == *a ? 1.0 : -1.0);
        }
      }
      Matrix X(points.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) X.col(static_cast<Eigen::Index>(j)) = points.col(idx[j]);
      pairs_.push_back({*a, *b, LinearSvm::train(X, y, c, epochs)});
    }
  }
  if (pairs_.empty()) {
    // A single class: every prediction is that class.
    pairs_.push_back({max_class_, max_class_, LinearSvm{Vector::Zero(points.rows()), 1.0}});
  }
}

std::vector<int> OvoSvmClassifier::votes(const Eigen::Ref<const Vector>& x, int max_label) const {
  std::vector<int> out(static_cast<std::size_t>(max_class_), 0);
  for (const auto& pair : pairs_) {
    if (pair.a > max_label || pair.b > max_label) continue;
    const int winner = pair.svm.decision(x) >= 0.0 ? pair.a : pair.b;
    ++out[static_cast<std::size_t>(winner - 1)];
    if (pair.a == pair.b) break;
  }
  return out;
}

int OvoSvmClassifier::predict(const Eigen::Ref<const Vector>& x, int max_label) const {
  const auto v = votes(x, max_label);
  int best = 0;
  int best_votes = -1;
  for (std::size_t i = 0; i < v.size() && static_cast<int>(i) < max_label; ++i) {
    if (v[i] > best_votes) {
      best_votes = v[i];
      best = static_cast<int>(i) + 1;
    }
  }
  if (best_votes <= 0) {
    // Fewer than two eligible classes: fall back to the single eligible one.
    for (const auto& pair : pairs_) {
      if (pair.a <= max_label) return pair.a;
      if (pair.b <= max_label) return pair.b;
    }
    throw InvalidArgument("svm: no eligible class");
  }
  return best;
}

int LinearMapClassifier::predict(const Eigen::Ref<const Vector>& x, int max_label) const {
  if (x.size() != weights_.cols()) throw DimensionMismatch("learnt_w: feature dimension mismatch");
  const Vector scores = weights_ * x;
  const auto rows = std::min<Eigen::Index>(max_label, scores.size());
  Eigen::Index best = 0;
  for (Eigen::Index r = 1; r < rows; ++r) {
    if (scores(r) > scores(best)) best = r;
  }
  return static_cast<int>(best) + 1;
}

int OpenSetClassifier::predict(const Eigen::Ref<const Vector>& x, int max_label) const {
  return std::visit([&](const auto& c) { return c.predict(x, max_label); }, impl_);
}

// ---------------------------------------------------------------------------

namespace {

Matrix target_features(const FactorizedModel& model, FeatureSpace space) {
  return space == FeatureSpace::Embedding ? model.shared_target() : model.target_data;
}

OpenSetClassifier build_classifier(const FactorizedModel& model, Matrix source_points,
                                   const std::vector<int>& source_labels, const OpenSetAssignment& assignment,
                                   const ClassifierSpec& spec) {
  spec.validate();
  const int C = model.classes;
  if (C < 1 || source_labels.empty()) {
    throw InvalidArgument("classifier training needs labelled source samples");
  }
  if (static_cast<Eigen::Index>(assignment.size()) != model.target_count()) {
    throw DimensionMismatch("assignment size differs from the model's target count");
  }
  if (static_cast<Eigen::Index>(source_labels.size()) != source_points.cols()) {
    throw DimensionMismatch("source label count differs from source sample count");
  }

  if (spec.kind == ClassifierKind::LearntW) {
    if (!model.W) throw InvalidArgument("learnt_w needs a discriminative variant (dfroda or dfroda_u)");
    if (spec.space != FeatureSpace::Embedding) throw InvalidArgument("learnt_w works in the embedding space only");
    // Targets enter W' as [T^v; 0]: only the shared block's columns matter.
    return OpenSetClassifier(LinearMapClassifier(model.W->leftCols(model.d)), C, spec);
  }

  const Matrix targets = target_features(model, spec.space);
  const auto extra = static_cast<Eigen::Index>(assignment.unknown_count());
  Matrix points(source_points.rows(), source_points.cols() + extra);
  points.leftCols(source_points.cols()) = source_points;
  std::vector<int> labels = source_labels;
  Eigen::Index col = source_points.cols();
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (!assignment.is_unknown[i]) continue;
    points.col(col++) = targets.col(static_cast<Eigen::Index>(i));
    labels.push_back(C + 1);
  }
  if (spec.kind == ClassifierKind::Knn) {
    return OpenSetClassifier(KnnClassifier(std::move(points), std::move(labels), spec.k), C, spec);
  }
  return OpenSetClassifier(OvoSvmClassifier(points, labels, spec.svm_c, spec.svm_epochs), C, spec);
}

}  // namespace

OpenSetClassifier train_open_classifier(const FactorizedModel& model, const OpenSetAssignment& assignment,
                                        const ClassifierSpec& spec) {
  Matrix source = spec.space == FeatureSpace::Embedding ? model.shared_source() : model.source_data;
  return build_classifier(model, std::move(source), model.source_labels, assignment, spec);
}

OpenSetClassifier train_open_classifier(const FactorizedModel& model, const Matrix& Xs,
                                        const std::vector<int>& source_labels,
                                        const OpenSetAssignment& assignment, const ClassifierSpec& spec) {
  Matrix source = spec.space == FeatureSpace::Embedding ? embed_shared(model, Xs, SampleRole::Source)
                                                        : to_model_space(model, Xs);
  return build_classifier(model, std::move(source), source_labels, assignment, spec);
}

namespace {

std::vector<int> predict_columns(const OpenSetClassifier& classifier, const OpenSetAssignment& assignment,
                                 const Matrix& features) {
  if (static_cast<Eigen::Index>(assignment.size()) != features.cols()) {
    throw DimensionMismatch("predict: assignment size differs from target count");
  }
  const int C = classifier.classes();
  std::vector<int> out(assignment.size());
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    out[i] = assignment.is_unknown[i] ? C + 1 : classifier.predict(features.col(static_cast<Eigen::Index>(i)), C);
  }
  return out;
}

}  // namespace

std::vector<int> predict(const FactorizedModel& model, const OpenSetClassifier& classifier,
                         const OpenSetAssignment& assignment) {
  return predict_columns(classifier, assignment, target_features(model, classifier.spec().space));
}

std::vector<int> predict(const FactorizedModel& model, const OpenSetClassifier& classifier,
                         const OpenSetAssignment& assignment, const Matrix& Xt) {
  const Matrix features = classifier.spec().space == FeatureSpace::Embedding
                              ? embed_shared(model, Xt, SampleRole::Target)
                              : to_model_space(model, Xt);
  return predict_columns(classifier, assignment, features);
}

}  // namespace froda
