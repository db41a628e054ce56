#include <cmath>
#include <limits>
#include <numeric>

#include <gtest/gtest.h>

#include "froda/data_io.hpp"
#include "froda/eval.hpp"
#include "froda/inference.hpp"
#include "support/properties.hpp"
#include "support/random.hpp"

namespace froda {
namespace {

using testing::Rng;

constexpr double kInf = std::numeric_limits<double>::infinity();

FactorizedModel small_dfroda(std::uint64_t seed, testing::SmallProblem* out = nullptr) {
  Rng rng(seed);
  testing::SmallProblem p = testing::small_problem(rng);
  auto model = fit_dfroda(p.Xs, p.Xt, LabelMatrix::from_labels(p.labels, p.classes), testing::small_hyperparams(p, 20));
  if (out) *out = std::move(p);
  return model;
}

TEST(Assignment, RatioRule) {
  Matrix T(4, 3);
  T.col(0) << 1, 0, 0, 10;  // ratio 0.1
  T.col(1) << 3, 4, 0, 0;   // private part zero
  T.col(2) << 0, 0, 0, 0;   // both zero
  const auto a = assign_from_coefficients(T, 2, 0.2);
  EXPECT_DOUBLE_EQ(a.ratio[0], 0.1);
  EXPECT_TRUE(a.is_unknown[0]);
  EXPECT_EQ(a.ratio[1], kInf);
  EXPECT_FALSE(a.is_unknown[1]);
  EXPECT_TRUE(a.degenerate[2]);
  EXPECT_EQ(a.ratio[2], 0.0);
  EXPECT_EQ(a.unknown_count(), 2u);
}

TEST(Assignment, ColumnScalingKeepsDecisions) {
  Rng rng(1);
  const Matrix T = rng.gaussian(6, 20);
  const auto a = assign_from_coefficients(T, 3, 0.8);
  for (double c : {1e-8, 0.3, 7.0, 1e9}) {
    EXPECT_EQ(assign_from_coefficients(c * T, 3, 0.8).is_unknown, a.is_unknown);
  }
}

TEST(Assignment, InfiniteThresholdMarksEverything) {
  Rng rng(2);
  const auto a = assign_from_coefficients(rng.gaussian(4, 9), 2, kInf);
  EXPECT_EQ(a.unknown_count(), 9u);
}

TEST(Embedding, TrainingSourcesReturnLearntCodes) {
  Rng rng(3);
  const testing::SmallProblem p = testing::small_problem(rng);
  FitInputs in;
  in.source = p.Xs;
  in.target = p.Xt;
  HyperParams hp;
  hp.d = p.d;
  hp.outer_max_iter = 5;
  const auto model = fit_auto(in, Variant::Froda, hp);
  EXPECT_EQ(embed_shared(model, p.Xs, SampleRole::Source), model.S);
  EXPECT_EQ(embed_shared(model, p.Xt, SampleRole::Target), model.shared_target());
}

TEST(Embedding, SharedBasisColumnsCodeAsIdentity) {
  Rng rng(4);
  const testing::SmallProblem p = testing::small_problem(rng);
  FitInputs in;
  in.source = p.Xs;
  in.target = p.Xt;
  HyperParams hp;
  hp.d = p.d;
  hp.outer_max_iter = 5;
  auto model = fit_auto(in, Variant::Froda, hp);
  // make V exactly orthonormal so its coordinates are the identity
  Eigen::HouseholderQR<Matrix> qr(model.V);
  model.V = qr.householderQ() * Matrix::Identity(model.V.rows(), model.d);
  const Matrix lifted = model.preprocessing->basis * model.V;
  const Matrix codes = embed_shared(model, lifted, SampleRole::Source);
  EXPECT_LT((codes - Matrix::Identity(model.d, model.d)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Embedding, EmptyInputGivesEmptyCodes) {
  const auto model = small_dfroda(5);
  EXPECT_EQ(embed_shared(model, Matrix(model.V.rows(), 0), SampleRole::Target).cols(), 0);
  EXPECT_EQ(encode_targets(model, Matrix(model.V.rows(), 0)).cols(), 0);
}

TEST(Knn, SingleNeighbourReturnsTrainingLabel) {
  Rng rng(6);
  const Matrix X = rng.gaussian(3, 10);
  std::vector<int> labels{1, 2, 3, 1, 2, 3, 1, 2, 3, 4};
  const KnnClassifier knn(X, labels, 1);
  for (Eigen::Index i = 0; i < 10; ++i) EXPECT_EQ(knn.predict(X.col(i), 4), labels[static_cast<std::size_t>(i)]);
  // label 4 excluded: the nearest remaining point decides
  EXPECT_NE(knn.predict(X.col(9), 3), 4);
}

TEST(Knn, VoteTieGoesToCloserClass) {
  Matrix X(1, 4);
  X << 0.0, 1.0, -3.0, 5.0;
  const KnnClassifier knn(X, {2, 1, 2, 1}, 2);
  Vector q(1);
  q << 0.4;
  EXPECT_EQ(knn.predict(q, 2), 2);  // distances 0.4 (class 2) and 0.6 (class 1)
  q << 0.6;
  EXPECT_EQ(knn.predict(q, 2), 1);
}

TEST(LinearSvm, SeparatesMarginOneToy) {
  Rng rng(7);
  Matrix X(2, 20);
  std::vector<double> y(20);
  for (int i = 0; i < 20; ++i) {
    const double side = i < 10 ? 1.0 : -1.0;
    X(0, i) = side * (1.0 + rng.uniform(0, 2));
    X(1, i) = rng.uniform(-3, 3);
    y[static_cast<std::size_t>(i)] = side;
  }
  const LinearSvm svm = LinearSvm::train(X, y, 1.0, 1000);
  for (int i = 0; i < 20; ++i) EXPECT_GT(svm.decision(X.col(i)) * y[static_cast<std::size_t>(i)], 0.0);
}

TEST(OvoSvm, VotesCoverEveryPair) {
  Rng rng(8);
  std::vector<int> labels;
  for (int c = 1; c <= 4; ++c)
    for (int i = 0; i < 5; ++i) labels.push_back(c);
  const OvoSvmClassifier svm(rng.gaussian(3, 20), labels, 1.0, 200);
  const auto votes = svm.votes(rng.gaussian(3, 1), 4);
  EXPECT_EQ(std::accumulate(votes.begin(), votes.end(), 0), 6);
  const auto restricted = svm.votes(rng.gaussian(3, 1), 3);
  EXPECT_EQ(std::accumulate(restricted.begin(), restricted.end(), 0), 3);
}

TEST(LearntW, PredictsArgmaxOfLinearMap) {
  testing::SmallProblem p;
  const auto model = small_dfroda(9, &p);
  ClassifierSpec spec;
  spec.kind = ClassifierKind::LearntW;
  const auto assignment = assign_known_unknown(model, 0.2);
  const auto classifier = train_open_classifier(model, assignment, spec);
  const auto labels = predict(model, classifier, assignment);
  const Matrix scores = *model.W * model.shared_target();
  for (Eigen::Index i = 0; i < scores.cols(); ++i) {
    if (assignment.is_unknown[static_cast<std::size_t>(i)]) continue;
    Eigen::Index best = 0;
    scores.col(i).maxCoeff(&best);
    EXPECT_EQ(labels[static_cast<std::size_t>(i)], best + 1);
  }
}

TEST(LearntW, RequiresLearntMap) {
  Rng rng(10);
  const testing::SmallProblem p = testing::small_problem(rng);
  const auto model = fit_froda(p.Xs, p.Xt, testing::small_hyperparams(p, 3));
  ClassifierSpec spec;
  spec.kind = ClassifierKind::LearntW;
  EXPECT_THROW(train_open_classifier(model, assign_known_unknown(model, 0.2), spec), InvalidArgument);
}

TEST(Predict, AllUnknownAssignmentsGiveUnknownLabel) {
  testing::SmallProblem p;
  const auto model = small_dfroda(11, &p);
  for (auto kind : {ClassifierKind::Knn, ClassifierKind::LearntW, ClassifierKind::LinearSvmOvo}) {
    ClassifierSpec spec;
    spec.kind = kind;
    const auto assignment = assign_known_unknown(model, kInf);
    const auto labels = predict(model, train_open_classifier(model, assignment, spec), assignment);
    for (int l : labels) EXPECT_EQ(l, p.classes + 1);
  }
}

TEST(Predict, NewTargetsMatchTrainingPath) {
  testing::SmallProblem p;
  const auto model = small_dfroda(12, &p);
  ClassifierSpec spec;
  const auto assignment = assign_known_unknown(model, 0.2);
  const auto classifier = train_open_classifier(model, assignment, spec);
  const auto labels = predict(model, classifier, assignment, p.Xt);
  EXPECT_EQ(labels, predict(model, classifier, assignment));
}

TEST(Predict, SyntheticDefaultsRecoverKnownClasses) {
  SyntheticSpec spec;
  spec.seed = 3;
  const auto scenario = generate_synthetic(spec);
  FitInputs in;
  in.source = scenario.source.features;
  in.source_labels = scenario.source.labels;
  in.target = scenario.target.features;
  const auto model = fit_auto(in, Variant::Froda, HyperParams{});
  const auto assignment = assign_known_unknown(model, 0.2);
  const auto labels = predict(model, train_open_classifier(model, assignment, ClassifierSpec{}), assignment);
  const Metrics m = score(labels, scenario.target.labels, spec.C);
  for (int c = 1; c <= spec.C; ++c) EXPECT_GE(m.per_class.at(c), 0.9) << "class " << c;
}

TEST(ClassifierSpec, ParsingAndValidation) {
  EXPECT_EQ(parse_classifier("svm"), ClassifierKind::LinearSvmOvo);
  EXPECT_THROW(parse_classifier("forest"), InvalidArgument);
  ClassifierSpec spec;
  EXPECT_EQ(spec.k, 3);
  spec.k = 0;
  EXPECT_THROW(spec.validate(), InvalidArgument);
}

}  // namespace
}  // namespace froda
