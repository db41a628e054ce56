#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "froda/eval.hpp"
#include "support/properties.hpp"
#include "support/random.hpp"

namespace froda {
namespace {

using testing::Rng;

TEST(Score, PerfectPredictions) {
  const std::vector<int> truth{1, 2, 3, 3, 2};
  const Metrics m = score(truth, truth, 2);
  EXPECT_EQ(m.overall_accuracy, 1.0);
  EXPECT_EQ(m.class_avg_accuracy, 1.0);
  EXPECT_EQ(m.unknown_f1, 1.0);
}

TEST(Score, HandCountedExample) {
  const std::vector<int> truth{1, 1, 2, 3};
  const std::vector<int> pred{1, 2, 2, 3};
  const Metrics m = score(pred, truth, 2);
  EXPECT_DOUBLE_EQ(m.overall_accuracy, 0.75);
  EXPECT_DOUBLE_EQ(m.per_class.at(1), 0.5);
  EXPECT_DOUBLE_EQ(m.per_class.at(2), 1.0);
  EXPECT_DOUBLE_EQ(m.per_class.at(3), 1.0);
  EXPECT_NEAR(m.class_avg_accuracy, 2.5 / 3.0, 1e-15);
  EXPECT_EQ(m.unknown_precision, 1.0);
  EXPECT_EQ(m.unknown_recall, 1.0);
}

TEST(Score, EmptyClassIsFlaggedAndSkipped) {
  const std::vector<int> truth{1, 1, 3};
  const std::vector<int> pred{1, 2, 3};
  const Metrics m = score(pred, truth, 2);
  EXPECT_EQ(m.empty_classes, std::vector<int>{2});
  EXPECT_EQ(m.per_class.count(2), 0u);
  EXPECT_DOUBLE_EQ(m.class_avg_accuracy, 0.75);
}

TEST(Score, NothingToDetect) {
  const std::vector<int> truth{1, 2};
  const Metrics m = score(std::vector<int>{1, 2}, truth, 2);
  EXPECT_EQ(m.unknown_precision, 1.0);
  EXPECT_EQ(m.unknown_recall, 1.0);
  const Metrics missed = score(std::vector<int>{3, 2}, truth, 2);
  EXPECT_EQ(missed.unknown_precision, 0.0);
  EXPECT_EQ(missed.unknown_f1, 0.0);
}

TEST(Score, RejectsOutOfRangeLabels) {
  const std::vector<int> truth{1, 4};
  EXPECT_THROW(score(std::vector<int>{1, 1}, truth, 2), InvalidArgument);
  EXPECT_THROW(score(std::vector<int>{1}, truth, 2), InvalidArgument);
}

TEST(MeanStd, SingleRunHasZeroStd) {
  const std::vector<double> one{0.7};
  EXPECT_EQ(mean_std(one).std, 0.0);
  const std::vector<double> two{1.0, 3.0};
  EXPECT_DOUBLE_EQ(mean_std(two).mean, 2.0);
  EXPECT_DOUBLE_EQ(mean_std(two).std, std::sqrt(2.0));
}

ExperimentConfig synthetic_config(int seeds) {
  ExperimentConfig config;
  config.synthetic = SyntheticSpec{};
  config.hp.outer_max_iter = 30;
  config.seeds.clear();
  for (int s = 0; s < seeds; ++s) config.seeds.push_back(static_cast<std::uint64_t>(s));
  return config;
}

TEST(Experiment, RepeatsAndIgnoresThreadCount) {
  ExperimentConfig config = synthetic_config(3);
  const EvalReport a = run_experiment(config);
  config.jobs = 3;
  const EvalReport b = run_experiment(config);
  EXPECT_EQ(a.class_avg_accuracy.mean, b.class_avg_accuracy.mean);
  EXPECT_EQ(a.class_avg_accuracy.std, b.class_avg_accuracy.std);
  EXPECT_EQ(a.unknown_f1.mean, b.unknown_f1.mean);
  EXPECT_EQ(a.per_class.size(), b.per_class.size());
  ASSERT_EQ(a.runs.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.runs[i].seed, b.runs[i].seed);
    EXPECT_EQ(a.runs[i].metrics.per_class, b.runs[i].metrics.per_class);
  }
}

TEST(Experiment, NoiseFreeSyntheticIsPerfect) {
  ExperimentConfig config = synthetic_config(2);
  config.synthetic->noise_sigma = 0.0;
  const EvalReport r = run_experiment(config);
  EXPECT_EQ(r.overall_accuracy.mean, 1.0);
}

TEST(Experiment, ReportFiles) {
  const EvalReport r = run_experiment(synthetic_config(1));
  std::ostringstream csv;
  write_report_csv(r, csv);
  EXPECT_EQ(csv.str().rfind("name,n_seeds,overall_accuracy_mean,overall_accuracy_std", 0), 0u);
  const std::string json = to_json(r);
  EXPECT_NE(json.find("\"class_avg_accuracy\""), std::string::npos);
  EXPECT_NE(json.find("\"alpha\": 0.1"), std::string::npos);
  EXPECT_EQ(format_percent({0.738, 0.061}), "73.8±6.1");
}

TEST(Sweep, ThresholdExtremes) {
  Rng rng(1);
  const testing::SmallProblem p = testing::small_problem(rng);
  auto model = fit_froda(p.Xs, p.Xt, testing::small_hyperparams(p, 10));
  model.classes = p.classes;
  model.source_labels = p.labels;
  const std::vector<double> grid{0.0, 0.1, 0.5, 2.0, std::numeric_limits<double>::infinity()};
  const auto rows = sweep_epsilon(model, grid, p.target_truth, ClassifierSpec{});
  ASSERT_EQ(rows.size(), grid.size());
  std::size_t zero_shared = 0;
  for (Eigen::Index i = 0; i < model.T.cols(); ++i) zero_shared += model.T.col(i).head(model.d).norm() == 0.0;
  EXPECT_EQ(rows.front().unknown_count, zero_shared);
  EXPECT_EQ(rows.back().unknown_count, static_cast<std::size_t>(model.T.cols()));
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i].unknown_count, rows[i - 1].unknown_count);
  // every target called unknown: only the unknown class is recalled
  const Metrics all_unknown = score(std::vector<int>(p.target_truth.size(), p.classes + 1), p.target_truth, p.classes);
  EXPECT_EQ(rows.back().class_avg_accuracy, all_unknown.class_avg_accuracy);
  std::ostringstream out;
  write_sweep_csv(rows, out);
  EXPECT_EQ(out.str().rfind("epsilon,class_avg_accuracy\n", 0), 0u);
}

TEST(Grid, RangeAndListForms) {
  const auto range = parse_grid("0.05:0.05:1.0");
  ASSERT_EQ(range.size(), 20u);
  EXPECT_EQ(range.front(), 0.05);
  EXPECT_EQ(range[2], 0.15);
  EXPECT_EQ(range.back(), 1.0);
  EXPECT_EQ(parse_grid("0.1,0.2,0.5"), (std::vector<double>{0.1, 0.2, 0.5}));
  EXPECT_THROW(parse_grid("1:0:2"), InvalidArgument);
  EXPECT_THROW(parse_grid("a,b"), InvalidArgument);
  EXPECT_EQ(format_double(0.1), "0.1");
}

}  // namespace
}  // namespace froda
