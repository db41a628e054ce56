#pragma once

// Accuracy over C+1 classes, seeded multi-run experiments, epsilon sweeps
// and report files.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "froda/data_io.hpp"
#include "froda/inference.hpp"
#include "froda/model.hpp"

namespace froda {

struct Metrics {
  double overall_accuracy = 0.0;
  /// Mean recall over the classes present in the truth (headline metric).
  double class_avg_accuracy = 0.0;
  std::map<int, double> per_class;  ///< recall of every class present in the truth
  std::vector<int> empty_classes;   ///< classes in 1..C+1 absent from the truth
  // Known-vs-unknown detection with "unknown" as the positive class. A ratio
  // with a zero denominator is 1 when there was nothing to find, else 0.
  double unknown_precision = 0.0;
  double unknown_recall = 0.0;
  double unknown_f1 = 0.0;
};

/// Labels must lie in 1..C+1, C+1 being the unknown class.
Metrics score(std::span<const int> predictions, std::span<const int> truth, int classes);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation, 0 for a single run
};

MeanStd mean_std(std::span<const double> values);

struct SeedRun {
  std::uint64_t seed = 0;
  Metrics metrics;
  double fit_seconds = 0.0;
  double per_iter_seconds = 0.0;
  int n_outer_iters = 0;
  Eigen::Index d = 0;
  std::size_t unknown_assigned = 0;
};

struct EvalReport {
  std::string name;
  MeanStd overall_accuracy;
  MeanStd class_avg_accuracy;
  std::map<int, MeanStd> per_class;
  MeanStd unknown_precision;
  MeanStd unknown_recall;
  MeanStd unknown_f1;
  MeanStd fit_seconds;
  MeanStd per_iter_seconds;
  MeanStd n_outer_iters;
  std::vector<SeedRun> runs;
  std::string config_json;  ///< echo of every setting that produced the report
};

struct RealData {
  Dataset source;
  Dataset target;
  OpenSetProtocol protocol;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Variant variant = Variant::Froda;
  HyperParams hp{};
  ClassifierSpec classifier{};
  std::vector<std::uint64_t> seeds{0};
  std::optional<SyntheticSpec> synthetic;  ///< its seed is replaced per run
  std::optional<RealData> real;            ///< the protocol seed is replaced per run
  int jobs = 1;
};

/// Split (or generate), fit, assign, classify and score once per seed, then
/// aggregate in seed order. Runs may execute on `jobs` threads; the result
/// does not depend on the thread count.
EvalReport run_experiment(const ExperimentConfig& config);

/// One split + fit + predict + score.
SeedRun run_single(const ExperimentConfig& config, std::uint64_t seed);

std::string to_json(const EvalReport& report);
/// Header line plus one row of flat metrics.
void write_report_csv(const EvalReport& report, std::ostream& out);
/// "73.8±6.1", class-averaged accuracy in percent.
std::string format_percent(const MeanStd& value);

struct SweepRow {
  double epsilon = 0.0;
  double class_avg_accuracy = 0.0;
  double overall_accuracy = 0.0;
  std::size_t unknown_count = 0;
};

/// Re-runs assignment, classifier training and prediction for each epsilon
/// on an already fitted model.
std::vector<SweepRow> sweep_epsilon(const FactorizedModel& model, std::span<const double> grid,
                                    std::span<const int> truth, const ClassifierSpec& classifier);

/// Header "epsilon,class_avg_accuracy".
void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out);

/// "start:step:stop" (inclusive) or a comma-separated list.
std::vector<double> parse_grid(std::string_view text);

/// Shortest representation that reads back to the same double.
std::string format_double(double value);

}  // namespace froda
