#include <string>

#include <benchmark/benchmark.h>

#include "froda/data_io.hpp"
#include "froda/inference.hpp"
#include "froda/model.hpp"

namespace {

// 500 sources and 300 targets in 500 dimensions, 10 known classes
froda::SyntheticScenario scenario() {
  froda::SyntheticSpec spec;
  spec.D = 500;
  spec.d = 20;
  spec.C = 10;
  spec.n_per_class_source = 50;
  spec.n_per_class_target = 20;
  spec.n_unknown_target = 100;
  spec.seed = 1;
  return froda::generate_synthetic(spec);
}

void BM_OuterIteration(benchmark::State& state) {
  const auto s = scenario();
  froda::HyperParams hp;
  hp.d = 20;
  hp.outer_max_iter = 1;
  for (auto _ : state) benchmark::DoNotOptimize(froda::fit_froda(s.source.features, s.target.features, hp));
  state.SetLabel("initialisation plus one outer iteration");
}
BENCHMARK(BM_OuterIteration)->Unit(benchmark::kMillisecond);

void BM_FullFit(benchmark::State& state) {
  const auto s = scenario();
  const auto variant = static_cast<froda::Variant>(state.range(0));
  froda::FitInputs in;
  in.source = s.source.features;
  in.source_labels = s.source.labels;
  in.target = s.target.features;
  if (variant == froda::Variant::DFrodaU) in.source_unknown = froda::Matrix(500, 0);
  froda::HyperParams hp;
  hp.d = 20;
  int iterations = 0;
  for (auto _ : state) {
    const auto m = froda::fit_auto(in, variant, hp);
    iterations = m.n_outer_iters;
  }
  state.counters["outer_iterations"] = iterations;
  state.SetLabel(std::string(froda::to_string(variant)));
}
BENCHMARK(BM_FullFit)->DenseRange(0, 2)->Unit(benchmark::kSecond)->Iterations(1);

void BM_PredictNewTargets(benchmark::State& state) {
  const auto s = scenario();
  froda::FitInputs in;
  in.source = s.source.features;
  in.source_labels = s.source.labels;
  in.target = s.target.features;
  froda::HyperParams hp;
  hp.d = 20;
  hp.outer_max_iter = 20;
  const auto model = froda::fit_auto(in, froda::Variant::Froda, hp);
  const auto training = froda::assign_known_unknown(model, hp.epsilon);
  const auto classifier = froda::train_open_classifier(model, training, froda::ClassifierSpec{});
  for (auto _ : state) {
    const froda::Matrix T = froda::encode_targets(model, s.target.features);
    const auto assignment = froda::assign_from_coefficients(T, model.d, hp.epsilon);
    benchmark::DoNotOptimize(froda::predict(model, classifier, assignment, s.target.features));
  }
}
BENCHMARK(BM_PredictNewTargets)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
