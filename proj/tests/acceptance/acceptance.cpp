// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "froda/cli.hpp"
#include "froda/data_io.hpp"
#include "froda/eval.hpp"
#include "froda/inference.hpp"
#include "froda/linalg.hpp"
#include "froda/model.hpp"
#include "support/oracles.hpp"
#include "support/properties.hpp"
#include "support/random.hpp"

namespace {

using namespace froda;
using froda::testing::Rng;
using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

// ---------------------------------------------------------------------------

Outcome solver_oracle() {
  Outcome o;
  Rng rng(101);
  const GroupSpec groups = GroupSpec::uniform(2, 2);
  const double lambdas[] = {0.01, 0.1, 1.0};
  SolverConfig cfg;
  cfg.tol = 1e-14;
  cfg.max_iter = 100000;
  double solver_seconds = 0.0, worst = 0.0, worst_default = 0.0;
  int ok = 0;
  for (int i = 0; i < 50; ++i) {
    const Matrix B = rng.gaussian(8, 4);
    const Matrix X = rng.gaussian(8, 3);
    const double lambda = lambdas[i % 3];
    const auto t0 = Clock::now();
    const Matrix T = group_lasso_solve(X, B, groups, lambda, cfg).coefficients;
    solver_seconds += seconds_since(t0);
    const double got = froda::testing::loop_group_lasso_objective(X, B, T, groups, lambda);
    const double want = froda::testing::loop_group_lasso_objective(
        X, B, froda::testing::ista_oracle(X, B, groups, lambda, 1000000), groups, lambda);
    const double rel = std::abs(got - want) / std::abs(want);
    worst = std::max(worst, rel);
    ok += rel <= 1e-8;
    const Matrix loose = group_lasso_solve(X, B, groups, lambda, SolverConfig{}).coefficients;
    worst_default = std::max(
        worst_default,
        std::abs(froda::testing::loop_group_lasso_objective(X, B, loose, groups, lambda) - want) / std::abs(want));
  }
  o.pass = ok == 50 && solver_seconds < 10.0;
  o.summary = fmt("solver oracle equivalence: %.0f/50 within 1e-8 relative (worst %.2e), solver time %.3f s", ok,
                  worst, solver_seconds);
  o.details.push_back(fmt("solver tol 1e-14; the fitting default tol 1e-8 stays within %.1e", worst_default));
  return o;
}

Outcome dictionary_oracle() {
  Outcome o;
  Rng rng(202);
  const SolverConfig cfg;
  double solver_seconds = 0.0, worst = 0.0, worst_kkt = 0.0;
  int ok = 0, instances = 0;
  while (instances < 50) {
    const Matrix A = rng.gaussian(6, 10);
    const Matrix T = rng.uniform(0.05, 0.3) * rng.gaussian(3, 10);
    // keep only instances where the unconstrained solution violates a constraint
    const Matrix free = A * T.transpose() * (T * T.transpose()).inverse();
    if (free.colwise().norm().maxCoeff() <= 1.0) continue;
    ++instances;
    const auto t0 = Clock::now();
    const DictionaryResult r = dictionary_update(A, T, cfg);
    solver_seconds += seconds_since(t0);
    const double got = froda::testing::loop_dictionary_objective(A, r.dictionary, T);
    const double want =
        froda::testing::loop_dictionary_objective(A, froda::testing::projected_gradient_oracle(A, T, 100000), T);
    const double rel = std::abs(got - want) / std::abs(want);
    worst = std::max(worst, rel);
    worst_kkt = std::max(worst_kkt, r.kkt_residual);
    ok += rel <= 1e-6 && r.kkt_residual < 1e-6;
  }
  o.pass = ok == 50 && solver_seconds < 30.0;
  o.summary = fmt("dictionary oracle equivalence: %.0f/50 within 1e-6 relative (worst %.2e), max KKT %.1e", ok, worst,
                  worst_kkt);
  o.details.push_back(fmt("solver time %.3f s", solver_seconds));
  return o;
}

Outcome monotone_descent() {
  Outcome o;
  double worst_rise = -std::numeric_limits<double>::infinity();
  int violations = 0, checks = 0;
  for (Variant v : {Variant::Froda, Variant::DFroda, Variant::DFrodaU}) {
    double variant_worst = -std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      SyntheticSpec spec;
      spec.D = 30;
      spec.d = 4;
      spec.C = 3;
      spec.n_per_class_source = 20;  // n_s = 60
      spec.n_per_class_target = 10;
      spec.n_unknown_target = 10;    // n_t = 40
      spec.n_unknown_source = v == Variant::DFrodaU ? 15 : 0;
      spec.seed = seed;
      const auto s = generate_synthetic(spec);
      HyperParams hp;
      hp.d = 4;
      hp.outer_max_iter = 100;
      hp.outer_tol = 1e-300;
      double previous = 0.0;
      bool first = true;
      FitOptions opts;
      opts.observer = [&](Block, int, double f) {
        if (!first) {
          const double rise = f - previous;
          variant_worst = std::max(variant_worst, rise);
          ++checks;
          violations += rise > 1e-9;
        }
        first = false;
        previous = f;
      };
      switch (v) {
        case Variant::Froda:
          fit_froda(s.source.features, s.target.features, hp, opts);
          break;
        case Variant::DFroda:
          fit_dfroda(s.source.features, s.target.features, LabelMatrix::from_labels(s.source.labels, 3), hp, opts);
          break;
        case Variant::DFrodaU: {
          std::vector<int> labels = s.source.labels;
          labels.insert(labels.end(), s.source_unknown.labels.begin(), s.source_unknown.labels.end());
          fit_dfroda_u(s.source.features, s.source_unknown.features, s.target.features,
                       LabelMatrix::from_labels(labels, 4), hp, opts);
          break;
        }
      }
    }
    o.details.push_back(std::string(to_string(v)) + fmt(": largest change between consecutive blocks %+.2e", variant_worst));
    worst_rise = std::max(worst_rise, variant_worst);
  }
  o.pass = violations == 0;
  o.summary = fmt("monotone descent: %.0f rises above 1e-9 in %.0f block updates (largest change %+.2e)", violations,
                  checks, worst_rise);
  return o;
}

Outcome synthetic_separation() {
  Outcome o;
  ExperimentConfig config;
  config.name = "synthetic-defaults";
  config.synthetic = SyntheticSpec{};
  config.seeds.clear();
  for (std::uint64_t s = 0; s < 20; ++s) config.seeds.push_back(s);
  const auto t0 = Clock::now();
  const EvalReport r = run_experiment(config);
  const double elapsed = seconds_since(t0);
  o.pass = r.class_avg_accuracy.mean >= 0.9 && r.unknown_f1.mean >= 0.9 && elapsed < 120.0;
  o.summary = fmt("synthetic separation: class-avg %.4f, unknown F1 %.4f over 20 seeds", r.class_avg_accuracy.mean,
                  r.unknown_f1.mean) +
              fmt(" in %.1f s", elapsed);
  o.details.push_back("class-avg " + format_percent(r.class_avg_accuracy) + ", overall " +
                      format_percent(r.overall_accuracy) + ", F1 " + format_percent(r.unknown_f1));
  return o;
}

Outcome default_echo() {
  Outcome o;
  const HyperParams hp;
  const ClassifierSpec spec;
  bool ok = hp.alpha == 0.1 && hp.beta == 0.01 && hp.lambda1 == 0.001 && hp.lambda2 == 0.001 && hp.epsilon == 0.2 &&
            spec.k == 3 && hp.pca_variance == 0.99 && spec.kind == ClassifierKind::Knn;

  std::ostringstream out, err;
  const int code = cli::run({"fit", "--help"}, out, err);
  for (const char* needle : {"--alpha FLOAT [0.1]", "--beta FLOAT [0.01]", "--lambda1 FLOAT [0.001]",
                             "--lambda2 FLOAT [0.001]", "--epsilon FLOAT [0.2]", "--pca-variance FLOAT [0.99]"}) {
    if (out.str().find(needle) == std::string::npos) {
      ok = false;
      o.details.push_back(std::string("fit --help lacks ") + needle);
    }
  }
  std::ostringstream pout;
  cli::run({"predict", "--help"}, pout, err);
  if (pout.str().find("--k INT [3]") == std::string::npos) {
    ok = false;
    o.details.push_back("predict --help lacks --k INT [3]");
  }
  o.pass = ok && code == 0;
  o.summary = "default configuration: alpha=0.1 beta=0.01 lambda1=lambda2=0.001 epsilon=0.2 k=3 pca_variance=0.99";
  return o;
}

Outcome full_size_runtime() {
  Outcome o;
  SyntheticSpec spec;
  spec.D = 500;
  spec.d = 20;
  spec.C = 10;
  spec.n_per_class_source = 50;  // 500
  spec.n_per_class_target = 20;  // 200 known
  spec.n_unknown_target = 100;   // 300 targets
  spec.seed = 1;
  const auto s = generate_synthetic(spec);
  HyperParams hp;
  hp.d = 20;

  std::vector<double> per_iter;
  Clock::time_point mark;
  FitOptions opts;
  opts.inspector = [&](Block b, const FactorizedModel&) {
    if (b == Block::Init) mark = Clock::now();
  };
  opts.on_iteration = [&](int, double) {
    per_iter.push_back(seconds_since(mark));
    mark = Clock::now();
  };
  const auto t0 = Clock::now();
  const FactorizedModel m = fit_froda(s.source.features, s.target.features, hp, opts);
  const double total = seconds_since(t0);
  const double worst = per_iter.empty() ? 0.0 : *std::max_element(per_iter.begin(), per_iter.end());
  double mean = 0.0;
  for (double t : per_iter) mean += t;
  mean /= std::max<std::size_t>(per_iter.size(), 1);
  o.pass = !per_iter.empty() && worst <= 0.25 && total <= 15.0;
  o.summary = fmt("full-size runtime: slowest outer iteration %.3f s, full fit %.2f s", worst, total) +
              fmt(" (%.0f iterations)", m.n_outer_iters);
  o.details.push_back(fmt("n_s=500 n_t=300 D=500 d=20, mean iteration %.3f s", mean));
  return o;
}

Outcome epsilon_stability() {
  Outcome o;
  const std::vector<double> grid = parse_grid("0.15:0.05:0.5");
  std::vector<double> mean_acc(grid.size(), 0.0);
  bool monotone = true;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    SyntheticSpec spec;
    spec.seed = static_cast<std::uint64_t>(seed);
    const auto s = generate_synthetic(spec);
    FitInputs in;
    in.source = s.source.features;
    in.source_labels = s.source.labels;
    in.target = s.target.features;
    const auto model = fit_auto(in, Variant::Froda, HyperParams{});
    const auto rows = sweep_epsilon(model, grid, s.target.labels, ClassifierSpec{});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      mean_acc[i] += rows[i].class_avg_accuracy / seeds;
      if (i > 0 && rows[i].unknown_count < rows[i - 1].unknown_count) monotone = false;
    }
  }
  const auto [lo, hi] = std::minmax_element(mean_acc.begin(), mean_acc.end());
  const double spread = 100.0 * (*hi - *lo);
  o.pass = spread < 5.0 && monotone;
  o.summary = fmt("epsilon stability over [0.15, 0.5]: class-avg spread %.2f pp, unknown count monotone: ", spread) +
              (monotone ? "yes" : "no");
  std::string curve = "mean class-avg:";
  for (std::size_t i = 0; i < grid.size(); ++i) curve += fmt(" %.2f->%.4f", grid[i], mean_acc[i]);
  o.details.push_back(curve);
  return o;
}

// Stand-in features with the Office class layout: 31 classes and a domain
// shift. Classes 21..31 (the target-only unknowns) sit in directions no
// other class uses.
void write_stand_in(const fs::path& dir) {
  Rng rng(303);
  const Eigen::Index D = 64;
  const int classes = 31;
  const Matrix Q = rng.orthonormal(D, D);
  Matrix means(D, classes);
  means.leftCols(20) = 2.0 * Q.leftCols(20) * rng.gaussian(20, 20);
  means.rightCols(11) = 2.0 * Q.middleCols(20, 11) * rng.gaussian(11, 11);
  const Matrix shift = 0.3 * rng.gaussian(D, 1);
  auto domain = [&](int per_class, bool shifted) {
    Dataset data;
    data.features.resize(D, classes * per_class);
    for (int c = 0; c < classes; ++c) {
      for (int i = 0; i < per_class; ++i) {
        Vector x = means.col(c) + 0.1 * rng.gaussian(D, 1);
        if (shifted) x += shift;
        data.features.col(c * per_class + i) = x;
        data.labels.push_back(c + 1);
      }
    }
    return data;
  };
  fs::create_directories(dir);
  save_features(domain(12, false), dir / "amazon.csv");
  save_features(domain(8, true), dir / "dslr.csv");
  save_features(domain(8, true), dir / "webcam.csv");
}

Outcome real_data_path() {
  Outcome o;
  fs::path dir;
  bool stand_in = false;
  if (const char* env = std::getenv("FRODA_OFFICE_DIR"); env && *env) {
    dir = env;
  } else {
    dir = fs::temp_directory_path() / "froda_office_stand_in";
    write_stand_in(dir);
    stand_in = true;
  }
  const std::pair<const char*, const char*> tasks[] = {{"amazon", "dslr"}, {"amazon", "webcam"}, {"dslr", "amazon"},
                                                       {"dslr", "webcam"}, {"webcam", "amazon"}, {"webcam", "dslr"}};
  auto letter = [](const char* name) { return static_cast<char>(std::toupper(name[0])); };
  int ran = 0;
  bool sane = true;
  std::string header = "class-averaged accuracy (%) per task:";
  for (const auto& [src, tgt] : tasks) {
    const fs::path sp = dir / (std::string(src) + ".csv"), tp = dir / (std::string(tgt) + ".csv");
    if (!fs::exists(sp) || !fs::exists(tp)) continue;
    ExperimentConfig config;
    config.name = std::string(1, letter(src)) + "->" + letter(tgt);
    config.real = RealData{load_features(sp), load_features(tp), OpenSetProtocol::office()};
    config.seeds = {0, 1, 2};
    const EvalReport r = run_experiment(config);
    ++ran;
    sane = sane && r.class_avg_accuracy.mean >= 0.0 && r.class_avg_accuracy.mean <= 1.0 &&
           r.per_class.size() == 11;
    o.details.push_back(config.name + "  FRODA  " + format_percent(r.class_avg_accuracy) +
                        (config.name == "A->D" ? "   (88.0 expected with DeCAF7 features)" : ""));
  }
  o.details.insert(o.details.begin(), header);
  if (stand_in) fs::remove_all(dir);
  o.pass = ran > 0 && sane;
  o.summary = fmt("real-data path: %.0f Office tasks ran end to end", ran) +
              (stand_in ? " on generated stand-in features (set FRODA_OFFICE_DIR for real features)"
                        : " on " + dir.string());
  return o;
}

Outcome property_suite() {
  Outcome o;
  int passed = 0, total = 0;
  for (const auto& p : froda::testing::all_properties()) {
    const auto r = p.run(froda::testing::kPropertyCases);
    ++total;
    passed += r.passed();
    o.details.push_back((r.passed() ? "ok    " : "FAIL  ") + r.name + " (" + std::to_string(r.cases) + " cases)" +
                        (r.passed() ? "" : ": " + r.first_failure));
  }
  o.pass = passed == total;
  o.summary = fmt("invariant suite: %.0f/%.0f properties hold on 100 random cases each", passed, total);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria = {solver_oracle,       dictionary_oracle, monotone_descent,
                                                          synthetic_separation, default_echo,      full_size_runtime,
                                                          epsilon_stability,   real_data_path,    property_suite};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("threw: ") + e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << i + 1 << "] " << o.summary << '\n';
    for (const auto& d : o.details) std::cout << "        " << d << '\n';
    std::cout << fmt("        (%.1f s)\n", seconds_since(t0)) << std::flush;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
  return failures == 0 ? 0 : 1;
}
