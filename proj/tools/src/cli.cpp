#include "froda/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "froda/data_io.hpp"
#include "froda/eval.hpp"
#include "froda/inference.hpp"
#include "froda/model.hpp"
#include "froda/model_io.hpp"

namespace froda::cli {
namespace {

namespace fs = std::filesystem;

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error("failed writing " + path.string());
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

void add_config(CLI::App& app) {
  app.add_option("--config", "flat key=value file of long option names; command-line flags override it");
}

bool given(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

// Replaces "--config PATH" by the file's entries as "--key=value" flags,
// skipping keys the command line sets itself.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!path) return rest;

  std::ifstream in(*path);
  if (!in) throw Error("cannot read config file " + *path);
  std::vector<std::string> flags;
  for (const CLI::ConfigItem& item : CLI::ConfigINI().from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == "default")) {
      throw CLI::ConversionError(*path + ": sections are not supported (" + item.fullname() + ")");
    }
    const std::string flag = "--" + item.name;
    if (given(rest, flag)) continue;
    std::string value;
    for (const auto& input : item.inputs) value += (value.empty() ? "" : ",") + input;
    flags.push_back(flag + "=" + value);
  }
  // flags go right after the subcommand name so they bind to it
  const auto sub = std::find_if(rest.begin(), rest.end(), [](const std::string& a) { return a.rfind('-', 0) != 0; });
  const auto at = sub == rest.end() ? rest.end() : sub + 1;
  rest.insert(at, flags.begin(), flags.end());
  return rest;
}

void add_hyperparams(CLI::App& app, HyperParams& hp) {
  app.add_option("--alpha", hp.alpha, "weight of the source reconstruction");
  app.add_option("--beta", hp.beta, "weight of the classification term (dfroda, dfroda_u)");
  app.add_option("--lambda1", hp.lambda1, "group sparsity of the target coefficients");
  app.add_option("--lambda2", hp.lambda2, "group sparsity of the source coefficients (dfroda_u)");
  app.add_option("--epsilon", hp.epsilon, "known/unknown ratio threshold");
  app.add_option("--d", hp.d, "subspace dimension, 0 selects it from the data");
  app.add_option("--outer-max-iter", hp.outer_max_iter, "outer iteration cap");
  app.add_option("--outer-tol", hp.outer_tol, "relative objective change that stops the outer loop");
  app.add_option("--pca-variance", hp.pca_variance, "energy kept by the joint PCA");
  app.add_option("--inner-tol", hp.inner.tol, "relative tolerance of the inner solvers");
  app.add_option("--inner-max-iter", hp.inner.max_iter, "iteration cap of the inner solvers");
  app.add_option("--ridge", hp.inner.ridge, "ridge floor for ill-conditioned systems");
  app.add_option("--dual-tol", hp.inner.dual_tol, "KKT tolerance of the dictionary update");
}

struct ClassifierFlags {
  std::string kind = "knn";
  int k = 3;
  double svm_c = 1.0;
  int svm_epochs = 1000;
  bool raw = false;

  ClassifierSpec spec() const {
    ClassifierSpec s;
    s.kind = parse_classifier(kind);
    s.k = k;
    s.svm_c = svm_c;
    s.svm_epochs = svm_epochs;
    s.space = raw ? FeatureSpace::Raw : FeatureSpace::Embedding;
    s.validate();
    return s;
  }
};

void add_classifier(CLI::App& app, ClassifierFlags& f) {
  app.add_option("--classifier", f.kind, "knn, learnt_w or svm")->check(CLI::IsMember({"knn", "learnt_w", "svm"}));
  app.add_option("--k", f.k, "neighbours for knn");
  app.add_option("--svm-c", f.svm_c, "squared hinge weight of the one-vs-one SVMs");
  app.add_option("--svm-epochs", f.svm_epochs, "gradient epochs per SVM");
  app.add_flag("--raw-features", f.raw, "classify model-space features instead of shared coefficients");
}

const std::vector<std::string> kVariants = {"froda", "dfroda", "dfroda_u"};

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string variant = "froda";
  std::string source, target, source_labels, source_unknown, out, trace, log;
  HyperParams hp;
};

void log_hyperparams(std::ostream& log, const std::string& variant, const HyperParams& hp) {
  log << "variant=" << variant << '\n'
      << "alpha=" << format_double(hp.alpha) << '\n'
      << "beta=" << format_double(hp.beta) << '\n'
      << "lambda1=" << format_double(hp.lambda1) << '\n'
      << "lambda2=" << format_double(hp.lambda2) << '\n'
      << "epsilon=" << format_double(hp.epsilon) << '\n'
      << "d=" << hp.d << '\n'
      << "outer_max_iter=" << hp.outer_max_iter << '\n'
      << "outer_tol=" << format_double(hp.outer_tol) << '\n'
      << "pca_variance=" << format_double(hp.pca_variance) << '\n'
      << "inner_tol=" << format_double(hp.inner.tol) << '\n'
      << "inner_max_iter=" << hp.inner.max_iter << '\n'
      << "ridge=" << format_double(hp.inner.ridge) << '\n'
      << "dual_tol=" << format_double(hp.inner.dual_tol) << '\n';
}

int run_fit(const FitArgs& a, std::ostream& out) {
  const Variant variant = parse_variant(a.variant);
  a.hp.validate();

  Dataset source = load_features(a.source);
  FitInputs inputs;
  inputs.source = std::move(source.features);
  if (!a.source_labels.empty()) {
    inputs.source_labels = load_labels(a.source_labels);
  } else if (source.labeled()) {
    inputs.source_labels = std::move(source.labels);
  }
  if (variant != Variant::Froda && inputs.source_labels.empty()) {
    throw InvalidArgument("--variant " + a.variant + " requires --source-labels or a label column in --source");
  }
  inputs.target = load_features(a.target).features;
  if (!a.source_unknown.empty()) {
    if (variant != Variant::DFrodaU) throw InvalidArgument("--source-unknown is only used by --variant dfroda_u");
    inputs.source_unknown = load_features(a.source_unknown).features;
  } else if (variant == Variant::DFrodaU) {
    throw InvalidArgument("--variant dfroda_u requires --source-unknown");
  }

  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log") : fs::path(a.log);
  const fs::path trace_path = a.trace.empty() ? fs::path(a.out + ".trace.csv") : fs::path(a.trace);
  std::ofstream log = open_output(log_path);
  log_hyperparams(log, a.variant, a.hp);

  FitOptions opts;
  opts.on_iteration = [&log](int iteration, double objective) {
    log << "iteration=" << iteration << " objective=" << format_double(objective) << '\n';
  };
  const FactorizedModel model = fit_auto(inputs, variant, a.hp, opts);
  log << "selected_d=" << model.d << '\n' << "outer_iterations=" << model.n_outer_iters << '\n';
  finish(log, log_path);

  std::ofstream trace = open_output(trace_path);
  trace << "iteration,objective\n";
  for (std::size_t i = 0; i < model.objective_trace.size(); ++i) {
    trace << i << ',' << format_double(model.objective_trace[i]) << '\n';
  }
  finish(trace, trace_path);

  save_model(model, a.out);
  out << "wrote " << a.out << " (d=" << model.d << ", " << model.n_outer_iters << " outer iterations)\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model, target, out;
  std::optional<double> epsilon;
  ClassifierFlags classifier;
};

int run_predict(const PredictArgs& a, std::ostream& out) {
  const ClassifierSpec spec = a.classifier.spec();
  const FactorizedModel model = load_model(a.model);
  const double epsilon = a.epsilon.value_or(model.hp.epsilon);

  const OpenSetAssignment training = assign_known_unknown(model, epsilon);
  const OpenSetClassifier classifier = train_open_classifier(model, training, spec);

  OpenSetAssignment assignment;
  std::vector<int> labels;
  if (a.target.empty()) {
    assignment = training;
    labels = predict(model, classifier, assignment);
  } else {
    const Matrix X = load_features(a.target).features;
    assignment = assign_from_coefficients(encode_targets(model, X), model.d, epsilon);
    labels = predict(model, classifier, assignment, X);
  }

  const fs::path path(a.out);
  std::ofstream csv = open_output(path);
  csv << "sample_index,ratio,is_unknown,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    csv << i << ',' << format_double(assignment.ratio[i]) << ',' << (assignment.is_unknown[i] ? 1 : 0) << ','
        << labels[i] << '\n';
  }
  finish(csv, path);
  out << "wrote " << a.out << " (" << labels.size() << " samples, " << assignment.unknown_count()
      << " unknown)\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string name = "experiment";
  std::string variant = "froda";
  HyperParams hp;
  ClassifierFlags classifier;
  bool synthetic = false;
  SyntheticSpec synth;
  std::string source, target;
  std::string protocol = "office";
  std::vector<int> known, source_unknown, target_unknown;
  int per_class_source = 0;
  int per_class_target = 0;
  int seeds = 10;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir = ".";
};

OpenSetProtocol make_protocol(const EvalArgs& a, const CLI::App& app) {
  OpenSetProtocol p;
  if (a.protocol == "office") {
    p = OpenSetProtocol::office();
  } else if (a.protocol == "bcis") {
    p = OpenSetProtocol::bcis();
  }
  if (a.protocol == "custom" || app.count("--known-classes") > 0) p.known_classes = a.known;
  if (a.protocol == "custom" || app.count("--source-unknown-classes") > 0) p.source_unknown_classes = a.source_unknown;
  if (a.protocol == "custom" || app.count("--target-unknown-classes") > 0) p.target_unknown_classes = a.target_unknown;
  if (a.protocol == "custom" || app.count("--per-class-source") > 0) p.per_class_source = a.per_class_source;
  if (a.protocol == "custom" || app.count("--per-class-target") > 0) p.per_class_target = a.per_class_target;
  p.validate();
  return p;
}

int run_eval(const EvalArgs& a, const CLI::App& app, std::ostream& out) {
  if (a.seeds < 1) throw InvalidArgument("--seeds must be >= 1");
  ExperimentConfig config;
  config.name = a.name;
  config.variant = parse_variant(a.variant);
  config.hp = a.hp;
  config.classifier = a.classifier.spec();
  config.jobs = a.jobs;
  config.seeds.resize(static_cast<std::size_t>(a.seeds));
  std::iota(config.seeds.begin(), config.seeds.end(), a.seed);

  if (a.synthetic) {
    if (!a.source.empty() || !a.target.empty()) throw InvalidArgument("--synthetic cannot be combined with --source/--target");
    a.synth.validate();
    config.synthetic = a.synth;
  } else {
    if (a.source.empty() || a.target.empty()) throw InvalidArgument("eval needs --synthetic or both --source and --target");
    RealData real{load_features(a.source), load_features(a.target), make_protocol(a, app)};
    if (!real.source.labeled() || !real.target.labeled()) {
      throw InvalidArgument("--source and --target must carry a label column");
    }
    config.real = std::move(real);
  }

  const EvalReport report = run_experiment(config);
  const fs::path dir(a.out_dir);
  {
    const fs::path path = dir / "report.json";
    std::ofstream f = open_output(path);
    f << to_json(report) << '\n';
    finish(f, path);
  }
  {
    const fs::path path = dir / "report.csv";
    std::ofstream f = open_output(path);
    write_report_csv(report, f);
    finish(f, path);
  }
  out << report.name << "  class-avg " << format_percent(report.class_avg_accuracy) << "  overall "
      << format_percent(report.overall_accuracy) << "  unknown-F1 " << format_percent(report.unknown_f1) << "  ("
      << report.runs.size() << " seeds)\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  SyntheticSpec spec;
  std::string out_dir = ".";
  std::string format = "csv";
};

int run_synth(const SynthArgs& a, std::ostream& out) {
  a.spec.validate();
  const SyntheticScenario scenario = generate_synthetic(a.spec);
  const FileFormat format = a.format == "bin" ? FileFormat::Binary : FileFormat::Csv;
  const std::string ext = a.format == "bin" ? ".bin" : ".csv";
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  auto save = [&](const Dataset& data) {
    const fs::path path = dir / (data.name + ext);
    save_features(data, path, format);
    out << "wrote " << path.string() << " (" << data.size() << " samples)\n";
  };
  save(scenario.source);
  save(scenario.target);
  if (scenario.source_unknown.size() > 0) save(scenario.source_unknown);
  return kOk;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string model, truth, out = "sweep.csv";
  std::string grid = "0.05:0.05:1.0";
  ClassifierFlags classifier;
};

bool first_line_has_comma(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  return line.find(',') != std::string::npos;
}

// A labels file, or a feature file whose label column holds the truth.
std::vector<int> load_truth(const fs::path& path) {
  if (format_for_path(path) == FileFormat::Binary || first_line_has_comma(path)) {
    Dataset data = load_features(path);
    if (!data.labeled()) throw InvalidArgument(path.string() + " has no label column");
    return std::move(data.labels);
  }
  return load_labels(path);
}

int run_sweep(const SweepArgs& a, std::ostream& out) {
  const ClassifierSpec spec = a.classifier.spec();
  const std::vector<double> grid = parse_grid(a.grid);
  const FactorizedModel model = load_model(a.model);
  const std::vector<int> truth = load_truth(a.truth);
  const auto rows = sweep_epsilon(model, grid, truth, spec);

  const fs::path path(a.out);
  std::ofstream csv = open_output(path);
  write_sweep_csv(rows, csv);
  finish(csv, path);
  const auto best = std::max_element(rows.begin(), rows.end(), [](const SweepRow& x, const SweepRow& y) {
    return x.class_avg_accuracy < y.class_avg_accuracy;
  });
  out << "wrote " << a.out << " (" << rows.size() << " thresholds, best epsilon " << format_double(best->epsilon)
      << " class-avg " << format_double(best->class_avg_accuracy) << ")\n";
  return kOk;
}

void add_synthetic_spec(CLI::App& app, SyntheticSpec& s, const std::string& prefix) {
  app.add_option(prefix + "D", s.D, "feature dimension");
  app.add_option(prefix + "d", s.d, "dimension of each generating subspace");
  app.add_option(prefix + "C", s.C, "known classes");
  app.add_option(prefix + "n-per-class-source", s.n_per_class_source, "source samples per known class");
  app.add_option(prefix + "n-per-class-target", s.n_per_class_target, "target samples per known class");
  app.add_option(prefix + "n-unknown-target", s.n_unknown_target, "unknown target samples");
  app.add_option(prefix + "n-unknown-source", s.n_unknown_source, "unknown source samples");
  app.add_option(prefix + "noise-sigma", s.noise_sigma, "standard deviation of the additive noise");
  app.add_option(prefix + "class-center-scale", s.class_center_scale, "scale of the class centres");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-set domain adaptation by shared/private subspace factorisation", "froda"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "froda 0.1.0");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "learn the subspaces and write a model file");
  add_config(*fit_cmd);
  fit_cmd->add_option("--variant", fit.variant, "froda, dfroda or dfroda_u")->check(CLI::IsMember(kVariants));
  fit_cmd->add_option("--source", fit.source, "source features (CSV or FRODA1 binary)")->required();
  fit_cmd->add_option("--target", fit.target, "target features")->required();
  fit_cmd->add_option("--source-labels", fit.source_labels, "source labels, one per line (default: label column)");
  fit_cmd->add_option("--source-unknown", fit.source_unknown, "unknown-class source features (dfroda_u)");
  fit_cmd->add_option("--out", fit.out, "model file to write")->required();
  fit_cmd->add_option("--trace", fit.trace, "objective trace CSV (default: <out>.trace.csv)");
  fit_cmd->add_option("--log", fit.log, "fit log (default: <out>.log)");
  add_hyperparams(*fit_cmd, fit.hp);

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "label targets with a fitted model");
  add_config(*pred_cmd);
  pred_cmd->add_option("--model", pred.model, "model file")->required();
  pred_cmd->add_option("--target", pred.target, "new target features (default: the training targets)");
  pred_cmd->add_option("--epsilon", pred.epsilon, "known/unknown ratio threshold (default: the model's)");
  add_classifier(*pred_cmd, pred.classifier);
  pred_cmd->add_option("--out", pred.out, "predictions CSV")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "run seeded experiments and write report.json and report.csv");
  add_config(*eval_cmd);
  eval_cmd->add_option("--name", ev.name, "experiment name in the report");
  eval_cmd->add_option("--variant", ev.variant, "froda, dfroda or dfroda_u")->check(CLI::IsMember(kVariants));
  add_hyperparams(*eval_cmd, ev.hp);
  add_classifier(*eval_cmd, ev.classifier);
  eval_cmd->add_flag("--synthetic", ev.synthetic, "generate the data instead of reading it");
  add_synthetic_spec(*eval_cmd, ev.synth, "--synth-");
  eval_cmd->add_option("--source", ev.source, "labeled source features");
  eval_cmd->add_option("--target", ev.target, "labeled target features");
  eval_cmd->add_option("--protocol", ev.protocol, "office, bcis or custom")
      ->check(CLI::IsMember({"office", "bcis", "custom"}));
  eval_cmd->add_option("--known-classes", ev.known, "known class ids")->delimiter(',');
  eval_cmd->add_option("--source-unknown-classes", ev.source_unknown, "class ids of unknown sources")
      ->delimiter(',');
  eval_cmd->add_option("--target-unknown-classes", ev.target_unknown, "class ids of unknown targets")
      ->delimiter(',');
  eval_cmd->add_option("--per-class-source", ev.per_class_source, "source samples per class, 0 takes all");
  eval_cmd->add_option("--per-class-target", ev.per_class_target, "target samples per class, 0 takes all");
  eval_cmd->add_option("--seeds", ev.seeds, "number of seeds");
  eval_cmd->add_option("--seed", ev.seed, "first seed");
  eval_cmd->add_option("--jobs", ev.jobs, "seeds run in parallel");
  eval_cmd->add_option("--out-dir", ev.out_dir, "directory for report.json and report.csv");

  SynthArgs syn;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic open-set scenario");
  add_config(*synth_cmd);
  add_synthetic_spec(*synth_cmd, syn.spec, "--");
  synth_cmd->add_option("--seed", syn.spec.seed, "generator seed");
  synth_cmd->add_option("--out-dir", syn.out_dir, "output directory");
  synth_cmd->add_option("--format", syn.format, "csv or bin")->check(CLI::IsMember({"csv", "bin"}));

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "accuracy of a fitted model over a grid of epsilon");
  add_config(*sweep_cmd);
  sweep_cmd->add_option("--model", sw.model, "model file")->required();
  sweep_cmd->add_option("--truth", sw.truth, "true target labels, or a feature file with a label column")
      ->required();
  sweep_cmd->add_option("--grid", sw.grid, "start:step:stop or a comma-separated list");
  add_classifier(*sweep_cmd, sw.classifier);
  sweep_cmd->add_option("--out", sw.out, "sweep CSV");

  try {
    const std::vector<std::string> expanded = expand_config(args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return kFailure;
  }

  try {
    if (*fit_cmd) return run_fit(fit, out);
    if (*pred_cmd) return run_predict(pred, out);
    if (*eval_cmd) return run_eval(ev, *eval_cmd, out);
    if (*synth_cmd) return run_synth(syn, out);
    if (*sweep_cmd) return run_sweep(sw, out);
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace froda::cli
