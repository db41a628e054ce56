#include "froda/eval.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

namespace froda {

using nlohmann::json;

Metrics score(std::span<const int> predictions, std::span<const int> truth, int classes) {
  if (classes < 1) throw InvalidArgument("score: C must be >= 1");
  if (predictions.size() != truth.size()) throw DimensionMismatch("score: prediction and truth lengths differ");
  if (truth.empty()) throw InvalidArgument("score: no samples");
  const int unknown = classes + 1;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (int label : {predictions[i], truth[i]}) {
      if (label < 1 || label > unknown) {
        throw InvalidArgument("score: label " + std::to_string(label) + " at sample " + std::to_string(i) +
                              " is outside 1.." + std::to_string(unknown));
      }
    }
  }

  Metrics m;
  std::vector<std::size_t> hits(static_cast<std::size_t>(unknown) + 1, 0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(unknown) + 1, 0);
  std::size_t correct = 0, tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    ++counts[t];
    if (predictions[i] == truth[i]) {
      ++hits[t];
      ++correct;
    }
    const bool said_unknown = predictions[i] == unknown;
    const bool is_unknown = truth[i] == unknown;
    if (said_unknown && is_unknown) ++tp;
    if (said_unknown && !is_unknown) ++fp;
    if (!said_unknown && is_unknown) ++fn;
  }
  m.overall_accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  double recall_sum = 0.0;
  for (int c = 1; c <= unknown; ++c) {
    const auto idx = static_cast<std::size_t>(c);
    if (counts[idx] == 0) {
      m.empty_classes.push_back(c);
      continue;
    }
    const double r = static_cast<double>(hits[idx]) / static_cast<double>(counts[idx]);
    m.per_class[c] = r;
    recall_sum += r;
  }
  m.class_avg_accuracy = recall_sum / static_cast<double>(m.per_class.size());

  const bool nothing_to_find = tp + fn == 0;
  auto ratio = [&](std::size_t num, std::size_t den) {
    if (den == 0) return nothing_to_find ? 1.0 : 0.0;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.unknown_precision = ratio(tp, tp + fp);
  m.unknown_recall = ratio(tp, tp + fn);
  const double pr = m.unknown_precision + m.unknown_recall;
  m.unknown_f1 = pr > 0.0 ? 2.0 * m.unknown_precision * m.unknown_recall / pr : 0.0;
  return m;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("mean_std: no values");
  MeanStd out;
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    out.mean = values.front();
    return out;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

json hyperparams_json(const HyperParams& hp) {
  return {{"alpha", hp.alpha},           {"beta", hp.beta},
          {"lambda1", hp.lambda1},       {"lambda2", hp.lambda2},
          {"epsilon", hp.epsilon},       {"d", hp.d},
          {"outer_max_iter", hp.outer_max_iter}, {"outer_tol", hp.outer_tol},
          {"pca_variance", hp.pca_variance},     {"inner_tol", hp.inner.tol},
          {"inner_max_iter", hp.inner.max_iter}, {"ridge", hp.inner.ridge}};
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["variant"] = std::string(to_string(c.variant));
  j["hyperparams"] = hyperparams_json(c.hp);
  j["classifier"] = {{"kind", std::string(to_string(c.classifier.kind))},
                     {"k", c.classifier.k},
                     {"svm_c", c.classifier.svm_c},
                     {"svm_epochs", c.classifier.svm_epochs},
                     {"space", c.classifier.space == FeatureSpace::Embedding ? "embedding" : "raw"}};
  j["seeds"] = c.seeds;
  if (c.synthetic) {
    const auto& s = *c.synthetic;
    j["synthetic"] = {{"D", s.D},
                      {"d", s.d},
                      {"C", s.C},
                      {"n_per_class_source", s.n_per_class_source},
                      {"n_per_class_target", s.n_per_class_target},
                      {"n_unknown_target", s.n_unknown_target},
                      {"n_unknown_source", s.n_unknown_source},
                      {"noise_sigma", s.noise_sigma},
                      {"class_center_scale", s.class_center_scale}};
  }
  if (c.real) {
    const auto& p = c.real->protocol;
    j["protocol"] = {{"source", c.real->source.name},
                     {"target", c.real->target.name},
                     {"known_classes", p.known_classes},
                     {"source_unknown_classes", p.source_unknown_classes},
                     {"target_unknown_classes", p.target_unknown_classes},
                     {"per_class_source", p.per_class_source},
                     {"per_class_target", p.per_class_target}};
  }
  return j;
}

}  // namespace

SeedRun run_single(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.synthetic.has_value() == config.real.has_value()) {
    throw InvalidArgument("experiment: give exactly one of synthetic or real data");
  }
  FitInputs inputs;
  std::vector<int> truth;
  if (config.synthetic) {
    SyntheticSpec spec = *config.synthetic;
    spec.seed = seed;
    auto scenario = generate_synthetic(spec);
    inputs.source = std::move(scenario.source.features);
    inputs.source_labels = std::move(scenario.source.labels);
    inputs.target = std::move(scenario.target.features);
    inputs.classes = scenario.classes;
    if (config.variant == Variant::DFrodaU) inputs.source_unknown = std::move(scenario.source_unknown.features);
    truth = std::move(scenario.target.labels);
  } else {
    OpenSetProtocol protocol = config.real->protocol;
    protocol.seed = seed;
    auto split = apply_protocol(config.real->source, config.real->target, protocol);
    inputs.source = std::move(split.source_known);
    inputs.source_labels = std::move(split.source_labels);
    inputs.target = std::move(split.target);
    inputs.classes = split.classes;
    if (config.variant == Variant::DFrodaU) inputs.source_unknown = std::move(split.source_unknown);
    truth = std::move(split.target_truth);
  }

  const FactorizedModel model = fit_auto(inputs, config.variant, config.hp);
  const auto assignment = assign_known_unknown(model, config.hp.epsilon);
  const auto classifier = train_open_classifier(model, assignment, config.classifier);
  const auto predictions = predict(model, classifier, assignment);

  SeedRun run;
  run.seed = seed;
  run.metrics = score(predictions, truth, inputs.classes);
  run.fit_seconds = model.outer_loop_seconds;
  run.n_outer_iters = model.n_outer_iters;
  run.per_iter_seconds = model.n_outer_iters > 0 ? model.outer_loop_seconds / model.n_outer_iters : 0.0;
  run.d = model.d;
  run.unknown_assigned = assignment.unknown_count();
  return run;
}

EvalReport run_experiment(const ExperimentConfig& config) {
  if (config.seeds.empty()) throw InvalidArgument("experiment: at least one seed is required");
  if (config.jobs < 1) throw InvalidArgument("experiment: jobs must be >= 1");
  config.hp.validate();
  config.classifier.validate();

  const std::size_t n = config.seeds.size();
  std::vector<SeedRun> runs(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        runs[i] = run_single(config, config.seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvalReport report;
  report.name = config.name;
  auto collect = [&](auto field) {
    std::vector<double> values;
    for (const auto& r : runs) values.push_back(field(r));
    return mean_std(values);
  };
  report.overall_accuracy = collect([](const SeedRun& r) { return r.metrics.overall_accuracy; });
  report.class_avg_accuracy = collect([](const SeedRun& r) { return r.metrics.class_avg_accuracy; });
  report.unknown_precision = collect([](const SeedRun& r) { return r.metrics.unknown_precision; });
  report.unknown_recall = collect([](const SeedRun& r) { return r.metrics.unknown_recall; });
  report.unknown_f1 = collect([](const SeedRun& r) { return r.metrics.unknown_f1; });
  report.fit_seconds = collect([](const SeedRun& r) { return r.fit_seconds; });
  report.per_iter_seconds = collect([](const SeedRun& r) { return r.per_iter_seconds; });
  report.n_outer_iters = collect([](const SeedRun& r) { return static_cast<double>(r.n_outer_iters); });
  std::set<int> classes;
  for (const auto& r : runs) {
    for (const auto& [c, v] : r.metrics.per_class) classes.insert(c);
  }
  for (int c : classes) {
    std::vector<double> values;
    for (const auto& r : runs) {
      if (auto it = r.metrics.per_class.find(c); it != r.metrics.per_class.end()) values.push_back(it->second);
    }
    report.per_class[c] = mean_std(values);
  }
  report.runs = std::move(runs);
  report.config_json = config_json(config).dump();
  return report;
}

// ---------------------------------------------------------------------------

namespace {

json mean_std_json(const MeanStd& v) { return {{"mean", v.mean}, {"std", v.std}}; }

json metrics_json(const Metrics& m) {
  json per_class = json::object();
  for (const auto& [c, r] : m.per_class) per_class[std::to_string(c)] = r;
  return {{"overall_accuracy", m.overall_accuracy},
          {"class_avg_accuracy", m.class_avg_accuracy},
          {"per_class", per_class},
          {"empty_classes", m.empty_classes},
          {"unknown_precision", m.unknown_precision},
          {"unknown_recall", m.unknown_recall},
          {"unknown_f1", m.unknown_f1}};
}

}  // namespace

std::string to_json(const EvalReport& report) {
  json j;
  j["name"] = report.name;
  j["overall_accuracy"] = mean_std_json(report.overall_accuracy);
  j["class_avg_accuracy"] = mean_std_json(report.class_avg_accuracy);
  json per_class = json::object();
  for (const auto& [c, v] : report.per_class) per_class[std::to_string(c)] = mean_std_json(v);
  j["per_class"] = per_class;
  j["unknown_detection"] = {{"precision", mean_std_json(report.unknown_precision)},
                            {"recall", mean_std_json(report.unknown_recall)},
                            {"f1", mean_std_json(report.unknown_f1)}};
  j["fit_seconds"] = mean_std_json(report.fit_seconds);
  j["per_iter_seconds"] = mean_std_json(report.per_iter_seconds);
  j["n_outer_iters"] = mean_std_json(report.n_outer_iters);
  json runs = json::array();
  for (const auto& r : report.runs) {
    runs.push_back({{"seed", r.seed},
                    {"metrics", metrics_json(r.metrics)},
                    {"fit_seconds", r.fit_seconds},
                    {"per_iter_seconds", r.per_iter_seconds},
                    {"n_outer_iters", r.n_outer_iters},
                    {"d", r.d},
                    {"unknown_assigned", r.unknown_assigned}});
  }
  j["runs"] = runs;
  j["config"] = report.config_json.empty() ? json::object() : json::parse(report.config_json);
  return j.dump(2) + "\n";
}

void write_report_csv(const EvalReport& report, std::ostream& out) {
  std::vector<std::pair<std::string, MeanStd>> columns{
      {"overall_accuracy", report.overall_accuracy},   {"class_avg_accuracy", report.class_avg_accuracy},
      {"unknown_precision", report.unknown_precision}, {"unknown_recall", report.unknown_recall},
      {"unknown_f1", report.unknown_f1},               {"fit_seconds", report.fit_seconds},
      {"per_iter_seconds", report.per_iter_seconds},   {"n_outer_iters", report.n_outer_iters}};
  for (const auto& [c, v] : report.per_class) columns.emplace_back("class_" + std::to_string(c), v);
  out << "name,n_seeds";
  for (const auto& [name, v] : columns) out << ',' << name << "_mean," << name << "_std";
  out << '\n' << report.name << ',' << report.runs.size();
  for (const auto& [name, v] : columns) out << ',' << format_double(v.mean) << ',' << format_double(v.std);
  out << '\n';
}

std::string format_percent(const MeanStd& value) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.1f±%.1f", 100.0 * value.mean, 100.0 * value.std);
  return buf.data();
}

std::vector<SweepRow> sweep_epsilon(const FactorizedModel& model, std::span<const double> grid,
                                    std::span<const int> truth, const ClassifierSpec& classifier) {
  if (grid.empty()) throw InvalidArgument("sweep: empty epsilon grid");
  if (static_cast<Eigen::Index>(truth.size()) != model.target_count()) {
    throw DimensionMismatch("sweep: truth has " + std::to_string(truth.size()) + " labels for " +
                            std::to_string(model.target_count()) + " targets");
  }
  std::vector<SweepRow> rows;
  for (double eps : grid) {
    const auto assignment = assign_known_unknown(model, eps);
    const auto clf = train_open_classifier(model, assignment, classifier);
    const auto m = score(predict(model, clf, assignment), truth, model.classes);
    rows.push_back({eps, m.class_avg_accuracy, m.overall_accuracy, assignment.unknown_count()});
  }
  return rows;
}

void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out) {
  out << "epsilon,class_avg_accuracy\n";
  for (const auto& r : rows) out << format_double(r.epsilon) << ',' << format_double(r.class_avg_accuracy) << '\n';
}

namespace {

double parse_number(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || std::isnan(v)) {
    throw InvalidArgument("grid: cannot parse '" + std::string(s) + "' as a number");
  }
  return v;
}

// Rounds away the accumulated error of start + i * step.
double tidy(double v) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.12g", v);
  return std::strtod(buf.data(), nullptr);
}

}  // namespace

std::vector<double> parse_grid(std::string_view text) {
  std::vector<double> out;
  if (text.find(':') != std::string_view::npos) {
    std::vector<double> parts;
    std::size_t start = 0;
    while (true) {
      const auto colon = text.find(':', start);
      parts.push_back(parse_number(text.substr(start, colon == std::string_view::npos ? colon : colon - start)));
      if (colon == std::string_view::npos) break;
      start = colon + 1;
    }
    if (parts.size() != 3) throw InvalidArgument("grid: expected start:step:stop");
    const double first = parts[0], step = parts[1], last = parts[2];
    if (!std::isfinite(first) || !std::isfinite(last) || !(step > 0.0) || !std::isfinite(step)) {
      throw InvalidArgument("grid: start and stop must be finite and step positive");
    }
    if (last < first) throw InvalidArgument("grid: stop is smaller than start");
    const auto count = static_cast<std::size_t>(std::floor((last - first) / step + 1e-9)) + 1;
    if (count > 1000000) throw InvalidArgument("grid: too many points");
    for (std::size_t i = 0; i < count; ++i) out.push_back(tidy(first + static_cast<double>(i) * step));
  } else {
    std::size_t start = 0;
    while (true) {
      const auto comma = text.find(',', start);
      out.push_back(parse_number(text.substr(start, comma == std::string_view::npos ? comma : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  }
  return out;
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf.data(), ptr);
}

}  // namespace froda
