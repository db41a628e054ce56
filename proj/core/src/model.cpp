#include "froda/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace froda {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Froda: return "froda";
    case Variant::DFroda: return "dfroda";
    case Variant::DFrodaU: return "dfroda_u";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "froda") return Variant::Froda;
  if (name == "dfroda") return Variant::DFroda;
  if (name == "dfroda_u") return Variant::DFrodaU;
  throw InvalidArgument("unknown variant '" + std::string(name) + "' (expected froda, dfroda or dfroda_u)");
}

std::string_view to_string(Block b) {
  switch (b) {
    case Block::Init: return "init";
    case Block::U: return "U";
    case Block::USource: return "U_src";
    case Block::V: return "V";
    case Block::T: return "T";
    case Block::S: return "S";
    case Block::W: return "W";
  }
  return "?";
}

void HyperParams::validate() const {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be > 0");
  if (!(beta >= 0.0)) throw InvalidArgument("beta must be >= 0");
  if (!(lambda1 >= 0.0)) throw InvalidArgument("lambda1 must be >= 0");
  if (!(lambda2 >= 0.0)) throw InvalidArgument("lambda2 must be >= 0");
  if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be >= 0");
  if (d < 0) throw InvalidArgument("d must be >= 0");
  if (outer_max_iter < 1) throw InvalidArgument("outer_max_iter must be >= 1");
  if (!(outer_tol > 0.0)) throw InvalidArgument("outer_tol must be > 0");
  if (!(pca_variance > 0.0 && pca_variance <= 1.0)) throw InvalidArgument("pca_variance must lie in (0, 1]");
  inner.validate();
}

LabelMatrix LabelMatrix::from_labels(std::span<const int> labels, int classes) {
  if (classes < 1) throw InvalidArgument("label matrix needs at least one class");
  LabelMatrix out;
  out.onehot_ = Matrix::Zero(classes, static_cast<Eigen::Index>(labels.size()));
  out.labels_.assign(labels.begin(), labels.end());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > classes) {
      throw InvalidArgument("label " + std::to_string(labels[i]) + " at sample " + std::to_string(i) +
                            " outside 1.." + std::to_string(classes));
    }
    out.onehot_(labels[i] - 1, static_cast<Eigen::Index>(i)) = 1.0;
  }
  return out;
}

Eigen::Index max_subspace_dim(Variant variant, Eigen::Index D) {
  return variant == Variant::DFrodaU ? D / 3 : D / 2;
}

// ---------------------------------------------------------------------------

namespace {

double group_penalty(const Matrix& coeffs, const GroupSpec& groups) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < coeffs.cols(); ++i) s += group_norm_sum(coeffs.col(i), groups);
  return s;
}

Matrix hcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

Matrix vcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

double target_term(const FactorizedModel& m, const Matrix& Xt) {
  return (Xt - m.V * m.T.topRows(m.d) - m.U * m.T.bottomRows(m.d)).squaredNorm();
}

void require_same_dim(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows()) {
    throw DimensionMismatch(std::string(what) + ": feature dimensions differ (" + std::to_string(a.rows()) +
                            " vs " + std::to_string(b.rows()) + ")");
  }
}

void require_dim_attainable(Eigen::Index d, Eigen::Index D, Variant variant) {
  if (d < 1) throw InvalidArgument("subspace dimension d must be >= 1 for an explicit fit");
  const Eigen::Index cap = max_subspace_dim(variant, D);
  if (d > cap) {
    throw RankDeficient("subspace dimension d=" + std::to_string(d) + " unattainable in " + std::to_string(D) +
                            " dimensions (max " + std::to_string(cap) + " for " +
                            std::string(to_string(variant)) + ")",
                        cap);
  }
}

// Alternating minimisation shared by the three variants.
class Fitter {
 public:
  Fitter(Variant variant, const Matrix& Xs, const Matrix& Xt, const Matrix* onehot, const HyperParams& hp,
         const FitOptions& opts)
      : Xs_(Xs), Xt_(Xt), onehot_(onehot), hp_(hp), opts_(opts) {
    model_.variant = variant;
    model_.hp = hp;
    model_.d = hp.d;
    model_.source_data = Xs;
    model_.target_data = Xt;
  }

  double objective() const {
    const auto& m = model_;
    const GroupSpec groups = m.groups();
    double f = target_term(m, Xt_) + hp_.lambda1 * group_penalty(m.T, groups);
    switch (m.variant) {
      case Variant::Froda:
        f += hp_.alpha * (Xs_ - m.V * m.S).squaredNorm();
        break;
      case Variant::DFroda:
        f += hp_.alpha * (Xs_ - m.V * m.S).squaredNorm();
        if (m.W) f += hp_.beta * (*onehot_ - *m.W * m.S).squaredNorm();
        break;
      case Variant::DFrodaU: {
        const Matrix recon = m.V * m.S.topRows(m.d) + *m.U_src * m.S.bottomRows(m.d);
        f += hp_.alpha * (Xs_ - recon).squaredNorm() + hp_.lambda2 * group_penalty(m.S, groups);
        if (m.W) f += hp_.beta * (*onehot_ - *m.W * m.S).squaredNorm();
        break;
      }
    }
    return f;
  }

  FactorizedModel run(const Matrix& Xs_for_pca) {
    initialise(Xs_for_pca);
    double previous = objective();
    model_.objective_trace.push_back(previous);
    notify(Block::Init, 0, previous);

    const auto start = std::chrono::steady_clock::now();
    for (int iter = 1; iter <= hp_.outer_max_iter; ++iter) {
      iteration_ = iter;
      update_target_private();
      if (model_.variant == Variant::DFrodaU) update_source_private();
      update_shared();
      update_target_codes();
      update_source_codes();
      if (model_.variant != Variant::Froda) update_classifier();

      const double current = objective();
      model_.objective_trace.push_back(current);
      model_.n_outer_iters = iter;
      if (opts_.on_iteration) opts_.on_iteration(iter, current);
      const double change = std::abs(previous - current) / std::max(std::abs(previous), 1e-300);
      previous = current;
      if (change < hp_.outer_tol) break;
    }
    model_.outer_loop_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return std::move(model_);
  }

 private:
  void notify(Block b, int iter, double value) {
    if (opts_.observer) opts_.observer(b, iter, value);
    if (opts_.inspector) opts_.inspector(b, model_);
  }
  void notify(Block b) {
    if (opts_.observer) opts_.observer(b, iteration_, objective());
    if (opts_.inspector) opts_.inspector(b, model_);
  }

  Matrix target_dictionary() const { return hcat(model_.V, model_.U); }
  Matrix source_dictionary() const { return hcat(model_.V, *model_.U_src); }

  // Stacked system of the dfroda_u source codes:
  // [sqrt(a) Xs'; sqrt(b) L] against [sqrt(a) B'; sqrt(b) W'].
  std::pair<Matrix, Matrix> stacked_source_system() const {
    const double sa = std::sqrt(hp_.alpha);
    const double sb = std::sqrt(hp_.beta);
    if (!model_.W || hp_.beta == 0.0) return {sa * Xs_, sa * source_dictionary()};
    return {vcat(sa * Xs_, sb * *onehot_), vcat(sa * source_dictionary(), sb * *model_.W)};
  }

  void initialise(const Matrix& Xs_for_pca) {
    auto& m = model_;
    const Eigen::Index d = m.d;
    m.V = padded_principal_directions(Xs_for_pca, d);
    if (m.variant == Variant::DFrodaU) {
      const Matrix complement = truncated_null_space(m.V, 2 * d);
      m.U = complement.leftCols(d);
      m.U_src = complement.rightCols(d);
    } else {
      m.U = truncated_null_space(m.V, d);
    }
    m.T = group_lasso_solve(Xt_, target_dictionary(), m.groups(), hp_.lambda1, hp_.inner).coefficients;
    if (m.variant == Variant::DFrodaU) {
      const auto [X, B] = stacked_source_system();
      m.S = group_lasso_solve(X, B, m.groups(), hp_.lambda2, hp_.inner).coefficients;
      m.W = least_squares_with_floor(m.S.transpose(), onehot_->transpose(), hp_.inner.ridge).transpose();
    } else {
      m.S = least_squares_with_floor(m.V, Xs_, hp_.inner.ridge);
      if (m.variant == Variant::DFroda) {
        m.W = least_squares_with_floor(m.S.transpose(), onehot_->transpose(), hp_.inner.ridge).transpose();
      }
    }
  }

  void update_target_private() {
    auto& m = model_;
    const Matrix residual = Xt_ - m.V * m.T.topRows(m.d);
    m.U = dictionary_update(residual, m.T.bottomRows(m.d), hp_.inner, &m.U).dictionary;
    notify(Block::U);
  }

  void update_source_private() {
    auto& m = model_;
    const Matrix residual = Xs_ - m.V * m.S.topRows(m.d);
    m.U_src = dictionary_update(residual, m.S.bottomRows(m.d), hp_.inner, &*m.U_src).dictionary;
    notify(Block::USource);
  }

  void update_shared() {
    auto& m = model_;
    const double sa = std::sqrt(hp_.alpha);
    const Matrix target_residual = Xt_ - m.U * m.T.bottomRows(m.d);
    Matrix residual, coeffs;
    if (m.variant == Variant::DFrodaU) {
      residual = hcat(target_residual, sa * (Xs_ - *m.U_src * m.S.bottomRows(m.d)));
      coeffs = hcat(m.T.topRows(m.d), sa * m.S.topRows(m.d));
    } else {
      residual = hcat(target_residual, sa * Xs_);
      coeffs = hcat(m.T.topRows(m.d), sa * m.S);
    }
    m.V = dictionary_update(residual, coeffs, hp_.inner, &m.V).dictionary;
    notify(Block::V);
  }

  void update_target_codes() {
    auto& m = model_;
    m.T = group_lasso_solve(Xt_, target_dictionary(), m.groups(), hp_.lambda1, hp_.inner, &m.T).coefficients;
    notify(Block::T);
  }

  // Closed-form code updates fall back to a ridge floor on ill-conditioned
  // systems; the previous iterate is kept if that perturbation would raise
  // the subproblem objective.
  void update_source_codes() {
    auto& m = model_;
    if (m.variant == Variant::DFrodaU) {
      const auto [X, B] = stacked_source_system();
      m.S = group_lasso_solve(X, B, m.groups(), hp_.lambda2, hp_.inner, &m.S).coefficients;
      notify(Block::S);
      return;
    }
    Matrix candidate;
    if (m.variant == Variant::Froda || hp_.beta == 0.0 || !m.W) {
      candidate = least_squares_with_floor(m.V, Xs_, hp_.inner.ridge);
    } else {
      const double sa = std::sqrt(hp_.alpha);
      const double sb = std::sqrt(hp_.beta);
      candidate = least_squares_with_floor(vcat(sa * m.V, sb * *m.W), vcat(sa * Xs_, sb * *onehot_),
                                           hp_.inner.ridge);
    }
    auto source_objective = [&](const Matrix& S) {
      double f = hp_.alpha * (Xs_ - m.V * S).squaredNorm();
      if (m.variant == Variant::DFroda && m.W) f += hp_.beta * (*onehot_ - *m.W * S).squaredNorm();
      return f;
    };
    if (source_objective(candidate) <= source_objective(m.S)) m.S = std::move(candidate);
    notify(Block::S);
  }

  void update_classifier() {
    auto& m = model_;
    Matrix candidate = least_squares_with_floor(m.S.transpose(), onehot_->transpose(), hp_.inner.ridge).transpose();
    if ((*onehot_ - candidate * m.S).squaredNorm() <= (*onehot_ - *m.W * m.S).squaredNorm()) {
      m.W = std::move(candidate);
    }
    notify(Block::W);
  }

  const Matrix& Xs_;
  const Matrix& Xt_;
  const Matrix* onehot_;
  HyperParams hp_;
  FitOptions opts_;
  FactorizedModel model_;
  int iteration_ = 0;
};

void validate_fit_inputs(const Matrix& Xs, const Matrix& Xt, const HyperParams& hp, Variant variant) {
  hp.validate();
  require_features(Xs, "source");
  require_features(Xt, "target");
  require_same_dim(Xs, Xt, "fit");
  require_dim_attainable(hp.d, Xs.rows(), variant);
}

}  // namespace

// ---------------------------------------------------------------------------

double objective_froda(const Matrix& V, const Matrix& U, const Matrix& S, const Matrix& T, const Matrix& Xs,
                       const Matrix& Xt, const HyperParams& hp) {
  const Eigen::Index d = V.cols();
  if (U.cols() != d || T.rows() != 2 * d || S.rows() != d || V.rows() != Xt.rows() || V.rows() != Xs.rows() ||
      U.rows() != V.rows() || S.cols() != Xs.cols() || T.cols() != Xt.cols()) {
    throw DimensionMismatch("objective_froda: inconsistent shapes");
  }
  if (d == 0) return Xt.squaredNorm() + hp.alpha * Xs.squaredNorm();
  const GroupSpec groups = GroupSpec::uniform(2, d);
  return (Xt - V * T.topRows(d) - U * T.bottomRows(d)).squaredNorm() + hp.alpha * (Xs - V * S).squaredNorm() +
         hp.lambda1 * group_penalty(T, groups);
}

double objective_froda(const FactorizedModel& model, const Matrix& Xs, const Matrix& Xt, const HyperParams& hp) {
  return objective_froda(model.V, model.U, model.S.topRows(model.d), model.T, Xs, Xt, hp);
}

double objective_dfroda(const FactorizedModel& model, const Matrix& Xs, const Matrix& Xt, const Matrix& onehot,
                        const HyperParams& hp) {
  double f = objective_froda(model, Xs, Xt, hp);
  if (model.W) {
    if (onehot.cols() != model.S.cols() || onehot.rows() != model.W->rows()) {
      throw DimensionMismatch("objective_dfroda: label matrix shape mismatch");
    }
    f += hp.beta * (onehot - *model.W * model.S).squaredNorm();
  }
  return f;
}

double objective_dfroda_u(const FactorizedModel& model, const Matrix& Xs_all, const Matrix& Xt,
                          const Matrix& onehot, const HyperParams& hp) {
  if (!model.U_src || !model.W) throw InvalidArgument("objective_dfroda_u: model lacks U_src or W");
  const Eigen::Index d = model.d;
  if (model.S.rows() != 2 * d || model.S.cols() != Xs_all.cols() || onehot.cols() != Xs_all.cols()) {
    throw DimensionMismatch("objective_dfroda_u: inconsistent shapes");
  }
  const GroupSpec groups = model.groups();
  const Matrix recon = model.V * model.S.topRows(d) + *model.U_src * model.S.bottomRows(d);
  return target_term(model, Xt) + hp.alpha * (Xs_all - recon).squaredNorm() +
         hp.beta * (onehot - *model.W * model.S).squaredNorm() + hp.lambda1 * group_penalty(model.T, groups) +
         hp.lambda2 * group_penalty(model.S, groups);
}

double model_objective(const FactorizedModel& model) {
  const HyperParams& hp = model.hp;
  switch (model.variant) {
    case Variant::Froda:
      return objective_froda(model, model.source_data, model.target_data, hp);
    case Variant::DFroda: {
      const auto L = LabelMatrix::from_labels(model.source_labels, model.classes);
      return objective_dfroda(model, model.source_data, model.target_data, L.onehot(), hp);
    }
    case Variant::DFrodaU: {
      const auto L = LabelMatrix::from_labels(model.source_labels, model.classes + 1);
      return objective_dfroda_u(model, model.source_data, model.target_data, L.onehot(), hp);
    }
  }
  return 0.0;
}

FactorizedModel fit_froda(const Matrix& Xs, const Matrix& Xt, const HyperParams& hp, const FitOptions& opts) {
  validate_fit_inputs(Xs, Xt, hp, Variant::Froda);
  Fitter fitter(Variant::Froda, Xs, Xt, nullptr, hp, opts);
  return fitter.run(Xs);
}

FactorizedModel fit_dfroda(const Matrix& Xs, const Matrix& Xt, const LabelMatrix& labels, const HyperParams& hp,
                           const FitOptions& opts) {
  validate_fit_inputs(Xs, Xt, hp, Variant::DFroda);
  if (labels.samples() != Xs.cols()) {
    throw DimensionMismatch("fit_dfroda: " + std::to_string(labels.samples()) + " labels for " +
                            std::to_string(Xs.cols()) + " source samples");
  }
  Fitter fitter(Variant::DFroda, Xs, Xt, &labels.onehot(), hp, opts);
  FactorizedModel model = fitter.run(Xs);
  model.classes = labels.classes();
  model.source_labels = labels.labels();
  return model;
}

FactorizedModel fit_dfroda_u(const Matrix& Xs_known, const Matrix& Xs_unknown, const Matrix& Xt,
                             const LabelMatrix& labels_with_unknown, const HyperParams& hp,
                             const FitOptions& opts) {
  validate_fit_inputs(Xs_known, Xt, hp, Variant::DFrodaU);
  if (Xs_unknown.cols() > 0) {
    require_same_dim(Xs_known, Xs_unknown, "fit_dfroda_u");
    require_finite(Xs_unknown, "unknown source");
  }
  const Eigen::Index n_known = Xs_known.cols();
  const Eigen::Index n_all = n_known + Xs_unknown.cols();
  if (labels_with_unknown.samples() != n_all) {
    throw DimensionMismatch("fit_dfroda_u: " + std::to_string(labels_with_unknown.samples()) + " labels for " +
                            std::to_string(n_all) + " source samples");
  }
  const int unknown_class = labels_with_unknown.classes();
  if (unknown_class < 2) throw InvalidArgument("fit_dfroda_u: labels need C+1 >= 2 classes");
  const auto& ids = labels_with_unknown.labels();
  for (Eigen::Index i = 0; i < n_all; ++i) {
    const bool is_unknown = ids[static_cast<std::size_t>(i)] == unknown_class;
    if ((i >= n_known) != is_unknown) {
      throw InvalidArgument("fit_dfroda_u: class " + std::to_string(unknown_class) +
                            " must label exactly the unknown source samples");
    }
  }
  Matrix Xs_all(Xs_known.rows(), n_all);
  Xs_all << Xs_known, Xs_unknown;
  Fitter fitter(Variant::DFrodaU, Xs_all, Xt, &labels_with_unknown.onehot(), hp, opts);
  FactorizedModel model = fitter.run(Xs_known);
  model.classes = unknown_class - 1;
  model.source_labels = ids;
  return model;
}

FactorizedModel fit_auto(const FitInputs& in, Variant variant, const HyperParams& hp, const FitOptions& opts) {
  hp.validate();
  require_features(in.source, "source");
  require_features(in.target, "target");
  require_same_dim(in.source, in.target, "fit_auto");

  int classes = in.classes;
  if (!in.source_labels.empty()) {
    if (static_cast<Eigen::Index>(in.source_labels.size()) != in.source.cols()) {
      throw DimensionMismatch("fit_auto: " + std::to_string(in.source_labels.size()) + " labels for " +
                              std::to_string(in.source.cols()) + " source samples");
    }
    if (classes == 0) classes = *std::max_element(in.source_labels.begin(), in.source_labels.end());
  }
  if (variant != Variant::Froda && in.source_labels.empty()) {
    throw InvalidArgument(std::string(to_string(variant)) + " requires source labels");
  }
  if (variant != Variant::DFrodaU && in.source_unknown && in.source_unknown->cols() > 0) {
    throw InvalidArgument("unknown source samples are only used by dfroda_u");
  }

  Matrix all_source = in.source;
  if (variant == Variant::DFrodaU && in.source_unknown && in.source_unknown->cols() > 0) {
    require_same_dim(in.source, *in.source_unknown, "fit_auto");
    all_source = hcat(in.source, *in.source_unknown);
  }
  JointReduction reduced = joint_pca_reduce(all_source, in.target, hp.pca_variance);

  HyperParams tuned = hp;
  if (tuned.d == 0) {
    const Eigen::Index cap = max_subspace_dim(variant, reduced.projection.output_dim());
    if (cap < 1) {
      throw RankDeficient("fit_auto: reduced dimension " + std::to_string(reduced.projection.output_dim()) +
                              " too small for any subspace",
                          0);
    }
    const Eigen::Index n_known = in.source.cols();
    tuned.d = subspace_disagreement_dim(reduced.source.leftCols(n_known), reduced.target, cap);
  }

  FactorizedModel model;
  switch (variant) {
    case Variant::Froda:
      model = fit_froda(reduced.source, reduced.target, tuned, opts);
      model.classes = classes;
      model.source_labels = in.source_labels;
      break;
    case Variant::DFroda:
      model = fit_dfroda(reduced.source, reduced.target, LabelMatrix::from_labels(in.source_labels, classes), tuned,
                         opts);
      break;
    case Variant::DFrodaU: {
      const Eigen::Index n_known = in.source.cols();
      const Eigen::Index n_unknown = reduced.source.cols() - n_known;
      std::vector<int> labels = in.source_labels;
      labels.resize(static_cast<std::size_t>(n_known + n_unknown), classes + 1);
      model = fit_dfroda_u(reduced.source.leftCols(n_known), reduced.source.rightCols(n_unknown), reduced.target,
                           LabelMatrix::from_labels(labels, classes + 1), tuned, opts);
      break;
    }
  }
  model.preprocessing = std::move(reduced.projection);
  return model;
}

}  // namespace froda
