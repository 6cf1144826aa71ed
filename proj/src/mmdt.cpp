#include "mmdt/mmdt.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace mmdt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Rows of the hyperplane step: source examples followed by transformed targets.
struct HyperplaneRows {
  std::vector<FeatureVector> features;
  std::vector<int> labels;
  std::vector<double> costs;
  std::size_t source_count = 0;

  HyperplaneRows(const Dataset& source, double c) {
    features.reserve(source.size());
    for (const auto& e : source.examples()) {
      features.push_back(e.x);
      labels.push_back(e.label);
      costs.push_back(c);
    }
    source_count = source.size();
  }

  void set_targets(const Dataset& target, const LowRankTransform& w, double c_tilde) {
    features.resize(source_count);
    labels.resize(source_count);
    costs.resize(source_count);
    for (const auto& e : target.examples()) {
      features.push_back(FeatureVector::dense(w.apply(e.x)));
      labels.push_back(e.label);
      costs.push_back(c_tilde);
    }
  }
};

double joint_value(HyperplaneRows& rows, const Dataset& target, const LowRankTransform& w,
                   const HyperplaneSet& planes, const SolverConfig& config) {
  rows.set_targets(target, w, config.c_tilde);
  return 0.5 * w.regularizer_norm_sq() +
         svm::one_vs_all_objective(rows.features, rows.labels, rows.costs, planes, config.loss);
}

Dataset augmented(const Dataset& d, bool bias) { return bias ? d.with_bias() : d; }

std::size_t argmax(const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best]) best = k;
  return best;
}

}  // namespace

MmdtModel::MmdtModel(LowRankTransform transform, HyperplaneSet classifiers,
                     std::vector<std::string> category_names, bool augment_bias)
    : transform_(std::move(transform)),
      classifiers_(std::move(classifiers)),
      names_(std::move(category_names)),
      augment_bias_(augment_bias) {
  if (classifiers_.dimension() != transform_.source_dim())
    throw DimensionError("classifiers have length " + std::to_string(classifiers_.dimension()) +
                         ", transform source dimension is " + std::to_string(transform_.source_dim()));
  if (names_.empty())
    for (std::size_t k = 0; k < classifiers_.count(); ++k) names_.push_back(std::to_string(k));
  if (names_.size() != classifiers_.count())
    throw DataError("model has " + std::to_string(classifiers_.count()) + " classifiers but " +
                    std::to_string(names_.size()) + " category names");
  if (augment_bias_ && (transform_.source_dim() == 0 || transform_.target_dim() == 0))
    throw DimensionError("bias-augmented model needs positive dimensions");

  const std::size_t m = transform_.generator_count();
  correlation_ = DenseMatrix(classifiers_.count(), m);
  for (std::size_t k = 0; k < classifiers_.count(); ++k)
    for (std::size_t i = 0; i < m; ++i)
      correlation_(k, i) = dot(classifiers_.plane(k), transform_.generators().plane(i));
}

FeatureVector MmdtModel::prepare_target(const FeatureVector& x) const {
  const std::size_t d = input_target_dim();
  if (x.dimension() > d)
    throw DimensionError("target vector has dimension " + std::to_string(x.dimension()) +
                         ", model expects at most " + std::to_string(d));
  return augment_bias_ ? x.with_bias(d) : x.padded_to(d);
}

FeatureVector MmdtModel::prepare_source(const FeatureVector& x) const {
  const std::size_t d = input_source_dim();
  if (x.dimension() > d)
    throw DimensionError("source vector has dimension " + std::to_string(x.dimension()) +
                         ", model expects at most " + std::to_string(d));
  return augment_bias_ ? x.with_bias(d) : x.padded_to(d);
}

Prediction predict(const MmdtModel& model, const FeatureVector& x) {
  const FeatureVector xt = model.prepare_target(x);
  const auto bx = model.transform().beta_products(xt);
  const auto& corr = model.classifier_correlation();
  const bool identity = model.transform().mode() == Regularizer::identity_plus;

  Prediction p;
  p.scores.resize(model.category_count());
  for (std::size_t k = 0; k < p.scores.size(); ++k) {
    double s = identity ? xt.dot(model.classifiers().plane(k)) : 0.0;
    for (std::size_t i = 0; i < bx.size(); ++i) s += corr(k, i) * bx[i];
    p.scores[k] = s;
  }
  p.category = static_cast<int>(argmax(p.scores));
  return p;
}

std::vector<double> predict_scores_materialized(const MmdtModel& model, const FeatureVector& x) {
  const FeatureVector xt = model.prepare_target(x);
  const DenseMatrix w = model.transform().materialize();
  std::vector<double> wx(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) wx[r] = xt.dot(w.row(r));
  std::vector<double> scores(model.category_count());
  for (std::size_t k = 0; k < scores.size(); ++k) scores[k] = dot(model.classifiers().plane(k), wx);
  return scores;
}

Prediction predict_source(const MmdtModel& model, const FeatureVector& x) {
  const FeatureVector xs = model.prepare_source(x);
  Prediction p;
  p.scores.resize(model.category_count());
  for (std::size_t k = 0; k < p.scores.size(); ++k) p.scores[k] = xs.dot(model.classifiers().plane(k));
  p.category = static_cast<int>(argmax(p.scores));
  return p;
}

FitResult fit(const Dataset& source, const Dataset& target, const SolverConfig& config,
              std::vector<std::string> category_names) {
  config.validate();
  if (source.empty()) throw DataError("fit: empty source domain");
  if (target.empty()) throw DataError("fit: empty target domain");
  const std::size_t k_count = source.category_count();
  if (k_count < 2) throw DataError("fit needs at least 2 categories, got " + std::to_string(k_count));
  if (target.category_count() != k_count)
    throw DataError("fit: source has " + std::to_string(k_count) + " categories, target has " +
                    std::to_string(target.category_count()));
  if (config.regularizer == Regularizer::identity_plus && source.dimension() != target.dimension())
    throw ConfigError("identity regularizer needs equal dimensions, got D=" +
                      std::to_string(source.dimension()) +
                      " and Dt=" + std::to_string(target.dimension()));

  const Dataset src = augmented(source, config.augment_bias);
  const Dataset tgt = augmented(target, config.augment_bias);
  const svm::Options options = svm::options_from(config);

  FitResult result;
  const auto start = Clock::now();
  HyperplaneRows rows(src, config.c);

  HyperplaneSet planes = svm::train_one_vs_all(rows.features, rows.labels, rows.costs, k_count,
                                               src.dimension(), options, config.threads)
                             .planes;
  LowRankTransform w = LowRankTransform::zero(planes, tgt.dimension(), config.regularizer);
  double objective = joint_value(rows, tgt, w, planes, config);
  result.history.push_back({0, "init", objective, seconds_since(start), true});

  auto hyperplane_step = [&](std::size_t it, const char* name) {
    rows.set_targets(tgt, w, config.c_tilde);
    HyperplaneSet candidate = svm::train_one_vs_all(rows.features, rows.labels, rows.costs, k_count,
                                                    src.dimension(), options, config.threads)
                                  .planes;
    const double value = joint_value(rows, tgt, w, candidate, config);
    const bool accepted = value <= objective;
    if (accepted) {
      planes = std::move(candidate);
      objective = value;
    }
    result.history.push_back({it, name, objective, seconds_since(start), accepted});
  };

  for (std::size_t it = 1; it <= config.outer_iterations; ++it) {
    hyperplane_step(it, "hyperplanes");

    TransformResult solved = solve_transform(tgt, planes, config, result.alphas);
    result.alphas = std::move(solved.alphas);
    result.last_transform = std::move(solved.diagnostics);
    const double value = joint_value(rows, tgt, solved.transform, planes, config);
    const bool accepted = value <= objective;
    if (accepted) {
      w = std::move(solved.transform);
      objective = value;
    }
    result.history.push_back({it, "transform", objective, seconds_since(start), accepted});
  }
  if (config.final_refresh && config.outer_iterations > 0)
    hyperplane_step(config.outer_iterations, "refresh");

  result.model = MmdtModel(std::move(w), std::move(planes), std::move(category_names),
                           config.augment_bias);
  return result;
}

double joint_objective(const MmdtModel& model, const Dataset& source, const Dataset& target,
                       const SolverConfig& config) {
  Dataset src = augmented(source, model.augment_bias());
  Dataset tgt = augmented(target, model.augment_bias());
  if (src.dimension() < model.transform().source_dim())
    src = src.with_dimension(model.transform().source_dim());
  if (tgt.dimension() < model.transform().target_dim())
    tgt = tgt.with_dimension(model.transform().target_dim());
  HyperplaneRows rows(src, config.c);
  return joint_value(rows, tgt, model.transform(), model.classifiers(), config);
}

MmdtModel transfer_new_category(const MmdtModel& model, const std::string& name,
                                std::span<const FeatureVector> new_examples, const Dataset& all_source,
                                const SolverConfig& config) {
  for (const auto& existing : model.category_names())
    if (existing == name) throw DataError("category '" + name + "' already exists in the model");
  if (new_examples.empty()) throw DataError("transfer: the new category has no source examples");

  std::vector<FeatureVector> features;
  std::vector<int> signs;
  features.reserve(new_examples.size() + all_source.size());
  for (const auto& x : new_examples) {
    features.push_back(model.prepare_source(x));
    signs.push_back(1);
  }
  for (const auto& e : all_source.examples()) {
    features.push_back(model.prepare_source(e.x));
    signs.push_back(-1);
  }
  svm::Options options = svm::options_from(config);
  options.seed = config.rng_seed + model.category_count();
  const auto theta = svm::train_binary(features, signs, config.c, options);

  const auto& old = model.classifiers().matrix();
  DenseMatrix planes(old.rows() + 1, old.cols());
  std::copy(old.data().begin(), old.data().end(), planes.data().begin());
  std::copy(theta.begin(), theta.end(), planes.row(old.rows()).begin());

  auto names = model.category_names();
  names.push_back(name);
  return MmdtModel(model.transform(), HyperplaneSet(std::move(planes)), std::move(names),
                   model.augment_bias());
}

Evaluation evaluate(const MmdtModel& model, const Dataset& data) {
  Evaluation ev;
  const std::size_t k = model.category_count();
  std::vector<std::size_t> hits(k, 0);
  ev.per_class_count.assign(k, 0);
  for (const auto& e : data.examples()) {
    const auto p = predict(model, e.x);
    const bool ok = p.category == e.label;
    ++ev.total;
    if (ok) ++ev.correct;
    if (static_cast<std::size_t>(e.label) < k) {
      ++ev.per_class_count[e.label];
      if (ok) ++hits[e.label];
    }
  }
  ev.accuracy = ev.total == 0 ? 0.0 : static_cast<double>(ev.correct) / static_cast<double>(ev.total);
  ev.per_class_accuracy.resize(k);
  for (std::size_t c = 0; c < k; ++c)
    ev.per_class_accuracy[c] = ev.per_class_count[c] == 0
                                   ? std::numeric_limits<double>::quiet_NaN()
                                   : static_cast<double>(hits[c]) / static_cast<double>(ev.per_class_count[c]);
  return ev;
}

}  // namespace mmdt
