#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mmdt/core.hpp"
#include "mmdt/svm.hpp"
#include "mmdt/transform.hpp"

namespace mmdt {

/**
 * A learned transform together with its one-vs-all classifiers in source space.
 * When augment_bias is set, inputs are raw vectors and the trailing constant-1
 * feature is appended internally on both sides.
 */
class MmdtModel {
 public:
  MmdtModel() = default;
  MmdtModel(LowRankTransform transform, HyperplaneSet classifiers,
            std::vector<std::string> category_names, bool augment_bias);

  const LowRankTransform& transform() const noexcept { return transform_; }
  const HyperplaneSet& classifiers() const noexcept { return classifiers_; }
  const std::vector<std::string>& category_names() const noexcept { return names_; }
  std::size_t category_count() const noexcept { return classifiers_.count(); }
  bool augment_bias() const noexcept { return augment_bias_; }

  /// Dimension of raw (unaugmented) target / source inputs.
  std::size_t input_target_dim() const noexcept { return transform_.target_dim() - (augment_bias_ ? 1 : 0); }
  std::size_t input_source_dim() const noexcept { return transform_.source_dim() - (augment_bias_ ? 1 : 0); }

  /// Raw target vector -> vector in the transform's target space.
  FeatureVector prepare_target(const FeatureVector& x) const;
  FeatureVector prepare_source(const FeatureVector& x) const;

  /// theta_k . v_i' for every classifier k and generator i'.
  const DenseMatrix& classifier_correlation() const noexcept { return correlation_; }

  bool operator==(const MmdtModel& o) const {
    return transform_ == o.transform_ && classifiers_ == o.classifiers_ && names_ == o.names_ &&
           augment_bias_ == o.augment_bias_;
  }

 private:
  LowRankTransform transform_;
  HyperplaneSet classifiers_;
  std::vector<std::string> names_;
  bool augment_bias_ = true;
  DenseMatrix correlation_;
};

struct Prediction {
  int category = 0;
  std::vector<double> scores;
};

/// argmax_k theta_k^T W x, ties to the smallest id. x is a raw target vector.
Prediction predict(const MmdtModel& model, const FeatureVector& x);
/// Scores through a materialized W; used to cross-check the low-rank path.
std::vector<double> predict_scores_materialized(const MmdtModel& model, const FeatureVector& x);

/// Classify raw source-space vectors with the classifiers alone (no transform).
Prediction predict_source(const MmdtModel& model, const FeatureVector& x);

struct IterationRecord {
  std::size_t iteration = 0;
  std::string step;  ///< init | hyperplanes | transform | refresh
  double objective = 0.0;
  double seconds = 0.0;
  bool accepted = true;
};

struct FitResult {
  MmdtModel model;
  std::vector<IterationRecord> history;
  std::vector<double> alphas;  ///< dual variables of the last transform solve
  TransformDiagnostics last_transform;
};

/**
 * Alternate the hyperplane step (one-vs-all on source plus transformed targets) and
 * the transform step (W against the current hyperplanes), starting from source-only
 * hyperplanes and W = I (identity_plus) or W = 0 (pure). A block update is kept only
 * if it does not increase the joint objective.
 */
FitResult fit(const Dataset& source, const Dataset& target, const SolverConfig& config,
              std::vector<std::string> category_names = {});

/**
 * 1/2 ||W (- I)||^2 + 1/2 sum ||theta_k||^2 + C sum source hinges + C~ sum target hinges.
 * Datasets are raw; augmentation follows the model.
 */
double joint_objective(const MmdtModel& model, const Dataset& source, const Dataset& target,
                       const SolverConfig& config);

/**
 * Add a category that has source examples only. Its classifier is trained with the
 * new examples positive and every example of `all_source` negative; the transform
 * is left untouched.
 */
MmdtModel transfer_new_category(const MmdtModel& model, const std::string& name,
                                std::span<const FeatureVector> new_examples, const Dataset& all_source,
                                const SolverConfig& config);

struct Evaluation {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;  ///< NaN for classes absent from the data
  std::vector<std::size_t> per_class_count;
  std::size_t correct = 0;
  std::size_t total = 0;
};

/// Accuracy of `model` on raw target-domain data.
Evaluation evaluate(const MmdtModel& model, const Dataset& data);

}  // namespace mmdt
