#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mmdt/core.hpp"

namespace mmdt::svm {

struct Options {
  Loss loss = Loss::squared_hinge;
  double epsilon = 0.1;
  std::size_t max_passes = 1000;
  std::uint64_t seed = 1;
  bool shrinking = true;
  /// Record the dual objective after every pass (costs one O(l + D) sweep per pass).
  bool track_objective = false;
};

/**
 * Binary problem  min_w 1/2 ||w||^2 + sum_l C_l max(0, b_l - t_l w.x_l)^p.
 *
 * b_l defaults to 1. A per-example margin lets callers fold a fixed score offset
 * into the hinge: t (w.x + o) >= 1 - eta  <=>  t w.x >= (1 - t o) - eta.
 */
struct BinaryProblem {
  std::span<const FeatureVector> features;
  std::vector<signed char> signs;
  std::vector<double> costs;
  std::vector<double> margins;  ///< empty means all ones
  std::size_t dimension = 0;

  double margin(std::size_t l) const { return margins.empty() ? 1.0 : margins[l]; }
  void validate() const;
};

struct Diagnostics {
  std::size_t passes = 0;
  double pg_gap = 0.0;
  bool converged = false;
  double dual_objective = 0.0;
  double primal_objective = 0.0;
  std::vector<double> dual_history;
};

struct BinaryResult {
  std::vector<double> w;
  std::vector<double> alphas;
  Diagnostics diagnostics;
};

/** Dual coordinate descent with shrinking for the problem above. */
BinaryResult train_binary(const BinaryProblem& problem, const Options& options);

/// Unweighted convenience form: every example costs `cost`, margin 1.
std::vector<double> train_binary(std::span<const FeatureVector> features, std::span<const int> signs,
                                 double cost, const Options& options);

double primal_objective(const BinaryProblem& problem, std::span<const double> w, Loss loss);
/// 1/2 ||w||^2 + sum lambda_l/2 alpha_l^2 - sum b_l alpha_l with w = sum alpha_l t_l x_l.
double dual_objective(const BinaryProblem& problem, std::span<const double> alphas, Loss loss);

struct OneVsAllResult {
  HyperplaneSet planes;
  std::vector<double> primal_objectives;  ///< per class
  std::vector<Diagnostics> diagnostics;
};

/**
 * K binary problems over one shared example list: plane k is trained with sign +1
 * on examples of category k and -1 elsewhere. Class k uses seed options.seed + k,
 * so results do not depend on `threads`.
 */
OneVsAllResult train_one_vs_all(std::span<const FeatureVector> features, std::span<const int> labels,
                                std::span<const double> costs, std::size_t category_count,
                                std::size_t dimension, const Options& options,
                                std::size_t threads = 1);

HyperplaneSet train_one_vs_all(const Dataset& data, double cost, const Options& options,
                               std::size_t threads = 1);

/// Sum over classes of the binary primal objectives for the given planes.
double one_vs_all_objective(std::span<const FeatureVector> features, std::span<const int> labels,
                            std::span<const double> costs, const HyperplaneSet& planes, Loss loss);

Options options_from(const SolverConfig& config);

}  // namespace mmdt::svm
