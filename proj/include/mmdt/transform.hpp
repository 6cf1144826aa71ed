#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mmdt/core.hpp"

namespace mmdt {

/// rho[i][i'] = v_i . v_i'
DenseMatrix compute_rho(const HyperplaneSet& planes);

/// +1 when target category matches hyperplane i, -1 otherwise.
constexpr int constraint_label(int category, std::size_t hyperplane) noexcept {
  return static_cast<std::size_t>(category) == hyperplane ? 1 : -1;
}

struct TransformDiagnostics {
  std::size_t passes = 0;
  std::size_t steps = 0;  ///< coordinate updates actually applied
  double pg_gap = 0.0;
  bool converged = false;
  double dual_objective = 0.0;
  double primal_objective = 0.0;
  std::size_t skipped_zero_curvature = 0;
  std::vector<double> dual_history;  ///< after each pass, when tracking is enabled
};

struct Gradient {
  double g = 0.0;
  double pg = 0.0;
};

struct StepResult {
  double delta_alpha = 0.0;
  bool skipped = false;  ///< PG was zero or the constraint has zero curvature
};

struct PassStats {
  double pg_max = 0.0;
  double pg_min = 0.0;
  std::size_t visited = 0;
  std::size_t updates = 0;
};

/**
 * Dual coordinate descent for
 *   min_W 1/2 ||W (- I)||_F^2 + C~ sum_ij max(0, 1 - t_ij v_i^T W x_j)^p
 * over the implicit representation W (- I) = sum_i v_i beta_i^T.
 *
 * Each constraint l = (i, j) costs O(m) to score from the cached products
 * beta_i' . x_j; an accepted step costs O(nnz(x_j)) for the beta_i update. The
 * caller's target dataset must outlive the solver.
 */
class TransformSolver {
 public:
  TransformSolver(const Dataset& targets, HyperplaneSet generators, const SolverConfig& config);

  std::size_t hyperplane_count() const noexcept { return m_; }
  std::size_t target_count() const noexcept { return n_; }
  std::size_t constraint_count() const noexcept { return m_ * n_; }

  /// Replace alpha (clamped to the dual box) and rebuild beta from scratch.
  void warm_start(std::span<const double> alphas);

  /// v_i^T W x_j; refreshes stale cache entries of example j.
  double score(std::size_t i, std::size_t j);
  Gradient projected_gradient(std::size_t i, std::size_t j);
  StepResult coordinate_step(std::size_t i, std::size_t j);

  /// One sweep over the active set: random order of j, all hyperplanes per j.
  PassStats run_pass();
  /// Passes until the projected-gradient gap is <= epsilon on the full set.
  TransformDiagnostics solve();

  double dual_objective() const;
  double primal_objective() const;

  const DualState& state() const noexcept { return state_; }
  const DenseMatrix& betas() const noexcept { return betas_; }
  const HyperplaneSet& generators() const noexcept { return generators_; }
  std::size_t zero_curvature_count() const noexcept { return zero_curvature_; }

  LowRankTransform transform() const;

 private:
  void refresh_cache(std::size_t j);
  void reset_active_set();
  double margin(std::size_t l) const noexcept { return offsets_.empty() ? 1.0 : 1.0 - label(l) * offsets_[l]; }
  double label(std::size_t l) const noexcept { return labels_[l]; }
  double low_rank_score(std::size_t i, std::size_t j) const noexcept;

  const Dataset& targets_;
  HyperplaneSet generators_;
  SolverConfig config_;
  std::size_t m_;
  std::size_t n_;
  std::size_t dt_;
  DenseMatrix rho_;
  DenseMatrix betas_;
  DualState state_;
  std::vector<signed char> labels_;  ///< t_l
  std::vector<double> curvature_;    ///< q_j rho_ii + lambda
  std::vector<double> offsets_;      ///< v_i . x_j, identity regularizer only

  std::vector<std::uint32_t> blocks_;        ///< target examples with an active constraint
  std::vector<std::uint32_t> active_count_;  ///< per target example
  std::size_t block_count_ = 0;
  std::size_t shrunk_ = 0;  ///< constraints shrunk since the last reset
  std::size_t zero_curvature_ = 0;
  double pg_max_old_;
  double pg_min_old_;
  std::size_t steps_ = 0;
  std::mt19937_64 rng_;
};

struct TransformResult {
  LowRankTransform transform;
  TransformDiagnostics diagnostics;
  std::vector<double> alphas;
};

/**
 * Solve for W against fixed hyperplanes V. `warm_alphas`, when non-empty, must hold
 * m * n values indexed j*m + i.
 */
TransformResult solve_transform(const Dataset& targets, const HyperplaneSet& planes,
                                const SolverConfig& config, std::span<const double> warm_alphas = {});

/// Dual objective at arbitrary alpha, by rebuilding beta from alpha.
double transform_dual_objective(const Dataset& targets, const HyperplaneSet& planes,
                                const SolverConfig& config, std::span<const double> alphas);

/// Primal objective of `transform` against hyperplanes `planes` (not necessarily its generators).
double transform_primal_objective(const LowRankTransform& transform, const Dataset& targets,
                                  const HyperplaneSet& planes, const SolverConfig& config);

}  // namespace mmdt
