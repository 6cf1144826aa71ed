#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mmdt/errors.hpp"

namespace mmdt {

/**
 * A feature vector, stored either densely or as sorted (index, value) pairs.
 * Indices are 0-based. Immutable after construction.
 */
class FeatureVector {
 public:
  FeatureVector() = default;

  static FeatureVector dense(std::vector<double> values);
  static FeatureVector sparse(std::size_t dimension, std::vector<std::uint32_t> indices,
                              std::vector<double> values);

  std::size_t dimension() const noexcept { return dimension_; }
  bool is_sparse() const noexcept { return sparse_; }
  std::size_t nonzero_count() const noexcept { return values_.size(); }

  /// Stored indices; empty for dense vectors.
  std::span<const std::uint32_t> indices() const noexcept { return indices_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Calls f(index, value) for every stored entry in increasing index order.
  template <class F>
  void for_each_nonzero(F&& f) const {
    if (sparse_) {
      for (std::size_t k = 0; k < values_.size(); ++k) f(static_cast<std::size_t>(indices_[k]), values_[k]);
    } else {
      for (std::size_t k = 0; k < values_.size(); ++k) f(k, values_[k]);
    }
  }

  /// Inner product with a dense vector of the same dimension.
  double dot(std::span<const double> dense) const;
  /// y += a * x
  void axpy(double a, std::span<double> y) const;

  std::vector<double> to_dense() const;

  /// Same entries, declared dimension raised to `dimension` (zero padding).
  FeatureVector padded_to(std::size_t dimension) const;
  /// Pads to `dimension` and appends a constant-1 feature at index `dimension`.
  FeatureVector with_bias(std::size_t dimension) const;

  bool operator==(const FeatureVector&) const = default;

 private:
  std::size_t dimension_ = 0;
  bool sparse_ = false;
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
};

double dot(const FeatureVector& a, const FeatureVector& b);
double dot(const FeatureVector& a, std::span<const double> b);
double squared_norm(const FeatureVector& a);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);

/** Row-major dense matrix. Only what the solver and its tests need. */
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Domain { source, target };

struct Example {
  FeatureVector x;
  int label = 0;
};

/** Labeled examples of one domain with dense category ids 0..K-1. */
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Example> examples, std::size_t dimension, std::size_t category_count,
          Domain domain = Domain::source);

  std::span<const Example> examples() const noexcept { return examples_; }
  const Example& operator[](std::size_t k) const noexcept { return examples_[k]; }
  std::size_t size() const noexcept { return examples_.size(); }
  bool empty() const noexcept { return examples_.empty(); }
  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t category_count() const noexcept { return category_count_; }
  Domain domain() const noexcept { return domain_; }

  /// Every example padded to dimension()+1 with a trailing constant-1 feature.
  Dataset with_bias() const;
  Dataset with_dimension(std::size_t dimension) const;
  Dataset with_category_count(std::size_t category_count) const;

 private:
  std::vector<Example> examples_;
  std::size_t dimension_ = 0;
  std::size_t category_count_ = 0;
  Domain domain_ = Domain::source;
};

/** m dense hyperplanes of common length D. */
class HyperplaneSet {
 public:
  HyperplaneSet() = default;
  explicit HyperplaneSet(DenseMatrix planes);
  static HyperplaneSet from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t count() const noexcept { return planes_.rows(); }
  std::size_t dimension() const noexcept { return planes_.cols(); }
  std::span<const double> plane(std::size_t i) const noexcept { return planes_.row(i); }
  const DenseMatrix& matrix() const noexcept { return planes_; }

  bool operator==(const HyperplaneSet&) const = default;

 private:
  DenseMatrix planes_;
};

enum class Regularizer { pure, identity_plus };
enum class Loss { hinge = 1, squared_hinge = 2 };

inline constexpr std::size_t kDefaultMaterializeBudget = std::size_t{1} << 26;

/**
 * W held implicitly as W = sum_i v_i beta_i^T (pure) or W = I + sum_i v_i beta_i^T
 * (identity_plus). The generators v_i are the hyperplanes the transform was solved
 * against; rho caches their Gram matrix.
 */
class LowRankTransform {
 public:
  LowRankTransform() = default;
  LowRankTransform(HyperplaneSet generators, DenseMatrix betas, Regularizer mode);

  /// beta = 0, i.e. W = 0 (pure) or W = I (identity_plus).
  static LowRankTransform zero(HyperplaneSet generators, std::size_t target_dim, Regularizer mode);

  std::size_t source_dim() const noexcept { return generators_.dimension(); }
  std::size_t target_dim() const noexcept { return betas_.cols(); }
  std::size_t generator_count() const noexcept { return generators_.count(); }
  Regularizer mode() const noexcept { return mode_; }

  const HyperplaneSet& generators() const noexcept { return generators_; }
  const DenseMatrix& betas() const noexcept { return betas_; }
  const DenseMatrix& rho() const noexcept { return rho_; }

  /// beta_i . x for every generator i.
  std::vector<double> beta_products(const FeatureVector& x) const;

  /// W x in O(m (D + Dt)).
  std::vector<double> apply(const FeatureVector& x) const;
  /// W^T u in O(m (D + Dt)).
  std::vector<double> map_hyperplane(std::span<const double> u) const;
  /// Explicit D x Dt matrix; throws BudgetError when D*Dt exceeds max_entries.
  DenseMatrix materialize(std::size_t max_entries = kDefaultMaterializeBudget) const;
  /// ||W||_F^2 (pure) or ||W - I||_F^2 (identity_plus) = sum rho_ii' beta_i.beta_i'.
  double regularizer_norm_sq() const;

  bool operator==(const LowRankTransform& o) const {
    return mode_ == o.mode_ && generators_ == o.generators_ && betas_ == o.betas_;
  }

 private:
  HyperplaneSet generators_;
  DenseMatrix betas_;
  DenseMatrix rho_;
  Regularizer mode_ = Regularizer::pure;
};

/**
 * Dual variables of one transform solve. The constraint index is l = j*m + i
 * (target example j, hyperplane i).
 */
struct DualState {
  std::vector<double> alphas;
  std::vector<double> q;  ///< q_j = ||x_j||^2
  double lambda = 0.0;    ///< 1/(2 C~) for squared hinge, 0 for hinge
  double upper_bound = std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> active;

  /// cache[j*m + i] = beta_i . x_j, valid while cache_stamp matches beta_version[i].
  std::vector<double> cache;
  std::vector<std::uint64_t> cache_stamp;
  std::vector<std::uint64_t> beta_version;

  bool cache_valid(std::size_t i, std::size_t j, std::size_t m) const noexcept {
    return cache_stamp[j * m + i] == beta_version[i];
  }
};

struct SolverConfig {
  double c_tilde = 1.0;  ///< cost of target constraints
  double c = 1.0;        ///< cost of source examples in the hyperplane step
  Loss loss = Loss::squared_hinge;
  double epsilon = 0.1;
  std::size_t max_passes = 1000;
  Regularizer regularizer = Regularizer::pure;
  std::size_t outer_iterations = 2;
  std::uint64_t rng_seed = 1;
  bool augment_bias = true;
  bool final_refresh = true;
  bool shrinking = true;
  bool track_objective = false;
  std::size_t threads = 1;

  /// Throws ConfigError on any out-of-range field.
  void validate() const;
};

/** Projection of the dual variable's box: lambda and the upper bound for a cost. */
double dual_lambda(Loss loss, double cost);
double dual_upper_bound(Loss loss, double cost);

/** Hinge loss raised to the loss exponent, max(0, margin)^p. */
double hinge_power(double margin, Loss loss);

}  // namespace mmdt
