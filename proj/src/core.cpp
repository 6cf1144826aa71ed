#include "mmdt/core.hpp"

#include <algorithm>
#include <cmath>

#include "mmdt/transform.hpp"

namespace mmdt {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v)) throw DataError(std::string(what) + " contains a non-finite value");
}

}  // namespace

FeatureVector FeatureVector::dense(std::vector<double> values) {
  require_finite(values, "feature vector");
  FeatureVector fv;
  fv.dimension_ = values.size();
  fv.sparse_ = false;
  fv.values_ = std::move(values);
  return fv;
}

FeatureVector FeatureVector::sparse(std::size_t dimension, std::vector<std::uint32_t> indices,
                                    std::vector<double> values) {
  if (indices.size() != values.size())
    throw DataError("sparse vector: index and value counts differ");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= dimension)
      throw DimensionError("sparse vector: index " + std::to_string(indices[k]) +
                           " out of range for dimension " + std::to_string(dimension));
    if (k > 0 && indices[k] <= indices[k - 1])
      throw DataError("sparse vector: indices must be strictly increasing");
  }
  require_finite(values, "feature vector");
  FeatureVector fv;
  fv.dimension_ = dimension;
  fv.sparse_ = true;
  fv.indices_ = std::move(indices);
  fv.values_ = std::move(values);
  return fv;
}

double FeatureVector::dot(std::span<const double> dense) const {
  if (dense.size() != dimension_)
    throw DimensionError("dot: dimension " + std::to_string(dimension_) + " vs " +
                         std::to_string(dense.size()));
  double s = 0.0;
  if (sparse_) {
    for (std::size_t k = 0; k < values_.size(); ++k) s += values_[k] * dense[indices_[k]];
  } else {
    for (std::size_t k = 0; k < values_.size(); ++k) s += values_[k] * dense[k];
  }
  return s;
}

void FeatureVector::axpy(double a, std::span<double> y) const {
  if (y.size() != dimension_)
    throw DimensionError("axpy: dimension " + std::to_string(dimension_) + " vs " +
                         std::to_string(y.size()));
  if (sparse_) {
    for (std::size_t k = 0; k < values_.size(); ++k) y[indices_[k]] += a * values_[k];
  } else {
    for (std::size_t k = 0; k < values_.size(); ++k) y[k] += a * values_[k];
  }
}

std::vector<double> FeatureVector::to_dense() const {
  std::vector<double> out(dimension_, 0.0);
  for_each_nonzero([&](std::size_t k, double v) { out[k] = v; });
  return out;
}

FeatureVector FeatureVector::padded_to(std::size_t dimension) const {
  if (dimension < dimension_)
    throw DimensionError("cannot shrink a vector of dimension " + std::to_string(dimension_) +
                         " to " + std::to_string(dimension));
  FeatureVector fv = *this;
  fv.dimension_ = dimension;
  if (!sparse_) fv.values_.resize(dimension, 0.0);
  return fv;
}

FeatureVector FeatureVector::with_bias(std::size_t dimension) const {
  FeatureVector fv = padded_to(dimension);
  fv.dimension_ = dimension + 1;
  if (sparse_) fv.indices_.push_back(static_cast<std::uint32_t>(dimension));
  fv.values_.push_back(1.0);
  return fv;
}

double dot(const FeatureVector& a, const FeatureVector& b) {
  if (a.dimension() != b.dimension())
    throw DimensionError("dot: dimension " + std::to_string(a.dimension()) + " vs " +
                         std::to_string(b.dimension()));
  if (!b.is_sparse()) return a.dot(b.values());
  if (!a.is_sparse()) return b.dot(a.values());
  auto ia = a.indices();
  auto ib = b.indices();
  auto va = a.values();
  auto vb = b.values();
  double s = 0.0;
  std::size_t p = 0, q = 0;
  while (p < ia.size() && q < ib.size()) {
    if (ia[p] == ib[q]) {
      s += va[p++] * vb[q++];
    } else if (ia[p] < ib[q]) {
      ++p;
    } else {
      ++q;
    }
  }
  return s;
}

double dot(const FeatureVector& a, std::span<const double> b) { return a.dot(b); }

double squared_norm(const FeatureVector& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionError("dot: dimension " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double squared_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

Dataset::Dataset(std::vector<Example> examples, std::size_t dimension, std::size_t category_count,
                 Domain domain)
    : examples_(std::move(examples)),
      dimension_(dimension),
      category_count_(category_count),
      domain_(domain) {
  if (category_count_ == 0) throw DataError("dataset needs at least one category");
  for (std::size_t k = 0; k < examples_.size(); ++k) {
    const auto& e = examples_[k];
    if (e.x.dimension() > dimension_)
      throw DimensionError("example " + std::to_string(k) + " has dimension " +
                           std::to_string(e.x.dimension()) + " > dataset dimension " +
                           std::to_string(dimension_));
    if (e.label < 0 || static_cast<std::size_t>(e.label) >= category_count_)
      throw DataError("example " + std::to_string(k) + " has category " + std::to_string(e.label) +
                      " outside [0, " + std::to_string(category_count_) + ")");
    if (e.x.dimension() < dimension_) examples_[k].x = e.x.padded_to(dimension_);
  }
}

Dataset Dataset::with_bias() const {
  std::vector<Example> out;
  out.reserve(examples_.size());
  for (const auto& e : examples_) out.push_back({e.x.with_bias(dimension_), e.label});
  return Dataset(std::move(out), dimension_ + 1, category_count_, domain_);
}

Dataset Dataset::with_dimension(std::size_t dimension) const {
  return Dataset(examples_, dimension, category_count_, domain_);
}

Dataset Dataset::with_category_count(std::size_t category_count) const {
  return Dataset(examples_, dimension_, category_count, domain_);
}

HyperplaneSet::HyperplaneSet(DenseMatrix planes) : planes_(std::move(planes)) {
  require_finite(planes_.data(), "hyperplane set");
}

HyperplaneSet HyperplaneSet::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  DenseMatrix m(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw DimensionError("hyperplanes must share one length");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return HyperplaneSet(std::move(m));
}

LowRankTransform::LowRankTransform(HyperplaneSet generators, DenseMatrix betas, Regularizer mode)
    : generators_(std::move(generators)), betas_(std::move(betas)), mode_(mode) {
  if (betas_.rows() != generators_.count())
    throw DimensionError("transform needs one beta row per generator (" +
                         std::to_string(generators_.count()) + " generators, " +
                         std::to_string(betas_.rows()) + " betas)");
  if (mode_ == Regularizer::identity_plus && source_dim() != target_dim())
    throw ConfigError("identity regularizer needs equal dimensions, got D=" +
                      std::to_string(source_dim()) + " and Dt=" + std::to_string(target_dim()));
  require_finite(betas_.data(), "transform betas");
  rho_ = compute_rho(generators_);
}

LowRankTransform LowRankTransform::zero(HyperplaneSet generators, std::size_t target_dim,
                                        Regularizer mode) {
  const std::size_t m = generators.count();
  return LowRankTransform(std::move(generators), DenseMatrix(m, target_dim), mode);
}

std::vector<double> LowRankTransform::beta_products(const FeatureVector& x) const {
  if (x.dimension() != target_dim())
    throw DimensionError("target vector has dimension " + std::to_string(x.dimension()) +
                         ", transform expects " + std::to_string(target_dim()));
  std::vector<double> bx(generator_count());
  for (std::size_t i = 0; i < bx.size(); ++i) bx[i] = x.dot(betas_.row(i));
  return bx;
}

std::vector<double> LowRankTransform::apply(const FeatureVector& x) const {
  const auto bx = beta_products(x);
  std::vector<double> out(source_dim(), 0.0);
  if (mode_ == Regularizer::identity_plus) out = x.to_dense();
  for (std::size_t i = 0; i < bx.size(); ++i) {
    const auto v = generators_.plane(i);
    for (std::size_t r = 0; r < out.size(); ++r) out[r] += bx[i] * v[r];
  }
  return out;
}

std::vector<double> LowRankTransform::map_hyperplane(std::span<const double> u) const {
  if (u.size() != source_dim())
    throw DimensionError("source-space vector has length " + std::to_string(u.size()) +
                         ", transform expects " + std::to_string(source_dim()));
  std::vector<double> out(target_dim(), 0.0);
  if (mode_ == Regularizer::identity_plus) std::copy(u.begin(), u.end(), out.begin());
  for (std::size_t i = 0; i < generator_count(); ++i) {
    const double uv = dot(u, generators_.plane(i));
    const auto b = betas_.row(i);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += uv * b[c];
  }
  return out;
}

DenseMatrix LowRankTransform::materialize(std::size_t max_entries) const {
  const std::size_t d = source_dim();
  const std::size_t dt = target_dim();
  if (dt != 0 && d > max_entries / dt)
    throw BudgetError("materializing a " + std::to_string(d) + "x" + std::to_string(dt) +
                      " transform exceeds the budget of " + std::to_string(max_entries) + " entries");
  DenseMatrix w(d, dt);
  if (mode_ == Regularizer::identity_plus)
    for (std::size_t r = 0; r < d; ++r) w(r, r) = 1.0;
  for (std::size_t i = 0; i < generator_count(); ++i) {
    const auto v = generators_.plane(i);
    const auto b = betas_.row(i);
    for (std::size_t r = 0; r < d; ++r) {
      if (v[r] == 0.0) continue;
      auto wr = w.row(r);
      for (std::size_t c = 0; c < dt; ++c) wr[c] += v[r] * b[c];
    }
  }
  return w;
}

double LowRankTransform::regularizer_norm_sq() const {
  const std::size_t m = generator_count();
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    s += rho_(i, i) * squared_norm(betas_.row(i));
    for (std::size_t k = i + 1; k < m; ++k) s += 2.0 * rho_(i, k) * dot(betas_.row(i), betas_.row(k));
  }
  return s;
}

void SolverConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(c_tilde > 0.0) || !std::isfinite(c_tilde)) fail("c_tilde must be positive and finite");
  if (!(c > 0.0) || !std::isfinite(c)) fail("c must be positive and finite");
  if (loss != Loss::hinge && loss != Loss::squared_hinge) fail("loss exponent must be 1 or 2");
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
  if (max_passes == 0) fail("max_passes must be positive");
}

double dual_lambda(Loss loss, double cost) {
  return loss == Loss::squared_hinge ? 0.5 / cost : 0.0;
}

double dual_upper_bound(Loss loss, double cost) {
  return loss == Loss::squared_hinge ? std::numeric_limits<double>::infinity() : cost;
}

double hinge_power(double margin, Loss loss) {
  if (margin <= 0.0) return 0.0;
  return loss == Loss::squared_hinge ? margin * margin : margin;
}

}  // namespace mmdt
