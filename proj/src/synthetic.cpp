#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mmdt/data.hpp"

namespace mmdt::data {

namespace {

// Gaussian draws built directly on mt19937_64 so generated fixtures do not
// depend on the standard library's distribution implementations.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

DenseMatrix gaussian_matrix(Gaussian& g, std::size_t rows, std::size_t cols, double scale) {
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = scale * g();
  return m;
}

// Modified Gram-Schmidt on the rows of a square Gaussian matrix.
DenseMatrix random_orthogonal(Gaussian& g, std::size_t n) {
  DenseMatrix q = gaussian_matrix(g, n, n, 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = q.row(r);
    for (std::size_t p = 0; p < r; ++p) {
      const double proj = dot(row, q.row(p));
      const auto prev = q.row(p);
      for (std::size_t c = 0; c < n; ++c) row[c] -= proj * prev[c];
    }
    const double norm = std::sqrt(squared_norm(row));
    for (double& v : row) v /= norm;
  }
  return q;
}

std::vector<double> draw_latent(Gaussian& g, std::span<const double> center, double noise) {
  std::vector<double> x(center.begin(), center.end());
  for (double& v : x) v += noise * g();
  return x;
}

}  // namespace

void SynthConfig::validate() const {
  if (categories < 2) throw ConfigError("synthetic data needs at least 2 categories");
  if (source_dim == 0 || target_dim == 0) throw ConfigError("synthetic dimensions must be positive");
  if (shift == ShiftKind::rotation && source_dim != target_dim)
    throw ConfigError("rotation shift needs equal dimensions, got D=" + std::to_string(source_dim) +
                      " and Dt=" + std::to_string(target_dim));
  if (source_per_class == 0) throw ConfigError("synthetic data needs source examples");
  if (noise < 0.0 || target_noise < 0.0 || center_spread <= 0.0)
    throw ConfigError("noise scales must be non-negative and the spread positive");
  if (identity_mix < 0.0 || identity_mix > 1.0) throw ConfigError("identity_mix must lie in [0, 1]");
  if (identity_mix > 0.0 && (source_dim != target_dim || shift == ShiftKind::rotation))
    throw ConfigError("identity_mix needs a random linear shift with equal dimensions");
  for (int h : heldout)
    if (h < 0 || static_cast<std::size_t>(h) >= categories)
      throw ConfigError("held-out category " + std::to_string(h) + " out of range");
}

SynthConfig synth_preset(std::string_view name) {
  SynthConfig c;
  if (name == "rotation") {
    c.shift = ShiftKind::rotation;
    c.pool_per_class = 100;
  } else if (name == "linear") {
    c.shift = ShiftKind::random_linear;
    c.source_dim = 20;
    c.target_dim = 20;
    c.heldout = {8, 9};
  } else if (name == "bias") {
    c.shift = ShiftKind::linear_plus_bias;
    c.identity_mix = 0.3;
  } else if (name == "dimchange") {
    c.shift = ShiftKind::dimension_change;
    c.source_dim = 40;
    c.target_dim = 60;
    c.categories = 20;
    c.noise = 1.0;
    c.target_per_class = 1;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  return c;
}

SyntheticPair make_shifted_pair(const SynthConfig& cfg) {
  cfg.validate();
  Gaussian g(cfg.seed);
  const std::size_t d = cfg.source_dim;
  const std::size_t dt = cfg.target_dim;
  const std::size_t k = cfg.categories;

  const DenseMatrix centers = gaussian_matrix(g, k, d, cfg.center_spread);

  SyntheticPair out;
  switch (cfg.shift) {
    case ShiftKind::rotation:
      out.shift = random_orthogonal(g, d);
      break;
    case ShiftKind::random_linear:
    case ShiftKind::linear_plus_bias:
    case ShiftKind::dimension_change:
      out.shift = gaussian_matrix(g, dt, d, (1.0 - cfg.identity_mix) / std::sqrt(static_cast<double>(d)));
      for (std::size_t r = 0; r < d && cfg.identity_mix > 0.0; ++r) out.shift(r, r) += cfg.identity_mix;
      break;
  }
  out.offset.assign(dt, 0.0);
  if (cfg.shift == ShiftKind::linear_plus_bias)
    for (double& v : out.offset) v = cfg.center_spread * g();
  out.heldout = cfg.heldout;
  std::sort(out.heldout.begin(), out.heldout.end());

  auto to_target = [&](const std::vector<double>& z) {
    std::vector<double> x(out.offset);
    for (std::size_t r = 0; r < dt; ++r) {
      x[r] += dot(out.shift.row(r), z);
      x[r] += cfg.target_noise * g();
    }
    return FeatureVector::dense(std::move(x));
  };
  auto is_heldout = [&](std::size_t c) {
    return std::binary_search(out.heldout.begin(), out.heldout.end(), static_cast<int>(c));
  };

  std::vector<Example> source;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t e = 0; e < cfg.source_per_class; ++e)
      source.push_back({FeatureVector::dense(draw_latent(g, centers.row(c), cfg.noise)), static_cast<int>(c)});

  auto target_block = [&](std::size_t per_class, bool skip_heldout) {
    std::vector<Example> ex;
    for (std::size_t c = 0; c < k; ++c) {
      if (skip_heldout && is_heldout(c)) continue;
      for (std::size_t e = 0; e < per_class; ++e)
        ex.push_back({to_target(draw_latent(g, centers.row(c), cfg.noise)), static_cast<int>(c)});
    }
    return ex;
  };
  auto target = target_block(cfg.target_per_class, true);
  auto test = target_block(cfg.test_per_class, false);
  auto pool = target_block(cfg.pool_per_class, false);

  out.source = Dataset(std::move(source), d, k, Domain::source);
  out.target = Dataset(std::move(target), dt, k, Domain::target);
  out.target_test = Dataset(std::move(test), dt, k, Domain::target);
  out.target_pool = Dataset(std::move(pool), dt, k, Domain::target);
  return out;
}

Dataset restrict_categories(const Dataset& data, const std::vector<int>& keep) {
  std::vector<int> remap(data.category_count(), -1);
  for (std::size_t n = 0; n < keep.size(); ++n) {
    const int c = keep[n];
    if (c < 0 || static_cast<std::size_t>(c) >= data.category_count())
      throw DataError("category " + std::to_string(c) + " out of range");
    remap[c] = static_cast<int>(n);
  }
  std::vector<Example> out;
  for (const auto& e : data.examples())
    if (remap[e.label] >= 0) out.push_back({e.x, remap[e.label]});
  return Dataset(std::move(out), data.dimension(), keep.size(), data.domain());
}

std::vector<FeatureVector> category_examples(const Dataset& data, int category) {
  std::vector<FeatureVector> out;
  for (const auto& e : data.examples())
    if (e.label == category) out.push_back(e.x);
  return out;
}

}  // namespace mmdt::data
