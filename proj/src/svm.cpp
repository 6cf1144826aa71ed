#include "mmdt/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace mmdt::svm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void BinaryProblem::validate() const {
  const std::size_t l = features.size();
  if (l == 0) throw DataError("binary SVM: empty training set");
  if (signs.size() != l || costs.size() != l || (!margins.empty() && margins.size() != l))
    throw DataError("binary SVM: per-example arrays must match the example count");
  for (std::size_t k = 0; k < l; ++k) {
    if (signs[k] != 1 && signs[k] != -1) throw DataError("binary SVM: signs must be +1 or -1");
    if (!(costs[k] > 0.0)) throw ConfigError("binary SVM: costs must be positive");
    if (features[k].dimension() != dimension)
      throw DimensionError("binary SVM: example " + std::to_string(k) + " has dimension " +
                           std::to_string(features[k].dimension()) + ", expected " +
                           std::to_string(dimension));
  }
}

double primal_objective(const BinaryProblem& problem, std::span<const double> w, Loss loss) {
  double obj = 0.5 * squared_norm(w);
  for (std::size_t l = 0; l < problem.features.size(); ++l) {
    const double s = problem.signs[l] * problem.features[l].dot(w);
    obj += problem.costs[l] * hinge_power(problem.margin(l) - s, loss);
  }
  return obj;
}

double dual_objective(const BinaryProblem& problem, std::span<const double> alphas, Loss loss) {
  std::vector<double> w(problem.dimension, 0.0);
  double obj = 0.0;
  for (std::size_t l = 0; l < problem.features.size(); ++l) {
    if (alphas[l] == 0.0) continue;
    problem.features[l].axpy(alphas[l] * problem.signs[l], w);
    obj += 0.5 * dual_lambda(loss, problem.costs[l]) * alphas[l] * alphas[l] -
           problem.margin(l) * alphas[l];
  }
  return obj + 0.5 * squared_norm(w);
}

BinaryResult train_binary(const BinaryProblem& problem, const Options& options) {
  problem.validate();
  if (!(options.epsilon > 0.0)) throw ConfigError("binary SVM: epsilon must be positive");

  const std::size_t l = problem.features.size();
  BinaryResult result;
  result.w.assign(problem.dimension, 0.0);
  result.alphas.assign(l, 0.0);
  auto& w = result.w;
  auto& alpha = result.alphas;

  std::vector<double> diag(l), upper(l), qd(l);
  std::vector<std::size_t> index(l);
  for (std::size_t k = 0; k < l; ++k) {
    diag[k] = dual_lambda(options.loss, problem.costs[k]);
    upper[k] = dual_upper_bound(options.loss, problem.costs[k]);
    qd[k] = diag[k] + squared_norm(problem.features[k]);
    index[k] = k;
  }

  // Zero-curvature coordinates (hinge loss, zero vector) cannot move w; keep them
  // out of the active set so they do not pin the projected-gradient gap.
  std::size_t full_size = l;
  for (std::size_t s = 0; s < full_size;) {
    if (qd[index[s]] <= 0.0) {
      std::swap(index[s], index[--full_size]);
    } else {
      ++s;
    }
  }

  std::mt19937_64 rng(options.seed);
  std::size_t active_size = full_size;
  double pg_max_old = kInf;
  double pg_min_old = -kInf;
  auto& diagnostics = result.diagnostics;

  std::size_t pass = 0;
  while (pass < options.max_passes) {
    double pg_max_new = -kInf;
    double pg_min_new = kInf;

    for (std::size_t s = 0; s < active_size; ++s)
      std::swap(index[s], index[s + rng() % (active_size - s)]);

    for (std::size_t s = 0; s < active_size; ++s) {
      const std::size_t k = index[s];
      const auto& x = problem.features[k];
      const double t = problem.signs[k];
      const double g = t * x.dot(w) - problem.margin(k) + diag[k] * alpha[k];

      double pg = 0.0;
      if (alpha[k] == 0.0) {
        if (options.shrinking && g > pg_max_old) {
          std::swap(index[s--], index[--active_size]);
          continue;
        }
        if (g < 0.0) pg = g;
      } else if (alpha[k] == upper[k]) {
        if (options.shrinking && g < pg_min_old) {
          std::swap(index[s--], index[--active_size]);
          continue;
        }
        if (g > 0.0) pg = g;
      } else {
        pg = g;
      }

      pg_max_new = std::max(pg_max_new, pg);
      pg_min_new = std::min(pg_min_new, pg);

      if (std::fabs(pg) > 1e-12) {
        const double old = alpha[k];
        alpha[k] = std::min(std::max(alpha[k] - g / qd[k], 0.0), upper[k]);
        x.axpy((alpha[k] - old) * t, w);
      }
    }

    ++pass;
    if (options.track_objective) diagnostics.dual_history.push_back(dual_objective(problem, alpha, options.loss));

    if (active_size == 0) {
      pg_max_new = 0.0;
      pg_min_new = 0.0;
    }
    diagnostics.pg_gap = pg_max_new - pg_min_new;
    if (diagnostics.pg_gap <= options.epsilon) {
      if (active_size == full_size) {
        diagnostics.converged = true;
        break;
      }
      active_size = full_size;
      pg_max_old = kInf;
      pg_min_old = -kInf;
      continue;
    }
    pg_max_old = pg_max_new <= 0.0 ? kInf : pg_max_new;
    pg_min_old = pg_min_new >= 0.0 ? -kInf : pg_min_new;
  }

  diagnostics.passes = pass;
  diagnostics.dual_objective = dual_objective(problem, alpha, options.loss);
  diagnostics.primal_objective = primal_objective(problem, w, options.loss);
  return result;
}

std::vector<double> train_binary(std::span<const FeatureVector> features, std::span<const int> signs,
                                 double cost, const Options& options) {
  BinaryProblem problem;
  problem.features = features;
  problem.dimension = features.empty() ? 0 : features.front().dimension();
  problem.signs.reserve(signs.size());
  for (int s : signs) problem.signs.push_back(static_cast<signed char>(s));
  problem.costs.assign(features.size(), cost);
  return train_binary(problem, options).w;
}

OneVsAllResult train_one_vs_all(std::span<const FeatureVector> features, std::span<const int> labels,
                                std::span<const double> costs, std::size_t category_count,
                                std::size_t dimension, const Options& options,
                                std::size_t threads) {
  if (category_count < 2)
    throw DataError("one-vs-all training needs at least 2 categories, got " +
                    std::to_string(category_count));
  if (features.empty()) throw DataError("one-vs-all training: empty training set");
  if (labels.size() != features.size() || costs.size() != features.size())
    throw DataError("one-vs-all training: labels and costs must match the example count");

  const std::size_t l = features.size();
  std::vector<double> cost_copy(costs.begin(), costs.end());
  OneVsAllResult result;
  DenseMatrix planes(category_count, dimension);
  result.primal_objectives.assign(category_count, 0.0);
  result.diagnostics.resize(category_count);

  auto train_class = [&](std::size_t k) {
    BinaryProblem problem;
    problem.features = features;
    problem.dimension = dimension;
    problem.costs = cost_copy;
    problem.signs.resize(l);
    for (std::size_t e = 0; e < l; ++e)
      problem.signs[e] = static_cast<std::size_t>(labels[e]) == k ? 1 : -1;
    Options opts = options;
    opts.seed = options.seed + k;
    auto r = train_binary(problem, opts);
    std::copy(r.w.begin(), r.w.end(), planes.row(k).begin());
    result.primal_objectives[k] = r.diagnostics.primal_objective;
    result.diagnostics[k] = std::move(r.diagnostics);
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, category_count);
  if (threads <= 1) {
    for (std::size_t k = 0; k < category_count; ++k) train_class(k);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t k = t; k < category_count; k += threads) train_class(k);
      });
  }

  result.planes = HyperplaneSet(std::move(planes));
  return result;
}

HyperplaneSet train_one_vs_all(const Dataset& data, double cost, const Options& options,
                               std::size_t threads) {
  std::vector<FeatureVector> features;
  std::vector<int> labels;
  features.reserve(data.size());
  labels.reserve(data.size());
  for (const auto& e : data.examples()) {
    features.push_back(e.x);
    labels.push_back(e.label);
  }
  std::vector<double> costs(data.size(), cost);
  return train_one_vs_all(features, labels, costs, data.category_count(), data.dimension(), options,
                          threads)
      .planes;
}

double one_vs_all_objective(std::span<const FeatureVector> features, std::span<const int> labels,
                            std::span<const double> costs, const HyperplaneSet& planes, Loss loss) {
  double obj = 0.0;
  for (std::size_t k = 0; k < planes.count(); ++k) {
    const auto w = planes.plane(k);
    obj += 0.5 * squared_norm(w);
    for (std::size_t e = 0; e < features.size(); ++e) {
      const double t = static_cast<std::size_t>(labels[e]) == k ? 1.0 : -1.0;
      obj += costs[e] * hinge_power(1.0 - t * features[e].dot(w), loss);
    }
  }
  return obj;
}

Options options_from(const SolverConfig& config) {
  Options o;
  o.loss = config.loss;
  o.epsilon = config.epsilon;
  o.max_passes = config.max_passes;
  o.seed = config.rng_seed;
  o.shrinking = config.shrinking;
  o.track_objective = config.track_objective;
  return o;
}

}  // namespace mmdt::svm
