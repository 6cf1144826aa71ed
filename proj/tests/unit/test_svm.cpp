#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "mmdt/svm.hpp"
#include "oracle/oracle.hpp"
#include "support/instances.hpp"

using namespace mmdt;

namespace {

svm::Options tight(Loss loss) {
  svm::Options o;
  o.loss = loss;
  o.epsilon = 1e-8;
  o.max_passes = 100000;
  return o;
}

struct RandomBinary {
  std::vector<FeatureVector> x;
  svm::BinaryProblem problem;
};

RandomBinary random_binary(std::uint64_t seed, std::size_t n, std::size_t d, double cost) {
  std::mt19937_64 rng(seed);
  RandomBinary r;
  const auto w_true = testing::gaussian_vector(rng, d);
  for (std::size_t k = 0; k < n; ++k) {
    auto x = testing::gaussian_vector(rng, d);
    const double s = dot(std::span<const double>(x), std::span<const double>(w_true));
    r.problem.signs.push_back(s + 0.3 * testing::gaussian_vector(rng, 1)[0] >= 0 ? 1 : -1);
    r.x.push_back(FeatureVector::dense(std::move(x)));
  }
  r.problem.features = r.x;
  r.problem.costs.assign(n, cost);
  r.problem.dimension = d;
  return r;
}

}  // namespace

TEST_CASE("single example squared hinge") {
  const std::vector<FeatureVector> x{FeatureVector::dense({1.0})};
  const std::vector<int> t{1};
  const auto w = svm::train_binary(x, t, 0.5, tight(Loss::squared_hinge));
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("two mirrored examples") {
  const std::vector<FeatureVector> x{FeatureVector::dense({1.0}), FeatureVector::dense({-1.0})};
  const std::vector<int> t{1, -1};
  const auto w = svm::train_binary(x, t, 0.5, tight(Loss::squared_hinge));
  CHECK(w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("separable data has zero loss at the optimum") {
  std::mt19937_64 rng(3);
  std::vector<FeatureVector> x;
  std::vector<int> t;
  for (int k = 0; k < 40; ++k) {
    const int s = k % 2 ? 1 : -1;
    auto v = testing::gaussian_vector(rng, 3, 0.2);
    v[0] += 10.0 * s;
    x.push_back(FeatureVector::dense(v));
    t.push_back(s);
  }
  const auto w = svm::train_binary(x, t, 100.0, tight(Loss::hinge));
  for (std::size_t k = 0; k < x.size(); ++k) CHECK(t[k] * x[k].dot(w) >= 1.0 - 1e-6);
  // The squared hinge keeps a slack of alpha / 2C on its support vectors.
  const auto w2 = svm::train_binary(x, t, 100.0, tight(Loss::squared_hinge));
  for (std::size_t k = 0; k < x.size(); ++k) CHECK(t[k] * x[k].dot(w2) >= 1.0 - 1e-3);
}

TEST_CASE("squared hinge matches primal gradient descent") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto r = random_binary(seed, 15, 4, seed % 2 ? 1.0 : 0.1);
    const auto res = svm::train_binary(r.problem, tight(Loss::squared_hinge));
    const auto w_ref = oracle::svm_primal_descent(r.problem);
    const double f = svm::primal_objective(r.problem, res.w, Loss::squared_hinge);
    const double f_ref = svm::primal_objective(r.problem, w_ref, Loss::squared_hinge);
    CHECK(testing::relative_difference(f, f_ref) < 1e-4);
  }
}

TEST_CASE("hinge matches dual projected gradient") {
  for (std::uint64_t seed = 11; seed <= 15; ++seed) {
    auto r = random_binary(seed, 15, 4, 1.0);
    const auto res = svm::train_binary(r.problem, tight(Loss::hinge));
    const auto w_ref = oracle::svm_dual_projected_gradient(r.problem, Loss::hinge);
    const double f = svm::primal_objective(r.problem, res.w, Loss::hinge);
    const double f_ref = svm::primal_objective(r.problem, w_ref, Loss::hinge);
    CHECK(testing::relative_difference(f, f_ref) < 1e-4);
  }
}

TEST_CASE("converged solutions satisfy the KKT conditions") {
  for (Loss loss : {Loss::hinge, Loss::squared_hinge}) {
    auto r = random_binary(21, 30, 5, 1.0);
    const auto res = svm::train_binary(r.problem, tight(loss));
    CHECK(res.diagnostics.converged);
    const double lambda = dual_lambda(loss, 1.0);
    const double upper = dual_upper_bound(loss, 1.0);
    for (std::size_t l = 0; l < r.x.size(); ++l) {
      const double g = r.problem.signs[l] * r.x[l].dot(res.w) - 1.0 + lambda * res.alphas[l];
      const double a = res.alphas[l];
      if (a <= 0.0) {
        CHECK(g >= -1e-6);
      } else if (a >= upper) {
        CHECK(g <= 1e-6);
      } else {
        CHECK(std::fabs(g) <= 1e-6);
      }
    }
    CHECK(res.diagnostics.primal_objective >= -res.diagnostics.dual_objective - 1e-9);
  }
}

TEST_CASE("dual objective never increases between passes") {
  auto r = random_binary(31, 40, 6, 10.0);
  auto opts = tight(Loss::hinge);
  opts.track_objective = true;
  const auto res = svm::train_binary(r.problem, opts);
  const auto& h = res.diagnostics.dual_history;
  REQUIRE(h.size() >= 2);
  for (std::size_t p = 1; p < h.size(); ++p) CHECK(h[p] <= h[p - 1] + 1e-10);
}

TEST_CASE("one-vs-all sign check") {
  const Dataset data({{FeatureVector::dense({2.0}), 0}, {FeatureVector::dense({-2.0}), 1}}, 1, 2);
  const auto planes = svm::train_one_vs_all(data, 1.0, tight(Loss::squared_hinge));
  REQUIRE(planes.count() == 2);
  CHECK(planes.plane(0)[0] > 0.0);
  CHECK(planes.plane(1)[0] < 0.0);
}

TEST_CASE("one-vs-all needs two categories") {
  const Dataset data({{FeatureVector::dense({2.0}), 0}}, 1, 1);
  CHECK_THROWS_AS(svm::train_one_vs_all(data, 1.0, {}), DataError);
}

TEST_CASE("example order does not change the optimal objective") {
  std::mt19937_64 rng(5);
  std::vector<Example> ex;
  for (int k = 0; k < 60; ++k) {
    const int c = k % 3;
    auto v = testing::gaussian_vector(rng, 4);
    v[c] += 2.0;
    ex.push_back({FeatureVector::dense(v), c});
  }
  auto shuffled = ex;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  auto objective = [](const std::vector<Example>& e) {
    std::vector<FeatureVector> x;
    std::vector<int> y;
    for (const auto& s : e) {
      x.push_back(s.x);
      y.push_back(s.label);
    }
    const std::vector<double> costs(x.size(), 1.0);
    auto opts = tight(Loss::squared_hinge);
    const auto res = svm::train_one_vs_all(x, y, costs, 3, 4, opts);
    return svm::one_vs_all_objective(x, y, costs, res.planes, Loss::squared_hinge);
  };
  CHECK(testing::relative_difference(objective(ex), objective(shuffled)) < 1e-6);
}

TEST_CASE("thread count does not change one-vs-all results") {
  std::mt19937_64 rng(9);
  std::vector<Example> ex;
  for (int k = 0; k < 40; ++k) ex.push_back({FeatureVector::dense(testing::gaussian_vector(rng, 3)), k % 4});
  const Dataset data(ex, 3, 4);
  const auto a = svm::train_one_vs_all(data, 1.0, {}, 1);
  const auto b = svm::train_one_vs_all(data, 1.0, {}, 3);
  CHECK(a == b);
}

TEST_CASE("per-example margins shift the hinge") {
  // t w.x >= b with b = 2: the one-example minimizer becomes 2 * 2C / (1 + 2C).
  const std::vector<FeatureVector> x{FeatureVector::dense({1.0})};
  svm::BinaryProblem p;
  p.features = x;
  p.signs = {1};
  p.costs = {0.5};
  p.margins = {2.0};
  p.dimension = 1;
  const auto res = svm::train_binary(p, tight(Loss::squared_hinge));
  CHECK(res.w[0] == doctest::Approx(1.0).epsilon(1e-9));
}
