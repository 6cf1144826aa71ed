#include "mmdt/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmdt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_inputs(const Dataset& targets, const HyperplaneSet& planes, const SolverConfig& config) {
  config.validate();
  if (targets.empty()) throw DataError("transform solve: empty target set");
  if (planes.count() == 0) throw DataError("transform solve: no hyperplanes");
  if (config.regularizer == Regularizer::identity_plus && planes.dimension() != targets.dimension())
    throw ConfigError("identity regularizer needs equal dimensions, got D=" +
                      std::to_string(planes.dimension()) +
                      " and Dt=" + std::to_string(targets.dimension()));
}

// 1/2 sum rho_ii' beta_i.beta_i' computed from a beta matrix.
double half_low_rank_norm(const DenseMatrix& rho, const DenseMatrix& betas) {
  double s = 0.0;
  for (std::size_t i = 0; i < betas.rows(); ++i) {
    s += 0.5 * rho(i, i) * squared_norm(betas.row(i));
    for (std::size_t k = i + 1; k < betas.rows(); ++k) s += rho(i, k) * dot(betas.row(i), betas.row(k));
  }
  return s;
}

}  // namespace

DenseMatrix compute_rho(const HyperplaneSet& planes) {
  const std::size_t m = planes.count();
  DenseMatrix rho(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    rho(i, i) = squared_norm(planes.plane(i));
    for (std::size_t k = i + 1; k < m; ++k) {
      const double r = dot(planes.plane(i), planes.plane(k));
      rho(i, k) = r;
      rho(k, i) = r;
    }
  }
  return rho;
}

TransformSolver::TransformSolver(const Dataset& targets, HyperplaneSet generators,
                                 const SolverConfig& config)
    : targets_(targets),
      generators_(std::move(generators)),
      config_(config),
      m_(generators_.count()),
      n_(targets.size()),
      dt_(targets.dimension()),
      pg_max_old_(kInf),
      pg_min_old_(-kInf),
      rng_(config.rng_seed) {
  check_inputs(targets_, generators_, config_);

  rho_ = compute_rho(generators_);
  betas_ = DenseMatrix(m_, dt_);

  const std::size_t total = m_ * n_;
  state_.lambda = dual_lambda(config_.loss, config_.c_tilde);
  state_.upper_bound = dual_upper_bound(config_.loss, config_.c_tilde);
  state_.alphas.assign(total, 0.0);
  state_.q.resize(n_);
  state_.active.assign(total, 1);
  state_.cache.assign(total, 0.0);
  state_.cache_stamp.assign(total, 0);
  state_.beta_version.assign(m_, 0);

  labels_.resize(total);
  curvature_.resize(total);
  if (config_.regularizer == Regularizer::identity_plus) offsets_.resize(total);

  for (std::size_t j = 0; j < n_; ++j) {
    const auto& x = targets_[j].x;
    state_.q[j] = squared_norm(x);
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t l = j * m_ + i;
      labels_[l] = static_cast<signed char>(constraint_label(targets_[j].label, i));
      curvature_[l] = state_.q[j] * rho_(i, i) + state_.lambda;
      if (!offsets_.empty()) offsets_[l] = x.dot(generators_.plane(i));
      if (curvature_[l] <= 0.0) ++zero_curvature_;
    }
  }

  active_count_.resize(n_);
  blocks_.resize(n_);
  reset_active_set();
}

void TransformSolver::reset_active_set() {
  block_count_ = 0;
  for (std::size_t j = 0; j < n_; ++j) {
    std::uint32_t count = 0;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t l = j * m_ + i;
      state_.active[l] = curvature_[l] > 0.0 ? 1 : 0;
      count += state_.active[l];
    }
    active_count_[j] = count;
    if (count > 0) blocks_[block_count_++] = static_cast<std::uint32_t>(j);
  }
  shrunk_ = 0;
  pg_max_old_ = kInf;
  pg_min_old_ = -kInf;
}

void TransformSolver::warm_start(std::span<const double> alphas) {
  if (alphas.size() != constraint_count())
    throw DimensionError("warm start needs " + std::to_string(constraint_count()) +
                         " dual variables, got " + std::to_string(alphas.size()));
  std::fill(betas_.data().begin(), betas_.data().end(), 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    const auto& x = targets_[j].x;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t l = j * m_ + i;
      double a = std::isfinite(alphas[l]) ? std::clamp(alphas[l], 0.0, state_.upper_bound) : 0.0;
      if (curvature_[l] <= 0.0) a = 0.0;
      state_.alphas[l] = a;
      if (a != 0.0) x.axpy(a * label(l), betas_.row(i));
    }
  }
  for (auto& v : state_.beta_version) ++v;
  reset_active_set();
}

void TransformSolver::refresh_cache(std::size_t j) {
  const auto& x = targets_[j].x;
  for (std::size_t i = 0; i < m_; ++i) {
    const std::size_t l = j * m_ + i;
    if (state_.cache_stamp[l] != state_.beta_version[i]) {
      state_.cache[l] = x.dot(betas_.row(i));
      state_.cache_stamp[l] = state_.beta_version[i];
    }
  }
}

double TransformSolver::low_rank_score(std::size_t i, std::size_t j) const noexcept {
  const double* r = rho_.row(i).data();
  const double* c = &state_.cache[j * m_];
  double s = 0.0;
  for (std::size_t k = 0; k < m_; ++k) s += r[k] * c[k];
  return s;
}

double TransformSolver::score(std::size_t i, std::size_t j) {
  refresh_cache(j);
  const double s = low_rank_score(i, j);
  return offsets_.empty() ? s : s + offsets_[j * m_ + i];
}

Gradient TransformSolver::projected_gradient(std::size_t i, std::size_t j) {
  const std::size_t l = j * m_ + i;
  const double alpha = state_.alphas[l];
  Gradient out;
  out.g = label(l) * score(i, j) + state_.lambda * alpha - 1.0;
  if (alpha == 0.0) {
    out.pg = std::min(out.g, 0.0);
  } else if (alpha == state_.upper_bound) {
    out.pg = std::max(out.g, 0.0);
  } else {
    out.pg = out.g;
  }
  return out;
}

StepResult TransformSolver::coordinate_step(std::size_t i, std::size_t j) {
  const std::size_t l = j * m_ + i;
  if (curvature_[l] <= 0.0) return {0.0, true};
  const Gradient grad = projected_gradient(i, j);
  if (std::fabs(grad.pg) <= 1e-12) return {0.0, true};

  const double old = state_.alphas[l];
  const double updated = std::min(std::max(old - grad.g / curvature_[l], 0.0), state_.upper_bound);
  state_.alphas[l] = updated;
  const double d = (updated - old) * label(l);
  targets_[j].x.axpy(d, betas_.row(i));
  state_.cache[l] += d * state_.q[j];
  state_.cache_stamp[l] = ++state_.beta_version[i];
  ++steps_;
  return {updated - old, false};
}

PassStats TransformSolver::run_pass() {
  PassStats stats;
  double pg_max_new = -kInf;
  double pg_min_new = kInf;
  const double lambda = state_.lambda;
  const double upper = state_.upper_bound;

  for (std::size_t b = 0; b < block_count_; ++b)
    std::swap(blocks_[b], blocks_[b + rng_() % (block_count_ - b)]);

  for (std::size_t b = 0; b < block_count_; ++b) {
    const std::size_t j = blocks_[b];
    const auto& x = targets_[j].x;
    const double qj = state_.q[j];
    refresh_cache(j);

    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t l = j * m_ + i;
      if (!state_.active[l]) continue;
      ++stats.visited;

      const double t = label(l);
      const double alpha = state_.alphas[l];
      double s = low_rank_score(i, j);
      if (!offsets_.empty()) s += offsets_[l];
      const double g = t * s + lambda * alpha - 1.0;

      double pg = 0.0;
      if (alpha == 0.0) {
        if (config_.shrinking && g > pg_max_old_) {
          state_.active[l] = 0;
          --active_count_[j];
          ++shrunk_;
          continue;
        }
        if (g < 0.0) pg = g;
      } else if (alpha == upper) {
        if (config_.shrinking && g < pg_min_old_) {
          state_.active[l] = 0;
          --active_count_[j];
          ++shrunk_;
          continue;
        }
        if (g > 0.0) pg = g;
      } else {
        pg = g;
      }

      pg_max_new = std::max(pg_max_new, pg);
      pg_min_new = std::min(pg_min_new, pg);

      if (std::fabs(pg) > 1e-12) {
        const double updated = std::min(std::max(alpha - g / curvature_[l], 0.0), upper);
        state_.alphas[l] = updated;
        const double d = (updated - alpha) * t;
        x.axpy(d, betas_.row(i));
        state_.cache[l] += d * qj;
        state_.cache_stamp[l] = ++state_.beta_version[i];
        ++stats.updates;
      }
    }

    if (active_count_[j] == 0) std::swap(blocks_[b--], blocks_[--block_count_]);
  }

  steps_ += stats.updates;
  if (stats.visited == 0) {
    pg_max_new = 0.0;
    pg_min_new = 0.0;
  }
  stats.pg_max = pg_max_new;
  stats.pg_min = pg_min_new;
  pg_max_old_ = pg_max_new <= 0.0 ? kInf : pg_max_new;
  pg_min_old_ = pg_min_new >= 0.0 ? -kInf : pg_min_new;
  return stats;
}

TransformDiagnostics TransformSolver::solve() {
  TransformDiagnostics diag;
  diag.skipped_zero_curvature = zero_curvature_;
  const std::size_t steps_before = steps_;

  while (diag.passes < config_.max_passes) {
    const PassStats stats = run_pass();
    ++diag.passes;
    if (config_.track_objective) diag.dual_history.push_back(dual_objective());
    diag.pg_gap = stats.pg_max - stats.pg_min;
    if (diag.pg_gap <= config_.epsilon) {
      if (shrunk_ == 0) {
        diag.converged = true;
        break;
      }
      reset_active_set();
    }
  }

  diag.steps = steps_ - steps_before;
  diag.dual_objective = dual_objective();
  diag.primal_objective = primal_objective();
  return diag;
}

double TransformSolver::dual_objective() const {
  double obj = half_low_rank_norm(rho_, betas_);
  for (std::size_t l = 0; l < state_.alphas.size(); ++l) {
    const double a = state_.alphas[l];
    obj += 0.5 * state_.lambda * a * a - margin(l) * a;
  }
  return obj;
}

double TransformSolver::primal_objective() const {
  double obj = half_low_rank_norm(rho_, betas_);
  std::vector<double> bx(m_);
  for (std::size_t j = 0; j < n_; ++j) {
    const auto& x = targets_[j].x;
    for (std::size_t i = 0; i < m_; ++i) bx[i] = x.dot(betas_.row(i));
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t l = j * m_ + i;
      double s = 0.0;
      for (std::size_t k = 0; k < m_; ++k) s += rho_(i, k) * bx[k];
      if (!offsets_.empty()) s += offsets_[l];
      obj += config_.c_tilde * hinge_power(1.0 - label(l) * s, config_.loss);
    }
  }
  return obj;
}

LowRankTransform TransformSolver::transform() const {
  return LowRankTransform(generators_, betas_, config_.regularizer);
}

TransformResult solve_transform(const Dataset& targets, const HyperplaneSet& planes,
                                const SolverConfig& config, std::span<const double> warm_alphas) {
  TransformSolver solver(targets, planes, config);
  if (!warm_alphas.empty()) solver.warm_start(warm_alphas);
  TransformResult result;
  result.diagnostics = solver.solve();
  result.transform = solver.transform();
  result.alphas = solver.state().alphas;
  return result;
}

double transform_dual_objective(const Dataset& targets, const HyperplaneSet& planes,
                                const SolverConfig& config, std::span<const double> alphas) {
  check_inputs(targets, planes, config);
  const std::size_t m = planes.count();
  const std::size_t n = targets.size();
  if (alphas.size() != m * n)
    throw DimensionError("dual objective needs " + std::to_string(m * n) + " dual variables");
  const bool identity = config.regularizer == Regularizer::identity_plus;
  const double lambda = dual_lambda(config.loss, config.c_tilde);

  DenseMatrix betas(m, targets.dimension());
  double linear = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& x = targets[j].x;
    for (std::size_t i = 0; i < m; ++i) {
      const double a = alphas[j * m + i];
      const double t = constraint_label(targets[j].label, i);
      const double margin = identity ? 1.0 - t * x.dot(planes.plane(i)) : 1.0;
      linear += 0.5 * lambda * a * a - margin * a;
      x.axpy(a * t, betas.row(i));
    }
  }
  return half_low_rank_norm(compute_rho(planes), betas) + linear;
}

double transform_primal_objective(const LowRankTransform& transform, const Dataset& targets,
                                  const HyperplaneSet& planes, const SolverConfig& config) {
  if (planes.dimension() != transform.source_dim())
    throw DimensionError("hyperplanes have length " + std::to_string(planes.dimension()) +
                         ", transform source dimension is " + std::to_string(transform.source_dim()));
  double obj = 0.5 * transform.regularizer_norm_sq();
  for (const auto& e : targets.examples()) {
    const auto wx = transform.apply(e.x);
    for (std::size_t i = 0; i < planes.count(); ++i) {
      const double t = constraint_label(e.label, i);
      obj += config.c_tilde * hinge_power(1.0 - t * dot(planes.plane(i), wx), config.loss);
    }
  }
  return obj;
}

}  // namespace mmdt
