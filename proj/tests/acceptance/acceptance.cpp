#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "mmdt/data.hpp"
#include "mmdt/mmdt.hpp"
#include "oracle/oracle.hpp"
#include "support/instances.hpp"

namespace fs = std::filesystem;
using namespace mmdt;

namespace {

int failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double accuracy(const HyperplaneSet& planes, const Dataset& data) {
  std::size_t ok = 0;
  for (const auto& e : data.examples()) {
    const auto x = e.x.with_bias(data.dimension());
    std::size_t best = 0;
    double top = -INFINITY;
    for (std::size_t k = 0; k < planes.count(); ++k) {
      const double s = x.dot(planes.plane(k));
      if (s > top) {
        top = s;
        best = k;
      }
    }
    ok += static_cast<int>(best) == e.label;
  }
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

Eigen::VectorXd singular_values(const DenseMatrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return Eigen::JacobiSVD<Eigen::MatrixXd>(e).singularValues();
}

// Criterion 4 bookkeeping, filled in while the other criteria run their instances.
struct Monotone {
  std::size_t checked = 0;
  std::size_t non_monotone = 0;
  std::size_t equivalence_converged = 0;

  void note(const TransformDiagnostics& d) {
    ++checked;
    bool ok = !d.dual_history.empty();
    for (std::size_t p = 1; p < d.dual_history.size(); ++p) ok = ok && d.dual_history[p] <= d.dual_history[p - 1] + 1e-10;
    non_monotone += ok ? 0 : 1;
  }
} monotone;

void oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t ok = 0;
  double worst_dual = 0.0, worst_w = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto inst = testing::random_instance(seed);
    inst.config.track_objective = true;
    const auto naive = oracle::naive_solve(inst.targets, inst.planes, inst.config);
    const auto fast = solve_transform(inst.targets, inst.planes, inst.config);
    const double dd = testing::relative_difference(naive.dual_objective, fast.diagnostics.dual_objective);
    const double dw = testing::frobenius_relative(fast.transform.materialize(), naive.w);
    worst_dual = std::max(worst_dual, dd);
    worst_w = std::max(worst_w, dw);
    ok += dd < 1e-6 && dw < 1e-4;
    monotone.equivalence_converged += fast.diagnostics.converged && fast.diagnostics.pg_gap <= inst.config.epsilon;
    monotone.note(fast.diagnostics);
  }
  const double elapsed = seconds_since(t0);
  report(1, ok == 50 && elapsed < 30.0,
         fmt("%zu/50 instances match, worst dual rel %.2e, worst W rel %.2e, %.2f s", ok, worst_dual, worst_w,
             elapsed));
}

void rank_property() {
  std::size_t ok = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 200; seed < 220; ++seed) {
    std::mt19937_64 rng(seed);
    const bool identity = seed % 2 == 1;
    const std::size_t m = 2 + rng() % 3;
    const std::size_t d = 6 + rng() % 5;
    const std::size_t dt = identity ? d : 6 + rng() % 5;
    const auto targets = testing::random_targets(rng, 10 + rng() % 21, dt, m);
    const auto planes = testing::random_planes(rng, m, d);
    SolverConfig c;
    c.regularizer = identity ? Regularizer::identity_plus : Regularizer::pure;
    c.loss = rng() % 2 ? Loss::hinge : Loss::squared_hinge;
    c.epsilon = 1e-6;
    c.max_passes = 200000;
    c.track_objective = true;
    const auto res = solve_transform(targets, planes, c);
    monotone.note(res.diagnostics);
    DenseMatrix w = res.transform.materialize();
    if (identity)
      for (std::size_t r = 0; r < d; ++r) w(r, r) -= 1.0;
    const auto sv = singular_values(w);
    double tail = 0.0;
    for (Eigen::Index k = static_cast<Eigen::Index>(m); k < sv.size(); ++k) tail = std::max(tail, sv(k));
    const double ratio = sv(0) > 0.0 ? tail / sv(0) : 0.0;
    worst = std::max(worst, ratio);
    ok += sv(0) > 0.0 && ratio < 1e-8;
  }
  report(2, ok == 20, fmt("%zu/20 instances, worst sigma_(m+1)/sigma_max %.2e", ok, worst));
}

void gradient_check() {
  std::mt19937_64 rng(7);
  std::size_t ok = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1000; seed < 1100; ++seed) {
    const auto inst = testing::random_instance(seed);
    const std::size_t m = inst.planes.count();
    const std::size_t total = m * inst.targets.size();
    const double upper = dual_upper_bound(inst.config.loss, inst.config.c_tilde);
    std::uniform_real_distribution<double> box(0.05, std::isinf(upper) ? 2.0 : 0.95 * upper);
    std::vector<double> alpha(total);
    for (double& a : alpha) a = box(rng);
    TransformSolver solver(inst.targets, inst.planes, inst.config);
    solver.warm_start(alpha);
    const std::size_t l = rng() % total;
    const double analytic = solver.projected_gradient(l % m, l / m).g;
    const double h = 1e-6;
    auto plus = alpha;
    auto minus = alpha;
    plus[l] += h;
    minus[l] -= h;
    const double fd = (transform_dual_objective(inst.targets, inst.planes, inst.config, plus) -
                       transform_dual_objective(inst.targets, inst.planes, inst.config, minus)) /
                      (2.0 * h);
    const double rel = testing::relative_difference(analytic, fd);
    worst = std::max(worst, rel);
    ok += rel < 1e-5;
  }
  report(3, ok == 100, fmt("%zu/100 points, worst relative error %.2e", ok, worst));
}

void monotone_convergence() {
  for (std::uint64_t seed = 300; seed < 330; ++seed) {
    auto inst = testing::random_instance(seed);
    inst.config.track_objective = true;
    inst.config.shrinking = seed % 2 == 0;
    monotone.note(solve_transform(inst.targets, inst.planes, inst.config).diagnostics);
  }
  report(4, monotone.non_monotone == 0 && monotone.equivalence_converged == 50,
         fmt("%zu/%zu solves monotone, %zu/50 equivalence instances reach the PG gap",
             monotone.checked - monotone.non_monotone, monotone.checked, monotone.equivalence_converged));
}

// ---- CLI helpers ----

const fs::path kWork = fs::temp_directory_path() / "mmdt_acceptance";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  fs::create_directories(kWork);
  const auto out = kWork / "stdout.txt";
  const std::string cmd = std::string("\"") + MMDT_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          (kWork / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

std::string at(const std::string& rel) { return "\"" + (kWork / rel).string() + "\""; }

std::vector<std::vector<std::string>> table(const std::string& text, char sep) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, sep);) cells.push_back(c);
    out.push_back(cells);
  }
  return out;
}

void scaling() {
  const std::string base = " --reps 5 --passes 5 --seed 1";
  const std::string fixed = " --grid K=10";
  auto median_ns = [&](const std::string& grid, std::size_t column) {
    const auto r = cli("bench" + grid + fixed + base);
    std::vector<double> v;
    if (r.code != 0) return v;
    const auto rows = table(r.out, ',');
    for (std::size_t k = 1; k < rows.size(); ++k) v.push_back(std::stod(rows[k][column]));
    return v;
  };
  median_ns(" --grid nt=2000", 5);  // warm-up

  const auto by_n = median_ns(" --grid n=1000,2000 --grid nt=2000 --grid D=100 --grid Dt=100", 6);
  const auto by_d = median_ns(" --grid n=1000 --grid nt=2000 --grid D=100,200 --grid Dt=100", 6);
  const auto by_nt = median_ns(" --grid n=1000 --grid nt=2000,4000 --grid D=100 --grid Dt=100", 5);
  const auto by_dt = median_ns(" --grid n=1000 --grid nt=2000 --grid D=100 --grid Dt=100,200", 5);
  if (by_n.size() != 2 || by_d.size() != 2 || by_nt.size() != 2 || by_dt.size() != 2) {
    report(5, false, "bench did not produce the expected rows");
    return;
  }
  const double drift_n = std::fabs(by_n[1] / by_n[0] - 1.0);
  const double drift_d = std::fabs(by_d[1] / by_d[0] - 1.0);
  const double ratio_nt = by_nt[1] / by_nt[0];
  const double ratio_dt = by_dt[1] / by_dt[0];
  const bool ok = drift_n < 0.25 && drift_d < 0.25 && ratio_nt >= 1.5 && ratio_nt <= 2.5 && ratio_dt >= 1.5 &&
                  ratio_dt <= 2.5;
  report(5, ok,
         fmt("per-constraint drift n x2 %.1f%%, D x2 %.1f%%; pass time ratio nt x2 %.2f, Dt x2 %.2f",
             100.0 * drift_n, 100.0 * drift_d, ratio_nt, ratio_dt));
}

// Frozen regression numbers for the synthetic fixtures.
constexpr double kRotationSource = 0.078;
constexpr double kRotationMmdt = 1.0;
constexpr double kRotationPool = 1.0;
constexpr double kTransferAdapted = 0.99;
constexpr double kTransferUnadapted = 0.51;
constexpr double kDimchangeMmdt = 0.653;
constexpr double kDimchangeOneShot = 0.599;

bool frozen(double measured, double expected) { return std::fabs(measured - expected) <= 1e-12; }

void rotation_benefit() {
  const auto pair = data::make_shifted_pair(data::synth_preset("rotation"));
  SolverConfig c;
  const auto opts = svm::options_from(c);
  const double source_only = accuracy(svm::train_one_vs_all(pair.source.with_bias(), c.c, opts), pair.target_test);
  const double pool = accuracy(svm::train_one_vs_all(pair.target_pool.with_bias(), c.c, opts), pair.target_test);
  const double mmdt = evaluate(fit(pair.source, pair.target, c).model, pair.target_test).accuracy;
  const bool ok = mmdt - source_only >= 0.10 && mmdt >= pool - 0.05 && frozen(source_only, kRotationSource) &&
                  frozen(mmdt, kRotationMmdt) && frozen(pool, kRotationPool);
  report(6, ok, fmt("MMDT %.3f, SVM-source %.3f, SVM on abundant target %.3f", mmdt, source_only, pool));
}

void new_category_transfer() {
  const auto cfg = data::synth_preset("linear");
  const auto pair = data::make_shifted_pair(cfg);
  std::vector<int> known;
  for (std::size_t k = 0; k < cfg.categories; ++k)
    if (std::find(cfg.heldout.begin(), cfg.heldout.end(), static_cast<int>(k)) == cfg.heldout.end())
      known.push_back(static_cast<int>(k));
  SolverConfig c;
  auto model =
      fit(data::restrict_categories(pair.source, known), data::restrict_categories(pair.target, known), c).model;
  for (int h : cfg.heldout) {
    std::vector<Example> rest;
    for (const auto& e : pair.source.examples())
      if (e.label != h) rest.push_back(e);
    const Dataset others(std::move(rest), pair.source.dimension(), pair.source.category_count());
    model = transfer_new_category(model, std::to_string(h), data::category_examples(pair.source, h), others, c);
  }
  const auto unadapted = svm::train_one_vs_all(pair.source.with_bias(), c.c, svm::options_from(c));

  // Held-out target points, scored among the held-out categories only.
  std::size_t n = 0, ok_adapted = 0, ok_unadapted = 0;
  for (const auto& e : pair.target_test.examples()) {
    const auto slot = std::find(cfg.heldout.begin(), cfg.heldout.end(), e.label);
    if (slot == cfg.heldout.end()) continue;
    ++n;
    const auto scores = predict(model, e.x).scores;
    const auto x = e.x.with_bias(pair.target_test.dimension());
    int best_a = -1, best_u = -1;
    double top_a = -INFINITY, top_u = -INFINITY;
    for (std::size_t k = 0; k < cfg.heldout.size(); ++k) {
      const int h = cfg.heldout[k];
      const double sa = scores[known.size() + k];
      const double su = x.dot(unadapted.plane(static_cast<std::size_t>(h)));
      if (sa > top_a) top_a = sa, best_a = h;
      if (su > top_u) top_u = su, best_u = h;
    }
    ok_adapted += best_a == e.label;
    ok_unadapted += best_u == e.label;
  }
  const double adapted = static_cast<double>(ok_adapted) / static_cast<double>(n);
  const double plain = static_cast<double>(ok_unadapted) / static_cast<double>(n);
  report(7, adapted > plain && frozen(adapted, kTransferAdapted) && frozen(plain, kTransferUnadapted),
         fmt("held-out categories: mapped hyperplanes %.3f, unadapted %.3f over %zu points", adapted, plain, n));
}

void cross_dimensional() {
  const auto pair = data::make_shifted_pair(data::synth_preset("dimchange"));
  SolverConfig c;
  const auto model = fit(pair.source, pair.target, c).model;
  const double mmdt = evaluate(model, pair.target_test).accuracy;
  const double one_shot =
      accuracy(svm::train_one_vs_all(pair.target.with_bias(), c.c, svm::options_from(c)), pair.target_test);
  const bool shapes = model.input_source_dim() == 40 && model.input_target_dim() == 60;
  report(8, shapes && mmdt > one_shot && frozen(mmdt, kDimchangeMmdt) && frozen(one_shot, kDimchangeOneShot),
         fmt("D=40 Dt=60: MMDT %.3f, 1-shot target-only SVM %.3f", mmdt, one_shot));
}

// Columns of train and bench output that report wall-clock time.
std::string without_timing(const std::string& text, char sep, std::initializer_list<std::size_t> drop) {
  std::string out;
  for (const auto& row : table(text, sep)) {
    for (std::size_t c = 0; c < row.size(); ++c)
      if (std::find(drop.begin(), drop.end(), c) == drop.end()) out += row[c] + sep;
    out += '\n';
  }
  return out;
}

void persistence_and_determinism() {
  std::vector<std::string> problems;

  // Round trip through the file format in process.
  for (const char* name : {"rotation", "bias", "dimchange"}) {
    auto cfg = data::synth_preset(name);
    cfg.test_per_class = 10;
    const auto pair = data::make_shifted_pair(cfg);
    for (Regularizer mode : {Regularizer::pure, Regularizer::identity_plus}) {
      if (mode == Regularizer::identity_plus && cfg.source_dim != cfg.target_dim) continue;
      SolverConfig c;
      c.regularizer = mode;
      const auto model = fit(pair.source, pair.target, c).model;
      const auto file = kWork / (std::string("roundtrip_") + name + ".txt");
      fs::create_directories(kWork);
      data::save_model(model, file);
      const auto loaded = data::load_model(file);
      for (const auto& e : pair.target_test.examples()) {
        const auto a = predict(model, e.x);
        const auto b = predict(loaded, e.x);
        if (a.category != b.category || a.scores.size() != b.scores.size() ||
            std::memcmp(a.scores.data(), b.scores.data(), a.scores.size() * sizeof(double)) != 0) {
          problems.push_back(std::string("round trip ") + name);
          break;
        }
      }
    }
  }

  // Every command twice under the same seed.
  const std::string train_flags = " --seed 3 --mode pure";
  struct Twice {
    std::string label;
    std::string out[2];
    std::string files[2];
  };
  std::vector<Twice> runs;
  for (int k = 0; k < 2; ++k) {
    const std::string dir = "det" + std::to_string(k);
    fs::remove_all(kWork / dir);
    auto record = [&](const std::string& label, const Run& r, std::string file_text) {
      if (k == 0) runs.push_back({label, {}, {}});
      auto it = std::find_if(runs.begin(), runs.end(), [&](const Twice& t) { return t.label == label; });
      it->out[k] = r.code == 0 ? r.out : "exit " + std::to_string(r.code);
      it->files[k] = std::move(file_text);
    };
    const auto synth = cli("synth --preset linear --seed 5 --out-dir " + at(dir));
    std::string synth_files;
    for (const char* f : {"source.txt", "target.txt", "test.txt", "heldout.txt", "heldout_source_8.txt",
                          "heldout_source_9.txt"})
      synth_files += slurp(kWork / dir / f);
    record("synth", synth, synth_files);
    const auto train = cli("train --source " + at(dir + "/source.txt") + " --target " + at(dir + "/target.txt") +
                           " --out " + at(dir + "/model.txt") + train_flags);
    record("train", {train.code, without_timing(train.out, '\t', {3})}, slurp(kWork / dir / "model.txt"));
    record("predict",
           cli("predict --scores --model " + at(dir + "/model.txt") + " --data " + at(dir + "/test.txt")), "");
    record("eval", cli("eval --model " + at(dir + "/model.txt") + " --data " + at(dir + "/test.txt")), "");
    record("transfer",
           cli("transfer --model " + at(dir + "/model.txt") + " --source " + at(dir + "/source.txt") +
               " --examples " + at(dir + "/heldout_source_8.txt") + " --name extra --out " +
               at(dir + "/grown.txt") + " --seed 3"),
           slurp(kWork / dir / "grown.txt"));
    const auto bench = cli("bench --grid n=50 --grid nt=40 --grid D=8 --grid Dt=6 --grid K=3 --reps 1 --passes 1");
    record("bench", {bench.code, without_timing(bench.out, ',', {5, 6})}, "");
  }
  for (const auto& t : runs)
    if (t.out[0] != t.out[1] || t.files[0] != t.files[1] || t.out[0].rfind("exit ", 0) == 0)
      problems.push_back("cli " + t.label);

  std::string detail = "model round trips bit-identical; synth, train, predict, eval, transfer and bench repeat exactly";
  if (!problems.empty()) {
    detail = "mismatch in";
    for (const auto& p : problems) detail += " [" + p + "]";
  }
  report(9, problems.empty(), detail);
}

}  // namespace

int main() {
  oracle_equivalence();
  rank_property();
  gradient_check();
  monotone_convergence();
  scaling();
  rotation_benefit();
  new_category_transfer();
  cross_dimensional();
  persistence_and_determinism();
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
