#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "mmdt/data.hpp"
#include "mmdt/mmdt.hpp"

namespace fs = std::filesystem;
using namespace mmdt;

namespace {

enum Exit { kOk = 0, kSolver = 1, kUsage = 2, kData = 3 };

struct UsageError : Error {
  using Error::Error;
};

struct TrainArgs {
  std::string source, target, out;
  double c_src = 1.0;
  double c_tgt = 1.0;
  std::string loss = "l2";
  std::string mode = "pure";
  double epsilon = 0.1;
  std::size_t outer = 2;
  std::size_t max_passes = 1000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  bool no_bias = false;
  bool no_refresh = false;
};

SolverConfig config_from(const TrainArgs& a) {
  SolverConfig c;
  c.c = a.c_src;
  c.c_tilde = a.c_tgt;
  c.loss = a.loss == "l1" ? Loss::hinge : Loss::squared_hinge;
  c.regularizer = a.mode == "identity" ? Regularizer::identity_plus : Regularizer::pure;
  c.epsilon = a.epsilon;
  c.outer_iterations = a.outer;
  c.max_passes = a.max_passes;
  c.rng_seed = a.seed;
  c.threads = a.threads;
  c.augment_bias = !a.no_bias;
  c.final_refresh = !a.no_refresh;
  return c;
}

int run_train(const TrainArgs& a) {
  const SolverConfig config = config_from(a);
  config.validate();

  data::CategoryVocabulary vocab;
  data::ReadOptions src_opts;
  Dataset source = data::read_sparse_dataset(a.source, vocab, src_opts);
  data::ReadOptions tgt_opts;
  tgt_opts.domain = Domain::target;
  Dataset target = data::read_sparse_dataset(a.target, vocab, tgt_opts);
  source = source.with_category_count(vocab.size());

  if (config.regularizer == Regularizer::identity_plus && source.dimension() != target.dimension())
    throw UsageError("--mode identity needs equal dimensions, got source D=" +
                     std::to_string(source.dimension()) + " and target Dt=" + std::to_string(target.dimension()));

  const FitResult result = fit(source, target, config, vocab.names());
  std::cout << "iteration\tstep\tobjective\tseconds\taccepted\n";
  for (const auto& r : result.history)
    std::cout << r.iteration << '\t' << r.step << '\t' << data::format_double(r.objective) << '\t' << r.seconds
              << '\t' << (r.accepted ? 1 : 0) << '\n';
  if (!result.last_transform.converged && config.outer_iterations > 0)
    std::cerr << "warning: last transform solve stopped after " << result.last_transform.passes
              << " passes with PG gap " << result.last_transform.pg_gap << '\n';
  data::save_model(result.model, a.out);
  return kOk;
}

int run_predict(const std::string& model_path, const std::string& data_path, bool scores) {
  const MmdtModel model = data::load_model(model_path);
  data::CategoryVocabulary scratch;
  data::ReadOptions opts;
  opts.domain = Domain::target;
  const Dataset d = data::read_sparse_dataset(data_path, scratch, opts);
  std::ostringstream out;
  for (const auto& e : d.examples()) {
    const Prediction p = predict(model, e.x);
    out << model.category_names()[p.category];
    if (scores)
      for (double s : p.scores) out << '\t' << data::format_double(s);
    out << '\n';
  }
  std::cout << out.str();
  return kOk;
}

int run_eval(const std::string& model_path, const std::string& data_path) {
  const MmdtModel model = data::load_model(model_path);
  data::CategoryVocabulary vocab(model.category_names());
  data::ReadOptions opts;
  opts.domain = Domain::target;
  opts.allow_new_labels = false;
  const Dataset d = data::read_sparse_dataset(data_path, vocab, opts);
  const Evaluation ev = evaluate(model, d);
  std::cout << "accuracy\t" << data::format_double(ev.accuracy) << '\t' << ev.correct << '\t' << ev.total << '\n';
  for (std::size_t k = 0; k < model.category_count(); ++k) {
    if (ev.per_class_count[k] == 0) continue;
    std::cout << "class\t" << model.category_names()[k] << '\t' << data::format_double(ev.per_class_accuracy[k])
              << '\t' << ev.per_class_count[k] << '\n';
  }
  return kOk;
}

int run_transfer(const std::string& model_path, const std::string& source_path, const std::string& examples_path,
                 const std::string& name, const std::string& out, const TrainArgs& a) {
  const MmdtModel model = data::load_model(model_path);
  data::CategoryVocabulary vocab(model.category_names());
  const Dataset source = data::read_sparse_dataset(source_path, vocab);
  data::CategoryVocabulary scratch;
  const Dataset fresh = data::read_sparse_dataset(examples_path, scratch);
  std::vector<FeatureVector> examples;
  for (const auto& e : fresh.examples()) examples.push_back(e.x);
  std::vector<Example> others;
  for (const auto& e : source.examples())
    if (vocab.name(e.label) != name) others.push_back(e);
  const Dataset negatives(std::move(others), source.dimension(), vocab.size());
  const MmdtModel grown = transfer_new_category(model, name, examples, negatives, config_from(a));
  data::save_model(grown, out);
  return kOk;
}

struct SynthArgs {
  std::string preset = "rotation";
  std::string out_dir;
  std::uint64_t seed = 1;
  std::optional<std::size_t> source_per_class, target_per_class, test_per_class, categories;
  std::optional<double> noise;
};

int run_synth(const SynthArgs& a) {
  data::SynthConfig cfg = data::synth_preset(a.preset);
  cfg.seed = a.seed;
  if (a.source_per_class) cfg.source_per_class = *a.source_per_class;
  if (a.target_per_class) cfg.target_per_class = *a.target_per_class;
  if (a.test_per_class) cfg.test_per_class = *a.test_per_class;
  if (a.categories) {
    cfg.categories = *a.categories;
    std::erase_if(cfg.heldout, [&](int h) { return static_cast<std::size_t>(h) >= cfg.categories; });
  }
  if (a.noise) cfg.noise = *a.noise;
  const data::SyntheticPair pair = data::make_shifted_pair(cfg);

  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  data::CategoryVocabulary vocab;
  for (std::size_t k = 0; k < cfg.categories; ++k) vocab.intern(std::to_string(k));
  data::write_sparse_dataset(dir / "source.txt", pair.source, vocab);
  data::write_sparse_dataset(dir / "target.txt", pair.target, vocab);
  data::write_sparse_dataset(dir / "test.txt", pair.target_test, vocab);
  if (!pair.target_pool.empty()) data::write_sparse_dataset(dir / "pool.txt", pair.target_pool, vocab);
  std::ofstream held(dir / "heldout.txt", std::ios::binary);
  for (int h : pair.heldout) held << vocab.name(h) << '\n';
  if (!held) throw DataError("cannot write " + (dir / "heldout.txt").string());
  for (int h : pair.heldout) {
    std::vector<Example> ex;
    for (const auto& e : pair.source.examples())
      if (e.label == h) ex.push_back(e);
    data::write_sparse_dataset(dir / ("heldout_source_" + vocab.name(h) + ".txt"),
                               Dataset(std::move(ex), pair.source.dimension(), cfg.categories), vocab);
  }
  std::cerr << "wrote " << pair.source.size() << " source, " << pair.target.size() << " target and "
            << pair.target_test.size() << " test examples to " << a.out_dir << '\n';
  return kOk;
}

struct BenchArgs {
  std::vector<std::string> grid;
  std::size_t reps = 5;
  std::size_t passes = 5;
  std::uint64_t seed = 1;
};

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size() || v == 0)
      throw UsageError("grid " + key + ": expected positive integers, got '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("grid " + key + " has no values");
  return out;
}

double time_passes(const Dataset& targets, const HyperplaneSet& planes, const SolverConfig& config,
                   std::size_t passes) {
  TransformSolver solver(targets, planes, config);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t p = 0; p < passes; ++p) solver.run_pass();
  const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
  return elapsed.count() / static_cast<double>(passes);
}

int run_bench(const BenchArgs& a) {
  std::map<std::string, std::vector<std::size_t>> axes{
      {"n", {1000}}, {"nt", {500}}, {"D", {100}}, {"Dt", {100}}, {"K", {10}}};
  for (const auto& g : a.grid) {
    const auto eq = g.find('=');
    const std::string key = g.substr(0, eq);
    if (eq == std::string::npos || !axes.count(key))
      throw UsageError("grid entries look like n=1000,2000 with keys n, nt, D, Dt, K; got '" + g + "'");
    axes[key] = parse_list(key, g.substr(eq + 1));
  }
  if (a.reps == 0 || a.passes == 0) throw UsageError("--reps and --passes must be positive");

  SolverConfig config;
  config.shrinking = false;
  config.rng_seed = a.seed;

  std::cout << "n,nt,D,Dt,K,pass_ms,per_constraint_ns\n";
  for (std::size_t n : axes["n"])
    for (std::size_t nt : axes["nt"])
      for (std::size_t d : axes["D"])
        for (std::size_t dt : axes["Dt"])
          for (std::size_t k : axes["K"]) {
            if (k < 2) throw UsageError("grid K values must be at least 2");
            data::SynthConfig cfg;
            cfg.categories = k;
            cfg.source_dim = d;
            cfg.target_dim = dt;
            cfg.shift = data::ShiftKind::dimension_change;
            cfg.source_per_class = (n + k - 1) / k;
            cfg.target_per_class = (nt + k - 1) / k;
            cfg.test_per_class = 0;
            cfg.noise = 1.0;
            cfg.seed = a.seed;
            const auto pair = data::make_shifted_pair(cfg);
            const auto source_all = pair.source.examples();
            const auto target_all = pair.target.examples();
            const Dataset source(std::vector<Example>(source_all.begin(), source_all.begin() + n), d, k);
            const Dataset targets(std::vector<Example>(target_all.begin(), target_all.begin() + nt), dt, k,
                                  Domain::target);
            const HyperplaneSet planes = svm::train_one_vs_all(source, 1.0, svm::options_from(config));

            std::vector<double> times;
            for (std::size_t r = 0; r < a.reps; ++r) times.push_back(time_passes(targets, planes, config, a.passes));
            std::sort(times.begin(), times.end());
            const double median = a.reps % 2 ? times[a.reps / 2] : 0.5 * (times[a.reps / 2 - 1] + times[a.reps / 2]);
            const double per_constraint = median * 1e6 / static_cast<double>(k * nt);
            std::cout << n << ',' << nt << ',' << d << ',' << dt << ',' << k << ',' << median << ','
                      << per_constraint << '\n'
                      << std::flush;
          }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Max-margin domain transforms: train, predict, evaluate, generate data, benchmark."};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Fit a transform and classifiers on source and target data");
  train_cmd->add_option("--source", train.source, "Labeled source-domain data")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--target", train.target, "Labeled target-domain data")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "Model file to write")->required();
  auto add_solver_flags = [](CLI::App* cmd, TrainArgs& t) {
    cmd->add_option("--c-src", t.c_src, "Cost of source examples")->check(CLI::PositiveNumber);
    cmd->add_option("--c-tgt", t.c_tgt, "Cost of target constraints")->check(CLI::PositiveNumber);
    cmd->add_option("--loss", t.loss, "Hinge (l1) or squared hinge (l2)")->check(CLI::IsMember({"l1", "l2"}));
    cmd->add_option("--epsilon", t.epsilon, "Projected-gradient stopping tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--max-passes", t.max_passes, "Pass limit per dual solve")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", t.seed, "Random seed");
    cmd->add_option("--threads", t.threads, "Threads for one-vs-all training")->check(CLI::PositiveNumber);
    cmd->add_flag("--no-bias", t.no_bias, "Do not append a constant feature");
  };
  add_solver_flags(train_cmd, train);
  train_cmd->add_option("--mode", train.mode, "Regularizer: pure or identity")->check(CLI::IsMember({"pure", "identity"}));
  train_cmd->add_option("--outer-iters", train.outer, "Alternation rounds");
  train_cmd->add_flag("--no-refresh", train.no_refresh, "Skip the final hyperplane step");

  std::string model_path, data_path;
  bool with_scores = false;
  auto* predict_cmd = app.add_subcommand("predict", "Print one predicted category per example");
  predict_cmd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--data", data_path, "Target-domain data")->required()->check(CLI::ExistingFile);
  predict_cmd->add_flag("--scores", with_scores, "Also print the K classifier scores");

  auto* eval_cmd = app.add_subcommand("eval", "Overall and per-class accuracy on labeled target data");
  eval_cmd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data_path, "Labeled target-domain data")->required()->check(CLI::ExistingFile);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic source/target pair");
  synth_cmd->add_option("--preset", synth.preset, "rotation, linear, bias or dimchange")
      ->check(CLI::IsMember({"rotation", "linear", "bias", "dimchange"}));
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--source-per-class", synth.source_per_class, "Source examples per category");
  synth_cmd->add_option("--target-per-class", synth.target_per_class, "Labeled target examples per category");
  synth_cmd->add_option("--test-per-class", synth.test_per_class, "Target test examples per category");
  synth_cmd->add_option("--categories", synth.categories, "Number of categories");
  synth_cmd->add_option("--noise", synth.noise, "Within-class noise scale")->check(CLI::NonNegativeNumber);

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time transform-solver passes over a parameter grid (CSV)");
  bench_cmd->add_option("--grid", bench.grid, "Axis values, e.g. --grid nt=500,1000 --grid D=100");
  bench_cmd->add_option("--reps", bench.reps, "Repetitions per point (median reported)");
  bench_cmd->add_option("--passes", bench.passes, "Passes timed per repetition");
  bench_cmd->add_option("--seed", bench.seed, "Random seed");

  TrainArgs transfer;
  std::string new_name, examples_path, source_path, out_path;
  auto* transfer_cmd = app.add_subcommand("transfer", "Add a category that has source examples only");
  transfer_cmd->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  transfer_cmd->add_option("--source", source_path, "All labeled source data")->required()->check(CLI::ExistingFile);
  transfer_cmd->add_option("--examples", examples_path, "Source examples of the new category")
      ->required()
      ->check(CLI::ExistingFile);
  transfer_cmd->add_option("--name", new_name, "Name of the new category")->required();
  transfer_cmd->add_option("--out", out_path, "Model file to write")->required();
  add_solver_flags(transfer_cmd, transfer);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*predict_cmd) return run_predict(model_path, data_path, with_scores);
    if (*eval_cmd) return run_eval(model_path, data_path);
    if (*synth_cmd) return run_synth(synth);
    if (*bench_cmd) return run_bench(bench);
    if (*transfer_cmd) return run_transfer(model_path, source_path, examples_path, new_name, out_path, transfer);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolver;
  }
  return kUsage;
}
