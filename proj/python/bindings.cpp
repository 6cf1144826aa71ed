#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mmdt/data.hpp"
#include "mmdt/mmdt.hpp"

namespace py = pybind11;
using namespace mmdt;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const DenseMatrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

Array to_array(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

DenseMatrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-d array");
  DenseMatrix m(a.shape(0), a.shape(1));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

std::vector<FeatureVector> rows_of(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-d array of examples");
  std::vector<FeatureVector> out;
  const auto n = static_cast<std::size_t>(a.shape(0));
  const auto d = static_cast<std::size_t>(a.shape(1));
  for (std::size_t j = 0; j < n; ++j) out.push_back(FeatureVector::dense({a.data() + j * d, a.data() + (j + 1) * d}));
  return out;
}

Dataset make_dataset(const Array& x, const std::vector<int>& labels, std::optional<std::size_t> categories,
                     Domain domain) {
  const auto rows = rows_of(x);
  if (rows.size() != labels.size()) throw DataError("X and y have different lengths");
  std::size_t k = 0;
  for (int l : labels) k = std::max(k, static_cast<std::size_t>(l < 0 ? 0 : l) + 1);
  std::vector<Example> ex;
  for (std::size_t j = 0; j < rows.size(); ++j) ex.push_back({rows[j], labels[j]});
  return Dataset(std::move(ex), static_cast<std::size_t>(x.shape(1)), categories.value_or(k), domain);
}

Array dense_features(const Dataset& d) {
  Array out({d.size(), d.dimension()});
  double* p = out.mutable_data();
  for (const auto& e : d.examples()) {
    const auto v = e.x.padded_to(d.dimension()).to_dense();
    p = std::copy(v.begin(), v.end(), p);
  }
  return out;
}

std::vector<int> labels_of(const Dataset& d) {
  std::vector<int> out;
  for (const auto& e : d.examples()) out.push_back(e.label);
  return out;
}

Array model_scores(const MmdtModel& model, const Array& x) {
  const auto rows = rows_of(x);
  Array out({rows.size(), model.category_count()});
  double* p = out.mutable_data();
  for (const auto& r : rows) {
    const auto s = predict(model, r).scores;
    p = std::copy(s.begin(), s.end(), p);
  }
  return out;
}

std::vector<int> model_predict(const MmdtModel& model, const Array& x) {
  std::vector<int> out;
  for (const auto& r : rows_of(x)) out.push_back(predict(model, r).category);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Max-margin domain transforms";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  auto data_error = py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", data_error.ptr());
  py::register_exception<FormatError>(m, "FormatError", data_error.ptr());
  py::register_exception<BudgetError>(m, "BudgetError", error.ptr());
  py::register_exception<SolverError>(m, "SolverError", error.ptr());

  py::enum_<Loss>(m, "Loss").value("hinge", Loss::hinge).value("squared_hinge", Loss::squared_hinge);
  py::enum_<Regularizer>(m, "Regularizer")
      .value("pure", Regularizer::pure)
      .value("identity_plus", Regularizer::identity_plus);
  py::enum_<Domain>(m, "Domain").value("source", Domain::source).value("target", Domain::target);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("c_tilde", &SolverConfig::c_tilde)
      .def_readwrite("c", &SolverConfig::c)
      .def_readwrite("loss", &SolverConfig::loss)
      .def_readwrite("epsilon", &SolverConfig::epsilon)
      .def_readwrite("max_passes", &SolverConfig::max_passes)
      .def_readwrite("regularizer", &SolverConfig::regularizer)
      .def_readwrite("outer_iterations", &SolverConfig::outer_iterations)
      .def_readwrite("rng_seed", &SolverConfig::rng_seed)
      .def_readwrite("augment_bias", &SolverConfig::augment_bias)
      .def_readwrite("final_refresh", &SolverConfig::final_refresh)
      .def_readwrite("shrinking", &SolverConfig::shrinking)
      .def_readwrite("track_objective", &SolverConfig::track_objective)
      .def_readwrite("threads", &SolverConfig::threads)
      .def("validate", &SolverConfig::validate);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("X"), py::arg("y"), py::arg("categories") = py::none(),
           py::arg("domain") = Domain::source)
      .def_property_readonly("X", &dense_features)
      .def_property_readonly("y", &labels_of)
      .def_property_readonly("dimension", &Dataset::dimension)
      .def_property_readonly("category_count", &Dataset::category_count)
      .def_property_readonly("domain", &Dataset::domain)
      .def("__len__", &Dataset::size);

  py::class_<LowRankTransform>(m, "LowRankTransform")
      .def_property_readonly("source_dim", &LowRankTransform::source_dim)
      .def_property_readonly("target_dim", &LowRankTransform::target_dim)
      .def_property_readonly("generator_count", &LowRankTransform::generator_count)
      .def_property_readonly("mode", &LowRankTransform::mode)
      .def_property_readonly("generators", [](const LowRankTransform& w) { return to_array(w.generators().matrix()); })
      .def_property_readonly("betas", [](const LowRankTransform& w) { return to_array(w.betas()); })
      .def("apply", [](const LowRankTransform& w, const Array& x) {
        return to_array(w.apply(FeatureVector::dense({x.data(), x.data() + x.size()})));
      })
      .def("materialize", [](const LowRankTransform& w) { return to_array(w.materialize()); })
      .def("regularizer_norm_sq", &LowRankTransform::regularizer_norm_sq);

  py::class_<TransformDiagnostics>(m, "TransformDiagnostics")
      .def_readonly("passes", &TransformDiagnostics::passes)
      .def_readonly("steps", &TransformDiagnostics::steps)
      .def_readonly("pg_gap", &TransformDiagnostics::pg_gap)
      .def_readonly("converged", &TransformDiagnostics::converged)
      .def_readonly("dual_objective", &TransformDiagnostics::dual_objective)
      .def_readonly("primal_objective", &TransformDiagnostics::primal_objective)
      .def_readonly("dual_history", &TransformDiagnostics::dual_history);

  py::class_<TransformResult>(m, "TransformResult")
      .def_readonly("transform", &TransformResult::transform)
      .def_readonly("diagnostics", &TransformResult::diagnostics)
      .def_property_readonly("alphas", [](const TransformResult& r) { return to_array(r.alphas); });

  m.def(
      "solve_transform",
      [](const Dataset& targets, const Array& planes, const SolverConfig& config) {
        return solve_transform(targets, HyperplaneSet(to_matrix(planes)), config);
      },
      py::arg("targets"), py::arg("planes"), py::arg("config") = SolverConfig{});
  m.def(
      "transform_dual_objective",
      [](const Dataset& targets, const Array& planes, const SolverConfig& config, const Array& alphas) {
        return transform_dual_objective(targets, HyperplaneSet(to_matrix(planes)), config,
                                        {alphas.data(), static_cast<std::size_t>(alphas.size())});
      },
      py::arg("targets"), py::arg("planes"), py::arg("config"), py::arg("alphas"));
  m.def(
      "train_one_vs_all",
      [](const Dataset& data, const SolverConfig& config) {
        return to_array(svm::train_one_vs_all(data, config.c, svm::options_from(config), config.threads).matrix());
      },
      py::arg("data"), py::arg("config") = SolverConfig{});

  py::class_<MmdtModel>(m, "Model")
      .def_property_readonly("transform", &MmdtModel::transform)
      .def_property_readonly("classifiers", [](const MmdtModel& mm) { return to_array(mm.classifiers().matrix()); })
      .def_property_readonly("category_names", &MmdtModel::category_names)
      .def_property_readonly("category_count", &MmdtModel::category_count)
      .def_property_readonly("augment_bias", &MmdtModel::augment_bias)
      .def("scores", &model_scores, py::arg("X"))
      .def("predict", &model_predict, py::arg("X"))
      .def("accuracy", [](const MmdtModel& mm, const Dataset& d) { return evaluate(mm, d).accuracy; })
      .def("save", [](const MmdtModel& mm, const std::filesystem::path& p) { data::save_model(mm, p); })
      .def_static("load", &data::load_model)
      .def(py::self == py::self);

  py::class_<IterationRecord>(m, "IterationRecord")
      .def_readonly("iteration", &IterationRecord::iteration)
      .def_readonly("step", &IterationRecord::step)
      .def_readonly("objective", &IterationRecord::objective)
      .def_readonly("seconds", &IterationRecord::seconds)
      .def_readonly("accepted", &IterationRecord::accepted);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("model", &FitResult::model)
      .def_readonly("history", &FitResult::history)
      .def_readonly("last_transform", &FitResult::last_transform);

  m.def("fit", &fit, py::arg("source"), py::arg("target"), py::arg("config") = SolverConfig{},
        py::arg("category_names") = std::vector<std::string>{});
  m.def("joint_objective", &joint_objective, py::arg("model"), py::arg("source"), py::arg("target"),
        py::arg("config") = SolverConfig{});
  m.def(
      "transfer_new_category",
      [](const MmdtModel& model, const std::string& name, const Array& examples, const Dataset& negatives,
         const SolverConfig& config) {
        const auto rows = rows_of(examples);
        return transfer_new_category(model, name, rows, negatives, config);
      },
      py::arg("model"), py::arg("name"), py::arg("examples"), py::arg("negatives"),
      py::arg("config") = SolverConfig{});

  m.def(
      "load_dataset",
      [](const std::filesystem::path& path, std::optional<std::vector<std::string>> names, Domain domain) {
        data::CategoryVocabulary vocab(names.value_or(std::vector<std::string>{}));
        data::ReadOptions opts;
        opts.domain = domain;
        opts.allow_new_labels = !names.has_value();
        auto d = data::read_sparse_dataset(path, vocab, opts);
        return py::make_tuple(std::move(d), vocab.names());
      },
      py::arg("path"), py::arg("category_names") = py::none(), py::arg("domain") = Domain::source);

  m.def(
      "synthetic_pair",
      [](const std::string& preset, std::uint64_t seed) {
        auto cfg = data::synth_preset(preset);
        cfg.seed = seed;
        auto pair = data::make_shifted_pair(cfg);
        py::dict out;
        out["source"] = pair.source;
        out["target"] = pair.target;
        out["test"] = pair.target_test;
        out["pool"] = pair.target_pool;
        out["shift"] = to_array(pair.shift);
        out["heldout"] = pair.heldout;
        return out;
      },
      py::arg("preset") = "rotation", py::arg("seed") = 1);
}
