#include <memory>
#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "arbsvrg/dataset.hpp"
#include "arbsvrg/errors.hpp"
#include "arbsvrg/harness.hpp"
#include "arbsvrg/optimizers.hpp"
#include "arbsvrg/problem.hpp"
#include "arbsvrg/sampling.hpp"
#include "arbsvrg/tuning.hpp"

namespace py = pybind11;
using namespace arbsvrg;

namespace {

// Column-oriented view of a trace, one list per CSV column.
py::dict trace_to_dict(const RunTrace& trace) {
  py::list evals, epochs, wall, sub, dist, lyap;
  for (const TraceRecord& r : trace.records) {
    evals.append(r.grad_evals);
    epochs.append(r.epoch_equiv);
    wall.append(r.wall_s);
    sub.append(r.suboptimality);
    dist.append(r.dist_sq ? py::cast(*r.dist_sq) : py::none());
    lyap.append(r.lyapunov ? py::cast(*r.lyapunov) : py::none());
  }
  py::dict out;
  out["grad_evals"] = evals;
  out["epoch_equiv"] = epochs;
  out["wall_s"] = wall;
  out["suboptimality"] = sub;
  out["dist_sq"] = dist;
  out["lyapunov"] = lyap;
  out["final_iterate"] = trace.final_iterate;
  out["step_sizes"] = trace.step_sizes;
  out["algorithm"] = trace.metadata.algorithm;
  out["sampling"] = trace.metadata.sampling;
  out["seed"] = trace.metadata.seed;
  out["parameters"] = trace.metadata.parameters;
  return out;
}

std::optional<Reference> as_reference(const std::optional<Vector>& x_star, const LossModel& model) {
  if (!x_star) return std::nullopt;
  return Reference{*x_star, model.value(*x_star)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Free-SVRG and L-SVRG-D under arbitrary sampling";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  py::class_<Dataset, std::shared_ptr<Dataset>>(m, "Dataset")
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("d", &Dataset::d)
      .def_property_readonly("name", &Dataset::name)
      .def_property_readonly("labels", &Dataset::labels)
      .def("to_dense", &Dataset::to_dense)
      .def("__repr__", [](const Dataset& ds) {
        return "<Dataset " + ds.name() + " n=" + std::to_string(ds.n()) + " d=" + std::to_string(ds.d()) + ">";
      });

  m.def("from_dense", [](const DenseRows& rows, const Vector& labels, const std::string& name) {
        return std::make_shared<Dataset>(Dataset::from_dense(name, rows, labels));
      },
      py::arg("rows"), py::arg("labels"), py::arg("name") = "array");
  m.def("load_libsvm", [](const std::filesystem::path& path, std::optional<std::size_t> dimension, bool scale) {
        ParseOptions options;
        options.dimension = dimension;
        Dataset ds = parse_libsvm(path, options);
        return std::make_shared<Dataset>(scale ? scale_columns(ds) : std::move(ds));
      },
      py::arg("path"), py::arg("dimension") = std::nullopt, py::arg("scale") = false);
  m.def("generate_synthetic", [](std::size_t n, std::size_t d, std::uint64_t seed, bool classification, double noise) {
        SyntheticSpec spec;
        spec.n = n;
        spec.d = d;
        spec.seed = seed;
        spec.kind = classification ? TaskKind::classification : TaskKind::regression;
        spec.noise = noise;
        return std::make_shared<Dataset>(generate_synthetic(spec));
      },
      py::arg("n"), py::arg("d"), py::arg("seed") = 1, py::arg("classification") = false,
      py::arg("noise") = 0.0);

  py::class_<LossModel>(m, "LossModel")
      .def(py::init([](std::shared_ptr<Dataset> data, const std::string& loss, double lambda) {
             return LossModel(std::move(data), loss_family_from_string(loss), lambda);
           }),
           py::arg("data"), py::arg("loss") = "ridge", py::arg("lam") = 0.1)
      .def_property_readonly("n", &LossModel::n)
      .def_property_readonly("d", &LossModel::d)
      .def_property_readonly("lam", &LossModel::lambda)
      .def("value", &LossModel::value)
      .def("gradient_i", &LossModel::gradient_i)
      .def("full_gradient", &LossModel::full_gradient);

  py::class_<SmoothnessProfile>(m, "SmoothnessProfile")
      .def(py::init(&SmoothnessProfile::from_constants), py::arg("n"), py::arg("max_smoothness"),
           py::arg("smoothness"), py::arg("strong_convexity"))
      .def_readonly("n", &SmoothnessProfile::n)
      .def_readonly("max_smoothness", &SmoothnessProfile::max_smoothness)
      .def_readonly("smoothness", &SmoothnessProfile::smoothness)
      .def_readonly("strong_convexity", &SmoothnessProfile::strong_convexity)
      .def_readonly("example_smoothness", &SmoothnessProfile::example_smoothness);
  m.def("smoothness_profile", [](const LossModel& model) { return smoothness_profile(model); });
  m.def("reference_solution", [](const LossModel& model, double tol) {
        const ReferenceSolution r = reference_solution(model, tol);
        return py::make_tuple(r.x, r.value);
      },
      py::arg("model"), py::arg("tol") = 1e-10);

  py::class_<SamplingScheme>(m, "SamplingScheme")
      .def_static("b_nice", &SamplingScheme::b_nice, py::arg("n"), py::arg("b"))
      .def_static("single_element", &SamplingScheme::single_element, py::arg("probabilities"))
      .def_static("partition", &SamplingScheme::partition, py::arg("blocks"), py::arg("block_probabilities"))
      .def_static("uniform_partition", &SamplingScheme::uniform_partition, py::arg("n"), py::arg("b"))
      .def_static("independent", &SamplingScheme::independent, py::arg("probabilities"))
      .def_property_readonly("n", &SamplingScheme::n)
      .def_property_readonly("expected_batch_size", &SamplingScheme::expected_batch_size)
      .def_property_readonly("inclusion_probabilities", [](const SamplingScheme& s) {
        const auto p = s.inclusion_probabilities();
        return std::vector<double>(p.begin(), p.end());
      })
      .def("__repr__", &SamplingScheme::describe);
  m.def("variance_matrix", &variance_matrix);
  m.def("sampling_constants", [](const SamplingScheme& s, const LossModel& model, const SmoothnessProfile& p) {
    const ConstantPair c = sampling_constants(s, model, p);
    return py::make_tuple(c.expected_smoothness, c.expected_residual);
  });

  m.def("expected_smoothness", &bnice_expected_smoothness, py::arg("b"), py::arg("profile"));
  m.def("expected_residual", &bnice_expected_residual, py::arg("b"), py::arg("profile"));
  m.def("step_size_free", py::overload_cast<double, const SmoothnessProfile&>(&step_size_free),
        py::arg("b"), py::arg("profile"));
  m.def("zeta", &zeta, py::arg("p"));
  m.def("step_size_lsvrgd", &step_size_lsvrgd, py::arg("p"), py::arg("b"), py::arg("profile"));
  m.def("total_complexity_free",
        py::overload_cast<double, double, const SmoothnessProfile&, double>(&total_complexity_free),
        py::arg("b"), py::arg("m"), py::arg("profile"), py::arg("epsilon") = 1e-4);
  m.def("total_complexity_lsvrgd",
        py::overload_cast<double, double, const SmoothnessProfile&, double>(&total_complexity_lsvrgd),
        py::arg("b"), py::arg("p"), py::arg("profile"), py::arg("epsilon") = 1e-4);
  m.def("optimal_loop", &optimal_loop, py::arg("b"), py::arg("profile"));
  m.def("optimal_batch_m_eq_n", [](const SmoothnessProfile& p) { return optimal_batch_m_eq_n(p).b; });
  m.def("optimal_batch_m_eq_n_over_b", [](const SmoothnessProfile& p) { return optimal_batch_m_eq_n_over_b(p).b; });
  m.def("optimal_batch_lsvrgd", [](const SmoothnessProfile& p) { return optimal_batch_lsvrgd(p).b; });
  m.def("tuning_table", [](const SmoothnessProfile& p, double epsilon, bool all_b) {
        const TuneTable t = tuning_table(p, epsilon, all_b);
        py::list rows;
        for (const TuneRow& r : t.rows) {
          py::dict row;
          row["b"] = r.b;
          row["label"] = r.label;
          row["expected_smoothness"] = r.expected_smoothness;
          row["expected_residual"] = r.expected_residual;
          row["alpha"] = r.alpha;
          row["m_star"] = r.m_star;
          row["complexity"] = r.complexity;
          rows.append(row);
        }
        return rows;
      },
      py::arg("profile"), py::arg("epsilon") = 1e-4, py::arg("all_b") = false);

  m.def("run_free_svrg",
        [](const LossModel& model, const SamplingScheme& scheme, double alpha, std::size_t m_inner,
           std::size_t outer_iters, double strong_convexity, std::uint64_t seed, const Vector& x0,
           std::optional<Vector> x_star, std::optional<double> expected_residual, bool sampled_reference) {
          FreeSvrgConfig cfg;
          cfg.scheme = scheme;
          cfg.alpha = alpha;
          cfg.m = m_inner;
          cfg.outer_iters = outer_iters;
          cfg.strong_convexity = strong_convexity;
          cfg.seed = seed;
          cfg.expected_residual = expected_residual;
          cfg.reference_rule = sampled_reference ? ReferencePointRule::sampled_iterate
                                                 : ReferencePointRule::weighted_average;
          RunTrace t;
          {
            py::gil_scoped_release release;
            t = run_free_svrg(model, cfg, x0, as_reference(x_star, model));
          }
          return trace_to_dict(t);
        },
        py::arg("model"), py::arg("scheme"), py::arg("alpha"), py::arg("m"), py::arg("outer_iters"),
        py::arg("strong_convexity"), py::arg("seed"), py::arg("x0"), py::arg("x_star") = std::nullopt,
        py::arg("expected_residual") = std::nullopt, py::arg("sampled_reference") = false);
  m.def("run_lsvrg_d",
        [](const LossModel& model, const SamplingScheme& scheme, double alpha, double p,
           std::size_t total_iters, std::uint64_t seed, const Vector& x0, std::optional<Vector> x_star,
           std::optional<double> expected_smoothness, bool record_step_sizes) {
          LSvrgDConfig cfg;
          cfg.scheme = scheme;
          cfg.alpha = alpha;
          cfg.p = p;
          cfg.total_iters = total_iters;
          cfg.seed = seed;
          cfg.expected_smoothness = expected_smoothness;
          cfg.record_step_sizes = record_step_sizes;
          RunTrace t;
          {
            py::gil_scoped_release release;
            t = run_lsvrg_d(model, cfg, x0, as_reference(x_star, model));
          }
          return trace_to_dict(t);
        },
        py::arg("model"), py::arg("scheme"), py::arg("alpha"), py::arg("p"), py::arg("total_iters"),
        py::arg("seed"), py::arg("x0"), py::arg("x_star") = std::nullopt,
        py::arg("expected_smoothness") = std::nullopt, py::arg("record_step_sizes") = false);
  m.def("run_reference_svrg",
        [](const LossModel& model, const SamplingScheme& scheme, double alpha, std::size_t m_inner,
           std::size_t outer_iters, std::uint64_t seed, const Vector& x0, std::optional<Vector> x_star) {
          SvrgConfig cfg;
          cfg.scheme = scheme;
          cfg.alpha = alpha;
          cfg.m = m_inner;
          cfg.outer_iters = outer_iters;
          cfg.seed = seed;
          RunTrace t;
          {
            py::gil_scoped_release release;
            t = run_reference_svrg(model, cfg, x0, as_reference(x_star, model));
          }
          return trace_to_dict(t);
        },
        py::arg("model"), py::arg("scheme"), py::arg("alpha"), py::arg("m"), py::arg("outer_iters"),
        py::arg("seed"), py::arg("x0"), py::arg("x_star") = std::nullopt);

  m.def("run_experiment", [](const std::filesystem::path& config, std::size_t workers) {
        const ExperimentConfig cfg = parse_config_file(config);
        ExperimentResult result;
        {
          py::gil_scoped_release release;
          result = run_experiment(cfg, workers);
        }
        return result.summary_path;
      },
      py::arg("config"), py::arg("workers") = 0);
}
