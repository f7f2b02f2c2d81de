#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cramkit/cram.hpp"
#include "cramkit/learners.hpp"
#include "cramkit/simulate.hpp"
#include "cramkit/stability.hpp"

namespace py = pybind11;
using namespace cramkit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

CovariateMatrix to_matrix(const Array& x) {
  if (x.ndim() != 2) throw Error(ErrorKind::shape, "covariates must be a 2-d array");
  const auto rows = static_cast<std::size_t>(x.shape(0));
  const auto cols = static_cast<std::size_t>(x.shape(1));
  return {rows, cols, std::vector<double>(x.data(), x.data() + rows * cols)};
}

template <typename T>
std::vector<T> to_vector(const py::array_t<T, py::array::c_style | py::array::forcecast>& a,
                         const char* name) {
  if (a.ndim() != 1) throw Error(ErrorKind::shape, std::string(name) + " must be a 1-d array");
  return {a.data(), a.data() + a.shape(0)};
}

Dataset make_dataset(const Array& x, const IntArray& d, const Array& y, const py::object& e,
                     double overlap_c) {
  const auto dv = to_vector<int>(d, "d");
  std::vector<double> ev;
  if (py::isinstance<py::float_>(e) || py::isinstance<py::int_>(e)) {
    ev.assign(dv.size(), e.cast<double>());
  } else {
    ev = to_vector<double>(e.cast<Array>(), "e");
  }
  return {to_matrix(x), dv, to_vector<double>(y, "y"), std::move(ev), OverlapConfig{overlap_c}};
}

Array to_array(const std::vector<double>& v) {
  return Array(static_cast<py::ssize_t>(v.size()), v.data());
}

Estimand parse_estimand(const std::string& name) {
  if (name == "difference") return Estimand::value_difference;
  if (name == "value") return Estimand::policy_value;
  throw Error(ErrorKind::configuration, "estimand must be 'difference' or 'value'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Crammed policy learning and evaluation";

  static py::exception<Error> error(m, "CramkitError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string kind(to_string(e.kind()));
      py::object exc = py::reinterpret_borrow<py::object>(error)("[" + kind + "] " + e.what());
      exc.attr("kind") = kind;
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("x"), py::arg("d"), py::arg("y"), py::arg("e") = 0.5,
           py::arg("overlap_c") = 0.01)
      .def("__len__", &Dataset::size)
      .def_property_readonly("dim", &Dataset::dim)
      .def_property_readonly("y", [](const Dataset& s) { return to_array(s.outcome()); })
      .def_property_readonly("e", [](const Dataset& s) { return to_array(s.propensity()); })
      .def_property_readonly("d", [](const Dataset& s) { return s.treatment(); })
      .def("standardized", &Dataset::standardized);

  m.def(
      "read_csv",
      [](const std::string& path, const std::string& outcome, const std::string& treatment,
         std::optional<std::string> propensity_column, std::optional<double> propensity,
         std::vector<std::string> covariates, bool standardize, double overlap_c) {
        CsvOptions options;
        options.schema = {outcome, treatment, std::move(propensity_column), std::move(covariates)};
        options.constant_propensity = propensity;
        options.standardize = standardize;
        options.overlap.c = overlap_c;
        return read_dataset_csv(path, options);
      },
      py::arg("path"), py::arg("outcome") = "y", py::arg("treatment") = "d",
      py::arg("propensity_column") = py::none(), py::arg("propensity") = py::none(),
      py::arg("covariates") = std::vector<std::string>{}, py::arg("standardize") = false,
      py::arg("overlap_c") = 0.01);

  m.def("ipw_kernel",
        [](double y, int d, double e) { return ipw_kernel(Observation{{}, d, y, e}); },
        py::arg("y"), py::arg("d"), py::arg("e"));

  py::class_<Policy>(m, "Policy")
      .def_static("constant", &Policy::constant, py::arg("prob"))
      .def_static(
          "linear_threshold",
          [](double intercept, std::vector<double> slope, double threshold) {
            return Policy::cate_threshold(std::make_shared<const LinearCate>(intercept, std::move(slope)),
                                          threshold);
          },
          py::arg("intercept"), py::arg("slope"), py::arg("threshold") = 0.0)
      .def("__call__",
           [](const Policy& p, const Array& x) -> py::object {
             if (x.ndim() == 1) {
               return py::cast(p(std::span<const double>(x.data(), static_cast<std::size_t>(x.shape(0)))));
             }
             return to_array(evaluate_rows(p, to_matrix(x)));
           })
      .def_property_readonly("dim", &Policy::dim)
      .def("__repr__", &Policy::to_string);

  m.def("mix_policies", &mix_policies, py::arg("p"), py::arg("newer"), py::arg("older"));
  m.def(
      "l1_policy_distance",
      [](const Policy& a, const Policy& b, const Array& reference) {
        return l1_policy_distance(a, b, to_matrix(reference));
      },
      py::arg("a"), py::arg("b"), py::arg("reference"));

  py::class_<Learner>(m, "Learner")
      .def("update", [](Learner& l, const Dataset& data, std::vector<std::size_t> rows) {
        l.update(data, rows);
      })
      .def("emit_policy", &Learner::emit_policy)
      .def("reset", &Learner::reset)
      .def_property_readonly("name", &Learner::name);

  m.def("slearner_ridge", &make_slearner_ridge, py::arg("lam") = RidgeLearner::default_lambda,
        py::arg("exempt_intercept") = false);
  m.def("mlearner_ridge", &make_mlearner_ridge, py::arg("lam") = RidgeLearner::default_lambda,
        py::arg("exempt_intercept") = false);
  m.def("constant_learner", &constant_learner, py::arg("policy"));
  m.def(
      "stable_wrap",
      [](const Learner& inner, std::optional<double> C, double delta, std::size_t batch_count,
         const Policy& baseline) {
        auto params = StabilityParams::defaults_for(batch_count, delta);
        if (C) params.C = *C;
        return stable_wrap(inner.clone(), params, baseline);
      },
      py::arg("inner"), py::arg("C") = py::none(), py::arg("delta") = 0.05,
      py::arg("batch_count") = 20, py::arg("baseline") = Policy::constant(0.0));
  m.def("acceptance_prob",
        [](std::size_t t, double C, double delta) { return acceptance_prob(t, {C, delta}); },
        py::arg("t"), py::arg("C"), py::arg("delta"));

  py::class_<CramResult>(m, "CramResult")
      .def_readonly("estimate", &CramResult::delta_hat)
      .def_readonly("variance", &CramResult::v_hat_sq)
      .def_readonly("se", &CramResult::se)
      .def_property_readonly("ci", [](const CramResult& r) { return py::make_tuple(r.ci.lower, r.ci.upper); })
      .def_readonly("alpha", &CramResult::alpha)
      .def_readonly("final_policy", &CramResult::final_policy)
      .def_readonly("policy_sequence", &CramResult::policy_sequence)
      .def_readonly("per_step_deltas", &CramResult::per_step_deltas)
      .def_readonly("q_t", &CramResult::q_t_series)
      .def_readonly("eta", &CramResult::eta)
      .def_readonly("treated_fraction", &CramResult::treated_fraction)
      .def_property_readonly("batch_sizes", [](const CramResult& r) { return r.plan.sizes; })
      .def_property_readonly("assignment", [](const CramResult& r) { return r.plan.assignment; });

  m.def(
      "cram_run",
      [](const Dataset& data, Learner& learner, const Policy& baseline, std::size_t batch_count,
         std::uint64_t seed, double alpha, bool debias_final, const std::string& estimand) {
        CramOptions options;
        options.batch_count = batch_count;
        options.seed = seed;
        options.alpha = alpha;
        options.debias_final = debias_final;
        options.estimand = parse_estimand(estimand);
        return cram_run(data, learner, baseline, options);
      },
      py::arg("data"), py::arg("learner"), py::arg("baseline") = Policy::constant(0.0),
      py::arg("batch_count") = 20, py::arg("seed") = 0, py::arg("alpha") = 0.05,
      py::arg("debias_final") = false, py::arg("estimand") = "difference");

  py::class_<SplitResult>(m, "SplitResult")
      .def_readonly("estimate", &SplitResult::delta_hat)
      .def_readonly("se", &SplitResult::se)
      .def_property_readonly("ci", [](const SplitResult& r) { return py::make_tuple(r.ci.lower, r.ci.upper); })
      .def_readonly("final_policy", &SplitResult::final_policy)
      .def_readonly("n_train", &SplitResult::n_train)
      .def_readonly("n_test", &SplitResult::n_test);

  m.def("sample_split_run", &sample_split_run, py::arg("data"), py::arg("learner"),
        py::arg("baseline") = Policy::constant(0.0), py::arg("train_fraction") = 0.8,
        py::arg("seed") = 0, py::arg("alpha") = 0.05);

  m.def("normal_quantile", &normal_quantile, py::arg("p"));
  m.def(
      "confidence_interval",
      [](double delta_hat, double v_hat_sq, std::size_t batch_count, double alpha) {
        const auto ci = confidence_interval(delta_hat, v_hat_sq, batch_count, alpha);
        return py::make_tuple(ci.lower, ci.upper);
      },
      py::arg("delta_hat"), py::arg("v_hat_sq"), py::arg("batch_count"), py::arg("alpha") = 0.05);

  py::class_<StabilityDiagnostics>(m, "StabilityDiagnostics")
      .def_readonly("q_t", &StabilityDiagnostics::q_t)
      .def_readonly("t_power_q", &StabilityDiagnostics::t_power_q)
      .def_readonly("flag", &StabilityDiagnostics::flag);
  m.def(
      "diagnose_stability",
      [](const PolicySequence& seq, const Array& reference, double delta, std::size_t t_min,
         double bound) { return diagnose_stability(seq, to_matrix(reference), delta, t_min, bound); },
      py::arg("policies"), py::arg("reference"), py::arg("delta"), py::arg("t_min"), py::arg("bound"));

  py::class_<DGPSpec>(m, "DGP")
      .def_static("linear", &DGPSpec::linear_cate, py::arg("p") = 5, py::arg("noise_sd") = 1.0)
      .def_static("polynomial", &DGPSpec::polynomial_cate, py::arg("p") = 5, py::arg("noise_sd") = 1.0)
      .def_static("null", &DGPSpec::null_cate, py::arg("p") = 5, py::arg("noise_sd") = 1.0)
      .def_readwrite("propensity", &DGPSpec::propensity)
      .def_readonly("p", &DGPSpec::p);

  m.def("generate_dataset", &generate_dataset, py::arg("dgp"), py::arg("n"), py::arg("seed") = 0);
  m.def("oracle_delta", &oracle_delta, py::arg("dgp"), py::arg("pi"), py::arg("pi0"),
        py::arg("n_oracle") = 1'000'000, py::arg("seed") = 0);
  m.def("oracle_value", &oracle_value, py::arg("dgp"), py::arg("pi"),
        py::arg("n_oracle") = 1'000'000, py::arg("seed") = 0);

  m.def(
      "run_monte_carlo",
      [](const DGPSpec& dgp, const Learner& learner, std::size_t n, std::size_t batch_count,
         std::size_t replicates, std::vector<std::string> methods, std::uint64_t seed, double alpha,
         std::size_t n_oracle, const Policy& baseline, std::size_t threads) {
        MCConfig config;
        config.dgp = dgp;
        config.learner = std::shared_ptr<const Learner>(learner.clone());
        config.n = n;
        config.batch_count = batch_count;
        config.replicates = replicates;
        config.methods.clear();
        for (const auto& name : methods) config.methods.push_back(parse_method(name));
        config.base_seed = seed;
        config.alpha = alpha;
        config.n_oracle = n_oracle;
        config.baseline = baseline;
        config.threads = threads;
        MCReport report;
        {
          py::gil_scoped_release release;
          report = run_monte_carlo(config);
        }
        py::dict out;
        for (const auto& s : report.methods) {
          py::dict row;
          row["value"] = s.value;
          row["bias"] = s.bias;
          row["abs_bias"] = s.abs_bias;
          row["bias_se"] = s.bias_se;
          row["mc_se"] = s.mc_se;
          row["mean_est_se"] = s.mean_est_se;
          row["coverage"] = s.coverage;
          row["replicates"] = s.replicates;
          out[py::str(to_string(s.method))] = row;
        }
        return out;
      },
      py::arg("dgp"), py::arg("learner"), py::arg("n") = 500, py::arg("batch_count") = 20,
      py::arg("replicates") = 100, py::arg("methods") = std::vector<std::string>{"cram"},
      py::arg("seed") = 0, py::arg("alpha") = 0.05, py::arg("n_oracle") = 1'000'000,
      py::arg("baseline") = Policy::constant(0.0), py::arg("threads") = 0);
}
