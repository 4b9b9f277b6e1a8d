#include "cvcov/cv_engine.hpp"
#include "cvcov/errors.hpp"
#include "cvcov/estimators.hpp"
#include "cvcov/loss_risk.hpp"
#include "cvcov/simulation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace cvcov;

namespace {

DataMatrix to_data(const Matrix& x) { return DataMatrix(x); }

SplitScheme make_scheme(std::optional<int> folds, std::optional<double> pn, std::optional<int> splits,
                        std::uint64_t seed) {
    if (folds && pn) throw ConfigError("folds and pn are mutually exclusive");
    if (pn) return splits ? SplitScheme::monte_carlo(*splits, *pn, seed) : SplitScheme::single(*pn, seed);
    return SplitScheme::vfold(folds.value_or(5), seed);
}

py::dict report_to_dict(const SelectionReport& r) {
    py::list candidates;
    for (const auto& c : r.candidates) {
        py::dict d;
        d["id"] = c.id;
        d["family"] = family_name(c.family);
        py::dict hp;
        for (const auto& [k, v] : c.hyperparameters) hp[py::str(k)] = v;
        d["hyperparameters"] = hp;
        d["cv_risk"] = c.failed ? py::object(py::none()) : py::object(py::float_(c.cv_risk));
        d["fold_risks"] = c.fold_risks;
        d["failed"] = c.failed;
        d["failure"] = c.failure;
        if (c.psd) d["psd"] = *c.psd;
        candidates.append(d);
    }
    py::dict out;
    out["selected_id"] = r.selected_id;
    out["selected_index"] = r.selected_index;
    out["tie_ids"] = r.tie_ids;
    out["scheme"] = r.scheme;
    out["seed"] = r.seed;
    out["p_n"] = r.p_n;
    out["eta"] = eta_policy_name(r.eta);
    out["centered"] = r.centered;
    out["warnings"] = r.warnings;
    out["candidates"] = candidates;
    out["estimate"] = r.estimate.dense();
    return out;
}

}  // namespace

PYBIND11_MODULE(_cvcov, m) {
    m.doc() = "Cross-validated covariance estimator selection";

    auto base = py::register_exception<Error>(m, "CvcovError", PyExc_RuntimeError);
    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<SelectionError>(m, "SelectionError", base.ptr());

    py::class_<EstimatorSpec>(m, "Estimator")
        .def_static("sample_cov", &EstimatorSpec::sample_cov)
        .def_static("hard", &EstimatorSpec::hard, py::arg("u"))
        .def_static("scad", &EstimatorSpec::scad, py::arg("u"), py::arg("a") = 3.7)
        .def_static("adaptive_lasso", &EstimatorSpec::adaptive_lasso, py::arg("u"), py::arg("exponent"))
        .def_static("banding", &EstimatorSpec::banding, py::arg("b"))
        .def_static("tapering", &EstimatorSpec::tapering, py::arg("b"))
        .def_static("linear_shrinkage", &EstimatorSpec::linear_shrinkage)
        .def_static("dense_shrinkage", &EstimatorSpec::dense_shrinkage)
        .def_static("poet", &EstimatorSpec::poet, py::arg("L"), py::arg("u"))
        .def_static("fixed", [](std::string name, const Matrix& psi) {
            return EstimatorSpec::fixed(std::move(name), SymMatrix::from_upper(psi));
        }, py::arg("name"), py::arg("matrix"))
        .def_property_readonly("id", &EstimatorSpec::id)
        .def_property_readonly("family", [](const EstimatorSpec& s) { return family_name(s.family()); })
        .def_property_readonly("hyperparameters", &EstimatorSpec::hyperparameters)
        .def("fit", [](const EstimatorSpec& s, const Matrix& x) { return apply(s, to_data(x)).dense(); },
             py::arg("X"), "Fit on X as given (no centering).")
        .def("__repr__", [](const EstimatorSpec& s) { return "<Estimator " + s.id() + ">"; });

    auto library_ids = [](const CandidateLibrary& lib) {
        std::vector<EstimatorSpec> v(lib.begin(), lib.end());
        return v;
    };
    m.def("default_library", [=] { return library_ids(default_library()); });
    m.def("competitor_library", [=] { return library_ids(competitor_library()); });
    m.def("single_cell_library", [=] { return library_ids(single_cell_library()); });

    m.def("sample_covariance", [](const Matrix& x) { return sample_covariance(to_data(x)).dense(); }, py::arg("X"));
    m.def("center_columns", [](const Matrix& x) { return center_columns(to_data(x)).values(); }, py::arg("X"));

    m.def(
        "select",
        [](const Matrix& x, std::optional<std::vector<EstimatorSpec>> library, std::optional<int> folds,
           std::optional<double> pn, std::optional<int> splits, std::uint64_t seed, const std::string& eta,
           bool center, const std::string& route, unsigned threads) {
            const CandidateLibrary lib = library ? CandidateLibrary(*library) : default_library();
            SelectOptions o;
            o.cv.eta = eta_policy_from_name(eta);
            o.cv.center = center;
            o.cv.threads = threads;
            if (route == "matrix") {
                o.cv.route = RiskRoute::Matrix;
            } else if (route != "observation") {
                throw ConfigError("route must be 'observation' or 'matrix'");
            }
            o.report_psd = true;
            const auto data = to_data(x);
            SelectionReport r;
            {
                py::gil_scoped_release release;
                r = select(lib, data, make_scheme(folds, pn, splits, seed), o);
            }
            return report_to_dict(r);
        },
        py::arg("X"), py::arg("library") = py::none(), py::arg("folds") = py::none(), py::arg("pn") = py::none(),
        py::arg("splits") = py::none(), py::arg("seed") = 20240101u, py::arg("eta") = "one", py::arg("center") = true,
        py::arg("route") = "observation", py::arg("threads") = 1u,
        "Select the candidate with the smallest cross-validated Frobenius risk.");

    m.def("observation_loss", [](const Vector& x, const Matrix& psi, double eta) {
        return observation_loss(x, SymMatrix::from_upper(psi), ScalingMatrix::constant(eta));
    }, py::arg("x"), py::arg("psi"), py::arg("eta") = 1.0);
    m.def("true_risk_difference", [](const Matrix& psi_hat, const Matrix& psi0, double eta) {
        return true_risk_difference(SymMatrix::from_upper(psi_hat), SymMatrix::from_upper(psi0), ScalingMatrix::constant(eta));
    }, py::arg("psi_hat"), py::arg("psi0"), py::arg("eta") = 1.0);

    m.def("model_covariance", [](int model, Index J, std::uint64_t seed) {
        return build_model_covariance({model, J, seed}).dense();
    }, py::arg("model"), py::arg("J"), py::arg("seed") = 0u);
    m.def("sample_gaussian", [](const Matrix& psi, Index n, std::uint64_t seed) {
        return sample_gaussian(SymMatrix::from_upper(psi), n, seed).values();
    }, py::arg("psi"), py::arg("n"), py::arg("seed"));

    m.def(
        "simulate",
        [](std::vector<int> models, std::vector<Index> sample_sizes, std::vector<double> ratios, int replications,
           std::vector<std::string> metrics, std::uint64_t seed, int folds, unsigned threads) {
            ExperimentConfig c{};
            c.models = std::move(models);
            c.sample_sizes = std::move(sample_sizes);
            c.ratios = std::move(ratios);
            c.replications = replications;
            c.metrics.clear();
            for (const auto& name : metrics) c.metrics.push_back(metric_from_name(name));
            c.master_seed = seed;
            c.scheme = SplitScheme::vfold(folds, 0);
            c.threads = threads;
            MonteCarloResult r;
            {
                py::gil_scoped_release release;
                r = run_monte_carlo(c);
            }
            py::list rows;
            for (const auto& row : r.rows) {
                py::dict d;
                d["model"] = row.model;
                d["n"] = row.n;
                d["J"] = row.J;
                d["ratio"] = row.ratio;
                d["replication"] = row.replication;
                d["subject"] = row.subject;
                d["metric"] = row.metric;
                d["value"] = row.value;
                d["seed"] = row.seed;
                rows.append(d);
            }
            return py::make_tuple(rows, r.log);
        },
        py::arg("models"), py::arg("sample_sizes"), py::arg("ratios"), py::arg("replications") = 2,
        py::arg("metrics") = std::vector<std::string>{"cv_ratio"}, py::arg("seed") = 20240101u,
        py::arg("folds") = 5, py::arg("threads") = 1u,
        "Run the Monte-Carlo experiment grid; returns (rows, log).");
}
