#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "distreg/data_table.hpp"
#include "distreg/design.hpp"
#include "distreg/diagnostics.hpp"
#include "distreg/engine.hpp"
#include "distreg/error.hpp"
#include "distreg/family.hpp"
#include "distreg/predict.hpp"
#include "distreg/run.hpp"
#include "distreg/sampler.hpp"
#include "distreg/synth.hpp"

namespace py = pybind11;
using namespace distreg;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

py::dict table_to_dict(const DataTable& t) {
    py::dict d;
    for (const auto& c : t.columns()) {
        if (c.categorical) d[py::str(c.name)] = py::cast(c.cat);
        else d[py::str(c.name)] = py::cast(VectorXd(Eigen::Map<const VectorXd>(c.num.data(), static_cast<Eigen::Index>(c.num.size()))));
    }
    return d;
}

DataTable dict_to_table(const py::dict& d) {
    DataTable t;
    for (auto item : d) {
        std::string name = py::cast<std::string>(item.first);
        py::handle v = item.second;
        bool strings = false;
        if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
            py::sequence s = py::reinterpret_borrow<py::sequence>(v);
            strings = s.size() > 0 && py::isinstance<py::str>(s[0]);
        }
        if (strings) t.add_categorical(name, py::cast<std::vector<std::string>>(v));
        else t.add_numeric(name, py::cast<std::vector<double>>(v));
    }
    return t;
}

py::dict samples_to_dict(const SampleMatrix& s) {
    py::dict d;
    d["names"] = s.names;
    d["draws"] = s.draws;
    d["n_iter"] = s.n_iter;
    d["burnin"] = s.burnin;
    d["thin"] = s.thin;
    d["seed"] = s.seed;
    d["info"] = s.info;
    return d;
}

Functional functional_from(const std::string& f) {
    if (f == "mean") return Functional::mean;
    if (f == "c95") return Functional::c95;
    if (f == "identity") return Functional::identity;
    throw ConfigError("functional must be mean, c95 or identity");
}

PredictTarget target_from(const std::string& t) {
    if (t == "parameter") return PredictTarget::parameter;
    if (t == "link") return PredictTarget::link;
    if (t == "term") return PredictTarget::term;
    throw ConfigError("type must be parameter, link or term");
}

}

PYBIND11_MODULE(_core, m) {
    m.doc() = "Distributional regression engine";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<FormulaError>(m, "FormulaError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

    py::class_<Family, std::shared_ptr<Family>>(m, "Family")
        .def_property_readonly("name", &Family::name)
        .def_property_readonly("params", &Family::params)
        .def("density", &Family::density, py::arg("y"), py::arg("par"), py::arg("log") = false)
        .def("cdf", &Family::cdf, py::arg("y"), py::arg("par"))
        .def("quantile", &Family::quantile, py::arg("u"), py::arg("par"))
        .def("loglik", &Family::loglik, py::arg("y"), py::arg("par"))
        .def("score", &Family::score, py::arg("k"), py::arg("y"), py::arg("par"))
        .def("hess", &Family::hess, py::arg("k"), py::arg("y"), py::arg("par"))
        .def(
            "random",
            [](const Family& f, const ParamValues& par, std::uint64_t seed) {
                Rng rng(seed);
                return f.random(par, rng);
            },
            py::arg("par"), py::arg("seed") = 1);

    m.def(
        "family",
        [](const std::string& name, int p_effective) {
            return std::const_pointer_cast<Family>(make_family(name, p_effective));
        },
        py::arg("name"), py::arg("p_effective") = 0, "Family by short name.");

    py::class_<Model>(m, "Model")
        .def_property_readonly("coef_names", [](const Model& mo) { return mo.frame.coef_order; })
        .def_property_readonly("nobs", [](const Model& mo) { return mo.frame.n; })
        .def_property_readonly("parameters",
                               [](const Model& mo) -> py::object {
                                   if (!mo.fit) return py::none();
                                   return py::cast(named_parameters(mo.frame, *mo.fit));
                               })
        .def_property_readonly("loglik", [](const Model& mo) -> py::object {
            return mo.fit ? py::cast(mo.fit->loglik) : py::none();
        })
        .def_property_readonly("samples",
                               [](const Model& mo) -> py::object {
                                   return mo.samples ? py::object(samples_to_dict(*mo.samples)) : py::none();
                               })
        .def_property_readonly("dic", [](const Model& mo) -> py::object {
            return mo.stats ? py::cast(mo.stats->dic) : py::none();
        })
        .def_property_readonly("pd", [](const Model& mo) -> py::object {
            return mo.stats ? py::cast(mo.stats->pd) : py::none();
        })
        .def(
            "predict",
            [](const Model& mo, const py::dict& newdata, const std::string& type, const std::string& functional,
               const std::vector<std::string>& terms, bool intercept) {
                PredictionRequest req;
                req.target = target_from(type);
                req.functional = functional_from(functional);
                req.terms = terms;
                req.intercept = intercept;
                auto preds = predict(mo.frame, mo.fit ? &*mo.fit : nullptr, mo.samples ? &*mo.samples : nullptr,
                                     dict_to_table(newdata), req);
                py::dict out;
                for (const auto& p : preds) out[py::str(p.param)] = p.values;
                return out;
            },
            py::arg("newdata"), py::arg("type") = "parameter", py::arg("functional") = "mean",
            py::arg("terms") = std::vector<std::string>{}, py::arg("intercept") = true)
        .def("residuals",
             [](const Model& mo, std::uint64_t seed) {
                 return quantile_residuals(mo.frame, mo.fit ? &*mo.fit : nullptr, mo.samples ? &*mo.samples : nullptr,
                                           seed)
                     .residuals;
             },
             py::arg("seed") = 1);

    m.def(
        "fit_model",
        [](const std::string& config) {
            RunConfig cfg = load_config(config);
            return fit_model(cfg, load_data(cfg));
        },
        py::arg("config"), "Runs optimizer and sampler of a config without writing files.");
    m.def(
        "summarize",
        [](const Model& mo, const std::string& config) { return summarize(mo, load_config(config)); },
        py::arg("model"), py::arg("config"));
    m.def(
        "fit",
        [](const std::string& config, const std::string& out) {
            RunConfig cfg = load_config(config);
            return run_fit(cfg, out.empty() ? output_dir(cfg) : out);
        },
        py::arg("config"), py::arg("out") = "", "Full pipeline with artifacts; returns the run directory.");
    m.def(
        "predict",
        [](const std::string& config, const std::string& newdata, const std::string& out) {
            return run_predict(load_config(config), newdata, out);
        },
        py::arg("config"), py::arg("newdata"), py::arg("out") = "");
    m.def("summary", &run_summary, py::arg("run_dir"));
    m.def("default_output_root", &default_output_root);

    m.def(
        "simulate",
        [](const std::string& kind, std::size_t n, std::uint64_t seed, std::size_t p) {
            return table_to_dict(simulate(kind, n, seed, p));
        },
        py::arg("kind"), py::arg("n") = 500, py::arg("seed") = 1, py::arg("p") = 6);

    m.def(
        "pspline_basis",
        [](const VectorXd& x, int k, int degree, int order) {
            PsplineBasis b = pspline_basis(x, k, degree, order);
            return py::make_tuple(b.X, b.K);
        },
        py::arg("x"), py::arg("k") = 10, py::arg("degree") = 3, py::arg("penalty_order") = 2);

    m.def(
        "gibbs_lm",
        [](const MatrixXd& X, const VectorXd& y, double M, double a, double b, int n_iter, int burnin, int thin,
           std::uint64_t seed) {
            std::vector<std::string> names;
            for (Eigen::Index j = 0; j < X.cols(); ++j) names.push_back("x" + std::to_string(j));
            GibbsOptions o{n_iter, burnin, thin, seed};
            return samples_to_dict(
                gibbs_lm(X, y, names, GibbsPrior::isotropic(static_cast<std::size_t>(X.cols()), 0.0, M, a, b), o));
        },
        py::arg("X"), py::arg("y"), py::arg("M") = 1e5, py::arg("a") = 1.0, py::arg("b") = 1e-4,
        py::arg("n_iter") = 12000, py::arg("burnin") = 2000, py::arg("thin") = 10, py::arg("seed") = 1);

    m.def(
        "crps",
        [](const std::string& family, const VectorXd& y, const ParamValues& par) {
            return crps_numeric(*make_family(family), y, par).crps;
        },
        py::arg("family"), py::arg("y"), py::arg("par"));
    m.def("crps_gaussian", &crps_gaussian, py::arg("mu"), py::arg("sigma"), py::arg("y"));
}
