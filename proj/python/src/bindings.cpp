#include "plsinet/errors.hpp"
#include "plsinet/inference.hpp"
#include "plsinet/io.hpp"
#include "plsinet/model.hpp"
#include "plsinet/simgen.hpp"
#include "plsinet/trainer.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace plsinet;

namespace {

constexpr std::uint64_t kBootstrapStream = 0xB0075u;

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a, const char* name) {
    if (a.ndim() != 2) {
        throw ShapeError(std::string(name) + " must be two-dimensional");
    }
    const auto rows = static_cast<std::size_t>(a.shape(0));
    const auto cols = static_cast<std::size_t>(a.shape(1));
    return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

std::vector<double> to_vector(const Array& a, const char* name) {
    if (a.ndim() != 1) {
        throw ShapeError(std::string(name) + " must be one-dimensional");
    }
    return {a.data(), a.data() + a.shape(0)};
}

Array from_vector(const std::vector<double>& v) {
    Array out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

Array from_matrix(const Matrix& m) {
    Array out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

Dataset make_dataset(Family family, const Array& X, const std::optional<Array>& Z,
                     const std::optional<Array>& y, const std::optional<Array>& time,
                     const std::optional<Array>& event, const std::optional<Array>& weights) {
    Dataset d;
    d.X = to_matrix(X, "X");
    d.Z = Z ? to_matrix(*Z, "Z") : Matrix(d.X.rows(), 0);
    d.outcome.family = family;
    if (family == Family::cox) {
        if (!time || !event) {
            throw ShapeError("cox needs time and event");
        }
        d.outcome.time = to_vector(*time, "time");
        d.outcome.event = to_vector(*event, "event");
    } else {
        if (!y) {
            throw ShapeError("y is required");
        }
        d.outcome.y = to_vector(*y, "y");
    }
    if (weights) {
        d.weights = to_vector(*weights, "weights");
    }
    d.validate();
    return d;
}

py::dict simulated_dict(const SimulatedData& s) {
    py::dict out;
    out["X"] = from_matrix(s.data.X);
    out["Z"] = from_matrix(s.data.Z);
    if (s.data.outcome.family == Family::cox) {
        out["time"] = from_vector(s.data.outcome.time);
        out["event"] = from_vector(s.data.outcome.event);
    } else {
        out["y"] = from_vector(s.data.outcome.y);
    }
    out["index_true"] = from_vector(s.index_true);
    out["eta_true"] = from_vector(s.eta_true);
    out["convention"] = s.convention;
    return out;
}

std::vector<std::pair<double, double>> intervals(const std::vector<Interval>& v) {
    std::vector<std::pair<double, double>> out;
    out.reserve(v.size());
    for (const auto& i : v) {
        out.emplace_back(i.lo, i.hi);
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Partial-linear single-index models with a neural link function";

    auto error = py::register_exception<Error>(m, "Error");
    py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
    py::register_exception<DomainError>(m, "DomainError", error.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", error.ptr());
    py::register_exception<InferenceError>(m, "InferenceError", error.ptr());

    py::class_<FitConfig>(m, "FitConfig")
        .def(py::init<>())
        .def_property(
            "family", [](const FitConfig& c) { return std::string(to_string(c.family)); },
            [](FitConfig& c, const std::string& v) { c.family = parse_family(v); })
        .def_property(
            "hidden", [](const FitConfig& c) { return c.mlp.hidden; },
            [](FitConfig& c, std::vector<std::size_t> v) { c.mlp.hidden = std::move(v); })
        .def_property(
            "activation",
            [](const FitConfig& c) { return std::string(to_string(c.mlp.activation)); },
            [](FitConfig& c, const std::string& v) { c.mlp.activation = parse_activation(v); })
        .def_readwrite("epochs", &FitConfig::epochs)
        .def_readwrite("batch_size", &FitConfig::batch_size)
        .def_readwrite("learning_rate", &FitConfig::learning_rate)
        .def_readwrite("anchoring_weight", &FitConfig::anchoring_weight)
        .def_readwrite("early_stop_patience", &FitConfig::early_stop_patience)
        .def_readwrite("validation_fraction", &FitConfig::validation_fraction)
        .def_readwrite("seed", &FitConfig::seed)
        .def_property(
            "beta_init", [](const FitConfig& c) { return std::string(to_string(c.beta_init)); },
            [](FitConfig& c, const std::string& v) { c.beta_init = parse_beta_init(v); })
        .def("validate", &FitConfig::validate);

    py::class_<ModelParams>(m, "Model")
        .def_property_readonly("beta", [](const ModelParams& p) { return from_vector(p.beta); })
        .def_property_readonly("gamma", [](const ModelParams& p) { return from_vector(p.gamma); })
        .def_property_readonly("theta",
                               [](const ModelParams& p) { return from_vector(p.theta.flat); })
        .def_property_readonly("hidden", [](const ModelParams& p) { return p.mlp.hidden; })
        .def_property_readonly(
            "activation", [](const ModelParams& p) { return std::string(to_string(p.mlp.activation)); })
        .def("index", [](const ModelParams& p, const Array& X) {
            return from_vector(index(p, to_matrix(X, "X")));
        })
        .def("link", [](const ModelParams& p, const Array& s) {
            return from_vector(evaluate(p.theta, p.mlp, to_vector(s, "s")));
        })
        .def("predict_eta", [](const ModelParams& p, const Array& X, const std::optional<Array>& Z) {
            const Matrix x = to_matrix(X, "X");
            const Matrix z = Z ? to_matrix(*Z, "Z") : Matrix(x.rows(), 0);
            return from_vector(predict_eta(p, x, z));
        }, py::arg("X"), py::arg("Z") = py::none())
        .def("check_invariants", &ModelParams::check_invariants, py::arg("tol") = 1e-9)
        .def("save", [](const ModelParams& p, const std::string& path, const std::string& family) {
            Checkpoint c;
            c.params = p;
            c.family = parse_family(family);
            save_checkpoint(path, c);
        }, py::arg("path"), py::arg("family") = "gaussian")
        .def_static("load", [](const std::string& path) { return load_checkpoint(path).params; });

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("model", &FitResult::params)
        .def_readonly("loss_history", &FitResult::loss_history)
        .def_readonly("validation_history", &FitResult::validation_history)
        .def_readonly("stopped_epoch", &FitResult::stopped_epoch)
        .def_readonly("best_epoch", &FitResult::best_epoch)
        .def_readonly("flips", &FitResult::flips)
        .def_readonly("config", &FitResult::config);

    m.def("simulate",
          [](const std::string& link, const std::string& family, std::size_t n,
             std::uint64_t seed, double rho) {
              SimScenario s = reference_scenario(parse_link_shape(link), parse_family(family), n, seed);
              s.rho = rho;
              return simulated_dict(simulate(s));
          },
          py::arg("link") = "linear", py::arg("family") = "gaussian", py::arg("n") = 2000,
          py::arg("seed") = 0, py::arg("rho") = 0.3,
          "Synthetic data from the reference design: dict of numpy arrays.");

    m.def("true_link", [](const std::string& link, const Array& s) {
        const LinkShape shape = parse_link_shape(link);
        std::vector<double> v = to_vector(s, "s");
        for (double& x : v) {
            x = eval_true_link(shape, x);
        }
        return from_vector(v);
    }, py::arg("link"), py::arg("s"));

    m.def("fit",
          [](const Array& X, const std::optional<Array>& Z, const std::optional<Array>& y,
             const std::optional<Array>& time, const std::optional<Array>& event,
             const std::optional<Array>& weights, const FitConfig& config) {
              const Dataset d = make_dataset(config.family, X, Z, y, time, event, weights);
              py::gil_scoped_release release;
              return plsinet::fit(d, config);
          },
          py::arg("X"), py::arg("Z") = py::none(), py::arg("y") = py::none(),
          py::arg("time") = py::none(), py::arg("event") = py::none(),
          py::arg("weights") = py::none(), py::arg("config") = FitConfig{});

    m.def("bootstrap",
          [](const Array& X, const ModelParams& point, const std::optional<Array>& Z,
             const std::optional<Array>& y, const std::optional<Array>& time,
             const std::optional<Array>& event, const FitConfig& config, std::size_t replicates,
             double alpha, std::uint64_t seed, std::size_t jobs) {
              const Dataset d = make_dataset(config.family, X, Z, y, time, event, std::nullopt);
              BootstrapOptions opt;
              opt.replicates = replicates;
              opt.alpha = alpha;
              opt.rng = Rng(seed, kBootstrapStream);
              opt.jobs = jobs;
              BootstrapResult r;
              {
                  py::gil_scoped_release release;
                  r = plsinet::bootstrap(d, config, point, opt);
              }
              py::dict out;
              out["point"] = from_vector(r.point);
              out["se"] = from_vector(r.se);
              out["ci_normal"] = intervals(r.ci_normal);
              out["ci_percentile"] = intervals(r.ci_percentile);
              out["replicates"] = from_matrix(r.replicates);
              out["dropped"] = r.dropped;
              if (r.curve_band) {
                  py::dict band;
                  band["grid"] = from_vector(r.curve_band->grid);
                  band["fit"] = from_vector(r.curve_band->fit);
                  band["lo"] = from_vector(r.curve_band->lo);
                  band["hi"] = from_vector(r.curve_band->hi);
                  out["curve_band"] = band;
              }
              return out;
          },
          py::arg("X"), py::arg("point"), py::arg("Z") = py::none(), py::arg("y") = py::none(),
          py::arg("time") = py::none(), py::arg("event") = py::none(),
          py::arg("config") = FitConfig{}, py::arg("replicates") = 100,
          py::arg("alpha") = 0.05, py::arg("seed") = 0, py::arg("jobs") = 1);
}
