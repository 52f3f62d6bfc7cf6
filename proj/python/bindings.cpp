#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "aimdmf/config.hpp"
#include "aimdmf/engine.hpp"
#include "aimdmf/equilibrium.hpp"
#include "aimdmf/error.hpp"
#include "aimdmf/harness.hpp"
#include "aimdmf/init_law.hpp"
#include "aimdmf/mckean.hpp"
#include "aimdmf/rng.hpp"

namespace py = pybind11;
using namespace aimdmf;

namespace {

std::vector<InitLaw> parse_laws(const std::vector<std::string>& specs) {
    std::vector<InitLaw> out;
    for (const auto& s : specs) out.push_back(InitLaw::parse(s));
    return out;
}

}  // namespace

PYBIND11_MODULE(_aimdmf, m) {
    m.doc() = "Mean-field AIMD models: stationary laws, equilibria, simulators and experiments.";

    static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ModelError>(m, "ModelError", base.ptr());
    py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
    py::register_exception<UnsupportedModelError>(m, "UnsupportedModelError", base.ptr());
    py::register_exception<BracketError>(m, "BracketError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());

    m.def("psi", &psi, py::arg("r"));
    m.def("stationary_density", &stationary_density, py::arg("r"), py::arg("rho"), py::arg("x"));
    m.def("next_jump_time", &next_jump_time, py::arg("w"), py::arg("a"), py::arg("beta"), py::arg("E"));

    py::class_<StationaryDistribution>(m, "StationaryDistribution")
        .def(py::init<double, double, std::size_t>(), py::arg("r"), py::arg("rho"), py::arg("cells") = 4096)
        .def_property_readonly("r", &StationaryDistribution::r)
        .def_property_readonly("rho", &StationaryDistribution::rho)
        .def_property_readonly("cutoff", &StationaryDistribution::cutoff)
        .def("mean", &StationaryDistribution::mean)
        .def("density", &StationaryDistribution::density, py::arg("x"))
        .def("cdf", &StationaryDistribution::cdf, py::arg("x"))
        .def("quantile", &StationaryDistribution::quantile, py::arg("p"))
        .def(
            "sample",
            [](const StationaryDistribution& d, std::size_t n, std::uint64_t seed) {
                Stream s(seed, {0});
                std::vector<double> out(n);
                for (auto& x : out) x = d.sample(s);
                return out;
            },
            py::arg("n"), py::arg("seed") = 1);

    py::class_<NetworkModel>(m, "NetworkModel")
        .def_property_readonly("nodes", &NetworkModel::nodes)
        .def_property_readonly("classes", &NetworkModel::classes)
        .def_property_readonly("allocation",
                               [](const NetworkModel& nm) {
                                   const auto a = nm.allocation_row_major();
                                   return std::vector<double>(a.begin(), a.end());
                               })
        .def("hypotheses", [](const NetworkModel& nm) { return validate_hypotheses(nm).to_text(); });

    m.def("load_model", &load_model, py::arg("path"));
    m.def("parse_model", &parse_model, py::arg("text"));

    py::class_<StationaryLaw>(m, "StationaryLaw")
        .def_readonly("u", &StationaryLaw::u)
        .def_readonly("r", &StationaryLaw::r)
        .def_readonly("rho", &StationaryLaw::rho)
        .def_readonly("mean", &StationaryLaw::mean)
        .def_readonly("residual", &StationaryLaw::residual)
        .def_readonly("warnings", &StationaryLaw::warnings)
        .def("max_residual", &StationaryLaw::max_residual);

    m.def("fixed_point_map", [](const NetworkModel& nm, const std::vector<double>& u) { return fixed_point_map(nm, u); },
          py::arg("model"), py::arg("u"));
    m.def("solve_single_node", &solve_single_node, py::arg("model"));
    m.def("solve_linear_network", &solve_linear_network, py::arg("model"));
    m.def("solve_torus", &solve_torus, py::arg("model"));
    m.def(
        "solve_fixed_point",
        [](const NetworkModel& nm, double damping, double tol, std::size_t multistart, std::uint64_t seed) {
            FixedPointOptions o;
            o.damping = damping;
            o.tol = tol;
            o.multistart = multistart;
            o.seed = seed;
            return solve_fixed_point(nm, o).solutions;
        },
        py::arg("model"), py::arg("damping") = 0.5, py::arg("tol") = 1e-12, py::arg("multistart") = 8,
        py::arg("seed") = 1);

    m.def(
        "simulate_connection",
        [](double w0, double a, double beta, double r, double horizon, std::uint64_t seed) {
            Stream s(seed, {0});
            const auto p = simulate_connection(w0, a, beta, r, horizon, s);
            py::dict d;
            d["jump_times"] = p.jump_times();
            d["post_jump_values"] = p.post_jump_values();
            d["integral"] = p.integral();
            return d;
        },
        py::arg("w0"), py::arg("a"), py::arg("beta"), py::arg("r"), py::arg("horizon"), py::arg("seed") = 1);

    m.def(
        "sample_discrete_aimd",
        [](double eps, double r, std::int64_t w0, std::size_t burn_in, std::size_t thin, std::size_t samples,
           std::uint64_t seed) {
            Stream s(seed, {0});
            return sample_discrete_aimd(eps, r, w0, burn_in, thin, samples, s);
        },
        py::arg("eps"), py::arg("r"), py::arg("w0"), py::arg("burn_in"), py::arg("thin"), py::arg("samples"),
        py::arg("seed") = 1);

    m.def(
        "solve_mckean",
        [](const NetworkModel& nm, const std::vector<std::string>& init, double horizon, double step,
           std::size_t ensemble, double tol, std::size_t max_iter, std::uint64_t seed, int threads) {
            McKeanOptions o;
            o.init = parse_laws(init);
            o.horizon = horizon;
            o.step = step;
            o.ensemble = ensemble;
            o.tol = tol;
            o.max_iter = max_iter;
            o.seed = seed;
            o.threads = threads;
            o.throw_on_nonconvergence = false;
            const auto sol = solve_mckean(nm, o);
            py::dict d;
            d["times"] = sol.times;
            d["u"] = sol.u;
            d["u_se"] = sol.u_se;
            d["mean"] = sol.mean;
            d["mean_se"] = sol.mean_se;
            d["iterations"] = sol.iterations;
            d["delta_history"] = sol.delta_history;
            d["converged"] = sol.converged;
            return d;
        },
        py::arg("model"), py::arg("init"), py::arg("horizon") = 10.0, py::arg("step") = 0.05,
        py::arg("ensemble") = 10000, py::arg("tol") = 1e-8, py::arg("max_iter") = 60, py::arg("seed") = 1,
        py::arg("threads") = 1);

    m.def(
        "run_experiment",
        [](const std::filesystem::path& config, const std::filesystem::path& out, std::uint64_t seed, int threads,
           bool trace) {
            RunContext ctx;
            ctx.seed = seed;
            ctx.out = out;
            ctx.threads = threads;
            ctx.trace = trace;
            const auto result = run_experiment(load_experiment(config), ctx);
            py::list criteria;
            for (const auto& c : result.criteria) {
                criteria.append(py::make_tuple(c.name, to_string(c.status), c.detail));
            }
            py::dict d;
            d["status"] = to_string(result.status());
            d["exit_code"] = exit_code(result.status());
            d["criteria"] = criteria;
            d["files"] = result.files;
            d["summary"] = result.summary;
            return d;
        },
        py::arg("config"), py::arg("out"), py::arg("seed") = 1, py::arg("threads") = 1, py::arg("trace") = false);
}
