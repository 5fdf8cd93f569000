#include <cmath>
#include <optional>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wfr/closed_form.hpp"
#include "wfr/dynamic_solver.hpp"
#include "wfr/gradient_flow.hpp"
#include "wfr/measures.hpp"
#include "wfr/verify.hpp"

namespace py = pybind11;
using namespace wfr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_array(std::span<const double> v) {
    return py::array_t<double>(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())}, v.data());
}

GridMeasure make_measure(const Grid& g, const Array& values) {
    if (static_cast<std::size_t>(values.size()) != g.size())
        throw InvalidArgument("values must have one entry per grid cell");
    return GridMeasure(g, std::vector<double>(values.data(), values.data() + values.size()));
}

py::dict trace_to_dict(const FlowTrace& tr) {
    std::vector<double> t, e, d, m, l2, mn;
    for (const auto& s : tr.samples) {
        t.push_back(s.t);
        e.push_back(s.entropy);
        d.push_back(s.dissipation);
        m.push_back(s.mass);
        l2.push_back(s.l2_error);
        mn.push_back(s.min_rho);
    }
    py::dict out;
    out["t"] = to_array(t);
    out["entropy"] = to_array(e);
    out["dissipation"] = to_array(d);
    out["mass"] = to_array(m);
    out["l2_error"] = to_array(l2);
    out["min_rho"] = to_array(mn);
    out["c0"] = tr.c0;
    out["identity_residual"] = tr.identity_residual;
    out["max_entropy_increase"] = tr.max_entropy_increase;
    out["fitted_rate"] = fitted_decay_rate(tr);
    out["final_state"] = to_array(tr.final_state.values());
    return out;
}

}  // namespace

PYBIND11_MODULE(_wfr, m) {
    m.doc() = "Unbalanced optimal transport distance of Wasserstein-Fisher-Rao type";

    py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_RuntimeError);

    py::class_<Grid>(m, "Grid")
        .def_static("line", &Grid::line, py::arg("n"), py::arg("lo"), py::arg("hi"))
        .def_static("rect", &Grid::rect, py::arg("nx"), py::arg("ny"), py::arg("xlo"), py::arg("xhi"),
                    py::arg("ylo"), py::arg("yhi"))
        .def_readonly("dim", &Grid::dim)
        .def_readonly("shape", &Grid::shape)
        .def_readonly("spacing", &Grid::spacing)
        .def_readonly("origin", &Grid::origin)
        .def_property_readonly("size", &Grid::size)
        .def_property_readonly("cell_volume", &Grid::cell_volume)
        .def("centers", [](const Grid& g, int axis) {
            std::vector<double> c(g.shape[axis]);
            for (int i = 0; i < g.shape[axis]; ++i) c[i] = g.center(axis, i);
            return to_array(c);
        }, py::arg("axis") = 0);

    py::class_<GridMeasure>(m, "GridMeasure")
        .def(py::init(&make_measure), py::arg("grid"), py::arg("values"))
        .def_property_readonly("grid", &GridMeasure::grid)
        .def_property_readonly("values", [](const GridMeasure& r) { return to_array(r.values()); })
        .def_property_readonly("mass", &GridMeasure::mass)
        .def("scaled", &GridMeasure::scaled);

    m.def("dist_to_zero", &dist_to_zero, py::arg("m0"));
    m.def("dist_proportional", &dist_proportional, py::arg("m0"), py::arg("lam"));
    m.def("dirac_distance", [](double k0, double k1, double xi, double tol) {
        const auto d = dirac_distance({k0, k1, xi, tol});
        py::dict out;
        out["d2"] = d.d2;
        out["strategy"] = to_string(d.geodesic.strategy);
        out["a"] = d.geodesic.a;
        out["b"] = d.geodesic.b;
        out["c"] = d.geodesic.c;
        return out;
    }, py::arg("k0"), py::arg("k1"), py::arg("xi"), py::arg("threshold_tol") = 0.0);
    m.def("w2_vs_d_gap", &w2_vs_d_gap, py::arg("xi"));

    m.def("wasserstein2_1d", &wasserstein2_1d, py::arg("rho0"), py::arg("rho1"));
    m.def("bounded_lipschitz", [](const GridMeasure& a, const GridMeasure& b, double tol) {
        const auto r = bounded_lipschitz(a, b, tol);
        return py::make_tuple(r.lower_bound, r.upper_bound);
    }, py::arg("rho0"), py::arg("rho1"), py::arg("tol") = 1e-6);
    m.def("rasterize_atoms", [](const Grid& g, const std::vector<double>& x, const std::vector<double>& k,
                                double sigma) {
        if (g.dim != 1 || x.size() != k.size()) throw InvalidArgument("rasterize_atoms: 1D grid and matching x, k");
        DiracMeasure mu;
        for (std::size_t i = 0; i < x.size(); ++i) mu.atoms.push_back({{x[i], 0.0}, k[i]});
        return rasterize(mu, g, sigma > 0.0 ? sigma : 2.0 * g.spacing[0]);
    }, py::arg("grid"), py::arg("x"), py::arg("k"), py::arg("sigma") = 0.0);

    py::class_<SolverOptions>(m, "SolverOptions")
        .def(py::init<>())
        .def_readwrite("nt", &SolverOptions::nt)
        .def_readwrite("max_iter", &SolverOptions::max_iter)
        .def_readwrite("tol_feas", &SolverOptions::tol_feas)
        .def_readwrite("tol_gap", &SolverOptions::tol_gap)
        .def_readwrite("sigma_blob", &SolverOptions::sigma_blob);

    m.def("solve_distance", [](const GridMeasure& a, const GridMeasure& b, const SolverOptions& opts) {
        DistanceResult r;
        {
            py::gil_scoped_release release;
            r = solve_distance(a, b, opts);
        }
        py::dict out;
        out["d2"] = r.report.d2;
        out["d"] = std::sqrt(std::max(r.report.d2, 0.0));
        out["iterations"] = r.report.iterations;
        out["converged"] = r.report.converged;
        out["feasibility"] = r.report.feasibility;
        out["energy_gap"] = r.report.energy_gap;
        out["message"] = r.report.message;
        std::vector<double> speeds = measured_speeds(reparametrize_arclength(r.path));
        out["reparametrized_speeds"] = to_array(speeds);
        return out;
    }, py::arg("rho0"), py::arg("rho1"), py::arg("options") = SolverOptions{});

    m.def("run_flow", [](const GridMeasure& resource, const GridMeasure& rho0, double t_end,
                         std::optional<double> dt, int sample_every) {
        PopulationProblem p{resource, rho0, t_end, 0.0, sample_every};
        p.dt = dt ? *dt : 0.5 * std::min(stable_dt(rho0), stable_dt(resource));
        FlowTrace tr;
        {
            py::gil_scoped_release release;
            tr = run_flow(p);
        }
        return trace_to_dict(tr);
    }, py::arg("m"), py::arg("rho0"), py::arg("t_end") = 1.0, py::arg("dt") = py::none(),
       py::arg("sample_every") = 1);

    m.def("estimate_beckner_constant", [](const Grid& g, int trials, std::uint64_t seed, int validate) {
        const auto c = estimate_beckner_constant(g, trials, seed);
        py::dict out;
        out["C_Omega"] = c.C_Omega;
        out["samples_checked"] = c.samples_checked;
        out["min_margin"] = c.min_margin;
        if (validate > 0) {
            const auto v = validate_beckner(c, g, validate, seed + 1);
            out["validation_ok"] = v.ok;
            out["validation_min_margin"] = v.min_margin;
        }
        return out;
    }, py::arg("grid"), py::arg("trials"), py::arg("seed"), py::arg("validate") = 0);

    m.def("suite_names", &verify::suite_names);
    m.def("verify", [](const std::vector<std::string>& suites, bool fast, std::uint64_t seed) {
        verify::Options o;
        o.fast = fast;
        o.seed = seed;
        const auto results = verify::run(suites, o);
        py::list cases;
        for (const auto& r : results) {
            py::dict c;
            c["suite"] = r.suite;
            c["name"] = r.name;
            c["passed"] = r.passed;
            c["detail"] = r.detail;
            cases.append(c);
        }
        return py::make_tuple(cases, verify::junit_xml(results, o));
    }, py::arg("suites"), py::arg("fast") = true, py::arg("seed") = 20240607);
}
