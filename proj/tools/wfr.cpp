// wfr: command-line front end for the distance solver, closed forms,
// geodesic integrators, population flow and verification suites.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "wfr/closed_form.hpp"
#include "wfr/dynamic_solver.hpp"
#include "wfr/gradient_flow.hpp"
#include "wfr/io.hpp"
#include "wfr/otto.hpp"
#include "wfr/verify.hpp"

namespace {

using namespace wfr;
using io::json;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNumerical = 2;
constexpr int kVerification = 3;

std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

// ---------------------------------------------------------------------------

struct DistanceArgs {
    std::string rho0, rho1, options, report, emit_path;
    std::optional<int> nt, max_iter;
    std::optional<double> tol_gap;
    bool reparametrize = false;
    bool strict = false;
};

int cmd_distance(const DistanceArgs& a) {
    SolverOptions opts = a.options.empty() ? SolverOptions{} : io::solver_options_from_json(io::read_json(a.options));
    if (a.nt) opts.nt = *a.nt;
    if (a.max_iter) opts.max_iter = *a.max_iter;
    if (a.tol_gap) opts.tol_gap = *a.tol_gap;

    const bool dirac0 = io::is_dirac_json(io::read_json(a.rho0));
    const bool dirac1 = io::is_dirac_json(io::read_json(a.rho1));
    if (dirac0 && dirac1) throw InvalidArgument("distance: at least one input must be a grid measure");
    GridMeasure r0, r1;
    if (dirac0) {
        r1 = io::load_measure(a.rho1);
        r0 = io::load_measure(a.rho0, &r1.grid(), opts.sigma_blob);
    } else {
        r0 = io::load_measure(a.rho0);
        r1 = io::load_measure(a.rho1, &r0.grid(), opts.sigma_blob);
    }

    auto result = solve_distance(r0, r1, opts);
    if (a.reparametrize) {
        result.path = reparametrize_arclength(result.path);
    }
    if (!a.report.empty()) io::write_json(a.report, io::to_json(result.report));
    if (!a.emit_path.empty()) {
        const int frames = io::write_path(a.emit_path, result.path);
        std::cerr << "wrote " << frames << " frames to " << a.emit_path << "\n";
    }
    std::cout << num17(std::sqrt(std::max(result.report.d2, 0.0))) << "\n";
    if (!result.report.converged) {
        std::cerr << "warning: " << result.report.message << " after " << result.report.iterations << " iterations\n";
        if (a.strict) return kNumerical;
    }
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_dirac(double k0, double k1, double xi, double tol) {
    const auto d = dirac_distance({k0, k1, xi, tol});
    print_json({{"d2", d.d2},
                {"d", std::sqrt(d.d2)},
                {"strategy", to_string(d.geodesic.strategy)},
                {"a", d.geodesic.a},
                {"b", d.geodesic.b},
                {"c", d.geodesic.c},
                {"gamma0", d.geodesic.gamma0},
                {"gamma1", d.geodesic.gamma1}});
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_geodesic(double k0, double k1, double xi, double dt, const std::string& out) {
    const auto d = dirac_distance({k0, k1, xi});
    if (d.geodesic.strategy == Strategy::stationary)
        throw InvalidArgument("geodesic: beyond separation pi the geodesic has no moving particle");
    const auto jet = dirac_geodesic_jet(d.geodesic, 0.0);
    ParticleState init;
    init.dim = 1;
    init.particles.push_back({{0.0, 0.0}, jet.k, jet.dk / jet.k, {jet.ds, 0.0}});
    const auto traj = integrate_characteristics(init, 1.0, dt);
    double err = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const auto p = dirac_geodesic_eval(d.geodesic, traj.times[i]);
        err = std::max({err, std::abs(traj.states[i][0].k - p.k), std::abs(traj.states[i][0].x[0] - p.s)});
    }
    if (!out.empty()) io::write_text(out, io::trajectory_csv(traj));
    print_json({{"d2", d.d2},
                {"strategy", to_string(d.geodesic.strategy)},
                {"particle_energy", particle_energy(traj).total},
                {"closed_form_energy", 4.0 * d.geodesic.a},
                {"max_error", err},
                {"samples", traj.times.size()}});
    return kOk;
}

// ---------------------------------------------------------------------------

struct FlowArgs {
    std::string m, rho0, out, certificate;
    double t_end = 1.0;
    std::optional<double> dt;
    int sample_every = 1;
    std::optional<std::uint64_t> seed;
    int trials = 200;
};

int cmd_flow(const FlowArgs& a) {
    PopulationProblem p;
    p.m = io::load_measure(a.m);
    p.rho0 = io::load_measure(a.rho0, &p.m.grid());
    p.t_end = a.t_end;
    p.dt = a.dt ? *a.dt : 0.5 * std::min(stable_dt(p.rho0), stable_dt(p.m));
    p.sample_every = a.sample_every;
    const auto trace = run_flow(p);
    if (!a.out.empty()) io::write_text(a.out, io::flow_trace_csv(trace));

    json summary = {{"dt", p.dt},
                    {"c0", trace.c0},
                    {"fitted_rate", fitted_decay_rate(trace)},
                    {"identity_residual", trace.identity_residual},
                    {"final_entropy", trace.samples.back().entropy}};
    std::optional<BecknerCertificate> cert;
    if (!a.certificate.empty())
        cert = io::beckner_certificate_from_json(io::read_json(a.certificate));
    else if (a.seed)
        cert = estimate_beckner_constant(p.m.grid(), a.trials, *a.seed);
    if (cert) {
        const double gamma = cert->phi(trace.c0);
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& s : trace.samples)
            worst = std::max(worst, s.entropy - std::exp(-2.0 * gamma * s.t) * trace.samples.front().entropy);
        summary["C_Omega"] = cert->C_Omega;
        summary["phi_c0"] = gamma;
        summary["max_excess_over_bound"] = worst;
        summary["bound_holds"] = worst <= 1e-12 * trace.samples.front().entropy;
    }
    print_json(summary);
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_hessian(const std::string& rho_file, const std::string& u_file, const std::string& energy, double dt,
                int substeps, const std::string& out) {
    const GridMeasure rho = io::load_measure(rho_file);
    const PotentialField pot = io::potential_from_json(io::read_json(u_file));
    InternalEnergySpec spec;
    if (energy == "quadratic")
        spec = InternalEnergySpec::quadratic();
    else if (energy == "cubic")
        spec = InternalEnergySpec::cubic();
    else if (energy == "entropy")
        spec = InternalEnergySpec::entropy();
    else
        throw InvalidArgument("hessian: energy must be quadratic, cubic or entropy");
    const auto h = compare_hessian(rho, pot, spec, dt, substeps);
    const json j = io::to_json(h);
    if (!out.empty()) io::write_json(out, j);
    print_json(j);
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_beckner(int n, int dim, int trials, std::uint64_t seed, int validate, const std::string& out) {
    const Grid g = dim == 1 ? Grid::line(n, 0.0, 1.0) : Grid::rect(n, n, 0.0, 1.0, 0.0, 1.0);
    const auto cert = estimate_beckner_constant(g, trials, seed);
    json j = io::to_json(cert);
    bool ok = true;
    if (validate > 0) {
        const auto v = validate_beckner(cert, g, validate, seed + 1);
        j["validation"] = {{"samples", v.samples}, {"min_margin", v.min_margin}, {"ok", v.ok}};
        ok = v.ok;
    }
    if (!out.empty()) io::write_json(out, j);
    print_json(j);
    return ok ? kOk : kVerification;
}

// ---------------------------------------------------------------------------

bool uses_randomness(const std::vector<std::string>& suites) {
    for (const auto& s : suites)
        if (s != "none" && s != "closed_form" && s != "solver" && s != "trajectory" && s != "hj" && s != "hessian")
            return true;
    return false;
}

int cmd_verify(const std::vector<std::string>& suites, bool fast, std::optional<std::uint64_t> seed,
               const std::string& report, bool list) {
    if (list) {
        for (const auto& s : verify::suite_names()) std::cout << s << "\n";
        return kOk;
    }
    if (!seed && uses_randomness(suites)) throw InvalidArgument("verify: the selected suites are randomised; pass --seed");
    verify::Options opts;
    opts.fast = fast;
    if (seed) opts.seed = *seed;
    const auto results = verify::run(suites, opts);
    for (const auto& c : results)
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.suite << "/" << c.name << ": " << c.detail << "\n";
    std::size_t failed = 0;
    for (const auto& c : results) failed += c.passed ? 0 : 1;
    std::cout << results.size() - failed << "/" << results.size() << " checks passed\n";
    if (!report.empty()) io::write_text(report, verify::junit_xml(results, opts));
    return failed == 0 ? kOk : kVerification;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unbalanced optimal transport distance toolkit (Wasserstein-Fisher-Rao type)"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "wfr 1.0.0");
    app.set_config("--config", "", "TOML or INI file with option values; sections name the subcommand");
    app.allow_config_extras(CLI::config_extras_mode::error);

    DistanceArgs da;
    auto* distance = app.add_subcommand("distance", "Solve for the squared distance between two measures");
    distance->add_option("--rho0", da.rho0, "Initial measure (grid or Dirac JSON)")->required()->check(CLI::ExistingFile);
    distance->add_option("--rho1", da.rho1, "Final measure (grid or Dirac JSON)")->required()->check(CLI::ExistingFile);
    distance->add_option("--options", da.options, "SolverOptions JSON")->check(CLI::ExistingFile);
    distance->add_option("--nt", da.nt, "Number of time steps");
    distance->add_option("--max-iter", da.max_iter, "Iteration cap");
    distance->add_option("--tol-gap", da.tol_gap, "Relative energy gap tolerance");
    distance->add_option("--report", da.report, "Write the SolverReport JSON here");
    distance->add_option("--emit-path", da.emit_path, "Write geodesic frames and index.json into this directory");
    distance->add_flag("--reparametrize", da.reparametrize, "Reparametrise the emitted path to constant speed");
    distance->add_flag("--strict", da.strict, "Exit with code 2 when the solver does not converge");

    double k0 = 1.0, k1 = 1.0, xi = 0.0;
    auto* dirac = app.add_subcommand("dirac", "Closed-form distance between two one-point measures");
    dirac->add_option("--k0", k0, "Charge of the first atom")->required()->check(CLI::NonNegativeNumber);
    dirac->add_option("--k1", k1, "Charge of the second atom")->required()->check(CLI::NonNegativeNumber);
    dirac->add_option("--xi", xi, "Separation of the atoms")->required()->check(CLI::NonNegativeNumber);
    double threshold_tol = 1e-8;
    dirac->add_option("--threshold-tol", threshold_tol, "Separations this close to pi count as critical")
        ->check(CLI::NonNegativeNumber);

    double gdt = 1e-3;
    std::string gout;
    auto* geodesic = app.add_subcommand("geodesic", "Integrate the particle geodesic between two one-point measures");
    geodesic->add_option("--k0", k0, "Charge of the first atom")->required()->check(CLI::NonNegativeNumber);
    geodesic->add_option("--k1", k1, "Charge of the second atom")->required()->check(CLI::NonNegativeNumber);
    geodesic->add_option("--xi", xi, "Separation of the atoms")->required()->check(CLI::NonNegativeNumber);
    geodesic->add_option("--dt", gdt, "RK4 step")->check(CLI::PositiveNumber);
    geodesic->add_option("--out", gout, "Trajectory CSV (t,particle_id,x,k)");

    FlowArgs fa;
    std::uint64_t flow_seed = 0;
    auto* flow = app.add_subcommand("flow", "Run the fitness-driven population flow");
    flow->add_option("--m", fa.m, "Resource density m (grid JSON)")->required()->check(CLI::ExistingFile);
    flow->add_option("--rho0", fa.rho0, "Initial density (grid JSON)")->required()->check(CLI::ExistingFile);
    flow->add_option("--t-end", fa.t_end, "Final time")->check(CLI::NonNegativeNumber);
    flow->add_option("--dt", fa.dt, "Time step (default: half the stability bound)");
    flow->add_option("--sample-every", fa.sample_every, "Steps between trace samples")->check(CLI::PositiveNumber);
    flow->add_option("--out", fa.out, "FlowTrace CSV");
    auto* flow_cert = flow->add_option("--certificate", fa.certificate, "BecknerCertificate JSON for the decay bound")
                          ->check(CLI::ExistingFile);
    auto* flow_seed_opt =
        flow->add_option("--seed", flow_seed, "Estimate a Beckner certificate with this seed (unit-volume grids)");
    flow->add_option("--trials", fa.trials, "Trials for the certificate estimate")->check(CLI::PositiveNumber);
    flow_cert->excludes(flow_seed_opt);

    std::string hrho, hu, henergy = "quadratic", hout;
    double hdt = 1e-3;
    int hsub = 10;
    auto* hessian = app.add_subcommand("hessian", "Compare the internal-energy Hessian formula with finite differences");
    hessian->add_option("--rho", hrho, "Density (grid JSON)")->required()->check(CLI::ExistingFile);
    hessian->add_option("--u", hu, "Potential JSON (grid keys plus \"u\")")->required()->check(CLI::ExistingFile);
    hessian->add_option("--energy", henergy, "quadratic | cubic | entropy")
        ->check(CLI::IsMember({"quadratic", "cubic", "entropy"}));
    hessian->add_option("--dt", hdt, "Finite-difference time offset")->check(CLI::PositiveNumber);
    hessian->add_option("--substeps", hsub, "HJ steps per offset")->check(CLI::PositiveNumber);
    hessian->add_option("--out", hout, "Hessian JSON");

    int bn = 64, bdim = 1, btrials = 200, bval = 200;
    std::uint64_t bseed = 0;
    std::string bout;
    auto* beckner = app.add_subcommand("beckner", "Estimate and validate the Beckner constant on the unit box");
    beckner->add_option("--n", bn, "Cells per axis")->check(CLI::Range(4, 4096));
    beckner->add_option("--dim", bdim, "1 or 2")->check(CLI::IsMember({1, 2}));
    beckner->add_option("--trials", btrials, "Random densities for the estimate")->check(CLI::PositiveNumber);
    beckner->add_option("--seed", bseed, "Random seed")->required();
    beckner->add_option("--validate", bval, "Fresh (rho, m) pairs for validation; 0 skips")
        ->check(CLI::NonNegativeNumber);
    beckner->add_option("--out", bout, "BecknerCertificate JSON");

    std::vector<std::string> suites{"all"};
    bool fast = false, list = false;
    std::optional<std::uint64_t> vseed;
    std::string vreport;
    auto* verify_cmd = app.add_subcommand("verify", "Run the invariant suites and write a JUnit report");
    verify_cmd->add_option("--suite", suites, "all | none | suite names (repeatable)")->delimiter(',');
    verify_cmd->add_flag("--fast", fast, "Fewer samples and coarser solver grids");
    verify_cmd->add_option("--seed", vseed, "Random seed (required by the randomised suites)");
    verify_cmd->add_option("--report", vreport, "JUnit XML output");
    verify_cmd->add_flag("--list", list, "Print the suite names and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*distance) return cmd_distance(da);
        if (*dirac) return cmd_dirac(k0, k1, xi, threshold_tol);
        if (*geodesic) return cmd_geodesic(k0, k1, xi, gdt, gout);
        if (*flow) {
            if (*flow_seed_opt) fa.seed = flow_seed;
            return cmd_flow(fa);
        }
        if (*hessian) return cmd_hessian(hrho, hu, henergy, hdt, hsub, hout);
        if (*beckner) return cmd_beckner(bn, bdim, btrials, bseed, bval, bout);
        if (*verify_cmd) return cmd_verify(suites, fast, vseed, vreport, list);
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
