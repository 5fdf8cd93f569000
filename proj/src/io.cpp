#include "wfr/io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace wfr::io {

namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const char* what) {
    if (!j.is_object()) throw FormatError(std::string(what) + ": expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw FormatError(std::string(what) + ": unknown key '" + key + "'");
}

template <class T>
T get(const json& j, const char* key, const char* what) {
    if (!j.contains(key)) throw FormatError(std::string(what) + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(std::string(what) + ": bad value for '" + key + "': " + e.what());
    }
}

template <class T>
void get_optional(const json& j, const char* key, T& out, const char* what) {
    if (j.contains(key)) out = get<T>(j, key, what);
}

json grid_json(const Grid& g) {
    json j;
    j["dim"] = g.dim;
    j["shape"] = std::vector<int>(g.shape.begin(), g.shape.begin() + g.dim);
    j["spacing"] = std::vector<double>(g.spacing.begin(), g.spacing.begin() + g.dim);
    j["origin"] = std::vector<double>(g.origin.begin(), g.origin.begin() + g.dim);
    return j;
}

std::vector<double> to_vector(std::span<const double> v) { return {v.begin(), v.end()}; }

}  // namespace

json read_json(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw FormatError("cannot open " + file.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(file.string() + ": " + e.what());
    }
}

void write_text(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw FormatError("cannot write " + file.string());
    out << text;
    if (!out) throw FormatError("write failed: " + file.string());
}

void write_json(const fs::path& file, const json& doc) { write_text(file, doc.dump(2) + "\n"); }

std::string csv_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

Grid grid_from_json(const json& j) {
    const char* what = "grid";
    Grid g;
    g.dim = get<int>(j, "dim", what);
    if (g.dim != 1 && g.dim != 2) throw FormatError("grid: dim must be 1 or 2");
    const auto shape = get<std::vector<int>>(j, "shape", what);
    const auto spacing = get<std::vector<double>>(j, "spacing", what);
    const auto origin = get<std::vector<double>>(j, "origin", what);
    const auto n = static_cast<std::size_t>(g.dim);
    if (shape.size() != n || spacing.size() != n || origin.size() != n)
        throw FormatError("grid: shape, spacing and origin need one entry per axis");
    for (std::size_t a = 0; a < n; ++a) {
        g.shape[a] = shape[a];
        g.spacing[a] = spacing[a];
        g.origin[a] = origin[a];
    }
    g.validate();
    return g;
}

json to_json(const GridMeasure& rho) {
    json j = grid_json(rho.grid());
    j["values"] = to_vector(rho.values());
    return j;
}

GridMeasure grid_measure_from_json(const json& j) {
    check_keys(j, {"dim", "shape", "spacing", "origin", "values"}, "grid measure");
    const Grid g = grid_from_json(j);
    auto values = get<std::vector<double>>(j, "values", "grid measure");
    if (values.size() != g.size())
        throw FormatError("grid measure: expected " + std::to_string(g.size()) + " values, got " +
                          std::to_string(values.size()));
    return GridMeasure(g, std::move(values));
}

json to_json(const DiracMeasure& mu) {
    json atoms = json::array();
    for (const auto& a : mu.atoms)
        atoms.push_back({{"x", std::vector<double>(a.x.begin(), a.x.begin() + mu.dim)}, {"k", a.k}});
    return {{"atoms", atoms}};
}

DiracMeasure dirac_measure_from_json(const json& j) {
    check_keys(j, {"atoms"}, "dirac measure");
    if (!j.at("atoms").is_array()) throw FormatError("dirac measure: 'atoms' must be an array");
    DiracMeasure mu;
    mu.dim = 0;
    for (const auto& item : j.at("atoms")) {
        check_keys(item, {"x", "k"}, "atom");
        const auto x = get<std::vector<double>>(item, "x", "atom");
        if (x.empty() || x.size() > 2) throw FormatError("atom: position must have 1 or 2 coordinates");
        if (mu.dim == 0) mu.dim = static_cast<int>(x.size());
        if (static_cast<int>(x.size()) != mu.dim) throw FormatError("dirac measure: atoms of mixed dimension");
        Atom a;
        for (std::size_t i = 0; i < x.size(); ++i) a.x[i] = x[i];
        a.k = get<double>(item, "k", "atom");
        if (!(a.k >= 0.0)) throw FormatError("atom: charge must be nonnegative");
        mu.atoms.push_back(a);
    }
    if (mu.dim == 0) mu.dim = 1;
    return mu;
}

bool is_dirac_json(const json& j) { return j.is_object() && j.contains("atoms"); }

GridMeasure load_measure(const fs::path& file, const Grid* grid, double sigma) {
    const json j = read_json(file);
    if (!is_dirac_json(j)) return grid_measure_from_json(j);
    if (!grid) throw FormatError(file.string() + ": a Dirac measure needs a grid to be rasterised on");
    const DiracMeasure mu = dirac_measure_from_json(j).normalized();
    if (mu.dim != grid->dim) throw FormatError(file.string() + ": atom dimension does not match the grid");
    const double h = grid->dim == 1 ? grid->spacing[0] : std::min(grid->spacing[0], grid->spacing[1]);
    return rasterize(mu, *grid, sigma > 0.0 ? sigma : 2.0 * h);
}

PotentialField potential_from_json(const json& j) {
    check_keys(j, {"dim", "shape", "spacing", "origin", "u", "grad_u", "layout"}, "potential");
    const Grid g = grid_from_json(j);
    auto u = get<std::vector<double>>(j, "u", "potential");
    if (u.size() != g.size()) throw FormatError("potential: 'u' has the wrong length");
    if (!j.contains("grad_u")) return PotentialField::from_potential(g, std::move(u));
    PotentialField p;
    p.grid = g;
    p.u = std::move(u);
    const auto grads = get<std::vector<std::vector<double>>>(j, "grad_u", "potential");
    if (grads.size() != static_cast<std::size_t>(g.dim)) throw FormatError("potential: one gradient array per axis");
    for (int a = 0; a < g.dim; ++a) {
        if (grads[a].size() != g.size()) throw FormatError("potential: gradient array has the wrong length");
        p.grad[a] = grads[a];
    }
    std::string layout = "collocated";
    get_optional(j, "layout", layout, "potential");
    if (layout == "collocated")
        p.layout = Layout::collocated;
    else if (layout == "staggered")
        p.layout = Layout::staggered;
    else
        throw FormatError("potential: layout must be 'collocated' or 'staggered'");
    return p;
}

json to_json(const PotentialField& pot) {
    json j = grid_json(pot.grid);
    j["u"] = pot.u;
    json grads = json::array();
    for (int a = 0; a < pot.grid.dim; ++a) grads.push_back(pot.grad[a]);
    j["grad_u"] = grads;
    j["layout"] = pot.layout == Layout::collocated ? "collocated" : "staggered";
    return j;
}

SolverOptions solver_options_from_json(const json& j) {
    const char* what = "solver options";
    check_keys(j,
               {"nt", "max_iter", "tol_feas", "tol_gap", "sigma_blob", "step_ratio", "adaptive_steps", "relaxation",
                "check_every"},
               what);
    SolverOptions o;
    get_optional(j, "nt", o.nt, what);
    get_optional(j, "max_iter", o.max_iter, what);
    get_optional(j, "tol_feas", o.tol_feas, what);
    get_optional(j, "tol_gap", o.tol_gap, what);
    get_optional(j, "sigma_blob", o.sigma_blob, what);
    get_optional(j, "step_ratio", o.step_ratio, what);
    get_optional(j, "adaptive_steps", o.adaptive_steps, what);
    get_optional(j, "relaxation", o.relaxation, what);
    get_optional(j, "check_every", o.check_every, what);
    return o;
}

json to_json(const SolverOptions& o) {
    return {{"nt", o.nt},
            {"max_iter", o.max_iter},
            {"tol_feas", o.tol_feas},
            {"tol_gap", o.tol_gap},
            {"sigma_blob", o.sigma_blob},
            {"step_ratio", o.step_ratio},
            {"adaptive_steps", o.adaptive_steps},
            {"relaxation", o.relaxation},
            {"check_every", o.check_every}};
}

json to_json(const SolverReport& r) {
    return {{"d2", r.d2},
            {"d", std::sqrt(std::max(r.d2, 0.0))},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"primal_residual", r.primal_residual},
            {"dual_residual", r.dual_residual},
            {"feasibility", r.feasibility},
            {"energy_gap", r.energy_gap},
            {"message", r.message},
            {"energy_history", r.energy_history}};
}

int write_path(const fs::path& dir, const SpaceTimePath& path) {
    path.validate();
    fs::create_directories(dir);
    json frames = json::array();
    const int n = static_cast<int>(path.densities.size());
    for (int k = 0; k < n; ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04d.json", k);
        json frame = {{"t", path.times[k]}, {"rho", to_json(path.densities[k])}};
        if (k < static_cast<int>(path.steps())) {
            frame["potential"] = to_json(path.potentials[k]);
            frame["step_energy"] = path.step_energy[k];
        }
        write_json(dir / name, frame);
        frames.push_back({{"t", path.times[k]}, {"file", name}});
    }
    write_json(dir / "index.json",
               {{"frames", frames}, {"step_energy", path.step_energy}, {"total_energy", path.total_energy()}});
    return n;
}

SpaceTimePath read_path(const fs::path& dir) {
    const json index = read_json(dir / "index.json");
    SpaceTimePath path;
    for (const auto& entry : index.at("frames")) {
        const json frame = read_json(dir / entry.at("file").get<std::string>());
        path.times.push_back(frame.at("t").get<double>());
        path.densities.push_back(grid_measure_from_json(frame.at("rho")));
        if (frame.contains("potential")) {
            path.potentials.push_back(potential_from_json(frame.at("potential")));
            path.step_energy.push_back(frame.at("step_energy").get<double>());
        }
    }
    path.validate();
    return path;
}

std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream out;
    out << "t,particle_id,x";
    if (traj.dim == 2) out << ",y";
    out << ",k\n";
    for (std::size_t j = 0; j < traj.times.size(); ++j) {
        const auto& ps = traj.states[j];
        for (std::size_t i = 0; i < ps.size(); ++i) {
            out << csv_number(traj.times[j]) << ',' << i << ',' << csv_number(ps[i].x[0]);
            if (traj.dim == 2) out << ',' << csv_number(ps[i].x[1]);
            out << ',' << csv_number(ps[i].k) << '\n';
        }
    }
    return out.str();
}

std::string flow_trace_csv(const FlowTrace& trace) {
    std::ostringstream out;
    out << "t,entropy,dissipation,mass,l2_error,min_rho\n";
    for (const auto& s : trace.samples)
        out << csv_number(s.t) << ',' << csv_number(s.entropy) << ',' << csv_number(s.dissipation) << ','
            << csv_number(s.mass) << ',' << csv_number(s.l2_error) << ',' << csv_number(s.min_rho) << '\n';
    return out.str();
}

json to_json(const HessianComparison& h) {
    return {{"formula_value", h.formula_value}, {"fd_value", h.fd_value}, {"rel_err", h.rel_err}};
}

json to_json(const BecknerCertificate& c) {
    return {{"C_Omega", c.C_Omega},
            {"samples_checked", c.samples_checked},
            {"samples_skipped", c.samples_skipped},
            {"min_margin", c.min_margin},
            {"seed", c.seed}};
}

BecknerCertificate beckner_certificate_from_json(const json& j) {
    const char* what = "beckner certificate";
    check_keys(j, {"C_Omega", "samples_checked", "samples_skipped", "min_margin", "seed", "validation"}, what);
    BecknerCertificate c;
    c.C_Omega = get<double>(j, "C_Omega", what);
    if (!(c.C_Omega > 0.0)) throw FormatError("beckner certificate: C_Omega must be positive");
    get_optional(j, "samples_checked", c.samples_checked, what);
    get_optional(j, "samples_skipped", c.samples_skipped, what);
    get_optional(j, "min_margin", c.min_margin, what);
    get_optional(j, "seed", c.seed, what);
    return c;
}

}  // namespace wfr::io
