#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "wfr/closed_form.hpp"
#include "wfr/io.hpp"

using namespace wfr;
using io::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("wfr_io_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("grid measure round trip") {
    const Grid g = Grid::rect(3, 2, -1.0, 2.0, 0.0, 1.0);
    const GridMeasure rho(g, {0.1, 0.2, 0.3, 0.4, 0.5, 1.0 / 3.0});
    const json j = io::to_json(rho);
    CHECK(j.at("dim") == 2);
    CHECK(j.at("shape") == json::array({3, 2}));
    const auto back = io::grid_measure_from_json(json::parse(j.dump()));
    CHECK(back.grid().shape == g.shape);
    for (std::size_t k = 0; k < rho.size(); ++k) CHECK(back[k] == rho[k]);

    json extra = j;
    extra["colour"] = "red";
    CHECK_THROWS_AS(io::grid_measure_from_json(extra), io::FormatError);
    json short_values = j;
    short_values["values"].erase(0);
    CHECK_THROWS_AS(io::grid_measure_from_json(short_values), InvalidArgument);
}

TEST_CASE("dirac measure round trip and rasterisation on load") {
    const json j = json::parse(R"({"atoms":[{"x":[0.25],"k":1.5},{"x":[-0.5],"k":0.5}]})");
    CHECK(io::is_dirac_json(j));
    const auto mu = io::dirac_measure_from_json(j);
    CHECK(mu.dim == 1);
    CHECK(mu.mass() == doctest::Approx(2.0));
    CHECK(io::to_json(mu) == j);
    CHECK_THROWS_AS(io::dirac_measure_from_json(json::parse(R"({"atoms":[{"x":[0],"k":1,"q":2}]})")),
                    io::FormatError);

    const auto dir = scratch("dirac");
    io::write_json(dir / "mu.json", j);
    const Grid g = Grid::line(64, -2.0, 2.0);
    const auto rho = io::load_measure(dir / "mu.json", &g);
    CHECK(rho.mass() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(io::load_measure(dir / "mu.json"), InvalidArgument);
    CHECK_THROWS_AS(io::read_json(dir / "missing.json"), io::FormatError);
}

TEST_CASE("solver options and report") {
    const auto opts = io::solver_options_from_json(
        json::parse(R"({"nt":16,"max_iter":500,"tol_feas":1e-9,"tol_gap":0.02,"sigma_blob":0.1})"));
    CHECK(opts.nt == 16);
    CHECK(opts.max_iter == 500);
    CHECK(opts.tol_gap == 0.02);
    CHECK(opts.relaxation == SolverOptions{}.relaxation);
    CHECK(io::solver_options_from_json(io::to_json(opts)).sigma_blob == 0.1);
    CHECK_THROWS_AS(io::solver_options_from_json(json::parse(R"({"cg_tol":1e-10})")), io::FormatError);

    SolverReport rep;
    rep.d2 = 0.25;
    rep.converged = true;
    const json r = io::to_json(rep);
    CHECK(r.at("d2") == 0.25);
    CHECK(r.at("d") == 0.5);
    CHECK(r.at("converged") == true);
}

TEST_CASE("path directory round trip") {
    const Grid g = Grid::line(6, 0.0, 1.0);
    const auto path = squeeze_path(GridMeasure(g, std::vector<double>(6, 2.0)), 5);
    const auto dir = scratch("path");
    CHECK(io::write_path(dir, path) == 6);
    CHECK(std::filesystem::exists(dir / "frame_0005.json"));
    CHECK(std::filesystem::exists(dir / "index.json"));
    const auto back = io::read_path(dir);
    CHECK(back.steps() == 5);
    CHECK(back.total_energy() == doctest::Approx(path.total_energy()).epsilon(1e-15));
    CHECK(back.densities[2][3] == path.densities[2][3]);
    CHECK(back.potentials[4].u[0] == path.potentials[4].u[0]);
}

TEST_CASE("csv output") {
    CHECK(io::csv_number(1.0 / 3.0) == "0.3333333333");
    CHECK(io::csv_number(2.0) == "2");

    FlowTrace trace;
    trace.samples.push_back({0.5, 1.0, 2.0, 3.0, 4.0, 0.1});
    CHECK(io::flow_trace_csv(trace) == "t,entropy,dissipation,mass,l2_error,min_rho\n0.5,1,2,3,4,0.1\n");

    Trajectory traj;
    traj.dim = 2;
    traj.times = {0.0};
    traj.states = {{Particle{{1.0, 2.0}, 0.5}}};
    CHECK(io::trajectory_csv(traj) == "t,particle_id,x,y,k\n0,0,1,2,0.5\n");
}

TEST_CASE("json doubles survive a text round trip") {
    const double v = 0.1 + 0.2;
    const json j = {{"v", v}};
    CHECK(json::parse(j.dump()).at("v").get<double>() == v);
}

TEST_CASE("Hessian and Beckner documents") {
    const json h = io::to_json(HessianComparison{1.0, 1.01, 0.0099});
    CHECK(h.at("fd_value") == 1.01);
    BecknerCertificate c;
    c.C_Omega = 0.2;
    c.samples_checked = 10;
    c.min_margin = 0.05;
    c.seed = 42;
    const auto back = io::beckner_certificate_from_json(io::to_json(c));
    CHECK(back.C_Omega == 0.2);
    CHECK(back.seed == 42);
    CHECK(back.samples_checked == 10);
}
