#include <doctest.h>

#include <cmath>
#include <random>

#include "wfr/gradient_flow.hpp"

using namespace wfr;

namespace {

GridMeasure constant(const Grid& g, double v) { return GridMeasure(g, std::vector<double>(g.size(), v)); }

GridMeasure wave(const Grid& g, double base, double amp) {
    std::vector<double> v(g.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = base + amp * std::cos(3.0 * g.center(0, static_cast<int>(k)));
    return GridMeasure(g, v);
}

}  // namespace

TEST_CASE("dissipation and right-hand side for constant fields") {
    const Grid g = Grid::line(32, 0.0, 1.0);
    // rho (rho - m)^2 integrated over the unit interval.
    CHECK(dissipation(constant(g, 2.0), constant(g, 1.0)) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(dissipation(constant(g, 1.0), constant(g, 1.0)) == 0.0);
    for (double r : flow_rhs(constant(g, 2.0), constant(g, 1.5))) CHECK(r == doctest::Approx(-1.0).epsilon(1e-14));
    // rho = m is an equilibrium for any profile.
    const auto m = wave(g, 1.0, 0.4);
    for (double r : flow_rhs(m, m)) CHECK(std::abs(r) < 1e-14);
}

TEST_CASE("gradient structure of the scheme") {
    const Grid g = Grid::rect(12, 10, 0.0, 1.0, 0.0, 1.0);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 5; ++i) {
        const auto rho = random_density(g, rng);
        const auto m = random_density(g, rng, 0.2);
        CHECK(verify_gradient_identity(rho, m) < 1e-12);
        CHECK(tangent_identity_error(rho, m) < 1e-10);
    }
}

TEST_CASE("explicit step guards") {
    const Grid g = Grid::line(16, 0.0, 1.0);
    const auto rho = constant(g, 2.0);
    CHECK(stable_dt(rho) == doctest::Approx(0.25 / (16.0 * 16.0 * 2.0)));
    PopulationProblem p{constant(g, 1.0), rho, 1.0, 2.0 * stable_dt(rho)};
    CHECK_THROWS_AS(step_flow(rho, p), InvalidArgument);
    p.dt = stable_dt(rho);
    CHECK_NOTHROW(step_flow(rho, p));
    p.m = constant(g, 0.0);
    CHECK_THROWS_AS(run_flow(p), InvalidArgument);
}

TEST_CASE("logistic reduction") {
    // rho' = rho (1 - rho) from 1/2: rho(t) = 1 / (1 + e^{-t}).
    const Grid g = Grid::line(16, 0.0, 1.0);
    PopulationProblem p{constant(g, 1.0), constant(g, 0.5), 1.0, 1e-3, 100};
    const auto trace = run_flow(p);
    const double exact = 1.0 / (1.0 + std::exp(-1.0));
    CHECK(trace.final_state[5] == doctest::Approx(exact).epsilon(1e-3));
    CHECK(trace.samples.size() == 11);
    CHECK(trace.samples.back().t == doctest::Approx(1.0));
    CHECK(trace.c0 == doctest::Approx(0.5));
    CHECK(trace.max_entropy_increase <= 0.0);
    CHECK(trace.max_excess_over_m <= 0.0);
    for (const auto& s : trace.samples) CHECK(s.l2_error == doctest::Approx(std::sqrt(2.0 * s.entropy)));
}

TEST_CASE("entropy decreases and mass stays above c0") {
    const Grid g = Grid::line(32, 0.0, 1.0);
    std::mt19937_64 rng(17);
    const auto rho0 = random_density(g, rng);
    const auto m = random_density(g, rng, 0.2, 6, 0.3);
    const double dt = 0.5 * std::min(stable_dt(rho0), stable_dt(m));
    PopulationProblem p{m, rho0, 0.5, dt, 50};
    const auto trace = run_flow(p);
    CHECK(trace.max_entropy_increase <= 0.0);
    CHECK(trace.min_mass_margin >= -1e-12);
    CHECK(trace.samples.back().entropy < trace.samples.front().entropy);
    CHECK(fitted_decay_rate(trace) > 0.0);
}

TEST_CASE("fitted decay rate of an exact exponential") {
    FlowTrace trace;
    for (int i = 0; i <= 10; ++i) {
        FlowSample s;
        s.t = 0.1 * i;
        s.entropy = 3.0 * std::exp(-2.0 * 0.7 * s.t);
        trace.samples.push_back(s);
    }
    CHECK(fitted_decay_rate(trace) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("random densities") {
    const Grid g = Grid::line(50, 0.0, 1.0);
    std::mt19937_64 a(9), b(9);
    const auto x = random_density(g, a, 0.2, 6, 0.5);
    const auto y = random_density(g, b, 0.2, 6, 0.5);
    CHECK(x.min_value() == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(x.max_value() - x.min_value() <= 0.5 + 1e-12);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(x[k] == y[k]);
}

TEST_CASE("Beckner certificate") {
    const Grid g = Grid::line(32, 0.0, 1.0);
    CHECK(beckner_ratio(constant(g, 1.0)) < 0.0);

    const auto cert = estimate_beckner_constant(g, 40, 123);
    CHECK(cert.C_Omega > 0.0);
    CHECK(cert.seed == 123);
    CHECK(cert.samples_checked + cert.samples_skipped == 40);
    CHECK(cert.phi(0.0) == 0.0);
    const double knee = 2.0 * cert.C_Omega;
    CHECK(cert.phi(0.5 * knee) == doctest::Approx(0.25 * knee));
    CHECK(cert.phi(2.0 * knee) == doctest::Approx(2.0 * knee));

    const auto again = estimate_beckner_constant(g, 40, 123);
    CHECK(again.C_Omega == cert.C_Omega);

    const auto val = validate_beckner(cert, g, 40, 456);
    CHECK(val.samples == 40);
    CHECK(val.ok);
    CHECK(val.min_margin >= 0.0);
    CHECK(beckner_margin(cert, constant(g, 1.0), constant(g, 1.0)) == 0.0);

    CHECK_THROWS_AS(estimate_beckner_constant(Grid::line(32, 0.0, 2.0), 10, 1), InvalidArgument);
}
