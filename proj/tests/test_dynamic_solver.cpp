#include <doctest.h>

#include <cmath>
#include <random>

#include "wfr/closed_form.hpp"
#include "wfr/dynamic_solver.hpp"

using namespace wfr;

namespace {

double prox_objective(const PerspectivePoint& x, const PerspectivePoint& p, double tau) {
    double m2 = x.s * x.s, d2 = (x.rho - p.rho) * (x.rho - p.rho) + (x.s - p.s) * (x.s - p.s);
    for (int i = 0; i < 4; ++i) {
        m2 += x.w[i] * x.w[i];
        d2 += (x.w[i] - p.w[i]) * (x.w[i] - p.w[i]);
    }
    const double f = m2 == 0.0 ? 0.0 : (x.rho > 0.0 ? m2 / (2.0 * x.rho) : 1e300);
    return f + d2 / (2.0 * tau);
}

// Oracle: for fixed rho the momenta shrink by rho/(rho+tau); the remaining
// one-dimensional problem is scanned on a lattice and refined by golden section.
double prox_oracle_min(const PerspectivePoint& p, double tau) {
    auto h = [&](double r) {
        PerspectivePoint x{r, p.w, p.s};
        const double f = r / (r + tau);
        x.s *= f;
        for (double& w : x.w) w *= f;
        return prox_objective(x, p, tau);
    };
    double best = prox_objective({}, p, tau), arg = 0.0;
    const double top = std::abs(p.rho) + 10.0;
    for (int i = 1; i <= 20000; ++i) {
        const double r = top * i / 20000.0;
        if (h(r) < best) best = h(r), arg = r;
    }
    double a = std::max(arg - top / 20000.0, 1e-300), b = arg + top / 20000.0;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 200; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (h(c) < h(d)) b = d; else a = c;
    }
    return std::min(best, h(0.5 * (a + b)));
}

StaggeredField random_field(const Grid& g, int nt, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    StaggeredField f = StaggeredField::zeros(g, nt);
    for (double& x : f.rho) x = n(rng);
    for (auto& w : f.w)
        for (double& x : w) x = n(rng);
    for (double& x : f.s) x = n(rng);
    return f;
}

double field_dot(const StaggeredField& a, const StaggeredField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rho.size(); ++i) s += a.rho[i] * b.rho[i];
    for (int ax = 0; ax < 2; ++ax)
        for (std::size_t i = 0; i < a.w[ax].size(); ++i) s += a.w[ax][i] * b.w[ax][i];
    for (std::size_t i = 0; i < a.s.size(); ++i) s += a.s[i] * b.s[i];
    return s;
}

StaggeredField minus(StaggeredField a, const StaggeredField& b) {
    for (std::size_t i = 0; i < a.rho.size(); ++i) a.rho[i] -= b.rho[i];
    for (int ax = 0; ax < 2; ++ax)
        for (std::size_t i = 0; i < a.w[ax].size(); ++i) a.w[ax][i] -= b.w[ax][i];
    for (std::size_t i = 0; i < a.s.size(); ++i) a.s[i] -= b.s[i];
    return a;
}

GridMeasure bump(const Grid& g, double centre, double width, double mass) {
    std::vector<double> v(g.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double x = g.center(0, static_cast<int>(k)) - centre;
        v[k] = std::exp(-x * x / (2 * width * width));
    }
    GridMeasure r(g, v);
    return r.scaled(mass / r.mass());
}

// (1 - t^2)^2 rho0: the squeeze path run at non-constant speed.
SpaceTimePath accelerated_squeeze(const GridMeasure& rho0, int nt) {
    SpaceTimePath path;
    const Grid& g = rho0.grid();
    for (int k = 0; k <= nt; ++k) {
        const double t = static_cast<double>(k) / nt;
        path.times.push_back(t);
        path.densities.push_back(rho0.scaled(std::pow(1.0 - t * t, 2)));
    }
    for (int k = 0; k < nt; ++k) {
        const double tm = (k + 0.5) / nt;
        PotentialField pot = PotentialField::zeros(g);
        for (double& u : pot.u) u = -4.0 * tm / (1.0 - tm * tm);
        std::vector<double> mid(g.size());
        for (std::size_t c = 0; c < mid.size(); ++c) mid[c] = 0.5 * (path.densities[k][c] + path.densities[k + 1][c]);
        path.step_energy.push_back(h1_norm_squared(GridMeasure(g, std::move(mid)), pot));
        path.potentials.push_back(std::move(pot));
    }
    return path;
}

}  // namespace

TEST_CASE("perspective prox against a scanned oracle") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 40; ++trial) {
        PerspectivePoint p{2.0 * n(rng), {n(rng), n(rng), 0.0, 0.0}, n(rng)};
        const double tau = std::exp(n(rng));
        const auto x = prox_energy(p, tau);
        const double got = prox_objective(x, p, tau);
        const double want = prox_oracle_min(p, tau);
        CHECK(x.rho >= 0.0);
        CHECK(got <= want + 1e-9 * (1.0 + std::abs(want)));
        CHECK(got == doctest::Approx(want).epsilon(1e-8));
    }
    // Deep negative rho with small momentum: the prox is the apex.
    const auto apex = prox_energy({-5.0, {0.1, 0.0, 0.0, 0.0}, 0.1}, 1.0);
    CHECK(apex.rho == 0.0);
    CHECK(apex.s == 0.0);
    CHECK_THROWS_AS(prox_energy({}, 0.0), InvalidArgument);
}

TEST_CASE("continuity projection is an orthogonal projection onto the constraint") {
    std::mt19937_64 rng(5);
    for (const Grid& g : {Grid::line(12, 0.0, 1.0), Grid::rect(6, 5, 0.0, 1.0, 0.0, 2.0)}) {
        const int nt = 7;
        const GridMeasure r0(g, std::vector<double>(g.size(), 1.0));
        const GridMeasure r1(g, std::vector<double>(g.size(), 0.5));
        ContinuityProjector proj(g, nt);

        StaggeredField f = random_field(g, nt, rng);
        const StaggeredField raw = f;
        proj.project(f, r0, r1);

        double res = 0.0;
        for (double r : continuity_residual(f)) res = std::max(res, std::abs(r));
        CHECK(res < 1e-10);
        for (std::size_t c = 0; c < g.size(); ++c) {
            CHECK(f.rho[c] == 1.0);
            CHECK(f.rho[nt * g.size() + c] == 0.5);
        }

        StaggeredField again = f;
        proj.project(again, r0, r1);
        CHECK(std::sqrt(field_dot(minus(again, f), minus(again, f))) < 1e-10);

        // Residual is orthogonal to every feasible direction.
        StaggeredField other = random_field(g, nt, rng);
        project_continuity(other, r0, r1);
        const double ip = field_dot(minus(raw, f), minus(other, f));
        CHECK(std::abs(ip) < 1e-9 * std::sqrt(field_dot(raw, raw) * field_dot(other, other)));
    }
}

TEST_CASE("staggered energy of a uniform source") {
    const Grid g = Grid::line(10, 0.0, 2.0);
    StaggeredField f = StaggeredField::zeros(g, 4);
    for (double& r : f.rho) r = 2.0;
    for (double& s : f.s) s = 1.0;
    // int_0^1 int s^2/rho = volume / 2.
    CHECK(staggered_energy(f) == doctest::Approx(1.0).epsilon(1e-14));
    for (double& s : f.s) s = 0.0;
    CHECK(staggered_energy(f) == 0.0);
}

TEST_CASE("solver on small grids") {
    const Grid g = Grid::line(16, -2.0, 2.0);
    SolverOptions opts;
    opts.nt = 12;
    opts.max_iter = 4000;

    const GridMeasure a = bump(g, -0.3, 0.4, 1.0);
    const auto same = solve_distance(a, a, opts);
    CHECK(same.report.d2 < 1e-6);

    const auto prop = solve_distance(a, a.scaled(0.25), opts);
    CHECK(prop.report.d2 == doctest::Approx(std::pow(dist_proportional(1.0, 0.25), 2)).epsilon(0.03));
    CHECK(prop.report.feasibility < opts.tol_feas);
    CHECK(prop.path.densities.size() == 13);
    CHECK(prop.path.total_energy() == doctest::Approx(prop.report.d2).epsilon(0.03));

    SolverOptions bad = opts;
    bad.nt = 0;
    CHECK_THROWS_AS(solve_distance(a, a, bad), InvalidArgument);
}

TEST_CASE("arclength reparametrisation restores constant speed") {
    const Grid g = Grid::line(8, 0.0, 1.0);
    const GridMeasure rho(g, std::vector<double>(8, 1.0));
    const auto path = accelerated_squeeze(rho, 512);
    // Continuous energy 16 m / 3; at constant speed it drops to 4 m.
    CHECK(reparametrize_arclength(path).total_energy() == doctest::Approx(4.0).epsilon(0.01));
    CHECK(path.total_energy() == doctest::Approx(16.0 / 3.0).epsilon(0.02));
    const auto even = reparametrize_arclength(path);
    CHECK(even.total_energy() <= path.total_energy());
    CHECK(even.total_energy() / path.total_energy() == doctest::Approx(0.75).epsilon(0.02));
    for (double e : even.step_energy) CHECK(e == doctest::Approx(even.step_energy.front()).epsilon(1e-12));

    const auto speeds = measured_speeds(squeeze_path(rho, 64));
    for (std::size_t k = 0; k + 4 < speeds.size(); ++k) CHECK(speeds[k] == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("mass bound and Hoelder estimates on the squeeze path") {
    const Grid g = Grid::line(8, 0.0, 1.0);
    const auto diag = path_diagnostics(squeeze_path(GridMeasure(g, std::vector<double>(8, 1.5)), 32));
    CHECK(diag.ok);
    CHECK(diag.max_mass == doctest::Approx(1.5));
    CHECK(diag.mass_margin > 0.0);
    CHECK(diag.mass_holder_margin >= 0.0);
    CHECK(diag.pairs_checked > 0);
}
