#include <doctest.h>

#include <cmath>
#include <numbers>

#include "wfr/closed_form.hpp"

using namespace wfr;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("distance to zero and to a multiple") {
    CHECK(dist_to_zero(1.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(dist_to_zero(0.0) == 0.0);
    CHECK(dist_to_zero(2.25) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(dist_proportional(1.0, 1.0) == 0.0);
    CHECK(dist_proportional(1.0, 0.25) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(dist_proportional(3.0, 0.0) == doctest::Approx(dist_to_zero(3.0)).epsilon(1e-15));
    // 2 sqrt(m) |1 - sqrt(lambda)| is symmetric under (m, lambda) -> (lambda m, 1/lambda).
    CHECK(dist_proportional(4.0 * 0.7, 1.0 / 4.0) == doctest::Approx(dist_proportional(0.7, 4.0)).epsilon(1e-14));
    CHECK_THROWS_AS(dist_to_zero(-1.0), InvalidArgument);
    CHECK_THROWS_AS(dist_proportional(1.0, -0.5), InvalidArgument);
}

TEST_CASE("one-point measures below, at and beyond the threshold") {
    const auto quarter = dirac_distance({1.0, 1.0, 1.5707963});
    CHECK(quarter.d2 == doctest::Approx(8.0 - 4.0 * std::sqrt(2.0)).epsilon(1e-7));
    CHECK(quarter.geodesic.strategy == Strategy::transport);

    const auto far = dirac_distance({1.0, 1.0, 4.0});
    CHECK(far.d2 == doctest::Approx(8.0).epsilon(1e-15));
    CHECK(far.geodesic.strategy == Strategy::stationary);

    CHECK(dirac_distance({1.0, 1.0, pi}).geodesic.strategy == Strategy::mixed);
    CHECK(dirac_distance({1.0, 1.0, 3.14159265}).geodesic.strategy == Strategy::transport);
    CHECK(dirac_distance({1.0, 1.0, 3.14159265, 1e-8}).geodesic.strategy == Strategy::mixed);
    CHECK(dirac_distance({1.0, 1.0, 3.14159266, 1e-8}).geodesic.strategy == Strategy::mixed);

    // Continuity across pi for unequal charges.
    const double below = dirac_distance({0.5, 2.0, pi - 1e-9}).d2;
    const double above = dirac_distance({0.5, 2.0, pi + 1e-9}).d2;
    CHECK(std::abs(below - above) < 1e-8);
    CHECK(above == doctest::Approx(10.0).epsilon(1e-15));

    CHECK(dirac_distance({2.0, 0.0, 0.3}).d2 == doctest::Approx(8.0));
    CHECK_THROWS_AS(dirac_distance({-1.0, 1.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(dirac_distance({1.0, 1.0, -0.1}), InvalidArgument);
}

TEST_CASE("closed form equals the minimum of the three-particle ansatz") {
    // Brute-force oracle: minimise the mixed energy over a lattice of
    // transported charges (gamma0, gamma1).
    for (double xi : {0.4, 1.2, 2.0, 3.0, 3.5, 5.0})
        for (auto [k0, k1] : {std::pair{1.0, 1.0}, std::pair{0.3, 2.0}}) {
            double best = 1e300;
            const int n = 200;
            for (int i = 0; i <= n; ++i)
                for (int j = 0; j <= n; ++j)
                    best = std::min(best, mixed_energy(k0, k1, xi, k0 * i / n, k1 * j / n));
            CHECK(dirac_distance({k0, k1, xi}).d2 == doctest::Approx(best).epsilon(1e-12));
        }
}

TEST_CASE("transport geodesic coefficients") {
    const auto g = transport_geodesic(1.0, 1.0, pi / 2);
    CHECK(g.a == doctest::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-15));
    CHECK(g.b == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(transport_energy(1.0, 1.0, pi / 2) == doctest::Approx(4.0 * g.a));
    const auto p0 = dirac_geodesic_eval(g, 0.0), p1 = dirac_geodesic_eval(g, 1.0);
    CHECK(p0.k == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p1.k == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p0.s == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
    CHECK(p1.s == doctest::Approx(pi / 2).epsilon(1e-14));
    CHECK_THROWS_AS(transport_geodesic(1.0, 1.0, 2.0 * pi), InvalidArgument);

    // Identical atoms: nothing moves and the energy vanishes.
    const auto still = transport_geodesic(1.5, 1.5, 0.0);
    CHECK(transport_energy(1.5, 1.5, 0.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
    CHECK(dirac_geodesic_eval(still, 0.5).k == doctest::Approx(1.5));
}

TEST_CASE("geodesic jet matches central differences of the geodesic") {
    const auto g = transport_geodesic(0.5, 2.0, 2.2);
    const double h = 1e-5;
    for (double t : {0.1, 0.45, 0.9}) {
        const auto j = dirac_geodesic_jet(g, t);
        const auto m = dirac_geodesic_eval(g, t - h), p = dirac_geodesic_eval(g, t + h), c = dirac_geodesic_eval(g, t);
        CHECK(j.dk == doctest::Approx((p.k - m.k) / (2 * h)).epsilon(1e-8));
        CHECK(j.ds == doctest::Approx((p.s - m.s) / (2 * h)).epsilon(1e-8));
        CHECK(j.ddk == doctest::Approx((p.k - 2 * c.k + m.k) / (h * h)).epsilon(1e-4));
        CHECK(j.dds == doctest::Approx((p.s - 2 * c.s + m.s) / (h * h)).epsilon(1e-4));
    }
}

TEST_CASE("particle energy of the closed-form geodesic is 4a") {
    // Simpson quadrature of k (|d log k/dt|^2 + |x'|^2) against E = 4a.
    for (double xi : {0.3, 1.0, 2.9}) {
        const auto g = transport_geodesic(0.7, 1.9, xi);
        const int n = 2000;
        double sum = 0.0;
        for (int i = 0; i <= n; ++i) {
            const auto j = dirac_geodesic_jet(g, static_cast<double>(i) / n);
            const double f = j.dk * j.dk / j.k + j.k * j.ds * j.ds;
            sum += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
        }
        CHECK(sum / (3.0 * n) == doctest::Approx(4.0 * g.a).epsilon(1e-10));
    }
}

TEST_CASE("gap between W2 and d for nearby unit atoms") {
    for (double xi : {1e-3, 0.05, 0.2, 0.4}) {
        const double ratio = w2_vs_d_gap(xi) * 48.0 / std::pow(xi, 4);
        CHECK(ratio > 0.7);
        CHECK(ratio < 1.3);
    }
    // Direct evaluation where cancellation is harmless.
    CHECK(w2_vs_d_gap(1.0) == doctest::Approx(1.0 - 16.0 * std::pow(std::sin(0.25), 2)).epsilon(1e-14));
    CHECK(w2_vs_d_gap(1e-3) == doctest::Approx(1e-12 / 48.0).epsilon(1e-5));
    CHECK_THROWS_AS(w2_vs_d_gap(4.0), InvalidArgument);
}

TEST_CASE("squeeze path to zero") {
    const Grid g = Grid::line(16, -1.0, 1.0);
    const GridMeasure rho(g, std::vector<double>(16, 0.75));
    const double m0 = rho.mass();
    double prev_err = 1e300;
    for (int nt : {8, 16, 32, 64}) {
        const auto path = squeeze_path(rho, nt);
        CHECK(path.densities.back().mass() == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
        const double err = std::abs(path.total_energy() - 4.0 * m0);
        CHECK(err < 0.6 * prev_err);
        prev_err = err;
    }
    CHECK(prev_err / (4.0 * m0) < 0.025);
}
