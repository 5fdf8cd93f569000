#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "wfr/measures.hpp"

using namespace wfr;

namespace {

// Exact LP optimum of max sum c_i phi_i subject to |phi_i| <= a,
// |phi_{i+1} - phi_i| <= (1 - a) h, 0 <= a <= 1, by enumerating every vertex
// (n + 1 active constraints out of the list) of the feasible polytope.
double lp_vertex_enumeration(const std::vector<double>& c, double h) {
    const int n = static_cast<int>(c.size());
    const int nv = n + 1;  // phi_0..phi_{n-1}, a
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    auto add = [&](std::vector<double> row, double b) {
        rows.push_back(std::move(row));
        rhs.push_back(b);
    };
    for (int i = 0; i < n; ++i)
        for (double s : {1.0, -1.0}) {
            std::vector<double> r(nv, 0.0);
            r[i] = s;
            r[n] = -1.0;
            add(r, 0.0);
        }
    for (int i = 0; i + 1 < n; ++i)
        for (double s : {1.0, -1.0}) {
            std::vector<double> r(nv, 0.0);
            r[i + 1] = s;
            r[i] = -s;
            r[n] = h;
            add(r, h);
        }
    {
        std::vector<double> r(nv, 0.0);
        r[n] = 1.0;
        add(r, 1.0);
        r[n] = -1.0;
        add(r, 0.0);
    }
    const int m = static_cast<int>(rows.size());
    double best = -1e300;
    std::vector<int> pick(nv);
    for (int i = 0; i < nv; ++i) pick[i] = i;
    while (true) {
        std::vector<std::vector<double>> A(nv, std::vector<double>(nv + 1));
        for (int i = 0; i < nv; ++i) {
            for (int j = 0; j < nv; ++j) A[i][j] = rows[pick[i]][j];
            A[i][nv] = rhs[pick[i]];
        }
        bool singular = false;
        for (int col = 0; col < nv && !singular; ++col) {
            int piv = col;
            for (int r = col + 1; r < nv; ++r)
                if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
            if (std::abs(A[piv][col]) < 1e-12) {
                singular = true;
                break;
            }
            std::swap(A[piv], A[col]);
            for (int r = 0; r < nv; ++r) {
                if (r == col) continue;
                const double f = A[r][col] / A[col][col];
                for (int j = col; j <= nv; ++j) A[r][j] -= f * A[col][j];
            }
        }
        if (!singular) {
            std::vector<double> x(nv);
            for (int i = 0; i < nv; ++i) x[i] = A[i][nv] / A[i][i];
            bool feasible = true;
            for (int r = 0; r < m && feasible; ++r) {
                double lhs = 0.0;
                for (int j = 0; j < nv; ++j) lhs += rows[r][j] * x[j];
                feasible = lhs <= rhs[r] + 1e-10;
            }
            if (feasible) {
                double v = 0.0;
                for (int i = 0; i < n; ++i) v += c[i] * x[i];
                best = std::max(best, v);
            }
        }
        int i = nv - 1;
        while (i >= 0 && pick[i] == m - nv + i) --i;
        if (i < 0) break;
        ++pick[i];
        for (int j = i + 1; j < nv; ++j) pick[j] = pick[j - 1] + 1;
    }
    return best;
}

// W2^2 between piecewise-constant densities by midpoint quadrature of the
// quantile functions, each inverted independently by bisection.
double w2_quadrature(const GridMeasure& a, const GridMeasure& b, int samples) {
    auto quantile = [](const GridMeasure& r, double s) {
        const Grid& g = r.grid();
        const double total = r.mass();
        double lo = g.origin[0], hi = g.origin[0] + g.length(0);
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            double cdf = 0.0;
            for (int k = 0; k < g.shape[0]; ++k) {
                const double left = g.origin[0] + k * g.spacing[0];
                const double covered = std::clamp(mid - left, 0.0, g.spacing[0]);
                cdf += r[k] * covered;
            }
            (cdf / total < s ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    double sum = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double s = (i + 0.5) / samples;
        const double d = quantile(a, s) - quantile(b, s);
        sum += d * d;
    }
    return sum / samples * a.mass();
}

}  // namespace

TEST_CASE("mass of simple densities") {
    const Grid g = Grid::line(64, 0.0, 1.0);
    CHECK(mass(GridMeasure(g, std::vector<double>(64, 1.0))) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(mass(GridMeasure::zeros(g)) == 0.0);
    std::vector<double> half(64, 0.0);
    std::fill(half.begin(), half.begin() + 32, 2.0);
    CHECK(mass(GridMeasure(g, half)) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("grid measure invariants") {
    const Grid g = Grid::line(4, 0.0, 1.0);
    CHECK_THROWS_AS(GridMeasure(g, {1.0, -0.1, 0.0, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(GridMeasure(g, {1.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(entropy(GridMeasure::zeros(g), GridMeasure::zeros(Grid::line(5, 0.0, 1.0))), InvalidArgument);
    const GridMeasure r(g, {0.5, 1.0, 1.5, 2.0});
    CHECK(r.mass() == doctest::Approx(1.25));
    CHECK(r.scaled(2.0).mass() == doctest::Approx(2.5));
}

TEST_CASE("entropy examples") {
    const Grid g = Grid::line(32, 0.0, 1.0);
    const GridMeasure one(g, std::vector<double>(32, 1.0));
    const GridMeasure two(g, std::vector<double>(32, 2.0));
    CHECK(entropy(one, one) == 0.0);
    CHECK(entropy(GridMeasure::zeros(g), one) == doctest::Approx(0.5));
    CHECK(entropy(two, one) == doctest::Approx(0.5));
}

TEST_CASE("mass and entropy converge at second order under refinement") {
    auto errors = [](int n) {
        const Grid g = Grid::line(n, 0.0, 1.0);
        std::vector<double> v(n), m(n, 1.0);
        for (int k = 0; k < n; ++k) v[k] = 1.0 + std::sin(std::numbers::pi * g.center(0, k));
        const GridMeasure r(g, v);
        const double exact_mass = 1.0 + 2.0 / std::numbers::pi;
        const double exact_entropy = 0.25;  // 1/2 int sin^2(pi x)
        return std::pair{std::abs(r.mass() - exact_mass), std::abs(entropy(r, GridMeasure(g, m)) - exact_entropy)};
    };
    const auto [m1, e1] = errors(32);
    const auto [m2, e2] = errors(64);
    CHECK(std::log2(m1 / m2) == doctest::Approx(2.0).epsilon(0.05));
    // The entropy integrand sin^2 is resolved exactly by the midpoint rule.
    CHECK(e1 < 1e-14);
    CHECK(e2 < 1e-14);
}

TEST_CASE("bounded Lipschitz distance: trivial cases") {
    const Grid g = Grid::line(32, 0.0, 4.0);
    std::vector<double> v(32, 0.0);
    for (int k = 12; k < 20; ++k) v[k] = 1.0;
    const GridMeasure r(g, v);
    const auto same = bounded_lipschitz(r, r, 1e-8);
    CHECK(std::abs(same.lower_bound) <= 1e-8);

    const auto from_zero = bounded_lipschitz(GridMeasure::zeros(g), r, 1e-8);
    CHECK(from_zero.lower_bound <= r.mass() + 1e-12);
    CHECK(from_zero.lower_bound >= 0.0);
    CHECK(bounded_lipschitz_norm(g, from_zero.witness.u) <= 1.0 + 1e-12);
}

TEST_CASE("bounded Lipschitz distance matches an exhaustive LP on a 6-cell grid") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 2.0);
    for (int trial = 0; trial < 3; ++trial) {
        const Grid g = Grid::line(6, 0.0, 3.0);
        std::vector<double> a(6), b(6), c(6);
        for (int k = 0; k < 6; ++k) {
            a[k] = U(rng);
            b[k] = U(rng);
            c[k] = (b[k] - a[k]) * g.cell_volume();
        }
        const double oracle = lp_vertex_enumeration(c, g.spacing[0]);
        const auto res = bounded_lipschitz(GridMeasure(g, a), GridMeasure(g, b), 1e-6);
        CHECK(res.lower_bound <= oracle + 1e-9);
        CHECK(std::abs(res.lower_bound - oracle) <= 1e-6);
        CHECK(res.upper_bound >= oracle - 1e-9);
    }
}

TEST_CASE("bounded Lipschitz distance: symmetry and triangle inequality") {
    const Grid g = Grid::line(24, 0.0, 3.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto rnd = [&] {
        std::vector<double> v(24);
        for (double& x : v) x = U(rng);
        return GridMeasure(g, v);
    };
    const double tol = 1e-6;
    for (int t = 0; t < 3; ++t) {
        const auto a = rnd(), b = rnd(), c = rnd();
        const double ab = bounded_lipschitz(a, b, tol).lower_bound;
        const double ba = bounded_lipschitz(b, a, tol).lower_bound;
        const double bc = bounded_lipschitz(b, c, tol).lower_bound;
        const double ac = bounded_lipschitz(a, c, tol).lower_bound;
        CHECK(std::abs(ab - ba) <= 2 * tol);
        CHECK(ac <= ab + bc + 2 * tol);
    }
}

TEST_CASE("exact 1D Wasserstein distance") {
    const Grid g = Grid::line(64, 0.0, 4.0);
    std::vector<double> v(64, 0.0);
    for (int k = 10; k < 14; ++k) v[k] = 1.0;
    const GridMeasure r(g, v);
    CHECK(wasserstein2_1d(r, r) <= 1e-14);
    // Translation by an aligned number of cells: W2 = sqrt(mass) * shift.
    for (int cells : {1, 7, 30}) {
        const auto moved = translate(r, cells);
        CHECK(wasserstein2_1d(r, moved) == doctest::Approx(std::sqrt(r.mass()) * cells * g.spacing[0]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(wasserstein2_1d(r, r.scaled(2.0)), InvalidArgument);
    CHECK_THROWS_AS(wasserstein2_1d(GridMeasure::zeros(g), GridMeasure::zeros(g)), InvalidArgument);
}

TEST_CASE("Wasserstein distance on two cells agrees with quadrature of the quantile functions") {
    const Grid g = Grid::line(2, 0.0, 2.0);
    const GridMeasure a(g, {0.3, 0.7}), b(g, {0.8, 0.2});
    const double oracle = w2_quadrature(a, b, 20000);
    CHECK(wasserstein2_1d(a, b) * wasserstein2_1d(a, b) == doctest::Approx(oracle).epsilon(1e-6));

    const Grid g3 = Grid::line(5, -1.0, 1.5);
    const GridMeasure c(g3, {0.0, 1.0, 0.5, 0.0, 0.5}), d(g3, {0.4, 0.4, 0.4, 0.4, 0.4});
    const double oracle3 = w2_quadrature(c, d, 20000);
    CHECK(std::pow(wasserstein2_1d(c, d), 2) == doctest::Approx(oracle3).epsilon(1e-6));
}

TEST_CASE("rasterised atoms keep their charge") {
    const Grid g = Grid::line(64, -2.0, 2.0);
    DiracMeasure mu;
    mu.atoms = {{{-0.5, 0.0}, 0.7}, {{0.9, 0.0}, 1.3}, {{0.0, 0.0}, 0.0}};
    const auto r = rasterize(mu, g, 2.0 * g.spacing[0]);
    CHECK(r.mass() == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(mu.normalized().atoms.size() == 2);
    DiracMeasure bad;
    bad.atoms = {{{0.0, 0.0}, -1.0}};
    CHECK_THROWS_AS(bad.normalized(), InvalidArgument);
}
