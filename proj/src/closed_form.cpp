#include "wfr/closed_form.hpp"

#include <cmath>
#include <numbers>

namespace wfr {

double dist_to_zero(double m0) {
    if (!(m0 >= 0.0)) throw InvalidArgument("dist_to_zero: mass must be nonnegative");
    return 2.0 * std::sqrt(m0);
}

double dist_proportional(double m0, double lambda) {
    if (!(m0 >= 0.0) || !(lambda >= 0.0)) throw InvalidArgument("dist_proportional: arguments must be nonnegative");
    return 2.0 * std::sqrt(m0) * std::abs(1.0 - std::sqrt(lambda));
}

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::transport: return "transport";
        case Strategy::stationary: return "stationary";
        case Strategy::mixed: return "mixed";
    }
    return "unknown";
}

void DiracPairProblem::validate() const {
    if (!(k0 >= 0.0) || !(k1 >= 0.0) || !(xi >= 0.0) || !std::isfinite(k0) || !std::isfinite(k1) || !std::isfinite(xi) ||
        !(threshold_tol >= 0.0))
        throw InvalidArgument("dirac problem: charges and separation must be finite and nonnegative");
}

DiracGeodesic transport_geodesic(double k0, double k1, double xi) {
    DiracPairProblem{k0, k1, xi}.validate();
    if (xi >= 2.0 * std::numbers::pi) throw InvalidArgument("transport_geodesic: no minimiser for xi >= 2 pi");
    DiracGeodesic g;
    g.xi = xi;
    g.gamma0 = k0;
    g.gamma1 = k1;
    g.strategy = Strategy::transport;
    const double cs = std::cos(0.5 * xi);
    const double sq = std::sqrt(k0 * k1);
    g.a = k0 + k1 - 2.0 * cs * sq;
    if (g.a > 0.0) {
        g.b = (k0 - cs * sq) / g.a;
        const double sn = std::sin(0.5 * xi);
        g.c = k0 * k1 * sn * sn / g.a;
    } else {
        // xi = 0 and k0 = k1: nothing moves, nothing changes.
        g.a = 0.0;
        g.b = 0.0;
        g.c = k0;
    }
    return g;
}

double transport_energy(double k0, double k1, double xi) { return 4.0 * transport_geodesic(k0, k1, xi).a; }

double mixed_energy(double k0, double k1, double xi, double gamma0, double gamma1) {
    if (gamma0 < 0.0 || gamma0 > k0 || gamma1 < 0.0 || gamma1 > k1)
        throw InvalidArgument("mixed_energy: transported charges out of range");
    return 4.0 * (k0 + k1 - 2.0 * std::cos(0.5 * xi) * std::sqrt(gamma0 * gamma1));
}

DiracDistance dirac_distance(const DiracPairProblem& p) {
    p.validate();
    constexpr double pi = std::numbers::pi;
    const double xi_bar = std::min(p.xi, pi);
    DiracDistance out;
    out.d2 = 4.0 * (p.k0 + p.k1 - 2.0 * std::cos(0.5 * xi_bar) * std::sqrt(p.k0 * p.k1));
    if (out.d2 < 0.0) out.d2 = 0.0;

    if (p.k0 == 0.0 || p.k1 == 0.0) {
        // Pure growth or decay in place: the d(rho, 0) geodesic.
        out.d2 = 4.0 * (p.k0 + p.k1);
        out.geodesic.xi = p.xi;
        out.geodesic.strategy = Strategy::stationary;
        return out;
    }
    const bool critical = std::abs(p.xi - pi) <= p.threshold_tol;
    if (p.xi > pi && !critical) {
        out.geodesic.xi = p.xi;
        out.geodesic.strategy = Strategy::stationary;
        return out;
    }
    out.geodesic = transport_geodesic(p.k0, p.k1, p.xi);
    if (p.xi == pi || critical) out.geodesic.strategy = Strategy::mixed;
    return out;
}

GeodesicJet dirac_geodesic_jet(const DiracGeodesic& g, double t) {
    if (g.strategy == Strategy::stationary) throw InvalidArgument("dirac_geodesic_eval: geodesic has no transported particle");
    GeodesicJet j{};
    const double tb = t - g.b;
    j.k = g.a * tb * tb + g.c;
    j.dk = 2.0 * g.a * tb;
    j.ddk = 2.0 * g.a;
    if (g.xi == 0.0 || g.a == 0.0 || g.c == 0.0) {
        // No displacement (xi = 0) or degenerate arctan arguments.
        return j;
    }
    const double r = std::sqrt(g.a / g.c);
    j.s = 2.0 * (std::atan(tb * r) + std::atan(g.b * r));
    j.ds = 2.0 * std::sqrt(g.a * g.c) / j.k;
    j.dds = -j.ds * j.dk / j.k;
    return j;
}

GeodesicPoint dirac_geodesic_eval(const DiracGeodesic& geo, double t) {
    const auto j = dirac_geodesic_jet(geo, t);
    return {j.k, j.s};
}

double w2_vs_d_gap(double xi) {
    if (!(xi > 0.0) || !(xi < std::numbers::pi)) throw InvalidArgument("w2_vs_d_gap: xi must lie in (0, pi)");
    // xi^2 - 16 sin^2(xi/4), factored to limit cancellation.
    const double q = 0.25 * xi;
    double diff;  // xi - 4 sin(xi/4)
    if (q < 1e-2) {
        const double q3 = q * q * q;
        diff = 4.0 * (q3 / 6.0 - q3 * q * q / 120.0 + q3 * q3 * q / 5040.0);
    } else {
        diff = xi - 4.0 * std::sin(q);
    }
    return diff * (xi + 4.0 * std::sin(q));
}

SpaceTimePath squeeze_path(const GridMeasure& rho0, int nt) {
    if (nt < 1) throw InvalidArgument("squeeze_path: nt must be positive");
    SpaceTimePath path;
    const Grid& g = rho0.grid();
    for (int k = 0; k <= nt; ++k) {
        const double t = static_cast<double>(k) / nt;
        path.times.push_back(t);
        path.densities.push_back(rho0.scaled((1.0 - t) * (1.0 - t)));
    }
    for (int k = 0; k < nt; ++k) {
        const double tm = (k + 0.5) / nt;
        PotentialField pot = PotentialField::zeros(g);
        for (double& u : pot.u) u = -2.0 / (1.0 - tm);
        std::vector<double> mid(g.size());
        for (std::size_t c = 0; c < mid.size(); ++c) mid[c] = 0.5 * (path.densities[k][c] + path.densities[k + 1][c]);
        path.step_energy.push_back(h1_norm_squared(GridMeasure(g, std::move(mid)), pot));
        path.potentials.push_back(std::move(pot));
    }
    return path;
}

}  // namespace wfr
