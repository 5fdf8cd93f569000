#pragma once

#include "wfr/grid.hpp"

namespace wfr {

/// d(rho0, 0) for a measure of mass m0.
double dist_to_zero(double m0);

/// d(rho0, lambda rho0) for a measure of mass m0.
double dist_proportional(double m0, double lambda);

enum class Strategy { transport, stationary, mixed };

const char* to_string(Strategy s);

/// rho0 = k0 delta_{x0}, rho1 = k1 delta_{x1}, xi = |x0 - x1|.
struct DiracPairProblem {
    double k0 = 0.0;
    double k1 = 0.0;
    double xi = 0.0;
    /// Separations within this distance of pi are reported as the critical
    /// (mixed) case; the squared distance is unaffected.
    double threshold_tol = 0.0;
    void validate() const;
};

/// Transported charge follows k_t = a (t-b)^2 + c along the straight segment
/// x0 -> x1; gamma0/gamma1 are the charges leaving x0 and reaching x1 by
/// transport. The remainder is annihilated at x0 and created at x1.
struct DiracGeodesic {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double gamma0 = 0.0;
    double gamma1 = 0.0;
    double xi = 0.0;
    Strategy strategy = Strategy::stationary;
};

struct DiracDistance {
    double d2 = 0.0;
    DiracGeodesic geodesic;
};

/// Squared distance and an optimal geodesic between two one-point measures.
/// Below separation pi the charge travels; beyond it, mass is killed at x0
/// and grown at x1; at exactly pi every mixture is optimal and the pure
/// transport split is returned with strategy = mixed.
DiracDistance dirac_distance(const DiracPairProblem& p);

/// Coefficients (a, b, c) of the single-particle minimiser, defined for xi < 2 pi.
/// Returned regardless of optimality; used by dirac_distance and for study of
/// the non-minimal branch pi < xi < 2 pi.
DiracGeodesic transport_geodesic(double k0, double k1, double xi);

/// E_tr = 4a: energy of moving the whole charge as one particle (xi < 2 pi).
double transport_energy(double k0, double k1, double xi);

/// Energy of the three-particle ansatz with transported charges gamma0, gamma1.
double mixed_energy(double k0, double k1, double xi, double gamma0, double gamma1);

struct GeodesicPoint {
    double k = 0.0;
    /// Distance travelled along the segment: x_t = x0 + (x1-x0) s / xi.
    double s = 0.0;
};

/// Charge and arc position of the transported particle at time t.
GeodesicPoint dirac_geodesic_eval(const DiracGeodesic& geo, double t);

/// k, s and their first two time derivatives at t.
struct GeodesicJet {
    double k, dk, ddk;
    double s, ds, dds;
};
GeodesicJet dirac_geodesic_jet(const DiracGeodesic& geo, double t);

/// W2^2 - d^2 for unit Diracs at separation xi in (0, pi).
double w2_vs_d_gap(double xi);

/// rho_t = (1-t)^2 rho0 with u = -2/(1-t), grad u = 0, on nt uniform steps.
/// Each interval carries the potential at its midpoint and the H^1 energy
/// against the interval-averaged density.
SpaceTimePath squeeze_path(const GridMeasure& rho0, int nt);

}  // namespace wfr
