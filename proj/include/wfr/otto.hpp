#pragma once

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "wfr/grid.hpp"

namespace wfr {

// ---------------------------------------------------------------------------
// Tangent space

/// Solves -div(rho_f grad u) + rho u = zeta with no-flux walls; rho_f is the
/// arithmetic face mean and rho is floored at 1e-12 max(rho).
std::vector<double> solve_tangent_potential(const GridMeasure& rho, std::span<const double> zeta);

/// ||zeta||^2 in the tangent space at rho, equal to <u, zeta> for the
/// potential above.
double tangent_norm_squared(const GridMeasure& rho, std::span<const double> zeta);

/// sum rho u^2 vol + sum over faces rho_f (D_h u)^2 vol.
double metric_speed_squared(const GridMeasure& rho, std::span<const double> u);

// ---------------------------------------------------------------------------
// Particles

/// A charged particle together with the potential it currently sees:
/// u = d/dt log k and v = dx/dt.
struct Particle {
    std::array<double, 2> x{0.0, 0.0};
    double k = 0.0;
    double u = 0.0;
    std::array<double, 2> v{0.0, 0.0};
};

struct ParticleState {
    int dim = 1;
    double time = 0.0;
    std::vector<Particle> particles;
};

struct PotentialSample {
    double u = 0.0;
    std::array<double, 2> grad{0.0, 0.0};
};

using AnalyticPotential = std::function<PotentialSample(double t, const std::array<double, 2>& x)>;

struct BoundingBox {
    std::array<double, 2> lo{-1e300, -1e300};
    std::array<double, 2> hi{1e300, 1e300};
    bool contains(int dim, const std::array<double, 2>& x) const;
};

/// Sampled particle states; `states[j]` is the population at `times[j]`.
/// Particles keep their index across samples.
struct Trajectory {
    int dim = 1;
    std::vector<double> times;
    std::vector<std::vector<Particle>> states;
    std::vector<std::string> events;
};

/// RK4 on (x, log k) with x' = grad u(t, x), (log k)' = u(t, x).
/// Throws NumericalFailure when a particle leaves `box`.
Trajectory integrate_particles(const ParticleState& init, const AnalyticPotential& pot, double t_end, double dt,
                               const BoundingBox& box = {});

/// RK4 on the characteristic system of the geodesic equations:
/// x' = v, (log k)' = u, u' = (|v|^2 - u^2)/2, v' = -u v.
/// Initial u, v are read from the particles.
Trajectory integrate_characteristics(const ParticleState& init, double t_end, double dt, const BoundingBox& box = {});

struct ParticleEnergy {
    std::vector<double> per_particle;
    double total = 0.0;
};

/// Trapezoidal integral of k (u^2 + |v|^2) over the samples, per particle.
ParticleEnergy particle_energy(const Trajectory& traj);

/// Residuals of the single-particle Euler-Lagrange system
/// 2k''/k - (k'/k)^2 - |x'|^2 = 0 and (k x')' = 0, from exact derivatives.
struct EulerLagrangeResidual {
    double charge = 0.0;
    double momentum = 0.0;
};
EulerLagrangeResidual euler_lagrange_residual(double k, double dk, double ddk, double ds, double dds);

// ---------------------------------------------------------------------------
// Hamilton-Jacobi geodesic system

/// One Heun step of d/dt rho = -div(rho grad u) + rho u,
/// d/dt u = -(u^2 + |grad u|^2)/2 on collocated cell values.
/// Requires dt <= 0.5 h / max|D_h u|.
std::pair<GridMeasure, PotentialField> hj_geodesic_step(const GridMeasure& rho, const PotentialField& pot, double dt);

/// Advances `steps` HJ steps of size dt.
std::pair<GridMeasure, PotentialField> hj_evolve(GridMeasure rho, PotentialField pot, double dt, int steps);

struct DirectionReport {
    double max_deviation = 0.0;
    int tracked = 0;
    int skipped = 0;
};

/// Follows characteristics x' = grad u from every `stride`-th cell centre
/// inside the central `interior` fraction of the box and measures the angle
/// between grad u at the current position and its initial direction.
DirectionReport direction_invariance_check(const GridMeasure& rho, const PotentialField& pot, double t_end, double dt,
                                           int stride = 1, double interior = 0.5);

// ---------------------------------------------------------------------------
// Internal-energy Hessian

struct InternalEnergySpec {
    std::string name;
    std::function<double(double)> E;
    std::function<double(double)> P;
    std::function<double(double)> P2;
    std::function<double(double)> Q;
    std::function<double(double)> Q2;

    /// Builds P, P2, Q, Q2 from E and its first two derivatives.
    static InternalEnergySpec from_derivatives(std::string name, std::function<double(double)> E,
                                               std::function<double(double)> dE, std::function<double(double)> ddE);
    static InternalEnergySpec quadratic();  // rho^2 / 2
    static InternalEnergySpec cubic();      // rho^3
    static InternalEnergySpec entropy();    // rho log rho - rho
};

/// sum E(rho) vol.
double internal_energy(const GridMeasure& rho, const InternalEnergySpec& spec);

/// Quadratic form of the Hessian of the internal energy in direction u.
/// Cells within one stencil width of the wall are left out.
double hessian_internal_energy(const GridMeasure& rho, const PotentialField& pot, const InternalEnergySpec& spec);

struct HessianComparison {
    double formula_value = 0.0;
    double fd_value = 0.0;
    double rel_err = 0.0;
};

/// Second difference of the internal energy along the HJ evolution started
/// from (rho, u) forwards and from (rho, -u) backwards, each over `substeps`.
double hessian_finite_difference(const GridMeasure& rho, const PotentialField& pot, const InternalEnergySpec& spec,
                                 double dt, int substeps = 10);

HessianComparison compare_hessian(const GridMeasure& rho, const PotentialField& pot, const InternalEnergySpec& spec,
                                  double dt, int substeps = 10);

}  // namespace wfr
