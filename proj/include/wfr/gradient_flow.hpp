#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "wfr/grid.hpp"

namespace wfr {

/// d/dt rho = div(rho grad(rho - m)) + rho (m - rho) with no-flux walls.
struct PopulationProblem {
    GridMeasure m;
    GridMeasure rho0;
    double t_end = 1.0;
    double dt = 1e-4;
    /// Record a trace sample every this many steps (the final state is always recorded).
    int sample_every = 1;

    void validate() const;
};

struct FlowSample {
    double t = 0.0;
    double entropy = 0.0;
    double dissipation = 0.0;
    double mass = 0.0;
    double l2_error = 0.0;
    double min_rho = 0.0;
};

struct FlowTrace {
    std::vector<FlowSample> samples;
    /// c0 = sum min(rho0, m) vol.
    double c0 = 0.0;
    /// max over steps of |(E_{k+1} - E_k)/dt + (D_k + D_{k+1})/2|.
    double identity_residual = 0.0;
    /// max over steps of E_{k+1} - E_k (positive values break monotonicity).
    double max_entropy_increase = 0.0;
    /// min over steps of mass - c0.
    double min_mass_margin = 0.0;
    /// max over steps and cells of rho - m.
    double max_excess_over_m = 0.0;
    GridMeasure final_state;
};

/// Largest explicit step allowed at this state: 0.25 h^2 / max(rho).
double stable_dt(const GridMeasure& rho);

/// Right-hand side of the population model assembled from face fluxes.
std::vector<double> flow_rhs(const GridMeasure& rho, const GridMeasure& m);

/// One explicit finite-volume step of size prob.dt.
GridMeasure step_flow(const GridMeasure& state, const PopulationProblem& prob);

FlowTrace run_flow(const PopulationProblem& prob);

/// D(rho) = sum rho (|D_h(rho-m)|^2 + (rho-m)^2) vol with face-averaged gradients.
double dissipation(const GridMeasure& rho, const GridMeasure& m);

/// Relative difference between flow_rhs and -grad_d E(rho) with dE/drho = rho - m.
double verify_gradient_identity(const GridMeasure& rho, const GridMeasure& m);

/// |‖grad_d E‖^2_{T_rho} - D(rho)| / max(D, tiny), the norm taken through
/// the tangent-space solver.
double tangent_identity_error(const GridMeasure& rho, const GridMeasure& m);

/// Least-squares slope of -log E(t) / 2 over the samples with E > 0.
double fitted_decay_rate(const FlowTrace& trace);

/// Smooth positive field: a truncated cosine series with random phases and
/// coefficients decaying like 1/n^2, rescaled so that its oscillation
/// (max - min) is drawn from [max_amplitude/15, max_amplitude] and shifted so
/// that its minimum is `min_value`.
GridMeasure random_density(const Grid& grid, std::mt19937_64& rng, double min_value = 0.1, int modes = 6,
                           double max_amplitude = 3.0);

struct BecknerCertificate {
    double C_Omega = 0.0;
    int samples_checked = 0;
    int samples_skipped = 0;
    double min_margin = 0.0;
    std::uint64_t seed = 0;

    /// Phi(lambda) = min(lambda, lambda^2 / (2 C_Omega)).
    double phi(double lambda) const;
};

/// Estimates C_Omega on a grid of unit volume from n_trials random
/// (rho, m) pairs: the largest ratio of the Beckner inequality with
/// exponents (3/2, 4/3), and the smallest constant for which
/// Phi(mass) int|rho-m|^2 <= int rho|rho-m|^2 + int rho|grad(rho-m)|^2
/// holds, whichever is larger, times the safety factor 1.5.
BecknerCertificate estimate_beckner_constant(const Grid& grid, int n_trials, std::uint64_t seed);

/// int rho|rho-m|^2 + int rho|grad(rho-m)|^2 - Phi(int rho) int |rho-m|^2.
double beckner_margin(const BecknerCertificate& cert, const GridMeasure& rho, const GridMeasure& m);

/// Ratio ||rho||_2 [int rho^2 - (int rho)^2] / int rho|grad rho|^2, or a
/// negative value when the right side vanishes.
double beckner_ratio(const GridMeasure& rho);

struct BecknerValidation {
    int samples = 0;
    double min_margin = 0.0;
    bool ok = false;
};

/// Checks the certificate on n_pairs fresh random (rho, m) pairs with min m = 0.2.
BecknerValidation validate_beckner(const BecknerCertificate& cert, const Grid& grid, int n_pairs, std::uint64_t seed);

}  // namespace wfr
