#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "wfr/grid.hpp"

namespace wfr {

/// Options for the space-time primal-dual solver.
struct SolverOptions {
    int nt = 32;
    int max_iter = 10000;
    /// Bound on the l2 norm of the discrete continuity residual.
    double tol_feas = 1e-8;
    /// Bound on the relative energy gap; residuals must drop below
    /// 1e-3 tol_gap and the energy must vary by less than 1e-3 tol_gap over
    /// 500 iterations. Also sets the metric-axiom slack eps_s.
    double tol_gap = 1e-2;
    /// Width used when atoms are rasterised for the solver; 0 means 2h.
    double sigma_blob = 0.0;
    /// Initial ratio sigma/tau of the dual and primal step sizes.
    double step_ratio = 1.0;
    /// Rebalance tau and sigma from the residuals at each check.
    bool adaptive_steps = true;
    /// Over-relaxation factor of the primal-dual iteration, in (0, 2).
    double relaxation = 1.8;
    /// Residuals and energy are recorded every `check_every` iterations.
    int check_every = 10;
};

struct SolverReport {
    double d2 = 0.0;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    /// ||D_t rho + div w - s||_2 of the returned iterate.
    double feasibility = 0.0;
    bool converged = false;
    /// Relative spread between the energy of the admissible iterate and the
    /// energy of the proximal copy produced by the dual step.
    double energy_gap = 0.0;
    std::string message;
    std::vector<double> energy_history;
};

/// Pointwise proximal map of the perspective function (|w|^2+s^2)/(2 rho).
/// `w` holds up to four momentum components; unused entries stay zero.
struct PerspectivePoint {
    double rho = 0.0;
    std::array<double, 4> w{0.0, 0.0, 0.0, 0.0};
    double s = 0.0;
};

/// argmin of (|w|^2+s^2)/(2 rho) + |(rho,w,s) - p|^2/(2 tau).
/// Returns the origin when the positive cubic root does not exist.
PerspectivePoint prox_energy(const PerspectivePoint& p, double tau);

/// Unknowns of the staggered discretisation.
///
/// - `rho`: nt+1 time levels x cells (levels 0 and nt are the endpoints);
/// - `w[a]`: nt time centres x interior faces normal to axis a
///   (boundary faces carry zero flux and are not stored);
/// - `s`: nt time centres x cells.
struct StaggeredField {
    Grid grid;
    int nt = 0;
    std::vector<double> rho;
    std::array<std::vector<double>, 2> w;
    std::vector<double> s;

    static StaggeredField zeros(const Grid& grid, int nt);
    std::size_t interior_faces(int axis) const;
    double dt() const { return 1.0 / nt; }
};

/// Discrete continuity residual (rho_{j+1}-rho_j)/dt + div w_j - s_j on all
/// time centres and cells.
std::vector<double> continuity_residual(const StaggeredField& f);

/// Euclidean projection onto {continuity residual = 0, rho at levels 0 and
/// nt equal to the given endpoints}. The normal operator is the identity
/// plus Neumann Laplacians in time and space, which a cosine transform
/// diagonalises, so each projection is exact up to rounding.
class ContinuityProjector {
public:
    ContinuityProjector(const Grid& grid, int nt);
    ~ContinuityProjector();
    ContinuityProjector(const ContinuityProjector&) = delete;
    ContinuityProjector& operator=(const ContinuityProjector&) = delete;

    void project(StaggeredField& f, const GridMeasure& rho0, const GridMeasure& rho1);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// One-shot form of ContinuityProjector::project.
void project_continuity(StaggeredField& f, const GridMeasure& rho0, const GridMeasure& rho1);

struct DistanceResult {
    SolverReport report;
    SpaceTimePath path;
};

/// Squared distance between two grid measures by minimising the discrete
/// path energy subject to the non-conservative continuity equation.
DistanceResult solve_distance(const GridMeasure& rho0, const GridMeasure& rho1, const SolverOptions& opts = {});

/// Path energy: per time centre and cell, (s^2 + mean of w^2 over the two
/// faces of the cell along each axis) / rho, with rho averaged in time.
/// Wall faces carry zero flux; cells with averaged density at most 1e-12 of
/// the maximum count as vacuum.
double staggered_energy(const StaggeredField& f);

/// Time reparametrisation to constant metric speed. Frames are resampled
/// by linear interpolation along the inverse cumulative arclength and each
/// interval's potential is rescaled by the local time dilation.
SpaceTimePath reparametrize_arclength(const SpaceTimePath& path);

/// Metric speed ||d rho/dt||_{T_rho} of each interval of a path, measured
/// from the frame differences alone: the tangent potential is recovered by
/// solving -div(rho grad u) + rho u = (rho_{k+1}-rho_k)/dt_k.
std::vector<double> measured_speeds(const SpaceTimePath& path);

struct PathDiagnostics {
    double energy = 0.0;
    double mass_bound = 0.0;          // M = 2(max{m0,m1} + E)
    double max_mass = 0.0;
    double mass_margin = 0.0;         // M - max_t m_t
    double holder_constant = 0.0;     // sqrt(M E)
    double mass_holder_margin = 0.0;  // min over pairs of sqrt(ME)|t-s|^{1/2} - |m_t - m_s|
    double bl_holder_margin = 0.0;    // same with the certified d_BL lower bound
    int pairs_checked = 0;
    bool ok = false;
};

/// Checks the mass bound and the 1/2-Hoelder estimates along a path.
/// `bl_tol` is passed to the bounded-Lipschitz solver; `max_pairs` caps the
/// number of (t, s) pairs sampled for the d_BL check.
PathDiagnostics path_diagnostics(const SpaceTimePath& path, double bl_tol = 1e-6, int max_pairs = 12);

}  // namespace wfr
