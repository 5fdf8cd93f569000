#pragma once

#include <vector>

#include "wfr/grid.hpp"

namespace wfr {

/// Total mass sum(values) * cell volume.
double mass(const GridMeasure& rho);

/// E(rho) = 1/2 sum (rho - m)^2 * cell volume.
double entropy(const GridMeasure& rho, const GridMeasure& m);

struct BoundedLipschitzResult {
    /// Certified lower bound: value of the feasible witness.
    double lower_bound = 0.0;
    /// Certified upper bound from the dual flux.
    double upper_bound = 0.0;
    int iterations = 0;
    /// phi in `u`, its forward differences in `grad`; ||phi||_inf + ||D_h phi||_inf <= 1.
    PotentialField witness;
};

/// sup of sum phi (rho1 - rho0) vol over ||phi||_inf + ||D_h phi||_inf <= 1.
///
/// D_h is the forward difference (zero beyond the last cell); in 2D the
/// gradient norm is the Euclidean norm of the two forward differences in a
/// cell. Solved by a primal-dual ascent whose dual flux gives an upper
/// bound; iteration stops once upper - lower < tol.
BoundedLipschitzResult bounded_lipschitz(const GridMeasure& rho0, const GridMeasure& rho1, double tol = 1e-6,
                                         int max_iter = 200000);

/// ||phi||_inf + ||D_h phi||_inf for the discrete norm used above.
double bounded_lipschitz_norm(const Grid& grid, const std::vector<double>& phi);

/// Exact quadratic Wasserstein distance between two 1D piecewise-constant
/// densities of equal positive mass (mass is spread uniformly inside each cell).
double wasserstein2_1d(const GridMeasure& rho0, const GridMeasure& rho1);

/// rho shifted by `cells` cells along axis 0; mass leaving the grid is an error.
GridMeasure translate(const GridMeasure& rho, int cells);

}  // namespace wfr
