#pragma once

#include <span>
#include <vector>

#include "wfr/grid.hpp"

// Finite-volume stencils shared by the flow, the geodesic system and the
// tangent-space solver. Boundary faces carry zero flux throughout.
namespace wfr::stencil {

/// div_h(rho_f D_h phi): rho_f is the arithmetic mean on each interior face.
std::vector<double> weighted_divergence(const Grid& g, std::span<const double> rho, std::span<const double> phi);

/// Per cell, the mean of the squared one-sided differences on its interior
/// faces, summed over axes: 1/2 sum_axes ((D phi)^2_left + (D phi)^2_right).
std::vector<double> face_averaged_grad_sq(const Grid& g, std::span<const double> phi);

/// sum over interior faces of rho_f (D_h phi)^2 times the cell volume.
double weighted_dirichlet(const Grid& g, std::span<const double> rho, std::span<const double> phi);

/// Centred first derivative along an axis with reflecting ghost cells.
std::vector<double> centered_derivative(const Grid& g, std::span<const double> phi, int axis);

/// Centred second derivative d^2/dx_a dx_b with reflecting ghost cells.
std::vector<double> second_derivative(const Grid& g, std::span<const double> phi, int a, int b);

/// Bilinear (or linear in 1D) interpolation of a cell-centred field at a point,
/// clamped to the cell-centre hull.
double interpolate(const Grid& g, std::span<const double> f, const std::array<double, 2>& x);

}  // namespace wfr::stencil
