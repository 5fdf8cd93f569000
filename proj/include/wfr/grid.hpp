#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wfr {

/// Raised for malformed inputs: negative densities, mismatched grids, bad options.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an iterative method fails (NaN, stability violation, non-convergence
/// where the caller asked for a hard failure).
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniform rectilinear cell grid in one or two dimensions.
///
/// Cells are stored row-major with axis 0 slowest. A 1D grid keeps
/// `shape[1] == 1` so that the same flat indexing serves both cases.
struct Grid {
    int dim = 1;
    std::array<int, 2> shape{1, 1};
    std::array<double, 2> spacing{1.0, 1.0};
    std::array<double, 2> origin{0.0, 0.0};

    static Grid line(int n, double lo, double hi);
    static Grid rect(int nx, int ny, double xlo, double xhi, double ylo, double yhi);

    std::size_t size() const { return static_cast<std::size_t>(shape[0]) * shape[1]; }
    double cell_volume() const { return dim == 1 ? spacing[0] : spacing[0] * spacing[1]; }
    double length(int axis) const { return shape[axis] * spacing[axis]; }
    double domain_volume() const { return cell_volume() * static_cast<double>(size()); }

    /// Coordinate of the cell centre with index `i` along `axis`.
    double center(int axis, int i) const { return origin[axis] + (i + 0.5) * spacing[axis]; }

    /// Stride in the flat array between neighbours along `axis`.
    std::size_t stride(int axis) const { return axis == 0 ? static_cast<std::size_t>(shape[1]) : 1; }

    std::size_t index(int i0, int i1 = 0) const {
        return static_cast<std::size_t>(i0) * shape[1] + i1;
    }
    /// Multi-index of a flat cell index.
    std::array<int, 2> unflatten(std::size_t k) const {
        return {static_cast<int>(k / shape[1]), static_cast<int>(k % shape[1])};
    }

    void validate() const;
    bool same_as(const Grid& other) const;
};

void require_same_grid(const Grid& a, const Grid& b, const char* what);

/// Nonnegative density sampled at cell centres of a uniform grid.
class GridMeasure {
public:
    GridMeasure() = default;
    GridMeasure(Grid grid, std::vector<double> values);

    static GridMeasure zeros(const Grid& grid);

    const Grid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    double operator[](std::size_t k) const { return values_[k]; }
    std::size_t size() const { return values_.size(); }
    double mass() const { return mass_; }
    double max_value() const;
    double min_value() const;

    GridMeasure scaled(double factor) const;

private:
    Grid grid_;
    std::vector<double> values_;
    double mass_ = 0.0;
};

/// One atom of a discrete measure.
struct Atom {
    std::array<double, 2> x{0.0, 0.0};
    double k = 0.0;
};

/// Finite sum of weighted Dirac masses.
struct DiracMeasure {
    int dim = 1;
    std::vector<Atom> atoms;

    double mass() const;
    /// Drops zero-charge atoms; throws on negative charges.
    DiracMeasure normalized() const;
};

/// Rasterises each atom as a Gaussian of width `sigma` sampled at cell
/// centres and rescaled so that every atom keeps its charge exactly.
GridMeasure rasterize(const DiracMeasure& atoms, const Grid& grid, double sigma);

enum class Layout { collocated, staggered };

/// The couple (u, grad u) driving the non-conservative continuity equation.
/// `grad` holds one array per axis, each with one value per cell; it is
/// independent data and need not equal the discrete gradient of `u`.
struct PotentialField {
    Grid grid;
    std::vector<double> u;
    std::array<std::vector<double>, 2> grad;
    Layout layout = Layout::collocated;

    static PotentialField zeros(const Grid& grid);
    /// Fills `grad` with centred differences of `u` (reflecting ghost cells).
    static PotentialField from_potential(const Grid& grid, std::vector<double> u);

    /// ||grad - D_h u||_inf over all cells and axes.
    double gradient_inconsistency() const;
};

/// ||u||^2_{H^1(d rho)} = sum rho (|grad u|^2 + u^2) vol.
double h1_norm_squared(const GridMeasure& rho, const PotentialField& pot);

/// Discrete admissible path. `densities` has N+1 frames at `times`;
/// `potentials[k]` and `step_energy[k]` refer to the interval [t_k, t_{k+1}].
struct SpaceTimePath {
    std::vector<double> times;
    std::vector<GridMeasure> densities;
    std::vector<PotentialField> potentials;
    std::vector<double> step_energy;

    std::size_t steps() const { return step_energy.size(); }
    double total_energy() const;
    void validate() const;
};

}  // namespace wfr
