#include "wfr/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wfr/stencil.hpp"

namespace wfr {

Grid Grid::line(int n, double lo, double hi) {
    Grid g;
    g.dim = 1;
    g.shape = {n, 1};
    g.spacing = {(hi - lo) / n, 1.0};
    g.origin = {lo, 0.0};
    g.validate();
    return g;
}

Grid Grid::rect(int nx, int ny, double xlo, double xhi, double ylo, double yhi) {
    Grid g;
    g.dim = 2;
    g.shape = {nx, ny};
    g.spacing = {(xhi - xlo) / nx, (yhi - ylo) / ny};
    g.origin = {xlo, ylo};
    g.validate();
    return g;
}

void Grid::validate() const {
    if (dim != 1 && dim != 2) throw InvalidArgument("grid dimension must be 1 or 2");
    for (int a = 0; a < dim; ++a) {
        if (shape[a] < 1) throw InvalidArgument("grid shape must be positive");
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
            throw InvalidArgument("grid spacing must be positive and finite");
        if (!std::isfinite(origin[a])) throw InvalidArgument("grid origin must be finite");
    }
    if (dim == 1 && shape[1] != 1) throw InvalidArgument("1D grid must have shape[1] == 1");
}

bool Grid::same_as(const Grid& o) const {
    if (dim != o.dim || shape != o.shape) return false;
    for (int a = 0; a < dim; ++a) {
        const double tol = 1e-12 * std::max(1.0, std::abs(spacing[a]));
        if (std::abs(spacing[a] - o.spacing[a]) > tol) return false;
        if (std::abs(origin[a] - o.origin[a]) > 1e-12 * std::max(1.0, std::abs(origin[a]))) return false;
    }
    return true;
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
    if (!a.same_as(b)) throw InvalidArgument(std::string(what) + ": grid mismatch");
}

GridMeasure::GridMeasure(Grid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    grid_.validate();
    if (values_.size() != grid_.size()) throw InvalidArgument("measure: value count does not match grid");
    double sum = 0.0;
    for (double v : values_) {
        if (!std::isfinite(v)) throw InvalidArgument("measure: non-finite density");
        if (v < 0.0) throw InvalidArgument("measure: negative density");
        sum += v;
    }
    mass_ = sum * grid_.cell_volume();
}

GridMeasure GridMeasure::zeros(const Grid& grid) { return GridMeasure(grid, std::vector<double>(grid.size(), 0.0)); }

double GridMeasure::max_value() const {
    return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double GridMeasure::min_value() const {
    return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

GridMeasure GridMeasure::scaled(double factor) const {
    if (!(factor >= 0.0)) throw InvalidArgument("measure: scale factor must be nonnegative");
    std::vector<double> v(values_);
    for (double& x : v) x *= factor;
    return GridMeasure(grid_, std::move(v));
}

double DiracMeasure::mass() const {
    double m = 0.0;
    for (const auto& a : atoms) m += a.k;
    return m;
}

DiracMeasure DiracMeasure::normalized() const {
    if (dim != 1 && dim != 2) throw InvalidArgument("dirac measure: dimension must be 1 or 2");
    DiracMeasure out{dim, {}};
    for (const auto& a : atoms) {
        if (!std::isfinite(a.k) || a.k < 0.0) throw InvalidArgument("dirac measure: negative charge");
        if (a.k > 0.0) out.atoms.push_back(a);
    }
    return out;
}

GridMeasure rasterize(const DiracMeasure& measure, const Grid& grid, double sigma) {
    if (!(sigma > 0.0)) throw InvalidArgument("rasterize: sigma must be positive");
    if (measure.dim != grid.dim) throw InvalidArgument("rasterize: dimension mismatch");
    const DiracMeasure atoms = measure.normalized();
    std::vector<double> values(grid.size(), 0.0);
    std::vector<double> bump(grid.size());
    for (const auto& atom : atoms.atoms) {
        double total = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const auto [i0, i1] = grid.unflatten(k);
            double r2 = 0.0;
            const double dx = grid.center(0, i0) - atom.x[0];
            r2 += dx * dx;
            if (grid.dim == 2) {
                const double dy = grid.center(1, i1) - atom.x[1];
                r2 += dy * dy;
            }
            bump[k] = std::exp(-0.5 * r2 / (sigma * sigma));
            total += bump[k];
        }
        if (!(total > 0.0)) throw InvalidArgument("rasterize: atom lies outside the grid");
        const double scale = atom.k / (total * grid.cell_volume());
        for (std::size_t k = 0; k < grid.size(); ++k) values[k] += scale * bump[k];
    }
    return GridMeasure(grid, std::move(values));
}

PotentialField PotentialField::zeros(const Grid& grid) {
    PotentialField p;
    p.grid = grid;
    p.u.assign(grid.size(), 0.0);
    p.grad[0].assign(grid.size(), 0.0);
    if (grid.dim == 2) p.grad[1].assign(grid.size(), 0.0);
    return p;
}

PotentialField PotentialField::from_potential(const Grid& grid, std::vector<double> u) {
    if (u.size() != grid.size()) throw InvalidArgument("potential: value count does not match grid");
    PotentialField p;
    p.grid = grid;
    p.u = std::move(u);
    for (int a = 0; a < grid.dim; ++a) p.grad[a] = stencil::centered_derivative(grid, p.u, a);
    return p;
}

double PotentialField::gradient_inconsistency() const {
    double worst = 0.0;
    for (int a = 0; a < grid.dim; ++a) {
        const auto d = stencil::centered_derivative(grid, u, a);
        for (std::size_t k = 0; k < d.size(); ++k) worst = std::max(worst, std::abs(d[k] - grad[a][k]));
    }
    return worst;
}

double h1_norm_squared(const GridMeasure& rho, const PotentialField& pot) {
    require_same_grid(rho.grid(), pot.grid, "h1_norm_squared");
    double sum = 0.0;
    for (std::size_t k = 0; k < rho.size(); ++k) {
        double g2 = 0.0;
        for (int a = 0; a < pot.grid.dim; ++a) g2 += pot.grad[a][k] * pot.grad[a][k];
        sum += rho[k] * (g2 + pot.u[k] * pot.u[k]);
    }
    return sum * rho.grid().cell_volume();
}

double SpaceTimePath::total_energy() const {
    double e = 0.0;
    for (std::size_t k = 0; k < step_energy.size(); ++k) e += step_energy[k] * (times[k + 1] - times[k]);
    return e;
}

void SpaceTimePath::validate() const {
    const std::size_t n = step_energy.size();
    if (times.size() != n + 1 || densities.size() != n + 1 || potentials.size() != n)
        throw InvalidArgument("path: inconsistent frame counts");
    for (std::size_t k = 0; k + 1 < times.size(); ++k)
        if (!(times[k + 1] > times[k])) throw InvalidArgument("path: times must be increasing");
    for (double e : step_energy)
        if (!(e >= 0.0)) throw InvalidArgument("path: negative step energy");
}

}  // namespace wfr
