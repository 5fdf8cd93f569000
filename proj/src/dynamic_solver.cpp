#include "wfr/dynamic_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>

#include <fftw3.h>

#include "wfr/measures.hpp"
#include "wfr/otto.hpp"

namespace wfr {

PerspectivePoint prox_energy(const PerspectivePoint& p, double tau) {
    if (!(tau > 0.0)) throw InvalidArgument("prox_energy: tau must be positive");
    double m2 = p.s * p.s;
    for (double w : p.w) m2 += w * w;
    if (m2 == 0.0) return {std::max(p.rho, 0.0), {}, 0.0};

    // Stationarity in rho: g(r) = (r - rho)(r + tau)^2 - tau |m|^2 / 2 = 0.
    // g is increasing on [max(rho,0), inf) and negative at the left end.
    const double c = 0.5 * tau * m2;
    auto g = [&](double r) { return (r - p.rho) * (r + tau) * (r + tau) - c; };
    double lo = std::max(p.rho, 0.0);
    if (g(lo) >= 0.0) return {};  // root at or below zero: the prox lands on the apex
    double hi = lo + m2 / (2.0 * tau) + tau;
    while (g(hi) < 0.0) hi *= 2.0;

    double r = hi;
    for (int it = 0; it < 200; ++it) {
        const double gr = g(r);
        if (gr > 0.0) hi = r; else lo = r;
        const double dg = (r + tau) * (3.0 * r + tau - 2.0 * p.rho);
        double next = dg > 0.0 ? r - gr / dg : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - r) <= 1e-13 * std::max(1.0, std::abs(r)) || hi - lo <= 1e-15 * std::max(1.0, hi)) {
            r = next;
            break;
        }
        r = next;
    }
    const double f = r / (r + tau);
    PerspectivePoint out{r, p.w, f * p.s};
    for (double& w : out.w) w *= f;
    return out;
}

StaggeredField StaggeredField::zeros(const Grid& grid, int nt) {
    if (nt < 1) throw InvalidArgument("staggered field: nt must be positive");
    StaggeredField f;
    f.grid = grid;
    f.nt = nt;
    const std::size_t nc = grid.size();
    f.rho.assign((nt + 1) * nc, 0.0);
    for (int a = 0; a < grid.dim; ++a) f.w[a].assign(nt * f.interior_faces(a), 0.0);
    f.s.assign(nt * nc, 0.0);
    return f;
}

std::size_t StaggeredField::interior_faces(int axis) const {
    if (axis == 0) return static_cast<std::size_t>(grid.shape[0] - 1) * grid.shape[1];
    return static_cast<std::size_t>(grid.shape[0]) * (grid.shape[1] - 1);
}

namespace {

// Neighbouring interior faces of a cell along an axis; -1 when on the wall.
struct CellFaces {
    long left = -1;
    long right = -1;
};

CellFaces faces_of(const Grid& g, std::size_t cell, int axis) {
    const auto [i0, i1] = g.unflatten(cell);
    CellFaces f;
    if (axis == 0) {
        if (i0 > 0) f.left = static_cast<long>(i0 - 1) * g.shape[1] + i1;
        if (i0 < g.shape[0] - 1) f.right = static_cast<long>(i0) * g.shape[1] + i1;
    } else {
        if (i1 > 0) f.left = static_cast<long>(i0) * (g.shape[1] - 1) + i1 - 1;
        if (i1 < g.shape[1] - 1) f.right = static_cast<long>(i0) * (g.shape[1] - 1) + i1;
    }
    return f;
}

// Cells on either side of an interior face.
std::pair<std::size_t, std::size_t> cells_of(const Grid& g, std::size_t face, int axis) {
    if (axis == 0) {
        const std::size_t i0 = face / g.shape[1], i1 = face % g.shape[1];
        return {g.index(i0, i1), g.index(i0 + 1, i1)};
    }
    const std::size_t n1 = g.shape[1] - 1;
    const std::size_t i0 = face / n1, i1 = face % n1;
    return {g.index(i0, i1), g.index(i0, i1 + 1)};
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// Centred space-time variables: one value per (time centre, cell). Along
// axis a, m[2a] and m[2a+1] hold the fluxes through the lower and upper
// faces of the cell divided by sqrt(2), so that their squares sum to the
// mean squared face flux.
struct CenteredField {
    std::vector<double> rho;
    std::array<std::vector<double>, 4> m;
    std::vector<double> s;
};

constexpr double kHalfRoot = 0.70710678118654752440;

CenteredField centered_zeros(const StaggeredField& f) {
    const std::size_t n = f.nt * f.grid.size();
    CenteredField c;
    c.rho.assign(n, 0.0);
    for (int i = 0; i < 2 * f.grid.dim; ++i) c.m[i].assign(n, 0.0);
    c.s.assign(n, 0.0);
    return c;
}

// Interpolation K from the staggered to the centred grid.
void interpolate(const StaggeredField& f, CenteredField& out) {
    const Grid& g = f.grid;
    const std::size_t nc = g.size();
    for (int j = 0; j < f.nt; ++j) {
        for (std::size_t c = 0; c < nc; ++c) {
            const std::size_t k = j * nc + c;
            out.rho[k] = 0.5 * (f.rho[k] + f.rho[k + nc]);
            out.s[k] = f.s[k];
        }
        for (int a = 0; a < g.dim; ++a) {
            const std::size_t nf = f.interior_faces(a);
            const double* w = f.w[a].data() + j * nf;
            for (std::size_t c = 0; c < nc; ++c) {
                const auto fc = faces_of(g, c, a);
                out.m[2 * a][j * nc + c] = fc.left >= 0 ? kHalfRoot * w[fc.left] : 0.0;
                out.m[2 * a + 1][j * nc + c] = fc.right >= 0 ? kHalfRoot * w[fc.right] : 0.0;
            }
        }
    }
}

// Adjoint K^T of `interpolate`.
void interpolate_adjoint(const CenteredField& v, StaggeredField& out) {
    const Grid& g = out.grid;
    const std::size_t nc = g.size();
    std::fill(out.rho.begin(), out.rho.end(), 0.0);
    for (int j = 0; j < out.nt; ++j) {
        for (std::size_t c = 0; c < nc; ++c) {
            const std::size_t k = j * nc + c;
            out.rho[k] += 0.5 * v.rho[k];
            out.rho[k + nc] += 0.5 * v.rho[k];
            out.s[k] = v.s[k];
        }
        for (int a = 0; a < g.dim; ++a) {
            const std::size_t nf = out.interior_faces(a);
            double* w = out.w[a].data() + j * nf;
            for (std::size_t f = 0; f < nf; ++f) {
                const auto [l, r] = cells_of(g, f, a);
                w[f] = kHalfRoot * (v.m[2 * a + 1][j * nc + l] + v.m[2 * a][j * nc + r]);
            }
        }
    }
}

// A x: the continuity residual, linear in the field.
void apply_continuity(const StaggeredField& f, std::vector<double>& r) {
    const Grid& g = f.grid;
    const std::size_t nc = g.size();
    const double inv_dt = static_cast<double>(f.nt);
    r.assign(f.nt * nc, 0.0);
    for (int j = 0; j < f.nt; ++j) {
        for (std::size_t c = 0; c < nc; ++c) {
            const std::size_t k = j * nc + c;
            r[k] = (f.rho[k + nc] - f.rho[k]) * inv_dt - f.s[k];
        }
        for (int a = 0; a < g.dim; ++a) {
            const std::size_t nf = f.interior_faces(a);
            const double* w = f.w[a].data() + j * nf;
            const double inv_h = 1.0 / g.spacing[a];
            for (std::size_t face = 0; face < nf; ++face) {
                const auto [l, rr] = cells_of(g, face, a);
                r[j * nc + l] += w[face] * inv_h;
                r[j * nc + rr] -= w[face] * inv_h;
            }
        }
    }
}

// A^T mu restricted to the free unknowns (endpoint levels of rho are zero).
void apply_continuity_adjoint(const std::vector<double>& mu, StaggeredField& out) {
    const Grid& g = out.grid;
    const std::size_t nc = g.size();
    const double inv_dt = static_cast<double>(out.nt);
    std::fill(out.rho.begin(), out.rho.end(), 0.0);
    for (int j = 0; j < out.nt; ++j) {
        for (std::size_t c = 0; c < nc; ++c) {
            const std::size_t k = j * nc + c;
            out.rho[k + nc] += mu[k] * inv_dt;
            out.rho[k] -= mu[k] * inv_dt;
            out.s[k] = -mu[k];
        }
        for (int a = 0; a < g.dim; ++a) {
            const std::size_t nf = out.interior_faces(a);
            double* w = out.w[a].data() + j * nf;
            const double inv_h = 1.0 / g.spacing[a];
            for (std::size_t face = 0; face < nf; ++face) {
                const auto [l, r] = cells_of(g, face, a);
                w[face] = (mu[j * nc + l] - mu[j * nc + r]) * inv_h;
            }
        }
    }
    std::fill(out.rho.begin(), out.rho.begin() + nc, 0.0);
    std::fill(out.rho.end() - nc, out.rho.end(), 0.0);
}

void set_endpoints(StaggeredField& f, const GridMeasure& rho0, const GridMeasure& rho1) {
    const std::size_t nc = f.grid.size();
    std::copy(rho0.values().begin(), rho0.values().end(), f.rho.begin());
    std::copy(rho1.values().begin(), rho1.values().end(), f.rho.begin() + f.nt * nc);
}

double energy_density(double rho, double m2, double weight) {
    if (m2 == 0.0) return 0.0;
    if (!(rho > 0.0)) return std::numeric_limits<double>::infinity();
    return weight * m2 / rho;
}

// Cells whose averaged density is at most 1e-12 of the largest one count as
// vacuum and contribute nothing.
double centered_energy(const CenteredField& v, const Grid& g, int nt) {
    const double weight = g.cell_volume() / nt;
    const double floor = 1e-12 * *std::max_element(v.rho.begin(), v.rho.end());
    double e = 0.0;
    for (std::size_t k = 0; k < v.rho.size(); ++k) {
        if (v.rho[k] <= floor) continue;
        double m2 = v.s[k] * v.s[k];
        for (int i = 0; i < 2 * g.dim; ++i) m2 += v.m[i][k] * v.m[i][k];
        e += energy_density(v.rho[k], m2, weight);
    }
    return e;
}

// Elementwise helpers over every array of a staggered field.
template <typename F>
void for_each_array(StaggeredField& x, const StaggeredField& y, F f) {
    f(x.rho, y.rho);
    for (int a = 0; a < x.grid.dim; ++a) f(x.w[a], y.w[a]);
    f(x.s, y.s);
}

template <typename F>
void for_each_array(CenteredField& x, const CenteredField& y, int dim, F f) {
    f(x.rho, y.rho);
    for (int i = 0; i < 2 * dim; ++i) f(x.m[i], y.m[i]);
    f(x.s, y.s);
}

double field_norm2(const StaggeredField& x) {
    double s = dot(x.rho, x.rho) + dot(x.s, x.s);
    for (int a = 0; a < x.grid.dim; ++a) s += dot(x.w[a], x.w[a]);
    return s;
}

double field_norm2(const CenteredField& x, int dim) {
    double s = dot(x.rho, x.rho) + dot(x.s, x.s);
    for (int i = 0; i < 2 * dim; ++i) s += dot(x.m[i], x.m[i]);
    return s;
}

double interpolation_norm(const Grid& g, int nt) {
    StaggeredField x = StaggeredField::zeros(g, nt);
    StaggeredField y = StaggeredField::zeros(g, nt);
    CenteredField v = centered_zeros(x);
    // Deterministic non-degenerate start.
    auto fill = [](std::vector<double>& a, double phase) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = 1.0 + 0.5 * std::sin(0.7 * i + phase);
    };
    fill(x.rho, 0.1);
    fill(x.s, 0.3);
    for (int a = 0; a < g.dim; ++a) fill(x.w[a], 0.5 + a);
    double lambda = 0.0;
    for (int it = 0; it < 100; ++it) {
        const double n = std::sqrt(field_norm2(x));
        for_each_array(x, x, [n](std::vector<double>& a, const std::vector<double>&) {
            for (double& e : a) e /= n;
        });
        interpolate(x, v);
        interpolate_adjoint(v, y);
        const double next = std::sqrt(field_norm2(y));
        std::swap(x, y);
        if (std::abs(next - lambda) <= 1e-6 * next) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return std::sqrt(lambda);
}

}  // namespace

std::vector<double> continuity_residual(const StaggeredField& f) {
    std::vector<double> r;
    apply_continuity(f, r);
    return r;
}

double staggered_energy(const StaggeredField& f) {
    CenteredField v = centered_zeros(f);
    interpolate(f, v);
    return centered_energy(v, f.grid, f.nt);
}

struct ContinuityProjector::Impl {
    Grid grid;
    int nt = 0;
    std::vector<int> dims;  // transform extents, slowest first (time, then space)
    std::vector<double> eigen;
    double* buffer = nullptr;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
    StaggeredField work;
    std::vector<double> rhs;
};

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// Eigenvalues 4 sin^2(pi k / 2n) / h^2 of the cell-centred Neumann Laplacian.
std::vector<double> neumann_eigenvalues(int n, double h) {
    std::vector<double> ev(n);
    for (int k = 0; k < n; ++k) {
        const double sn = std::sin(std::numbers::pi * k / (2.0 * n));
        ev[k] = 4.0 * sn * sn / (h * h);
    }
    return ev;
}

}  // namespace

ContinuityProjector::ContinuityProjector(const Grid& grid, int nt) : impl_(std::make_unique<Impl>()) {
    grid.validate();
    if (nt < 1) throw InvalidArgument("ContinuityProjector: nt must be positive");
    Impl& m = *impl_;
    m.grid = grid;
    m.nt = nt;
    m.work = StaggeredField::zeros(grid, nt);

    const std::size_t nc = grid.size();
    const std::size_t n = static_cast<std::size_t>(nt) * nc;
    const auto et = neumann_eigenvalues(nt, 1.0 / nt);
    const auto e0 = neumann_eigenvalues(grid.shape[0], grid.spacing[0]);
    const auto e1 = neumann_eigenvalues(grid.shape[1], grid.spacing[1]);
    double norm = 2.0 * nt;
    m.dims.push_back(nt);
    for (int a = 0; a < 2; ++a) {
        if (grid.shape[a] > 1) {
            m.dims.push_back(grid.shape[a]);
            norm *= 2.0 * grid.shape[a];
        }
    }
    m.eigen.resize(n);
    for (int j = 0; j < nt; ++j)
        for (std::size_t c = 0; c < nc; ++c) {
            const auto [i0, i1] = grid.unflatten(c);
            m.eigen[j * nc + c] = norm * (1.0 + et[j] + e0[i0] + (grid.shape[1] > 1 ? e1[i1] : 0.0));
        }

    std::lock_guard lock(planner_mutex());
    m.buffer = fftw_alloc_real(n);
    const int rank = static_cast<int>(m.dims.size());
    std::vector<fftw_r2r_kind> fwd(rank, FFTW_REDFT10), bwd(rank, FFTW_REDFT01);
    m.forward = fftw_plan_r2r(rank, m.dims.data(), m.buffer, m.buffer, fwd.data(), FFTW_ESTIMATE);
    m.backward = fftw_plan_r2r(rank, m.dims.data(), m.buffer, m.buffer, bwd.data(), FFTW_ESTIMATE);
    if (!m.forward || !m.backward) throw NumericalFailure("ContinuityProjector: FFTW planning failed");
}

ContinuityProjector::~ContinuityProjector() {
    if (!impl_) return;
    std::lock_guard lock(planner_mutex());
    if (impl_->forward) fftw_destroy_plan(impl_->forward);
    if (impl_->backward) fftw_destroy_plan(impl_->backward);
    if (impl_->buffer) fftw_free(impl_->buffer);
}

void ContinuityProjector::project(StaggeredField& f, const GridMeasure& rho0, const GridMeasure& rho1) {
    Impl& m = *impl_;
    require_same_grid(f.grid, m.grid, "project_continuity");
    require_same_grid(f.grid, rho0.grid(), "project_continuity");
    require_same_grid(f.grid, rho1.grid(), "project_continuity");
    if (f.nt != m.nt) throw InvalidArgument("project_continuity: time resolution mismatch");
    set_endpoints(f, rho0, rho1);

    apply_continuity(f, m.rhs);
    const std::size_t n = m.rhs.size();
    std::copy(m.rhs.begin(), m.rhs.end(), m.buffer);
    fftw_execute(m.forward);
    for (std::size_t i = 0; i < n; ++i) m.buffer[i] /= m.eigen[i];
    fftw_execute(m.backward);
    std::copy(m.buffer, m.buffer + n, m.rhs.begin());
    for (double v : m.rhs)
        if (!std::isfinite(v)) throw NumericalFailure("project_continuity: non-finite multiplier");

    apply_continuity_adjoint(m.rhs, m.work);
    for_each_array(f, m.work, [](std::vector<double>& x, const std::vector<double>& y) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= y[i];
    });
}

void project_continuity(StaggeredField& f, const GridMeasure& rho0, const GridMeasure& rho1) {
    ContinuityProjector(f.grid, f.nt).project(f, rho0, rho1);
}

namespace {

SpaceTimePath extract_path(const StaggeredField& f) {
    const Grid& g = f.grid;
    const std::size_t nc = g.size();
    CenteredField v = centered_zeros(f);
    interpolate(f, v);
    double rho_max = 0.0;
    for (double r : f.rho) rho_max = std::max(rho_max, r);
    const double floor = 1e-12 * rho_max;

    SpaceTimePath path;
    path.times.resize(f.nt + 1);
    for (int j = 0; j <= f.nt; ++j) path.times[j] = static_cast<double>(j) / f.nt;
    for (int j = 0; j <= f.nt; ++j) {
        std::vector<double> vals(f.rho.begin() + j * nc, f.rho.begin() + (j + 1) * nc);
        for (double& x : vals) x = std::max(x, 0.0);
        path.densities.emplace_back(g, std::move(vals));
    }
    for (int j = 0; j < f.nt; ++j) {
        PotentialField pot = PotentialField::zeros(g);
        pot.layout = Layout::staggered;
        double e = 0.0;
        for (std::size_t c = 0; c < nc; ++c) {
            const std::size_t k = j * nc + c;
            const double r = v.rho[k];
            double m2 = v.s[k] * v.s[k];
            for (int i = 0; i < 2 * g.dim; ++i) m2 += v.m[i][k] * v.m[i][k];
            if (r > floor) {
                pot.u[c] = v.s[k] / r;
                for (int a = 0; a < g.dim; ++a) pot.grad[a][c] = kHalfRoot * (v.m[2 * a][k] + v.m[2 * a + 1][k]) / r;
                e += m2 / r;
            }
        }
        path.potentials.push_back(std::move(pot));
        path.step_energy.push_back(e * g.cell_volume());
    }
    return path;
}

}  // namespace

DistanceResult solve_distance(const GridMeasure& rho0, const GridMeasure& rho1, const SolverOptions& opts) {
    require_same_grid(rho0.grid(), rho1.grid(), "solve_distance");
    if (opts.nt < 2) throw InvalidArgument("solve_distance: nt must be at least 2");
    if (opts.max_iter < 1) throw InvalidArgument("solve_distance: max_iter must be positive");
    if (!(opts.tol_gap > 0.0) || !(opts.tol_feas > 0.0)) throw InvalidArgument("solve_distance: tolerances must be positive");
    if (!(opts.step_ratio > 0.0)) throw InvalidArgument("solve_distance: step_ratio must be positive");
    if (!(opts.relaxation > 0.0 && opts.relaxation < 2.0)) throw InvalidArgument("solve_distance: relaxation must lie in (0, 2)");
    if (opts.check_every < 1) throw InvalidArgument("solve_distance: check_every must be positive");

    const Grid& g = rho0.grid();
    const int nt = opts.nt;
    const std::size_t nc = g.size();
    const int dim = g.dim;

    // Start from the pointwise reaction path ((1-t) sqrt(rho0) + t sqrt(rho1))^2
    // with the source that makes it feasible and no flux.
    StaggeredField x = StaggeredField::zeros(g, nt);
    for (int j = 0; j <= nt; ++j) {
        const double t = static_cast<double>(j) / nt;
        for (std::size_t c = 0; c < nc; ++c) {
            const double r = (1.0 - t) * std::sqrt(rho0[c]) + t * std::sqrt(rho1[c]);
            x.rho[j * nc + c] = r * r;
        }
    }
    for (int j = 0; j < nt; ++j)
        for (std::size_t c = 0; c < nc; ++c) x.s[j * nc + c] = (x.rho[(j + 1) * nc + c] - x.rho[j * nc + c]) * nt;

    const double knorm = interpolation_norm(g, nt);
    const double theta = 0.99 / (knorm * knorm);
    double tau = std::sqrt(theta / opts.step_ratio);
    double sigma = std::sqrt(theta * opts.step_ratio);
    double adapt = 0.5;
    const double weight = g.cell_volume() / nt;

    StaggeredField x_new = x;
    StaggeredField x_ext = x;
    StaggeredField kty = StaggeredField::zeros(g, nt);
    StaggeredField kty_new = kty;
    CenteredField y = centered_zeros(x);
    CenteredField y_new = y;
    CenteredField kx = centered_zeros(x);
    CenteredField diff = y;
    ContinuityProjector projector(g, nt);
    const double relax = opts.relaxation;

    DistanceResult result;
    SolverReport& rep = result.report;
    double energy = staggered_energy(x);
    double energy_ref = energy;
    int stagnant_checks = 0;
    const int window = std::max(1, 500 / opts.check_every);
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        const bool check = (it + 1) % opts.check_every == 0 || it + 1 == opts.max_iter;

        // Primal step: x~ = Proj(x - tau K^T y).
        x_new = x;
        for_each_array(x_new, kty, [tau](std::vector<double>& a, const std::vector<double>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i] -= tau * b[i];
        });
        projector.project(x_new, rho0, rho1);

        // Dual step: y~ = prox_{sigma F*}(y + sigma K (2 x~ - x)).
        x_ext = x_new;
        for_each_array(x_ext, x, [](std::vector<double>& a, const std::vector<double>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i] = 2.0 * a[i] - b[i];
        });
        interpolate(x_ext, kx);
        double prox_copy_energy = 0.0;
        for (std::size_t k = 0; k < y.rho.size(); ++k) {
            PerspectivePoint z;
            z.rho = y.rho[k] + sigma * kx.rho[k];
            for (int i = 0; i < 2 * dim; ++i) z.w[i] = y.m[i][k] + sigma * kx.m[i][k];
            z.s = y.s[k] + sigma * kx.s[k];
            PerspectivePoint scaled{z.rho / sigma, z.w, z.s / sigma};
            for (double& w : scaled.w) w /= sigma;
            const PerspectivePoint v = prox_energy(scaled, 2.0 * weight / sigma);
            if (check) {
                double m2 = v.s * v.s;
                for (double w : v.w) m2 += w * w;
                prox_copy_energy += energy_density(v.rho, m2, weight);
            }
            y_new.rho[k] = z.rho - sigma * v.rho;
            for (int i = 0; i < 2 * dim; ++i) y_new.m[i][k] = z.w[i] - sigma * v.w[i];
            y_new.s[k] = z.s - sigma * v.s;
        }
        interpolate_adjoint(y_new, kty_new);

        if (check) {
            // Fixed-point residuals: (x - x~)/tau - K^T (y - y~) and
            // (y - y~)/sigma - K (x - x~).
            StaggeredField p = x;
            for_each_array(p, x_new, [tau](std::vector<double>& a, const std::vector<double>& b) {
                for (std::size_t i = 0; i < a.size(); ++i) a[i] = (a[i] - b[i]) / tau;
            });
            for_each_array(p, kty, [](std::vector<double>& a, const std::vector<double>& b) {
                for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
            });
            for_each_array(p, kty_new, [](std::vector<double>& a, const std::vector<double>& b) {
                for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
            });
            x_ext = x;
            for_each_array(x_ext, x_new, [](std::vector<double>& a, const std::vector<double>& b) {
                for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
            });
            interpolate(x_ext, kx);
            diff = y;
            for_each_array(diff, y_new, dim, [sigma](std::vector<double>& a, const std::vector<double>& b) {
                for (std::size_t i = 0; i < a.size(); ++i) a[i] = (a[i] - b[i]) / sigma;
            });
            for_each_array(diff, kx, dim, [](std::vector<double>& a, const std::vector<double>& b) {
                for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
            });
            interpolate(x_new, kx);
            const double p_abs = std::sqrt(field_norm2(p));
            const double d_abs = std::sqrt(field_norm2(diff, dim));
            const double xs = std::sqrt(field_norm2(x_new));
            const double ys = std::sqrt(field_norm2(kty_new));
            rep.primal_residual = p_abs / std::max({ys, xs / tau, 1e-300});
            rep.dual_residual = d_abs / std::max(std::sqrt(field_norm2(kx, dim)), 1e-300);
            if (opts.adaptive_steps && adapt > 1e-3) {
                // Residual balancing keeps tau * sigma fixed and damps the changes.
                if (p_abs > 1.5 * d_abs) {
                    tau /= 1.0 - adapt;
                    sigma *= 1.0 - adapt;
                    adapt *= 0.95;
                } else if (d_abs > 1.5 * p_abs) {
                    tau *= 1.0 - adapt;
                    sigma /= 1.0 - adapt;
                    adapt *= 0.95;
                }
            }
        }

        // Relaxation: (x, y) += relax * ((x~, y~) - (x, y)).
        for_each_array(x, x_new, [relax](std::vector<double>& a, const std::vector<double>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += relax * (b[i] - a[i]);
        });
        for_each_array(y, y_new, dim, [relax](std::vector<double>& a, const std::vector<double>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += relax * (b[i] - a[i]);
        });
        for_each_array(kty, kty_new, [relax](std::vector<double>& a, const std::vector<double>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += relax * (b[i] - a[i]);
        });
        if (!check) continue;

        energy = staggered_energy(x);
        if (!std::isfinite(rep.primal_residual) || !std::isfinite(rep.dual_residual) || !std::isfinite(energy))
            throw NumericalFailure("solve_distance: NaN detected");
        rep.energy_history.push_back(energy);
        rep.energy_gap = std::abs(energy - prox_copy_energy) /
                         std::max({energy, prox_copy_energy, 1e-12 * (rho0.mass() + rho1.mass())});

        const std::size_t hist = rep.energy_history.size();
        if (hist > static_cast<std::size_t>(window)) {
            energy_ref = rep.energy_history[hist - 1 - window];
            const double scale = std::max({std::abs(energy), std::abs(energy_ref), 1e-12 * (rho0.mass() + rho1.mass())});
            const bool flat = std::isfinite(energy) && std::abs(energy - energy_ref) <= 1e-3 * opts.tol_gap * scale;
            const bool small = rep.primal_residual <= 1e-3 * opts.tol_gap && rep.dual_residual <= 1e-3 * opts.tol_gap;
            stagnant_checks = (flat && small && rep.energy_gap <= opts.tol_gap) ? stagnant_checks + 1 : 0;
            if (stagnant_checks >= 2) {
                ++it;
                rep.converged = true;
                break;
            }
        }
    }
    rep.iterations = it;
    rep.feasibility = norm2(continuity_residual(x)) * std::sqrt(g.cell_volume() / nt);
    rep.d2 = staggered_energy(x);
    if (rep.feasibility > opts.tol_feas) rep.converged = false;
    rep.message = rep.converged ? "converged" : "maximum iterations reached";
    result.path = extract_path(x);
    return result;
}

SpaceTimePath reparametrize_arclength(const SpaceTimePath& path) {
    path.validate();
    const std::size_t n = path.steps();
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        cum[k + 1] = cum[k] + std::sqrt(path.step_energy[k]) * (path.times[k + 1] - path.times[k]);
    const double length = cum[n];
    if (!(length > 0.0)) return path;

    const double t0 = path.times.front(), t1 = path.times.back();
    const double duration = t1 - t0;

    // Left-continuous inverse of the cumulative arclength.
    auto inverse = [&](double s) -> std::pair<double, std::size_t> {
        if (s <= 0.0) return {t0, 0};
        if (s >= length) return {t1, n - 1};
        std::size_t k = std::lower_bound(cum.begin() + 1, cum.end(), s) - cum.begin() - 1;
        while (k + 1 < n && cum[k + 1] <= s && cum[k + 1] == cum[k]) ++k;
        const double ds = cum[k + 1] - cum[k];
        const double frac = ds > 0.0 ? (s - cum[k]) / ds : 0.0;
        return {path.times[k] + frac * (path.times[k + 1] - path.times[k]), k};
    };
    auto frame_at = [&](double t, std::size_t k) {
        const double a = path.times[k], b = path.times[k + 1];
        const double th = std::clamp((t - a) / (b - a), 0.0, 1.0);
        const auto& r0 = path.densities[k];
        const auto& r1 = path.densities[k + 1];
        std::vector<double> v(r0.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double q = (1.0 - th) * std::sqrt(r0[i]) + th * std::sqrt(r1[i]);
            v[i] = q * q;
        }
        return GridMeasure(r0.grid(), std::move(v));
    };

    SpaceTimePath out;
    out.times.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) out.times[k] = t0 + duration * static_cast<double>(k) / n;
    for (std::size_t k = 0; k <= n; ++k) {
        if (k == 0) {
            out.densities.push_back(path.densities.front());
        } else if (k == n) {
            out.densities.push_back(path.densities.back());
        } else {
            const auto [t, j] = inverse(length * static_cast<double>(k) / n);
            out.densities.push_back(frame_at(t, j));
        }
    }
    // Constant speed: the new parameter advances L/duration arclength per
    // unit time, so every interval carries the same squared norm.
    const double speed = length / duration;
    for (std::size_t k = 0; k < n; ++k) {
        const auto [t, j] = inverse(length * (k + 0.5) / n);
        (void)t;
        const double lam = std::sqrt(path.step_energy[j]);
        PotentialField pot = path.potentials[j];
        const double factor = lam > 0.0 ? speed / lam : 0.0;
        for (double& x : pot.u) x *= factor;
        for (int a = 0; a < pot.grid.dim; ++a)
            for (double& x : pot.grad[a]) x *= factor;
        out.potentials.push_back(std::move(pot));
        out.step_energy.push_back(speed * speed);
    }
    return out;
}

std::vector<double> measured_speeds(const SpaceTimePath& path) {
    path.validate();
    std::vector<double> speeds;
    for (std::size_t k = 0; k < path.steps(); ++k) {
        const auto& r0 = path.densities[k];
        const auto& r1 = path.densities[k + 1];
        const double dt = path.times[k + 1] - path.times[k];
        std::vector<double> mid(r0.size()), zeta(r0.size());
        for (std::size_t i = 0; i < mid.size(); ++i) {
            mid[i] = 0.5 * (r0[i] + r1[i]);
            zeta[i] = (r1[i] - r0[i]) / dt;
        }
        const GridMeasure rho(r0.grid(), std::move(mid));
        speeds.push_back(std::sqrt(tangent_norm_squared(rho, zeta)));
    }
    return speeds;
}

PathDiagnostics path_diagnostics(const SpaceTimePath& path, double bl_tol, int max_pairs) {
    path.validate();
    PathDiagnostics d;
    d.energy = path.total_energy();
    const double m0 = path.densities.front().mass();
    const double m1 = path.densities.back().mass();
    d.mass_bound = 2.0 * (std::max(m0, m1) + d.energy);
    for (const auto& r : path.densities) d.max_mass = std::max(d.max_mass, r.mass());
    d.mass_margin = d.mass_bound - d.max_mass;
    d.holder_constant = std::sqrt(d.mass_bound * d.energy);

    const std::size_t nf = path.densities.size();
    d.mass_holder_margin = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < nf; ++a)
        for (std::size_t b = a + 1; b < nf; ++b) {
            const double bound = d.holder_constant * std::sqrt(path.times[b] - path.times[a]);
            d.mass_holder_margin =
                std::min(d.mass_holder_margin, bound - std::abs(path.densities[b].mass() - path.densities[a].mass()));
        }
    if (nf < 2) d.mass_holder_margin = 0.0;

    // d_BL pairs: consecutive frames, frames against the start, a few long jumps.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const std::size_t stride = std::max<std::size_t>(1, (nf - 1) / std::max(1, max_pairs / 3));
    for (std::size_t a = 0; a + 1 < nf && static_cast<int>(pairs.size()) < max_pairs; a += stride) pairs.emplace_back(a, a + 1);
    for (std::size_t b = stride; b < nf && static_cast<int>(pairs.size()) < max_pairs; b += stride) pairs.emplace_back(0, b);
    if (nf > 2 && static_cast<int>(pairs.size()) < max_pairs) pairs.emplace_back(nf / 2, nf - 1);
    d.bl_holder_margin = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : pairs) {
        const double bound = d.holder_constant * std::sqrt(path.times[b] - path.times[a]);
        const auto bl = bounded_lipschitz(path.densities[a], path.densities[b], bl_tol);
        d.bl_holder_margin = std::min(d.bl_holder_margin, bound - bl.lower_bound);
        ++d.pairs_checked;
    }
    if (pairs.empty()) d.bl_holder_margin = 0.0;
    const double slack = 1e-9 * std::max(1.0, d.mass_bound);
    d.ok = d.mass_margin >= -slack && d.mass_holder_margin >= -slack && d.bl_holder_margin >= -slack;
    return d;
}

}  // namespace wfr
