#include "wfr/otto.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include "wfr/parallel.hpp"
#include "wfr/stencil.hpp"

namespace wfr {

namespace {

std::vector<double> floored_density(const GridMeasure& rho) {
    const double floor = 1e-12 * std::max(rho.max_value(), 1e-300);
    std::vector<double> r(rho.values().begin(), rho.values().end());
    for (double& v : r) v = std::max(v, floor);
    return r;
}

// Applies rho u - div(rho_f D u).
std::vector<double> apply_tangent(const Grid& g, std::span<const double> r, std::span<const double> u) {
    auto out = stencil::weighted_divergence(g, r, u);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = r[k] * u[k] - out[k];
    return out;
}

std::vector<double> tangent_diagonal(const Grid& g, std::span<const double> r) {
    std::vector<double> d(r.begin(), r.end());
    for (int a = 0; a < g.dim; ++a) {
        const std::size_t st = g.stride(a);
        const double ih2 = 1.0 / (g.spacing[a] * g.spacing[a]);
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (g.unflatten(k)[a] + 1 >= g.shape[a]) continue;
            const double w = 0.5 * (r[k] + r[k + st]) * ih2;
            d[k] += w;
            d[k + st] += w;
        }
    }
    return d;
}

std::vector<double> solve_tridiagonal(const Grid& g, std::span<const double> r, std::span<const double> rhs) {
    const std::size_t n = r.size();
    const double ih2 = 1.0 / (g.spacing[0] * g.spacing[0]);
    std::vector<double> diag = tangent_diagonal(g, r);
    std::vector<double> off(n > 0 ? n - 1 : 0);
    for (std::size_t k = 0; k + 1 < n; ++k) off[k] = -0.5 * (r[k] + r[k + 1]) * ih2;
    std::vector<double> c(n), d(n), x(n);
    c[0] = n > 1 ? off[0] / diag[0] : 0.0;
    d[0] = rhs[0] / diag[0];
    for (std::size_t k = 1; k < n; ++k) {
        const double m = diag[k] - off[k - 1] * c[k - 1];
        c[k] = k + 1 < n ? off[k] / m : 0.0;
        d[k] = (rhs[k] - off[k - 1] * d[k - 1]) / m;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t k = n - 1; k-- > 0;) x[k] = d[k] - c[k] * x[k + 1];
    return x;
}

std::vector<double> solve_pcg(const Grid& g, std::span<const double> r, std::span<const double> rhs) {
    const std::size_t n = r.size();
    const auto diag = tangent_diagonal(g, r);
    std::vector<double> x(n, 0.0), res(rhs.begin(), rhs.end()), z(n), p(n);
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    };
    const double bnorm = std::sqrt(dot(res, res));
    if (bnorm == 0.0) return x;
    for (std::size_t k = 0; k < n; ++k) z[k] = res[k] / diag[k];
    p = z;
    double rz = dot(res, z);
    const int max_iter = static_cast<int>(std::max<std::size_t>(10 * n, 1000));
    for (int it = 0; it < max_iter; ++it) {
        const auto ap = apply_tangent(g, r, p);
        const double alpha = rz / dot(p, ap);
        for (std::size_t k = 0; k < n; ++k) {
            x[k] += alpha * p[k];
            res[k] -= alpha * ap[k];
        }
        if (std::sqrt(dot(res, res)) <= 1e-14 * bnorm) return x;
        for (std::size_t k = 0; k < n; ++k) z[k] = res[k] / diag[k];
        const double rz_new = dot(res, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    }
    // Relative 1e-14 may be out of reach in ill-conditioned cases; accept what
    // the iteration reached if it is still small.
    if (std::sqrt(dot(res, res)) <= 1e-8 * bnorm) return x;
    throw NumericalFailure("solve_tangent_potential: conjugate gradients did not converge");
}

}  // namespace

std::vector<double> solve_tangent_potential(const GridMeasure& rho, std::span<const double> zeta) {
    if (zeta.size() != rho.size()) throw InvalidArgument("solve_tangent_potential: size mismatch");
    if (rho.max_value() <= 0.0) throw InvalidArgument("solve_tangent_potential: density vanishes identically");
    const auto r = floored_density(rho);
    if (rho.grid().dim == 1) return solve_tridiagonal(rho.grid(), r, zeta);
    return solve_pcg(rho.grid(), r, zeta);
}

double tangent_norm_squared(const GridMeasure& rho, std::span<const double> zeta) {
    const auto u = solve_tangent_potential(rho, zeta);
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * zeta[k];
    return s * rho.grid().cell_volume();
}

double metric_speed_squared(const GridMeasure& rho, std::span<const double> u) {
    if (u.size() != rho.size()) throw InvalidArgument("metric_speed_squared: size mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += rho[k] * u[k] * u[k];
    return s * rho.grid().cell_volume() + stencil::weighted_dirichlet(rho.grid(), rho.values(), u);
}

// ---------------------------------------------------------------------------

bool BoundingBox::contains(int dim, const std::array<double, 2>& x) const {
    for (int a = 0; a < dim; ++a)
        if (!(x[a] >= lo[a] && x[a] <= hi[a])) return false;
    return true;
}

namespace {

constexpr int kMaxState = 6;
using State = std::array<double, kMaxState>;

int step_count(double t_end, double dt) {
    if (!(dt > 0.0) || !(t_end >= 0.0)) throw InvalidArgument("particle integration: need dt > 0 and t_end >= 0");
    return static_cast<int>(std::ceil(t_end / dt - 1e-9));
}

template <class Rhs>
State rk4(const Rhs& f, double t, const State& y, double h) {
    auto axpy = [](const State& a, double s, const State& b) {
        State r;
        for (int i = 0; i < kMaxState; ++i) r[i] = a[i] + s * b[i];
        return r;
    };
    const State k1 = f(t, y);
    const State k2 = f(t + 0.5 * h, axpy(y, 0.5 * h, k1));
    const State k3 = f(t + 0.5 * h, axpy(y, 0.5 * h, k2));
    const State k4 = f(t + h, axpy(y, h, k3));
    State out;
    for (int i = 0; i < kMaxState; ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

// Drops zero-charge particles, rejects negative ones.
std::vector<Particle> admissible_particles(const ParticleState& init, std::vector<std::string>& events) {
    std::vector<Particle> out;
    for (std::size_t i = 0; i < init.particles.size(); ++i) {
        const Particle& p = init.particles[i];
        if (!(p.k >= 0.0) || !std::isfinite(p.k)) throw InvalidArgument("particle charge must be finite and nonnegative");
        if (p.k == 0.0) {
            std::ostringstream msg;
            msg << "t=" << init.time << ": dropped particle " << i << " with zero charge";
            events.push_back(msg.str());
            continue;
        }
        out.push_back(p);
    }
    return out;
}

void check_inside(const BoundingBox& box, int dim, const Particle& p, std::size_t id, double t) {
    if (!box.contains(dim, p.x) || !std::isfinite(p.k)) {
        std::ostringstream msg;
        msg << "particle " << id << " left the bounding box at t=" << t;
        throw NumericalFailure(msg.str());
    }
}

template <class Advance>
Trajectory integrate(const ParticleState& init, double t_end, double dt, const BoundingBox& box, const Advance& advance) {
    if (init.dim != 1 && init.dim != 2) throw InvalidArgument("particle integration: dim must be 1 or 2");
    Trajectory traj;
    traj.dim = init.dim;
    auto particles = admissible_particles(init, traj.events);
    const int n = step_count(t_end, dt);
    const double h = n > 0 ? t_end / n : 0.0;
    traj.times.reserve(n + 1);
    traj.states.reserve(n + 1);
    for (std::size_t i = 0; i < particles.size(); ++i) check_inside(box, init.dim, particles[i], i, init.time);
    traj.times.push_back(init.time);
    traj.states.push_back(particles);
    for (int s = 0; s < n; ++s) {
        const double t = init.time + s * h;
        std::vector<Particle> next(particles.size());
        parallel_for(particles.size(), [&](std::size_t i) {
            next[i] = advance(particles[i], t, h);
            check_inside(box, init.dim, next[i], i, t + h);
        });
        particles = std::move(next);
        traj.times.push_back(init.time + (s + 1) * h);
        traj.states.push_back(particles);
    }
    return traj;
}

}  // namespace

Trajectory integrate_particles(const ParticleState& init, const AnalyticPotential& pot, double t_end, double dt,
                               const BoundingBox& box) {
    if (!pot) throw InvalidArgument("integrate_particles: potential is empty");
    const int dim = init.dim;
    // State layout: x0, x1, log k.
    auto rhs = [&](double t, const State& y) {
        const auto s = pot(t, {y[0], y[1]});
        State d{};
        d[0] = s.grad[0];
        d[1] = dim == 2 ? s.grad[1] : 0.0;
        d[2] = s.u;
        return d;
    };
    auto seen = [&](Particle& p, double t) {
        const auto s = pot(t, p.x);
        p.u = s.u;
        p.v = {s.grad[0], dim == 2 ? s.grad[1] : 0.0};
    };
    ParticleState start = init;
    for (auto& p : start.particles)
        if (p.k > 0.0) seen(p, init.time);
    return integrate(start, t_end, dt, box, [&](const Particle& p, double t, double h) {
        State y{p.x[0], p.x[1], std::log(p.k), 0, 0, 0};
        y = rk4(rhs, t, y, h);
        Particle q;
        q.x = {y[0], y[1]};
        q.k = std::exp(y[2]);
        seen(q, t + h);
        return q;
    });
}

Trajectory integrate_characteristics(const ParticleState& init, double t_end, double dt, const BoundingBox& box) {
    const int dim = init.dim;
    // State layout: x0, x1, log k, u, v0, v1.
    auto rhs = [dim](double, const State& y) {
        const double v2 = y[4] * y[4] + (dim == 2 ? y[5] * y[5] : 0.0);
        State d{};
        d[0] = y[4];
        d[1] = dim == 2 ? y[5] : 0.0;
        d[2] = y[3];
        d[3] = 0.5 * (v2 - y[3] * y[3]);
        d[4] = -y[3] * y[4];
        d[5] = dim == 2 ? -y[3] * y[5] : 0.0;
        return d;
    };
    return integrate(init, t_end, dt, box, [&](const Particle& p, double t, double h) {
        State y{p.x[0], p.x[1], std::log(p.k), p.u, p.v[0], p.v[1]};
        y = rk4(rhs, t, y, h);
        Particle q;
        q.x = {y[0], y[1]};
        q.k = std::exp(y[2]);
        q.u = y[3];
        q.v = {y[4], y[5]};
        return q;
    });
}

ParticleEnergy particle_energy(const Trajectory& traj) {
    ParticleEnergy e;
    if (traj.states.empty()) return e;
    const std::size_t np = traj.states.front().size();
    e.per_particle.assign(np, 0.0);
    auto density = [&](const Particle& p) {
        double v2 = p.v[0] * p.v[0] + (traj.dim == 2 ? p.v[1] * p.v[1] : 0.0);
        return p.k * (p.u * p.u + v2);
    };
    for (std::size_t j = 0; j + 1 < traj.states.size(); ++j) {
        const double h = traj.times[j + 1] - traj.times[j];
        for (std::size_t i = 0; i < np; ++i)
            e.per_particle[i] += 0.5 * h * (density(traj.states[j][i]) + density(traj.states[j + 1][i]));
    }
    e.total = std::accumulate(e.per_particle.begin(), e.per_particle.end(), 0.0);
    return e;
}

EulerLagrangeResidual euler_lagrange_residual(double k, double dk, double ddk, double ds, double dds) {
    if (!(k > 0.0)) throw InvalidArgument("euler_lagrange_residual: charge must be positive");
    const double lk = dk / k;
    return {2.0 * ddk / k - lk * lk - ds * ds, dk * ds + k * dds};
}

// ---------------------------------------------------------------------------

namespace {

double max_face_gradient(const Grid& g, std::span<const double> u) {
    double m = 0.0;
    for (int a = 0; a < g.dim; ++a) {
        const std::size_t st = g.stride(a);
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (g.unflatten(k)[a] + 1 >= g.shape[a]) continue;
            m = std::max(m, std::abs(u[k + st] - u[k]) / g.spacing[a]);
        }
    }
    return m;
}

struct HjRates {
    std::vector<double> rho, u;
};

HjRates hj_rates(const Grid& g, std::span<const double> rho, std::span<const double> u) {
    HjRates r;
    r.rho = stencil::weighted_divergence(g, rho, u);
    r.u = stencil::face_averaged_grad_sq(g, u);
    for (std::size_t k = 0; k < g.size(); ++k) {
        r.rho[k] = -r.rho[k] + rho[k] * u[k];
        r.u[k] = -0.5 * (u[k] * u[k] + r.u[k]);
    }
    return r;
}

}  // namespace

std::pair<GridMeasure, PotentialField> hj_geodesic_step(const GridMeasure& rho, const PotentialField& pot, double dt) {
    const Grid& g = rho.grid();
    require_same_grid(g, pot.grid, "hj_geodesic_step");
    if (pot.layout != Layout::collocated) throw InvalidArgument("hj_geodesic_step: potential must be collocated");
    if (!(dt > 0.0)) throw InvalidArgument("hj_geodesic_step: dt must be positive");
    const double hmin = g.dim == 1 ? g.spacing[0] : std::min(g.spacing[0], g.spacing[1]);
    const double gmax = max_face_gradient(g, pot.u);
    if (dt * gmax > 0.5 * hmin * (1.0 + 1e-12))
        throw InvalidArgument("hj_geodesic_step: dt violates the CFL bound 0.5 h / max|grad u|");

    const std::size_t n = g.size();
    const auto r1 = hj_rates(g, rho.values(), pot.u);
    std::vector<double> rho1(n), u1(n);
    for (std::size_t k = 0; k < n; ++k) {
        rho1[k] = rho[k] + dt * r1.rho[k];
        u1[k] = pot.u[k] + dt * r1.u[k];
    }
    const auto r2 = hj_rates(g, rho1, u1);
    std::vector<double> rho2(n), u2(n);
    const double scale = std::max(rho.max_value(), 1e-300);
    for (std::size_t k = 0; k < n; ++k) {
        rho2[k] = rho[k] + 0.5 * dt * (r1.rho[k] + r2.rho[k]);
        u2[k] = pot.u[k] + 0.5 * dt * (r1.u[k] + r2.u[k]);
        if (!std::isfinite(rho2[k]) || !std::isfinite(u2[k]))
            throw NumericalFailure("hj_geodesic_step: non-finite values (blow-up before caustics)");
        if (rho2[k] < 0.0) {
            if (rho2[k] < -1e-12 * scale) throw NumericalFailure("hj_geodesic_step: density became negative");
            rho2[k] = 0.0;
        }
    }
    return {GridMeasure(g, std::move(rho2)), PotentialField::from_potential(g, std::move(u2))};
}

std::pair<GridMeasure, PotentialField> hj_evolve(GridMeasure rho, PotentialField pot, double dt, int steps) {
    for (int s = 0; s < steps; ++s) std::tie(rho, pot) = hj_geodesic_step(rho, pot, dt);
    return {std::move(rho), std::move(pot)};
}

DirectionReport direction_invariance_check(const GridMeasure& rho, const PotentialField& pot, double t_end, double dt,
                                           int stride, double interior) {
    const Grid& g = rho.grid();
    if (stride < 1 || !(interior > 0.0 && interior <= 1.0)) throw InvalidArgument("direction_invariance_check: bad sampling");
    const int steps = step_count(t_end, dt);
    const double h = steps > 0 ? t_end / steps : 0.0;

    auto gradients = [&](const PotentialField& p) {
        std::array<std::vector<double>, 2> gr;
        for (int a = 0; a < g.dim; ++a) gr[a] = stencil::centered_derivative(g, p.u, a);
        return gr;
    };
    auto sample = [&](const std::array<std::vector<double>, 2>& gr, const std::array<double, 2>& x) {
        std::array<double, 2> v{0.0, 0.0};
        for (int a = 0; a < g.dim; ++a) v[a] = stencil::interpolate(g, gr[a], x);
        return v;
    };
    auto norm = [](const std::array<double, 2>& v) { return std::hypot(v[0], v[1]); };

    PotentialField cur = PotentialField::from_potential(g, pot.u);
    GridMeasure cur_rho = rho;
    auto grad = gradients(cur);
    double gmax = 0.0;
    for (int a = 0; a < g.dim; ++a)
        for (double v : grad[a]) gmax = std::max(gmax, std::abs(v));
    const double eps_dir = 1e-8 * gmax;

    struct Track {
        std::array<double, 2> x, d0;
        bool alive;
    };
    std::vector<Track> tracks;
    DirectionReport rep;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto idx = g.unflatten(k);
        bool take = true;
        std::array<double, 2> x{0.0, 0.0};
        for (int a = 0; a < g.dim; ++a) {
            if (idx[a] % stride != 0) take = false;
            x[a] = g.center(a, idx[a]);
            const double mid = g.origin[a] + 0.5 * g.length(a);
            if (std::abs(x[a] - mid) > 0.5 * interior * g.length(a)) take = false;
        }
        if (!take) continue;
        const auto v = sample(grad, x);
        if (norm(v) < eps_dir) {
            ++rep.skipped;
            continue;
        }
        tracks.push_back({x, {v[0] / norm(v), v[1] / norm(v)}, true});
    }

    for (int s = 0; s < steps; ++s) {
        auto [next_rho, next] = hj_geodesic_step(cur_rho, cur, h);
        const auto next_grad = gradients(next);
        for (auto& tr : tracks) {
            if (!tr.alive) continue;
            const auto v0 = sample(grad, tr.x);
            std::array<double, 2> xp{tr.x[0] + h * v0[0], tr.x[1] + h * v0[1]};
            const auto v1 = sample(next_grad, xp);
            tr.x = {tr.x[0] + 0.5 * h * (v0[0] + v1[0]), tr.x[1] + 0.5 * h * (v0[1] + v1[1])};
            const auto v = sample(next_grad, tr.x);
            if (norm(v) < eps_dir) {
                tr.alive = false;
                ++rep.skipped;
                continue;
            }
            const double cross = tr.d0[0] * v[1] - tr.d0[1] * v[0];
            const double dot = tr.d0[0] * v[0] + tr.d0[1] * v[1];
            rep.max_deviation = std::max(rep.max_deviation, std::atan2(std::abs(cross), dot));
        }
        cur_rho = std::move(next_rho);
        cur = std::move(next);
        grad = next_grad;
    }
    for (const auto& tr : tracks)
        if (tr.alive) ++rep.tracked;
    return rep;
}

// ---------------------------------------------------------------------------

InternalEnergySpec InternalEnergySpec::from_derivatives(std::string name, std::function<double(double)> E,
                                                        std::function<double(double)> dE,
                                                        std::function<double(double)> ddE) {
    InternalEnergySpec s;
    s.name = std::move(name);
    s.E = E;
    s.P = [E, dE](double r) { return dE(r) * r - E(r); };
    s.P2 = [E, dE, ddE](double r) { return ddE(r) * r * r - dE(r) * r + E(r); };
    s.Q = [dE](double r) { return dE(r) * r; };
    s.Q2 = [dE, ddE](double r) { return ddE(r) * r * r + dE(r) * r; };
    return s;
}

InternalEnergySpec InternalEnergySpec::quadratic() {
    return from_derivatives(
        "quadratic", [](double r) { return 0.5 * r * r; }, [](double r) { return r; }, [](double) { return 1.0; });
}

InternalEnergySpec InternalEnergySpec::cubic() {
    return from_derivatives(
        "cubic", [](double r) { return r * r * r; }, [](double r) { return 3.0 * r * r; },
        [](double r) { return 6.0 * r; });
}

InternalEnergySpec InternalEnergySpec::entropy() {
    auto s = from_derivatives(
        "entropy", [](double r) { return r > 0.0 ? r * std::log(r) - r : 0.0; },
        [](double r) { return std::log(r); }, [](double r) { return 1.0 / r; });
    // Closed forms avoid log(0) * 0 at vanishing density.
    s.P = [](double r) { return r; };
    s.P2 = [](double) { return 0.0; };
    s.Q = [](double r) { return r > 0.0 ? r * std::log(r) : 0.0; };
    s.Q2 = [](double r) { return r > 0.0 ? r * std::log(r) + r : 0.0; };
    return s;
}

double internal_energy(const GridMeasure& rho, const InternalEnergySpec& spec) {
    double s = 0.0;
    for (std::size_t k = 0; k < rho.size(); ++k) s += spec.E(rho[k]);
    return s * rho.grid().cell_volume();
}

double hessian_internal_energy(const GridMeasure& rho, const PotentialField& pot, const InternalEnergySpec& spec) {
    const Grid& g = rho.grid();
    require_same_grid(g, pot.grid, "hessian_internal_energy");
    const auto& u = pot.u;
    std::array<std::vector<double>, 2> d1;
    std::array<std::array<std::vector<double>, 2>, 2> d2;
    for (int a = 0; a < g.dim; ++a) {
        d1[a] = stencil::centered_derivative(g, u, a);
        for (int b = a; b < g.dim; ++b) d2[a][b] = stencil::second_derivative(g, u, a, b);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto idx = g.unflatten(k);
        bool inner = true;
        for (int a = 0; a < g.dim; ++a)
            if (idx[a] < 1 || idx[a] > g.shape[a] - 2) inner = false;
        if (!inner) continue;
        double lap = 0.0, gamma2 = 0.0, grad2 = 0.0;
        for (int a = 0; a < g.dim; ++a) {
            lap += d2[a][a][k];
            grad2 += d1[a][k] * d1[a][k];
            for (int b = a; b < g.dim; ++b) gamma2 += (a == b ? 1.0 : 2.0) * d2[a][b][k] * d2[a][b][k];
        }
        const double r = rho[k];
        const double P = spec.P(r), P2 = spec.P2(r), Q = spec.Q(r), Q2 = spec.Q2(r);
        total += P * gamma2 + P2 * lap * lap - (2.0 * P2 + P) * u[k] * lap + (Q2 - 0.5 * Q - P2) * grad2 +
                 (Q2 - 0.5 * Q) * u[k] * u[k];
    }
    return total * g.cell_volume();
}

double hessian_finite_difference(const GridMeasure& rho, const PotentialField& pot, const InternalEnergySpec& spec,
                                 double dt, int substeps) {
    if (!(dt > 0.0) || substeps < 1) throw InvalidArgument("hessian_finite_difference: need dt > 0 and substeps >= 1");
    const double h = dt / substeps;
    PotentialField fwd = PotentialField::from_potential(rho.grid(), pot.u);
    std::vector<double> neg(pot.u.size());
    for (std::size_t k = 0; k < neg.size(); ++k) neg[k] = -pot.u[k];
    PotentialField bwd = PotentialField::from_potential(rho.grid(), std::move(neg));
    const auto plus = hj_evolve(rho, std::move(fwd), h, substeps).first;
    const auto minus = hj_evolve(rho, std::move(bwd), h, substeps).first;
    return (internal_energy(plus, spec) - 2.0 * internal_energy(rho, spec) + internal_energy(minus, spec)) / (dt * dt);
}

HessianComparison compare_hessian(const GridMeasure& rho, const PotentialField& pot, const InternalEnergySpec& spec,
                                  double dt, int substeps) {
    HessianComparison c;
    c.formula_value = hessian_internal_energy(rho, pot, spec);
    c.fd_value = hessian_finite_difference(rho, pot, spec, dt, substeps);
    const double scale = std::max(std::abs(c.fd_value), 1e-300);
    c.rel_err = std::abs(c.formula_value - c.fd_value) / scale;
    return c;
}

}  // namespace wfr
