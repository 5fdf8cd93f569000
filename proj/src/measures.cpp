#include "wfr/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wfr {

double mass(const GridMeasure& rho) {
    double s = 0.0;
    for (double v : rho.values()) s += v;
    return s * rho.grid().cell_volume();
}

double entropy(const GridMeasure& rho, const GridMeasure& m) {
    require_same_grid(rho.grid(), m.grid(), "entropy");
    double s = 0.0;
    for (std::size_t k = 0; k < rho.size(); ++k) {
        const double d = rho[k] - m[k];
        s += d * d;
    }
    return 0.5 * s * rho.grid().cell_volume();
}

namespace {

// Forward differences per axis, zero in the last cell along that axis.
void forward_diff(const Grid& g, const std::vector<double>& phi, std::array<std::vector<double>, 2>& q) {
    for (int a = 0; a < g.dim; ++a) {
        q[a].assign(g.size(), 0.0);
        const std::size_t st = g.stride(a);
        const double inv_h = 1.0 / g.spacing[a];
        for (std::size_t k = 0; k < g.size(); ++k)
            if (g.unflatten(k)[a] + 1 < g.shape[a]) q[a][k] = (phi[k + st] - phi[k]) * inv_h;
    }
}

// Adjoint of forward_diff, accumulated into out.
void forward_diff_adjoint(const Grid& g, const std::array<std::vector<double>, 2>& q, std::vector<double>& out) {
    for (int a = 0; a < g.dim; ++a) {
        const std::size_t st = g.stride(a);
        const double inv_h = 1.0 / g.spacing[a];
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (g.unflatten(k)[a] + 1 < g.shape[a]) {
                out[k + st] += q[a][k] * inv_h;
                out[k] -= q[a][k] * inv_h;
            }
        }
    }
}

double cell_norm(const std::array<std::vector<double>, 2>& q, int dim, std::size_t k) {
    double s = 0.0;
    for (int a = 0; a < dim; ++a) s += q[a][k] * q[a][k];
    return std::sqrt(s);
}

// Euclidean projection onto {||p||_inf + max_k |q_k| <= 1}.
void project_bl_ball(std::vector<double>& p, std::array<std::vector<double>, 2>& q, int dim) {
    const std::size_t n = p.size();
    std::vector<double> qn(n);
    double pmax = 0.0, qmax = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        pmax = std::max(pmax, std::abs(p[k]));
        qn[k] = cell_norm(q, dim, k);
        qmax = std::max(qmax, qn[k]);
    }
    if (pmax + qmax <= 1.0) return;

    // Split alpha between the two balls: minimise sum (|p|-alpha)_+^2 + (|q|-(1-alpha))_+^2.
    auto slope = [&](double alpha) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            s -= std::max(0.0, std::abs(p[k]) - alpha);
            s += std::max(0.0, qn[k] - (1.0 - alpha));
        }
        return s;
    };
    double lo = 0.0, hi = 1.0;
    if (slope(0.0) >= 0.0) {
        hi = 0.0;
    } else if (slope(1.0) <= 0.0) {
        lo = 1.0;
    } else {
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (slope(mid) < 0.0) lo = mid; else hi = mid;
        }
    }
    double alpha = 0.5 * (lo + hi);
    // Exact root for the active sets found by bisection.
    double num = 0.0;
    int cnt = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (std::abs(p[k]) > alpha) { num += std::abs(p[k]); ++cnt; }
        if (qn[k] > 1.0 - alpha) { num -= qn[k] - 1.0; ++cnt; }
    }
    if (cnt > 0) {
        const double exact = num / cnt;
        if (exact >= 0.0 && exact <= 1.0 && std::abs(exact - alpha) < 1e-6) alpha = exact;
    }
    alpha = std::clamp(alpha, 0.0, 1.0);
    for (std::size_t k = 0; k < n; ++k) p[k] = std::clamp(p[k], -alpha, alpha);
    const double r = 1.0 - alpha;
    for (std::size_t k = 0; k < n; ++k) {
        if (qn[k] > r) {
            const double f = qn[k] > 0.0 ? r / qn[k] : 0.0;
            for (int a = 0; a < dim; ++a) q[a][k] *= f;
        }
    }
}

}  // namespace

double bounded_lipschitz_norm(const Grid& grid, const std::vector<double>& phi) {
    std::array<std::vector<double>, 2> q;
    forward_diff(grid, phi, q);
    double pmax = 0.0, qmax = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        pmax = std::max(pmax, std::abs(phi[k]));
        qmax = std::max(qmax, cell_norm(q, grid.dim, k));
    }
    return pmax + qmax;
}

BoundedLipschitzResult bounded_lipschitz(const GridMeasure& rho0, const GridMeasure& rho1, double tol, int max_iter) {
    require_same_grid(rho0.grid(), rho1.grid(), "bounded_lipschitz");
    if (!(tol > 0.0)) throw InvalidArgument("bounded_lipschitz: tol must be positive");
    const Grid& g = rho0.grid();
    const std::size_t n = g.size();
    const int dim = g.dim;

    std::vector<double> rhs(n);
    double g1 = 0.0, g2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        rhs[k] = (rho1[k] - rho0[k]) * g.cell_volume();
        g1 += std::abs(rhs[k]);
        g2 += rhs[k] * rhs[k];
    }

    BoundedLipschitzResult res;
    res.witness = PotentialField::zeros(g);
    if (g1 == 0.0) return res;

    // phi = sign(total) is feasible and often nearly optimal.
    double total = std::accumulate(rhs.begin(), rhs.end(), 0.0);
    std::vector<double> best_phi(n, total >= 0.0 ? 1.0 : -1.0);
    double best = std::abs(total);
    double upper = g1;

    double knorm2 = 1.0;
    for (int a = 0; a < dim; ++a) knorm2 += 4.0 / (g.spacing[a] * g.spacing[a]);
    const double knorm = std::sqrt(knorm2);
    const double balance = std::sqrt(std::sqrt(static_cast<double>(n)) / std::sqrt(g2));
    const double tau = 0.99 * balance / knorm;
    const double sigma = 0.99 / (balance * knorm);

    std::vector<double> phi(best_phi), phi_bar(phi), phi_prev(n);
    std::vector<double> yp(n, 0.0), zp(n);
    std::array<std::vector<double>, 2> yq, zq, dphi;
    for (int a = 0; a < dim; ++a) {
        yq[a].assign(n, 0.0);
        zq[a].assign(n, 0.0);
    }
    std::vector<double> kty(n);

    auto certify = [&]() {
        const double nrm = bounded_lipschitz_norm(g, phi);
        if (nrm > 0.0) {
            double val = 0.0;
            for (std::size_t k = 0; k < n; ++k) val += rhs[k] * phi[k];
            val /= nrm;
            if (val > best) {
                best = val;
                best_phi = phi;
                for (double& v : best_phi) v /= nrm;
            }
        }
        // Dual bound: choose y_p so that K^T y = g holds exactly.
        std::vector<double> dty(n, 0.0);
        forward_diff_adjoint(g, yq, dty);
        double l1p = 0.0, l1q = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            l1p += std::abs(rhs[k] - dty[k]);
            l1q += cell_norm(yq, dim, k);
        }
        upper = std::min(upper, std::max(l1p, l1q));
    };

    int it = 0;
    for (; it < max_iter; ++it) {
        forward_diff(g, phi_bar, dphi);
        for (std::size_t k = 0; k < n; ++k) zp[k] = (yp[k] + sigma * phi_bar[k]) / sigma;
        for (int a = 0; a < dim; ++a)
            for (std::size_t k = 0; k < n; ++k) zq[a][k] = (yq[a][k] + sigma * dphi[a][k]) / sigma;
        auto pp = zp;
        auto pq = zq;
        project_bl_ball(pp, pq, dim);
        for (std::size_t k = 0; k < n; ++k) yp[k] = sigma * (zp[k] - pp[k]);
        for (int a = 0; a < dim; ++a)
            for (std::size_t k = 0; k < n; ++k) yq[a][k] = sigma * (zq[a][k] - pq[a][k]);

        kty = yp;
        forward_diff_adjoint(g, yq, kty);
        phi_prev = phi;
        for (std::size_t k = 0; k < n; ++k) phi[k] -= tau * (kty[k] - rhs[k]);
        for (std::size_t k = 0; k < n; ++k) phi_bar[k] = 2.0 * phi[k] - phi_prev[k];

        if ((it + 1) % 20 == 0) {
            certify();
            if (upper - best < tol) {
                ++it;
                break;
            }
        }
    }
    res.iterations = it;
    res.lower_bound = best;
    res.upper_bound = std::max(upper, best);
    res.witness.u = best_phi;
    forward_diff(g, best_phi, dphi);
    for (int a = 0; a < dim; ++a) res.witness.grad[a] = dphi[a];
    res.witness.layout = Layout::staggered;
    return res;
}

double wasserstein2_1d(const GridMeasure& rho0, const GridMeasure& rho1) {
    require_same_grid(rho0.grid(), rho1.grid(), "wasserstein2_1d");
    const Grid& g = rho0.grid();
    if (g.dim != 1) throw InvalidArgument("wasserstein2_1d: grid must be one-dimensional");
    const double m0 = rho0.mass(), m1 = rho1.mass();
    if (!(m0 > 0.0) || !(m1 > 0.0)) throw InvalidArgument("wasserstein2_1d: zero mass");
    if (std::abs(m0 - m1) > 1e-9 * std::max(m0, m1)) throw InvalidArgument("wasserstein2_1d: mass mismatch");

    const int n = g.shape[0];
    const double h = g.spacing[0];
    // Normalised cumulative distribution at the right edge of every cell.
    auto cdf = [&](const GridMeasure& r, double m) {
        std::vector<double> c(n + 1, 0.0);
        for (int i = 0; i < n; ++i) c[i + 1] = c[i] + r[i] * h / m;
        c[n] = 1.0;
        return c;
    };
    const auto c0 = cdf(rho0, m0);
    const auto c1 = cdf(rho1, m1);

    // Quantile at level s inside cell i (cell must carry mass).
    auto quantile = [&](const std::vector<double>& c, int i, double s) {
        const double width = c[i + 1] - c[i];
        const double frac = width > 0.0 ? std::clamp((s - c[i]) / width, 0.0, 1.0) : 0.0;
        return g.origin[0] + (i + frac) * h;
    };
    auto next_massive = [&](const std::vector<double>& c, int i) {
        while (i < n && !(c[i + 1] > c[i])) ++i;
        return i;
    };

    int i = next_massive(c0, 0), j = next_massive(c1, 0);
    double s = 0.0, sum = 0.0;
    while (i < n && j < n) {
        const double e = std::min(c0[i + 1], c1[j + 1]);
        if (e > s) {
            const double da = quantile(c0, i, s) - quantile(c1, j, s);
            const double db = quantile(c0, i, e) - quantile(c1, j, e);
            sum += (e - s) * (da * da + da * db + db * db) / 3.0;
            s = e;
        }
        if (c0[i + 1] <= s) i = next_massive(c0, i + 1);
        if (c1[j + 1] <= s) j = next_massive(c1, j + 1);
    }
    return std::sqrt(0.5 * (m0 + m1) * sum);
}

GridMeasure translate(const GridMeasure& rho, int cells) {
    const Grid& g = rho.grid();
    std::vector<double> out(g.size(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (rho[k] == 0.0) continue;
        const auto [i0, i1] = g.unflatten(k);
        const int t = i0 + cells;
        if (t < 0 || t >= g.shape[0]) throw InvalidArgument("translate: mass would leave the grid");
        out[g.index(t, i1)] = rho[k];
    }
    return GridMeasure(g, std::move(out));
}

}  // namespace wfr
