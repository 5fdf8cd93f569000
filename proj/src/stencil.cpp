#include "wfr/stencil.hpp"

#include <algorithm>
#include <cmath>

namespace wfr::stencil {

std::vector<double> weighted_divergence(const Grid& g, std::span<const double> rho, std::span<const double> phi) {
    std::vector<double> out(g.size(), 0.0);
    for (int a = 0; a < g.dim; ++a) {
        const std::size_t st = g.stride(a);
        const double ih2 = 1.0 / (g.spacing[a] * g.spacing[a]);
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (g.unflatten(k)[a] + 1 >= g.shape[a]) continue;
            const double flux = 0.5 * (rho[k] + rho[k + st]) * (phi[k + st] - phi[k]) * ih2;
            out[k] += flux;
            out[k + st] -= flux;
        }
    }
    return out;
}

std::vector<double> face_averaged_grad_sq(const Grid& g, std::span<const double> phi) {
    std::vector<double> out(g.size(), 0.0);
    for (int a = 0; a < g.dim; ++a) {
        const std::size_t st = g.stride(a);
        const double ih = 1.0 / g.spacing[a];
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (g.unflatten(k)[a] + 1 >= g.shape[a]) continue;
            const double d = (phi[k + st] - phi[k]) * ih;
            out[k] += 0.5 * d * d;
            out[k + st] += 0.5 * d * d;
        }
    }
    return out;
}

double weighted_dirichlet(const Grid& g, std::span<const double> rho, std::span<const double> phi) {
    double s = 0.0;
    for (int a = 0; a < g.dim; ++a) {
        const std::size_t st = g.stride(a);
        const double ih = 1.0 / g.spacing[a];
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (g.unflatten(k)[a] + 1 >= g.shape[a]) continue;
            const double d = (phi[k + st] - phi[k]) * ih;
            s += 0.5 * (rho[k] + rho[k + st]) * d * d;
        }
    }
    return s * g.cell_volume();
}

namespace {

// Value at multi-index (i0, i1) with even reflection about the boundary faces.
double reflected(const Grid& g, std::span<const double> f, int i0, int i1) {
    auto fold = [](int i, int n) {
        if (i < 0) return -i - 1;
        if (i >= n) return 2 * n - i - 1;
        return i;
    };
    return f[g.index(fold(i0, g.shape[0]), fold(i1, g.shape[1]))];
}

}  // namespace

std::vector<double> centered_derivative(const Grid& g, std::span<const double> phi, int axis) {
    std::vector<double> out(g.size());
    const double inv = 1.0 / (2.0 * g.spacing[axis]);
    for (std::size_t k = 0; k < g.size(); ++k) {
        auto [i0, i1] = g.unflatten(k);
        const int d0 = axis == 0 ? 1 : 0, d1 = axis == 1 ? 1 : 0;
        out[k] = (reflected(g, phi, i0 + d0, i1 + d1) - reflected(g, phi, i0 - d0, i1 - d1)) * inv;
    }
    return out;
}

std::vector<double> second_derivative(const Grid& g, std::span<const double> phi, int a, int b) {
    std::vector<double> out(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        auto [i0, i1] = g.unflatten(k);
        if (a == b) {
            const int d0 = a == 0 ? 1 : 0, d1 = a == 1 ? 1 : 0;
            const double h = g.spacing[a];
            out[k] = (reflected(g, phi, i0 + d0, i1 + d1) - 2.0 * phi[k] + reflected(g, phi, i0 - d0, i1 - d1)) / (h * h);
        } else {
            const double denom = 4.0 * g.spacing[0] * g.spacing[1];
            out[k] = (reflected(g, phi, i0 + 1, i1 + 1) - reflected(g, phi, i0 + 1, i1 - 1) -
                      reflected(g, phi, i0 - 1, i1 + 1) + reflected(g, phi, i0 - 1, i1 - 1)) /
                     denom;
        }
    }
    return out;
}

double interpolate(const Grid& g, std::span<const double> f, const std::array<double, 2>& x) {
    int idx[2] = {0, 0};
    double w[2] = {0.0, 0.0};
    for (int a = 0; a < g.dim; ++a) {
        const double pos = (x[a] - g.origin[a]) / g.spacing[a] - 0.5;
        const double clamped = std::clamp(pos, 0.0, static_cast<double>(g.shape[a] - 1));
        int i = static_cast<int>(std::floor(clamped));
        if (i >= g.shape[a] - 1) i = std::max(0, g.shape[a] - 2);
        idx[a] = i;
        w[a] = g.shape[a] > 1 ? clamped - i : 0.0;
    }
    if (g.dim == 1) {
        const double f0 = f[idx[0]];
        const double f1 = g.shape[0] > 1 ? f[idx[0] + 1] : f0;
        return (1.0 - w[0]) * f0 + w[0] * f1;
    }
    const double f00 = f[g.index(idx[0], idx[1])];
    const double f10 = f[g.index(idx[0] + 1, idx[1])];
    const double f01 = f[g.index(idx[0], idx[1] + 1)];
    const double f11 = f[g.index(idx[0] + 1, idx[1] + 1)];
    return (1.0 - w[0]) * ((1.0 - w[1]) * f00 + w[1] * f01) + w[0] * ((1.0 - w[1]) * f10 + w[1] * f11);
}

}  // namespace wfr::stencil
