#include "wfr/gradient_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "wfr/measures.hpp"
#include "wfr/otto.hpp"
#include "wfr/stencil.hpp"

namespace wfr {

void PopulationProblem::validate() const {
    require_same_grid(m.grid(), rho0.grid(), "population problem");
    if (!(m.min_value() > 0.0)) throw InvalidArgument("population problem: resources m must be strictly positive");
    if (!(rho0.mass() > 0.0)) throw InvalidArgument("population problem: initial density must have positive mass");
    if (!(dt > 0.0) || !(t_end >= 0.0)) throw InvalidArgument("population problem: need dt > 0 and t_end >= 0");
    if (sample_every < 1) throw InvalidArgument("population problem: sample_every must be positive");
}

double stable_dt(const GridMeasure& rho) {
    const Grid& g = rho.grid();
    const double h = g.dim == 1 ? g.spacing[0] : std::min(g.spacing[0], g.spacing[1]);
    const double top = rho.max_value();
    if (top <= 0.0) return std::numeric_limits<double>::infinity();
    return 0.25 * h * h / top;
}

std::vector<double> flow_rhs(const GridMeasure& rho, const GridMeasure& m) {
    const Grid& g = rho.grid();
    require_same_grid(g, m.grid(), "flow_rhs");
    std::vector<double> out(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) out[k] = rho[k] * (m[k] - rho[k]);
    for (int a = 0; a < g.dim; ++a) {
        const std::size_t st = g.stride(a);
        const double h = g.spacing[a];
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (g.unflatten(k)[a] + 1 >= g.shape[a]) continue;
            const double grad = ((rho[k + st] - m[k + st]) - (rho[k] - m[k])) / h;
            const double flux = 0.5 * (rho[k] + rho[k + st]) * grad;
            out[k] += flux / h;
            out[k + st] -= flux / h;
        }
    }
    return out;
}

namespace {

GridMeasure advance(const GridMeasure& rho, const GridMeasure& m, double dt) {
    if (dt > stable_dt(rho) * (1.0 + 1e-12))
        throw InvalidArgument("step_flow: dt exceeds the stability bound 0.25 h^2 / max(rho)");
    const auto rate = flow_rhs(rho, m);
    std::vector<double> next(rho.size());
    const double scale = rho.max_value();
    for (std::size_t k = 0; k < next.size(); ++k) {
        next[k] = rho[k] + dt * rate[k];
        if (!std::isfinite(next[k])) throw NumericalFailure("step_flow: non-finite density");
        if (next[k] < 0.0) {
            if (next[k] < -1e-14 * scale) throw NumericalFailure("step_flow: density became negative (dt too large)");
            next[k] = 0.0;
        }
    }
    return GridMeasure(rho.grid(), std::move(next));
}

}  // namespace

GridMeasure step_flow(const GridMeasure& state, const PopulationProblem& prob) {
    require_same_grid(state.grid(), prob.m.grid(), "step_flow");
    if (!(prob.dt > 0.0)) throw InvalidArgument("step_flow: dt must be positive");
    return advance(state, prob.m, prob.dt);
}

double dissipation(const GridMeasure& rho, const GridMeasure& m) {
    const Grid& g = rho.grid();
    require_same_grid(g, m.grid(), "dissipation");
    std::vector<double> phi(g.size());
    for (std::size_t k = 0; k < phi.size(); ++k) phi[k] = rho[k] - m[k];
    double s = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) s += rho[k] * phi[k] * phi[k];
    return s * g.cell_volume() + stencil::weighted_dirichlet(g, rho.values(), phi);
}

FlowTrace run_flow(const PopulationProblem& prob) {
    prob.validate();
    const Grid& g = prob.m.grid();
    FlowTrace trace;
    for (std::size_t k = 0; k < g.size(); ++k) trace.c0 += std::min(prob.rho0[k], prob.m[k]);
    trace.c0 *= g.cell_volume();

    const int n = static_cast<int>(std::ceil(prob.t_end / prob.dt - 1e-9));
    const double h = n > 0 ? prob.t_end / n : 0.0;

    auto sample = [&](double t, const GridMeasure& r, double e, double d) {
        FlowSample s;
        s.t = t;
        s.entropy = e;
        s.dissipation = d;
        s.mass = r.mass();
        s.l2_error = std::sqrt(2.0 * e);
        s.min_rho = r.min_value();
        trace.samples.push_back(s);
    };
    auto excess = [&](const GridMeasure& r) {
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < r.size(); ++k) worst = std::max(worst, r[k] - prob.m[k]);
        return worst;
    };

    GridMeasure rho = prob.rho0;
    double e = entropy(rho, prob.m);
    double d = dissipation(rho, prob.m);
    trace.min_mass_margin = rho.mass() - trace.c0;
    trace.max_excess_over_m = excess(rho);
    trace.max_entropy_increase = -std::numeric_limits<double>::infinity();
    sample(0.0, rho, e, d);
    for (int s = 0; s < n; ++s) {
        GridMeasure next = advance(rho, prob.m, h);
        const double e1 = entropy(next, prob.m);
        const double d1 = dissipation(next, prob.m);
        trace.identity_residual = std::max(trace.identity_residual, std::abs((e1 - e) / h + 0.5 * (d + d1)));
        trace.max_entropy_increase = std::max(trace.max_entropy_increase, e1 - e);
        trace.min_mass_margin = std::min(trace.min_mass_margin, next.mass() - trace.c0);
        trace.max_excess_over_m = std::max(trace.max_excess_over_m, excess(next));
        rho = std::move(next);
        e = e1;
        d = d1;
        if ((s + 1) % prob.sample_every == 0 || s + 1 == n) sample((s + 1) * h, rho, e, d);
    }
    if (n == 0) trace.max_entropy_increase = 0.0;
    trace.final_state = std::move(rho);
    return trace;
}

double verify_gradient_identity(const GridMeasure& rho, const GridMeasure& m) {
    const Grid& g = rho.grid();
    require_same_grid(g, m.grid(), "verify_gradient_identity");
    std::vector<double> phi(g.size());
    for (std::size_t k = 0; k < phi.size(); ++k) phi[k] = rho[k] - m[k];
    // grad_d E = -div(rho grad phi) + rho phi.
    auto grad = stencil::weighted_divergence(g, rho.values(), phi);
    for (std::size_t k = 0; k < phi.size(); ++k) grad[k] = -grad[k] + rho[k] * phi[k];
    const auto rhs = flow_rhs(rho, m);
    double diff = 0.0, norm = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        diff += (rhs[k] + grad[k]) * (rhs[k] + grad[k]);
        norm = std::max({norm, rhs[k] * rhs[k], grad[k] * grad[k]});
    }
    if (norm == 0.0) return 0.0;
    return std::sqrt(diff / (norm * static_cast<double>(phi.size())));
}

double tangent_identity_error(const GridMeasure& rho, const GridMeasure& m) {
    const auto rhs = flow_rhs(rho, m);
    std::vector<double> grad(rhs.size());
    for (std::size_t k = 0; k < rhs.size(); ++k) grad[k] = -rhs[k];
    const double d = dissipation(rho, m);
    const double norm2 = tangent_norm_squared(rho, grad);
    return std::abs(norm2 - d) / std::max(d, 1e-300);
}

double fitted_decay_rate(const FlowTrace& trace) {
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    int n = 0;
    for (const auto& s : trace.samples) {
        if (!(s.entropy > 0.0)) continue;
        const double y = std::log(s.entropy);
        st += s.t;
        sy += y;
        stt += s.t * s.t;
        sty += s.t * y;
        ++n;
    }
    const double den = n * stt - st * st;
    if (n < 2 || den <= 0.0) return 0.0;
    const double slope = (n * sty - st * sy) / den;
    return -0.5 * slope;
}

GridMeasure random_density(const Grid& grid, std::mt19937_64& rng, double min_value, int modes, double max_amplitude) {
    grid.validate();
    if (!(min_value >= 0.0) || modes < 1 || !(max_amplitude > 0.0)) throw InvalidArgument("random_density: bad parameters");
    std::normal_distribution<double> coef(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0);
    std::uniform_real_distribution<double> amp(0.2 * max_amplitude / 3.0, max_amplitude);
    constexpr double pi = std::numbers::pi;

    struct Mode {
        int n0, n1;
        double c, p0, p1;
    };
    std::vector<Mode> terms;
    const int top1 = grid.dim == 2 ? modes : 0;
    for (int n0 = 0; n0 <= modes; ++n0)
        for (int n1 = 0; n1 <= top1; ++n1) {
            if (n0 == 0 && n1 == 0) continue;
            const double decay = 1.0 / static_cast<double>(n0 * n0 + n1 * n1);
            Mode md{n0, n1, coef(rng) * decay, phase(rng), phase(rng)};
            terms.push_back(md);
        }
    const double scale = amp(rng);

    std::vector<double> v(grid.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        const auto [i0, i1] = grid.unflatten(k);
        const double x = (grid.center(0, i0) - grid.origin[0]) / grid.length(0);
        const double y = grid.dim == 2 ? (grid.center(1, i1) - grid.origin[1]) / grid.length(1) : 0.0;
        double s = 0.0;
        for (const auto& md : terms) s += md.c * std::cos(pi * (md.n0 * x + md.p0)) * std::cos(pi * (md.n1 * y + md.p1));
        v[k] = s;
    }
    const double lo = *std::min_element(v.begin(), v.end());
    const double hi = *std::max_element(v.begin(), v.end());
    const double spread = hi > lo ? hi - lo : 1.0;
    for (double& x : v) x = scale * (x - lo) / spread + min_value;
    return GridMeasure(grid, std::move(v));
}

double BecknerCertificate::phi(double lambda) const {
    if (!(lambda >= 0.0)) throw InvalidArgument("Phi: argument must be nonnegative");
    if (!(C_Omega > 0.0)) throw InvalidArgument("Phi: certificate has no constant");
    return std::min(lambda, lambda * lambda / (2.0 * C_Omega));
}

namespace {

void require_unit_volume(const Grid& g) {
    if (std::abs(g.domain_volume() - 1.0) > 1e-12) throw InvalidArgument("Beckner estimates require a domain of unit volume");
}

struct BecknerTerms {
    double lambda = 0.0;  // int rho
    double lhs = 0.0;     // int |rho - m|^2
    double rhs = 0.0;     // int rho|rho-m|^2 + int rho|grad(rho-m)|^2
};

BecknerTerms beckner_terms(const GridMeasure& rho, const GridMeasure& m) {
    const Grid& g = rho.grid();
    require_same_grid(g, m.grid(), "beckner");
    std::vector<double> phi(g.size());
    BecknerTerms t;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        phi[k] = rho[k] - m[k];
        t.lhs += phi[k] * phi[k];
        t.rhs += rho[k] * phi[k] * phi[k];
    }
    t.lhs *= g.cell_volume();
    t.rhs = t.rhs * g.cell_volume() + stencil::weighted_dirichlet(g, rho.values(), phi);
    t.lambda = rho.mass();
    return t;
}

}  // namespace

double beckner_ratio(const GridMeasure& rho) {
    const Grid& g = rho.grid();
    double l1 = 0.0, l2 = 0.0;
    for (std::size_t k = 0; k < rho.size(); ++k) {
        l1 += rho[k];
        l2 += rho[k] * rho[k];
    }
    l1 *= g.cell_volume();
    l2 *= g.cell_volume();
    const double rhs = stencil::weighted_dirichlet(g, rho.values(), rho.values());
    if (!(rhs > 1e-14 * std::max(l2, 1e-300))) return -1.0;
    return std::sqrt(l2) * (l2 - l1 * l1) / rhs;
}

double beckner_margin(const BecknerCertificate& cert, const GridMeasure& rho, const GridMeasure& m) {
    const auto t = beckner_terms(rho, m);
    return t.rhs - cert.phi(t.lambda) * t.lhs;
}

BecknerCertificate estimate_beckner_constant(const Grid& grid, int n_trials, std::uint64_t seed) {
    require_unit_volume(grid);
    if (n_trials < 1) throw InvalidArgument("estimate_beckner_constant: n_trials must be positive");
    std::mt19937_64 rng(seed);
    BecknerCertificate cert;
    cert.seed = seed;
    double c_beckner = 0.0, c_folded = 0.0;
    std::vector<std::pair<GridMeasure, GridMeasure>> pairs;
    for (int i = 0; i < n_trials; ++i) {
        GridMeasure rho = random_density(grid, rng, 0.1);
        GridMeasure m = random_density(grid, rng, 0.2);
        const double r = beckner_ratio(rho);
        if (r < 0.0) {
            ++cert.samples_skipped;
            continue;
        }
        c_beckner = std::max(c_beckner, r);
        const auto t = beckner_terms(rho, m);
        if (t.lhs > 0.0 && t.lambda * t.lhs > t.rhs)
            c_folded = std::max(c_folded, t.lambda * t.lambda * t.lhs / (2.0 * t.rhs));
        ++cert.samples_checked;
        pairs.emplace_back(std::move(rho), std::move(m));
    }
    if (cert.samples_checked == 0) throw NumericalFailure("estimate_beckner_constant: every trial was degenerate");
    cert.C_Omega = 1.5 * std::max(c_beckner, c_folded);
    cert.min_margin = std::numeric_limits<double>::infinity();
    for (const auto& [rho, m] : pairs) cert.min_margin = std::min(cert.min_margin, beckner_margin(cert, rho, m));
    return cert;
}

BecknerValidation validate_beckner(const BecknerCertificate& cert, const Grid& grid, int n_pairs, std::uint64_t seed) {
    require_unit_volume(grid);
    std::mt19937_64 rng(seed);
    BecknerValidation v;
    v.min_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_pairs; ++i) {
        const GridMeasure rho = random_density(grid, rng, 0.1);
        const GridMeasure m = random_density(grid, rng, 0.2);
        v.min_margin = std::min(v.min_margin, beckner_margin(cert, rho, m));
        ++v.samples;
    }
    v.ok = v.samples > 0 && v.min_margin >= 0.0;
    return v;
}

}  // namespace wfr
