#include "mkv/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "mkv/csv.hpp"
#include "mkv/errors.hpp"

namespace mkv {

ExponentFit fit_exponent(const std::vector<double>& scales, const std::vector<double>& magnitudes) {
    if (scales.size() != magnitudes.size()) throw DomainError("fit_exponent: size mismatch");
    ExponentFit fit;
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (!(scales[i] > 0.0)) throw DomainError("fit_exponent: scales must be positive");
        if (!std::isfinite(magnitudes[i])) throw EvaluationError("fit_exponent: non-finite magnitude");
        if (std::abs(magnitudes[i]) < 1e-12) continue;
        fit.samples.emplace_back(std::log(scales[i]), std::log(std::abs(magnitudes[i])));
    }
    const std::size_t n = fit.samples.size();
    if (n < 2) {
        fit.degenerate = true;
        fit.slope = std::numeric_limits<double>::quiet_NaN();
        fit.intercept = std::numeric_limits<double>::quiet_NaN();
        return fit;
    }
    double mx = 0.0, my = 0.0;
    for (const auto& [lx, ly] : fit.samples) {
        mx += lx;
        my += ly;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [lx, ly] : fit.samples) {
        sxx += (lx - mx) * (lx - mx);
        sxy += (lx - mx) * (ly - my);
        syy += (ly - my) * (ly - my);
    }
    if (sxx == 0.0) throw DomainError("fit_exponent: scales must not all coincide");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (const auto& [lx, ly] : fit.samples) {
        const double r = ly - fit.intercept - fit.slope * lx;
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return fit;
}

BoundReport check_gaussian_domination(const DensitySampler& sampler, const GaussianMajorant& kern, double C,
                                      const std::vector<DominationNode>& nodes) {
    if (!(C > 0.0)) throw DomainError("check_gaussian_domination: C must be positive");
    BoundReport rep;
    rep.claim = "gaussian-domination";
    rep.grid_size = nodes.size();
    for (const auto& nd : nodes) {
        const double v = sampler(nd);
        if (!std::isfinite(v)) throw EvaluationError("check_gaussian_domination: non-finite sample");
        const double env = C * majorant(kern, nd.t, nd.x, nd.s, nd.y);
        if (env > 0.0) rep.ratio = std::max(rep.ratio, std::abs(v) / env);
        else if (v != 0.0) rep.ratio = std::numeric_limits<double>::infinity();
    }
    rep.pass = rep.ratio <= 1.0 + kBoundSlack;
    rep.constants = {{"C", C}, {"scale", kern.scale}, {"rate", kern.rate}};
    return rep;
}

BoundReport fit_gaussian_domination(const DensitySampler& sampler, double lambda,
                                    const std::vector<DominationNode>& nodes, double c_max) {
    if (!(lambda >= 1.0)) throw DomainError("fit_gaussian_domination: lambda must be at least 1");
    std::vector<double> vals(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        vals[i] = std::abs(sampler(nodes[i]));
        if (!std::isfinite(vals[i])) throw EvaluationError("fit_gaussian_domination: non-finite sample");
    }
    const double lo = 1.0 / (4.0 * lambda), hi = 1.0 / (2.0 * lambda);
    const int n_rates = 24;
    BoundReport best;
    best.claim = "gaussian-domination-fit";
    best.grid_size = nodes.size();
    best.ratio = std::numeric_limits<double>::infinity();
    // Largest admissible rate first; the prefactor grows as the rate does.
    for (int r = n_rates - 1; r >= 0; --r) {
        const double c = lo * std::pow(hi / lo, static_cast<double>(r) / n_rates);
        const GaussianMajorant g(c);
        double C = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& nd = nodes[i];
            const double env = majorant(g, nd.t, nd.x, nd.s, nd.y);
            if (env > 0.0) C = std::max(C, vals[i] / env);
            else if (vals[i] > 0.0) C = std::numeric_limits<double>::infinity();
        }
        if (C <= c_max) {
            best.ratio = C > 0.0 ? 1.0 : 0.0;
            best.pass = true;
            best.constants = {{"C", C}, {"c", c}};
            return best;
        }
    }
    best.pass = false;
    return best;
}

std::vector<DominationNode> domination_grid(double t, double x, const std::vector<double>& taus, double lambda,
                                            int n_space, double extent) {
    if (n_space < 2) throw DomainError("domination_grid: need at least two spatial points");
    std::vector<DominationNode> nodes;
    for (double tau : taus) {
        if (!(tau > 0.0)) throw DomainError("domination_grid: time offsets must be positive");
        const double half = extent * std::sqrt(lambda * tau);
        for (int j = 0; j < n_space; ++j)
            nodes.push_back({t, x, t + tau, x - half + 2.0 * half * j / (n_space - 1)});
    }
    return nodes;
}

namespace {

// Decay rate of log(|H| tau^{(1 - gamma)/2}) in zeta^2 = |y - y'|^2 / tau, from
// the per-bin maxima of the k = 1 tables.
double envelope_rate(const std::vector<KernelTable>& tables, double gamma) {
    const int n_bins = 40;
    double z2_max = 0.0;
    for (const auto& tab : tables)
        for (const auto& sl : tab.grid.slices) {
            const double tau = sl.time - tab.grid.t0;
            z2_max = std::max({z2_max, std::pow(sl.lo - tab.grid.x0, 2) / tau, std::pow(sl.hi() - tab.grid.x0, 2) / tau});
        }
    if (!(z2_max > 0.0)) return 0.0;
    std::vector<double> best(n_bins, -std::numeric_limits<double>::infinity()), at(n_bins, 0.0);
    for (const auto& tab : tables)
        for (std::size_t i = 0; i < tab.grid.slices.size(); ++i) {
            const SliceGrid& sl = tab.grid.slices[i];
            const double tau = sl.time - tab.grid.t0;
            for (int j = 0; j < sl.n; ++j) {
                const double v = std::abs(tab.values[i][j]);
                if (!(v > 0.0)) continue;
                const double z2 = std::pow(sl.node(j) - tab.grid.x0, 2) / tau;
                const double lr = std::log(v) + (1.0 - gamma / 2.0) * std::log(tau) + 0.5 * std::log(tau);
                const int b = std::min(n_bins - 1, static_cast<int>(z2 / z2_max * n_bins));
                if (lr > best[b]) {
                    best[b] = lr;
                    at[b] = z2;
                }
            }
        }
    double n = 0, mx = 0, my = 0;
    for (int b = 0; b < n_bins; ++b)
        if (std::isfinite(best[b])) {
            n += 1;
            mx += at[b];
            my += best[b];
        }
    if (n < 3) return 0.0;
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (int b = 0; b < n_bins; ++b)
        if (std::isfinite(best[b])) {
            sxx += (at[b] - mx) * (at[b] - mx);
            sxy += (at[b] - mx) * (best[b] - my);
        }
    return sxx > 0.0 ? -sxy / sxx : 0.0;
}

double table_ratio(const KernelTable& tab, double log_Ck, double gamma, const GaussianMajorant& g) {
    double ratio = 0.0;
    for (std::size_t i = 0; i < tab.grid.slices.size(); ++i) {
        const SliceGrid& sl = tab.grid.slices[i];
        const double tau = sl.time - tab.grid.t0;
        for (int j = 0; j < sl.n; ++j) {
            const double v = std::abs(tab.values[i][j]);
            if (v == 0.0) continue;
            const double lenv = log_Ck + (tab.k * gamma / 2.0 - 1.0) * std::log(tau) +
                                std::log(majorant(g, tab.grid.t0, tab.grid.x0, sl.time, sl.node(j)));
            ratio = std::max(ratio, std::exp(std::log(v) - lenv));
        }
    }
    return ratio;
}

}  // namespace

KernelBoundReport check_kernel_bound(const CoefficientSet& coeffs, const ScalarFlow& flow,
                                     const std::vector<std::pair<double, double>>& origins, double s, int k_max,
                                     const ParametrixOptions& opts) {
    if (origins.empty()) throw DomainError("check_kernel_bound: no origins");
    if (k_max < 1) throw DomainError("check_kernel_bound: k_max must be at least 1");
    const double lambda = coeffs.profile.lambda;
    const double gamma = coeffs.profile.gamma_a;
    KernelSampler sampler(coeffs, flow, opts);

    std::vector<std::vector<KernelTable>> tables;
    for (const auto& [sp, yp] : origins) {
        SpaceTimeGrid g = SpaceTimeGrid::build(coeffs, flow, sp, yp, s, opts);
        std::vector<KernelTable> chain;
        chain.push_back(sample_kernel(sampler, g));
        for (int k = 2; k <= k_max; ++k) chain.push_back(iterate_kernel(chain.back(), sampler));
        tables.push_back(std::move(chain));
    }

    std::vector<KernelTable> first;
    for (const auto& chain : tables) first.push_back(chain.front());
    KernelBoundReport rep;
    rep.gamma = gamma;
    // Half the observed decay rate leaves room for the convolutions; never
    // below the rate of the frozen-density bound.
    rep.c = std::max(envelope_rate(first, gamma) / 2.0, 1.0 / (4.0 * lambda));
    rep.C_hat = 1.0 / std::sqrt(std::numbers::pi * rep.c);
    const GaussianMajorant g = GaussianMajorant::normalized(rep.c);

    double r1 = 0.0;
    for (const auto& tab : first) r1 = std::max(r1, table_ratio(tab, 0.0, gamma, g));
    rep.C = std::max(1.1 * r1, std::numeric_limits<double>::min());
    const ParametrixConstants pc = constants(rep.C, gamma, k_max);

    rep.pass = true;
    for (int k = 1; k <= k_max; ++k) {
        BoundReport b;
        b.claim = "kernel-bound-k" + std::to_string(k);
        for (const auto& chain : tables) {
            b.grid_size += chain[k - 1].grid.node_count();
            b.ratio = std::max(b.ratio, table_ratio(chain[k - 1], pc.log_value(k), gamma, g));
        }
        b.pass = b.ratio <= 1.0 + kBoundSlack;
        b.constants = {{"C", rep.C}, {"C_k", pc.value(k)}, {"C_hat", rep.C_hat}, {"c", rep.c}};
        rep.pass = rep.pass && b.pass;
        rep.reports.push_back(std::move(b));
    }
    return rep;
}

MonteCarloValue feynman_kac_u(const CoefficientSet& coeffs, const BTildeFn& b_tilde, double x, const ScalarFlow& flow,
                              const SimulationConfig& config) {
    if (coeffs.dim != 1) throw UnsupportedInput("feynman_kac_u: only d = 1 is supported");
    config.validate();
    const std::vector<double> grid = config.grid();
    const double h = config.step();
    std::vector<double> w(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) w[k] = flow.w1_at(grid[k]);
    std::vector<double> acc(config.n_particles, 0.0);
    const int M = config.n_steps;
    euler_stream(coeffs, flow, EmpiricalMeasure::dirac({x}, config.n_particles), config,
                 [&](std::size_t i, int k, const double* y) {
                     const double wt = (k == 0 || k == M) ? 0.5 * h : h;
                     acc[i] += wt * b_tilde(grid[k], y[0], w[k]);
                 });
    MonteCarloValue out;
    for (double v : acc) out.value += v;
    out.value /= static_cast<double>(acc.size());
    if (acc.size() > 1) {
        double var = 0.0;
        for (double v : acc) var += (v - out.value) * (v - out.value);
        out.std_error = std::sqrt(var / static_cast<double>(acc.size() - 1) / static_cast<double>(acc.size()));
    }
    if (!std::isfinite(out.value)) throw EvaluationError("feynman_kac_u: non-finite value");
    return out;
}

MonteCarloValue feynman_kac_u(const CoefficientSet& coeffs, const BTildeFn& b_tilde, double x,
                              const EmpiricalMeasure& mu0, const SimulationConfig& flow_config,
                              const SimulationConfig& path_config, double tol, int m_max) {
    PicardReport rep = picard_iterate(coeffs, mu0, flow_config, tol, m_max);
    if (!rep.converged) throw ConvergenceError("feynman_kac_u: Picard did not converge");
    return feynman_kac_u(coeffs, b_tilde, x, rep.final_flow, path_config);
}

double parametrix_u(const CoefficientSet& coeffs, const BTildeFn& b_tilde, double t, double x, double T,
                    const ScalarFlow& flow, int K, const ParametrixOptions& opts) {
    ParametrixSolver solver(coeffs, flow, t, x, T, K, opts, true);
    const SpaceTimeGrid& g = solver.grid();
    const int M = static_cast<int>(g.slices.size());
    const double q = 2.0 / g.gamma;
    // Integrand in theta, where r = t + (T-t) theta^q.
    std::vector<double> f(M + 1, 0.0);
    if (q == 1.0) f[0] = b_tilde(t, x, flow.w1_at(t)) * (T - t);
    for (int i = 1; i <= M; ++i) {
        const SliceGrid& sl = g.slices[i - 1];
        const double theta = static_cast<double>(i) / M;
        const std::vector<double> p = solver.slice_density(i - 1, sl.time - t < 1e-3 ? 0 : -1);
        const double w = flow.w1_at(sl.time);
        double acc = 0.0;
        for (int j = 0; j < sl.n; ++j) acc += b_tilde(sl.time, sl.node(j), w) * p[j];
        f[i] = acc * sl.step * q * (T - t) * std::pow(theta, q - 1.0);
    }
    const double dth = 1.0 / M;
    double u = 0.0;
    if (M % 2 == 0) {
        for (int i = 0; i <= M; ++i) u += f[i] * ((i == 0 || i == M) ? 1.0 : (i % 2 ? 4.0 : 2.0));
        u *= dth / 3.0;
    } else {
        for (int i = 0; i <= M; ++i) u += f[i] * ((i == 0 || i == M) ? 0.5 : 1.0);
        u *= dth;
    }
    if (!std::isfinite(u)) throw EvaluationError("parametrix_u: non-finite value");
    return u;
}

void ScanResult::write_csv(std::ostream& os) const {
    os << "s,magnitude,std_error\n";
    for (std::size_t i = 0; i < s_values.size(); ++i)
        os << fmt_double(s_values[i]) << ',' << fmt_double(magnitudes[i]) << ',' << fmt_double(std_errors[i]) << '\n';
}

ScanResult mu_derivative_scan(const CoefficientSet& coeffs, const EmpiricalMeasure& mu0, const TestFn& phi,
                              double alpha, const std::vector<double>& s_values, const SimulationConfig& config,
                              const ScanOptions& opts) {
    if (s_values.size() < 5) throw DomainError("mu_derivative_scan: need at least five s values");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("mu_derivative_scan: alpha must lie in (0,1]");
    for (double s : s_values)
        if (!(s > config.t && s <= config.T)) throw DomainError("mu_derivative_scan: s values must lie in (t, T]");
    if (mu0.size() != config.n_particles) throw DomainError("mu_derivative_scan: measure size differs from config");

    std::vector<std::size_t> zs = opts.z_indices;
    if (zs.empty())
        for (std::size_t i = 0; i < std::min<std::size_t>(mu0.size(), 8); ++i) zs.push_back(i);

    SimulationOracle oracle = make_simulation_oracle(coeffs, config, opts.tol, opts.m_max);
    ScanResult res;
    res.s_values = s_values;
    res.magnitudes.assign(s_values.size(), 0.0);
    res.std_errors.assign(s_values.size(), 0.0);
    for (std::size_t z : zs) {
        auto est = lions_derivative_flow(oracle, mu0, z, 0, s_values, phi, opts.epsilon, opts.clones);
        for (std::size_t k = 0; k < est.size(); ++k)
            if (std::abs(est[k].value) > res.magnitudes[k]) {
                res.magnitudes[k] = std::abs(est[k].value);
                res.std_errors[k] = est[k].std_error;
            }
    }
    std::vector<double> scales;
    for (double s : s_values) scales.push_back(s - config.t);
    res.fit = fit_exponent(scales, res.magnitudes);
    res.alpha = alpha;
    res.floor = (alpha - 1.0) / 2.0;
    res.tolerance = kExponentTolerance;
    res.pass = res.fit.degenerate || res.fit.slope >= res.floor - res.tolerance;
    return res;
}

GradientReport u_gradient_bounds(const CoefficientSet& coeffs, const BTildeFn& b_tilde, double x,
                                 const EmpiricalMeasure& mu0, const std::vector<double>& horizons,
                                 const GradientOptions& opts) {
    if (horizons.size() < 2) throw DomainError("u_gradient_bounds: need at least two horizons");
    const double t = opts.flow_config.t;
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (!(horizons[i] > t && horizons[i] <= opts.flow_config.T))
            throw DomainError("u_gradient_bounds: horizons must lie in (t, T]");
        if (i > 0 && !(horizons[i] < horizons[i - 1]))
            throw DomainError("u_gradient_bounds: horizons must decrease");
    }
    if (!(opts.h > 0.0 && opts.epsilon > 0.0)) throw DomainError("u_gradient_bounds: steps must be positive");

    PicardReport base = picard_iterate(coeffs, mu0, opts.flow_config, opts.tol, opts.m_max);
    if (!base.converged) throw ConvergenceError("u_gradient_bounds: Picard did not converge");
    std::vector<ScalarFlow> moved;
    for (std::size_t z : opts.z_indices) {
        if (z >= mu0.size()) throw DomainError("u_gradient_bounds: particle index out of range");
        EmpiricalMeasure pert = mu0;
        pert.point(z)[0] += opts.epsilon;
        PicardReport r = picard_iterate(coeffs, pert, opts.flow_config, opts.tol, opts.m_max);
        if (!r.converged) throw ConvergenceError("u_gradient_bounds: Picard did not converge");
        moved.push_back(std::move(r.final_flow));
    }

    GradientReport rep;
    rep.horizons = horizons;
    const double n = static_cast<double>(mu0.size());
    for (double T : horizons) {
        const ScalarFlow& f = base.final_flow;
        const double up = parametrix_u(coeffs, b_tilde, t, x + opts.h, T, f, opts.K, opts.parametrix);
        const double u0 = parametrix_u(coeffs, b_tilde, t, x, T, f, opts.K, opts.parametrix);
        const double um = parametrix_u(coeffs, b_tilde, t, x - opts.h, T, f, opts.K, opts.parametrix);
        rep.dx.push_back(std::abs(up - um) / (2.0 * opts.h));
        rep.dxx.push_back(std::abs(up - 2.0 * u0 + um) / (opts.h * opts.h));

        SimulationConfig pc = opts.path_config;
        pc.t = t;
        pc.T = T;
        const double ub = feynman_kac_u(coeffs, b_tilde, x, f, pc).value;
        double dmu = 0.0;
        for (const ScalarFlow& fm : moved)
            dmu = std::max(dmu, std::abs(n * (feynman_kac_u(coeffs, b_tilde, x, fm, pc).value - ub) / opts.epsilon));
        rep.dmu.push_back(dmu);
    }
    std::vector<double> scales;
    for (double T : horizons) scales.push_back(T - t);
    rep.dx_fit = fit_exponent(scales, rep.dx);
    rep.dxx_fit = fit_exponent(scales, rep.dxx);
    rep.dmu_fit = fit_exponent(scales, rep.dmu);
    return rep;
}

}  // namespace mkv
