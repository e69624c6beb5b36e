#include "mkv/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>

#include "mkv/csv.hpp"
#include "mkv/errors.hpp"
#include "mkv/rng.hpp"

namespace mkv {

void SimulationConfig::validate() const {
    if (!(T > t)) throw DomainError("simulation config: T must exceed t");
    if (n_steps < 1) throw DomainError("simulation config: n_steps must be at least 1");
    if (n_particles < 1) throw DomainError("simulation config: n_particles must be at least 1");
    if (dim < 1) throw DomainError("simulation config: dim must be positive");
}

std::vector<double> SimulationConfig::grid() const {
    std::vector<double> g(n_steps + 1);
    const double h = step();
    for (int k = 0; k < n_steps; ++k) g[k] = t + k * h;
    g[n_steps] = T;
    return g;
}

NoiseArray draw_noise(const SimulationConfig& config) {
    config.validate();
    NoiseArray a;
    a.n_particles = config.n_particles;
    a.n_steps = config.n_steps;
    a.dim = config.dim;
    a.z.resize(a.n_particles * a.n_steps * a.dim);
    NoiseStream rng(config.seed);
    for (std::size_t i = 0; i < a.n_particles; ++i)
        for (int k = 0; k < a.n_steps; ++k) rng.normals(i, k, a.dim, a.z.data() + (i * a.n_steps + k) * a.dim);
    return a;
}

EmpiricalMeasure PathEnsemble::marginal(std::size_t k) const {
    auto first = data.begin() + static_cast<std::ptrdiff_t>(k * n_particles * dim);
    return EmpiricalMeasure(dim, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(n_particles * dim)));
}

void PathEnsemble::write_csv(std::ostream& os) const {
    os << "particle,step,time";
    for (int j = 0; j < dim; ++j) os << ",x" << j;
    os << '\n';
    for (std::size_t i = 0; i < n_particles; ++i)
        for (std::size_t k = 0; k < times.size(); ++k) {
            os << i << ',' << k << ',' << fmt_double(times[k]);
            for (int j = 0; j < dim; ++j) os << ',' << fmt_double(at(i, k)[j]);
            os << '\n';
        }
}

void PicardReport::write_csv(std::ostream& os) const {
    os << "iteration,delta,w2_gap\n";
    for (std::size_t m = 0; m < increments.size(); ++m) {
        os << m + 1 << ',' << fmt_double(increments[m]) << ',';
        if (m < w2_gaps.size()) os << fmt_double(w2_gaps[m]);
        os << '\n';
    }
}

namespace {

struct FlowSamples {
    std::vector<double> w1, w2;
};

FlowSamples sample_flow(const ScalarFlow& flow, const std::vector<double>& grid) {
    flow.validate();
    if (!flow.covers(grid.front(), grid.back()))
        throw CoverageError("flow grid does not cover the simulation interval");
    FlowSamples s;
    s.w1.resize(grid.size());
    s.w2.resize(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        s.w1[k] = flow.w1_at(grid[k]);
        s.w2[k] = flow.w2_at(grid[k]);
    }
    return s;
}

void check_dims(const CoefficientSet& coeffs, const EmpiricalMeasure& initial, const SimulationConfig& config) {
    config.validate();
    if (coeffs.dim != config.dim || initial.dim() != config.dim)
        throw DomainError("simulation: dimensions of coefficients, initial law and config disagree");
}

// Advances every particle through all steps, step-major so the flow value is
// shared across the particle loop. `record(k, states)` is called for k = 0..M.
template <class Record>
void run_scheme(const CoefficientSet& coeffs, const ScalarFlow& flow, const EmpiricalMeasure& initial,
                const SimulationConfig& config, const NoiseArray* noise, NoiseOffsets off, Record&& record) {
    check_dims(coeffs, initial, config);
    const std::vector<double> grid = config.grid();
    const FlowSamples fs = sample_flow(flow, grid);
    const int d = config.dim;
    const std::size_t n = initial.size();
    const double h = config.step();
    const double sqh = std::sqrt(h);
    if (noise && (noise->dim != d || noise->n_steps < config.n_steps || noise->n_particles < off.particle + n))
        throw DomainError("euler_maruyama: pre-drawn noise does not match the configuration");

    NoiseStream rng(config.seed);
    std::vector<double> x = initial.coords();
    std::vector<double> bv(d), sv(d * d), z(d);
    record(0, x);
    for (int k = 0; k < config.n_steps; ++k) {
        const double r = grid[k];
        const double w1 = fs.w1[k], w2 = fs.w2[k];
        for (std::size_t i = 0; i < n; ++i) {
            double* xi = x.data() + i * d;
            coeffs.b(r, xi, w1, bv.data());
            coeffs.sigma(r, xi, w2, sv.data());
            const double* dz;
            if (noise) {
                dz = noise->at(off.particle + i, static_cast<int>(off.step) + k);
            } else {
                rng.normals(off.particle + i, off.step + k, d, z.data());
                dz = z.data();
            }
            if (d == 1) {
                xi[0] += bv[0] * h + sv[0] * dz[0] * sqh;
            } else {
                for (int a = 0; a < d; ++a) {
                    double acc = 0.0;
                    for (int c = 0; c < d; ++c) acc += sv[a * d + c] * dz[c];
                    xi[a] += bv[a] * h + acc * sqh;
                }
            }
        }
        record(k + 1, x);
    }
    for (double v : x)
        if (!std::isfinite(v)) throw EvaluationError("euler_maruyama: non-finite state");
}

}  // namespace

PathEnsemble euler_maruyama(const CoefficientSet& coeffs, const ScalarFlow& flow, const EmpiricalMeasure& initial,
                            const SimulationConfig& config, const NoiseArray* noise, NoiseOffsets offsets) {
    PathEnsemble p;
    p.times = config.grid();
    p.n_particles = initial.size();
    p.dim = initial.dim();
    p.seed = config.seed;
    p.data.resize(p.times.size() * p.n_particles * p.dim);
    run_scheme(coeffs, flow, initial, config, noise, offsets, [&](int k, const std::vector<double>& x) {
        std::copy(x.begin(), x.end(), p.data.begin() + static_cast<std::ptrdiff_t>(k * x.size()));
    });
    return p;
}

void euler_stream(const CoefficientSet& coeffs, const ScalarFlow& flow, const EmpiricalMeasure& initial,
                  const SimulationConfig& config, const std::function<void(std::size_t, int, const double*)>& visit,
                  NoiseOffsets offsets) {
    const int d = initial.dim();
    run_scheme(coeffs, flow, initial, config, nullptr, offsets, [&](int k, const std::vector<double>& x) {
        for (std::size_t i = 0; i < x.size() / d; ++i) visit(i, k, x.data() + i * d);
    });
}

ScalarFlow flow_from_paths(const CoefficientSet& coeffs, const PathEnsemble& paths) {
    ScalarFlow f;
    f.times = paths.times;
    f.w1.resize(paths.times.size());
    f.w2.resize(paths.times.size());
    const double inv = 1.0 / static_cast<double>(paths.n_particles);
    for (std::size_t k = 0; k < paths.times.size(); ++k) {
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < paths.n_particles; ++i) {
            a += coeffs.phi1(paths.at(i, k));
            b += coeffs.phi2(paths.at(i, k));
        }
        f.w1[k] = a * inv;
        f.w2[k] = b * inv;
    }
    return f;
}

namespace {

double max_mean_square_gap(const PathEnsemble& a, const PathEnsemble& b) {
    double worst = 0.0;
    const std::size_t stride = a.n_particles * a.dim;
    for (std::size_t k = 0; k < a.times.size(); ++k) {
        const double* pa = a.data.data() + k * stride;
        const double* pb = b.data.data() + k * stride;
        double acc = 0.0;
        for (std::size_t i = 0; i < stride; ++i) acc += (pa[i] - pb[i]) * (pa[i] - pb[i]);
        worst = std::max(worst, acc / static_cast<double>(a.n_particles));
    }
    return worst;
}

double max_w2_gap(const PathEnsemble& a, const PathEnsemble& b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.times.size(); ++k)
        worst = std::max(worst, wasserstein2_1d(a.marginal(k), b.marginal(k)));
    return worst;
}

PathEnsemble frozen_paths(const EmpiricalMeasure& mu0, const SimulationConfig& config) {
    PathEnsemble p;
    p.times = config.grid();
    p.n_particles = mu0.size();
    p.dim = mu0.dim();
    p.seed = config.seed;
    p.data.reserve(p.times.size() * mu0.coords().size());
    for (std::size_t k = 0; k < p.times.size(); ++k) p.data.insert(p.data.end(), mu0.coords().begin(), mu0.coords().end());
    return p;
}

struct PicardRun {
    PicardReport report;
    PathEnsemble last;
};

PicardRun picard_run(const CoefficientSet& coeffs, const EmpiricalMeasure& mu0, const SimulationConfig& config,
                     double tol, int m_max, const ScalarFlow* initial_flow, NoiseOffsets offsets) {
    if (!(tol > 0.0)) throw DomainError("picard_iterate: tol must be positive");
    if (m_max < 1) throw DomainError("picard_iterate: m_max must be at least 1");
    check_dims(coeffs, mu0, config);

    PicardRun run;
    PicardReport& rep = run.report;
    rep.tol = tol;
    PathEnsemble prev = frozen_paths(mu0, config);
    ScalarFlow flow = initial_flow ? *initial_flow
                                   : ScalarFlow::constant(prev.times, moment(mu0, coeffs.phi1), moment(mu0, coeffs.phi2));
    for (int m = 1; m <= m_max; ++m) {
        PathEnsemble next = euler_maruyama(coeffs, flow, mu0, config, nullptr, offsets);
        rep.increments.push_back(max_mean_square_gap(next, prev));
        if (config.dim == 1) rep.w2_gaps.push_back(max_w2_gap(next, prev));
        flow = flow_from_paths(coeffs, next);
        rep.iterations = m;
        prev = std::move(next);
        if (rep.increments.back() <= tol) {
            rep.converged = true;
            break;
        }
    }
    rep.final_flow = std::move(flow);
    run.last = std::move(prev);
    return run;
}

}  // namespace

PicardReport picard_iterate(const CoefficientSet& coeffs, const EmpiricalMeasure& mu0, const SimulationConfig& config,
                            double tol, int m_max, const ScalarFlow* initial_flow) {
    return picard_run(coeffs, mu0, config, tol, m_max, initial_flow, {}).report;
}

MkvSolution simulate_mkv(const CoefficientSet& coeffs, const EmpiricalMeasure& mu0, const SimulationConfig& config,
                         double tol, int m_max, const ScalarFlow* initial_flow) {
    MkvSolution sol;
    sol.report = picard_iterate(coeffs, mu0, config, tol, m_max, initial_flow);
    if (!sol.report.converged)
        throw ConvergenceError("simulate_mkv: Picard iteration did not reach tol within " + std::to_string(m_max) +
                               " iterations");
    sol.flow = sol.report.final_flow;
    sol.paths = euler_maruyama(coeffs, sol.flow, mu0, config);
    return sol;
}

WindowedSolution simulate_mkv_windowed(const CoefficientSet& coeffs, const EmpiricalMeasure& mu0,
                                       const SimulationConfig& config, double tol, int m_max, double window) {
    config.validate();
    if (!(window > 0.0)) throw DomainError("simulate_mkv_windowed: window must be positive");
    const std::vector<double> grid = config.grid();
    int n_win = static_cast<int>(std::ceil((config.T - config.t) / window - 1e-12));
    n_win = std::clamp(n_win, 1, config.n_steps);

    WindowedSolution out;
    out.converged = true;
    out.paths.times = grid;
    out.paths.n_particles = mu0.size();
    out.paths.dim = mu0.dim();
    out.paths.seed = config.seed;
    out.paths.data.resize(grid.size() * mu0.coords().size());

    EmpiricalMeasure start = mu0;
    int k0 = 0;
    for (int j = 0; j < n_win; ++j) {
        int k1 = static_cast<int>(std::lround(static_cast<double>(config.n_steps) * (j + 1) / n_win));
        SimulationConfig wc = config;
        wc.t = grid[k0];
        wc.T = grid[k1];
        wc.n_steps = k1 - k0;
        NoiseOffsets off{0, static_cast<std::uint64_t>(k0)};
        PicardRun run = picard_run(coeffs, start, wc, tol, m_max, nullptr, off);
        out.converged = out.converged && run.report.converged;
        PathEnsemble seg = euler_maruyama(coeffs, run.report.final_flow, start, wc, nullptr, off);
        const ScalarFlow& f = run.report.final_flow;
        for (std::size_t n = (j == 0 ? 0 : 1); n < f.times.size(); ++n) {
            out.flow.times.push_back(grid[k0 + static_cast<int>(n)]);
            out.flow.w1.push_back(f.w1[n]);
            out.flow.w2.push_back(f.w2[n]);
        }
        const std::size_t stride = start.coords().size();
        std::copy(seg.data.begin(), seg.data.end(), out.paths.data.begin() + static_cast<std::ptrdiff_t>(k0 * stride));
        out.windows.push_back(std::move(run.report));
        start = seg.terminal();
        k0 = k1;
    }
    return out;
}

SimulationOracle make_simulation_oracle(const CoefficientSet& coeffs, const SimulationConfig& config, double tol,
                                        int m_max) {
    // The base measure is typically queried once per tagged particle; its
    // Picard fixed point is kept between calls.
    struct Cache {
        std::vector<double> coords;
        ScalarFlow flow;
    };
    auto cache = std::make_shared<Cache>();
    return [coeffs, config, tol, m_max, cache](const EmpiricalMeasure& mu, std::size_t tagged, int n_clones,
                                               const std::vector<double>& s_values) {
        SimulationConfig c = config;
        c.n_particles = mu.size();
        const std::vector<double> grid = c.grid();
        const double h = c.step();
        std::vector<int> steps;
        for (double s : s_values) {
            double pos = (s - c.t) / h;
            int k = static_cast<int>(std::lround(pos));
            if (k < 0 || k > c.n_steps || std::abs(pos - k) > 1e-6)
                throw DomainError("simulation oracle: s values must lie on the simulation grid");
            steps.push_back(k);
        }

        CoupledSample out;
        ScalarFlow flow;
        if (std::all_of(steps.begin(), steps.end(), [](int k) { return k == 0; })) {
            flow = ScalarFlow::constant(grid, 0.0, 0.0);
        } else if (!cache->coords.empty() && cache->coords == mu.coords()) {
            flow = cache->flow;
        } else {
            PicardReport rep = picard_iterate(coeffs, mu, c, tol, m_max);
            if (!rep.converged) throw ConvergenceError("simulation oracle: Picard did not converge");
            flow = std::move(rep.final_flow);
            cache->coords = mu.coords();
            cache->flow = flow;
        }

        std::vector<double> coords = mu.coords();
        for (int r = 0; r < n_clones; ++r)
            coords.insert(coords.end(), mu.point(tagged), mu.point(tagged) + mu.dim());
        EmpiricalMeasure all(mu.dim(), std::move(coords));

        const std::size_t n = mu.size();
        const int d = mu.dim();
        std::vector<std::vector<double>> sys(steps.size()), cl(steps.size());
        run_scheme(coeffs, flow, all, c, nullptr, {}, [&](int k, const std::vector<double>& x) {
            for (std::size_t q = 0; q < steps.size(); ++q) {
                if (steps[q] != k) continue;
                sys[q].assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n * d));
                cl[q].assign(x.begin() + static_cast<std::ptrdiff_t>(n * d), x.end());
            }
        });
        for (std::size_t q = 0; q < steps.size(); ++q) {
            out.system.emplace_back(d, std::move(sys[q]));
            if (n_clones > 0) out.clones.emplace_back(d, std::move(cl[q]));
            else out.clones.emplace_back();
        }
        return out;
    };
}

}  // namespace mkv
