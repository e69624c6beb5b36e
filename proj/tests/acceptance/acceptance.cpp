// Acceptance runner: one PASS/FAIL line per criterion. Tolerances and runtime
// budgets are fixed here; `--criterion NAME` runs a single one, `--list` prints names.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mkv/estimates.hpp"
#include "mkv/frozen.hpp"
#include "mkv/parametrix.hpp"
#include "mkv/simulator.hpp"
#include "mkv/special.hpp"
#include "support.hpp"

using namespace mkv;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    double budget_seconds;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const EmpiricalMeasure& reference_measure(std::size_t n) {
    static std::map<std::size_t, EmpiricalMeasure> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, EmpiricalMeasure::gaussian(1, n, 0.3, 0.5, 42)).first;
    return it->second;
}

ScalarFlow reference_flow(const CoefficientSet& c, double T, int n_steps, std::size_t n = 2000) {
    SimulationConfig sc;
    sc.T = T;
    sc.n_steps = n_steps;
    sc.n_particles = n;
    return simulate_mkv(c, reference_measure(n), sc).flow;
}

Outcome constant_coefficient_exactness() {
    const CoefficientSet c = test_support::affine_1d(0.3, 1.2);
    const ScalarFlow f = ScalarFlow::constant({0.0, 0.5, 1.0}, 0.0, 0.0);
    double worst = 0.0;
    for (int K = 0; K <= 3; ++K) {
        ParametrixSolver s(c, f, 0.0, 0.1, 0.6, K);
        const double sd = std::sqrt(1.44 * 0.6);
        for (int i = 0; i < 100; ++i) {
            const double y = 0.1 + 0.18 - 5 * sd + 10 * sd * i / 99.0;
            const double p = frozen_density(frozen_moments(c, f, {y}, 0.0, 0.6), {0.1}, {y});
            worst = std::max(worst, test_support::rel_err(s.density(y).value, p));
        }
    }
    return {worst <= 1e-10, fmt("max relative error %.2e (tol 1e-10)", worst)};
}

Outcome normalization() {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const ScalarFlow f = reference_flow(c, 0.5, 200);
    bool ok = true;
    std::string d;
    for (double tau : {0.1, 0.25, 0.5}) {
        ParametrixSolver s(c, f, 0.0, 0.3, tau, 3);
        const auto ys = s.output_grid();
        double mass = 0.0;
        for (const auto& r : s.density(ys)) mass += r.value;
        mass *= ys[1] - ys[0];
        ok = ok && mass >= 0.999 && mass <= 1.001;
        d += fmt("tau=%.2f mass=%.6f ", tau, mass);
    }
    return {ok, d + "(band [0.999, 1.001])"};
}

Outcome monte_carlo_agreement() {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const double tau = 0.5, x = 0.0;
    SimulationConfig sc;
    sc.T = tau;
    sc.n_steps = 500;
    sc.n_particles = 2000;
    const ScalarFlow f = simulate_mkv(c, reference_measure(2000), sc).flow;
    SimulationConfig mc = sc;
    mc.n_particles = 100000;
    mc.seed = 7;
    std::vector<double> xs(mc.n_particles);
    euler_stream(c, f, EmpiricalMeasure::dirac({x}, mc.n_particles), mc, [&](std::size_t i, int k, const double* y) {
        if (k == mc.n_steps) xs[i] = y[0];
    });
    ParametrixSolver ps(c, f, 0.0, x, tau, 3);
    const int n_bins = 50;
    const double L = 4.0 * std::sqrt(c.profile.lambda * tau), lo = x - L, bw = 2.0 * L / n_bins;
    std::vector<double> count(n_bins, 0.0);
    for (double v : xs) {
        const int b = static_cast<int>(std::floor((v - lo) / bw));
        if (b >= 0 && b < n_bins) count[b] += 1.0;
    }
    const GaussRule gl = gauss_legendre_unit(4);
    const double n = static_cast<double>(mc.n_particles);
    double worst = 0.0, worst_gap = 0.0;
    for (int b = 0; b < n_bins; ++b) {
        double pb = 0.0;
        for (int q = 0; q < gl.n; ++q) pb += gl.weights[q] * bw * ps.density(lo + bw * (b + gl.nodes[q])).value;
        const double se = std::sqrt(std::max(pb, 0.0) * (1.0 - pb) / n);
        const double gap = std::abs(count[b] / n - pb);
        if (gap / (3 * se + 1e-3) > worst) {
            worst = gap / (3 * se + 1e-3);
            worst_gap = gap;
        }
    }
    return {worst <= 1.0, fmt("worst bin gap %.2e, ratio to 3*stderr+1e-3 is %.3f", worst_gap, worst)};
}

Outcome kernel_bounds() {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const ScalarFlow f = reference_flow(c, 0.5, 200);
    const KernelBoundReport rep =
        check_kernel_bound(c, f, {{0.0, 0.0}, {0.0, 0.6}, {0.0, 1.5707963}, {0.1, 0.0}, {0.1, -0.8}}, 0.5, 3);
    bool ok = true;
    std::string d = fmt("C=%.3f C_hat=%.3f c=%.4f;", rep.C, rep.C_hat, rep.c);
    for (const auto& r : rep.reports) {
        d += fmt(" %s ratio %.4f", r.claim.c_str(), r.ratio);
        if (r.claim != "kernel-bound-k1") ok = ok && r.pass;
    }
    return {ok, d + " (limit 1+1e-6)"};
}

Outcome constants_closed_form() {
    const double beta_err = std::abs(beta(0.5, 0.5) - std::numbers::pi);
    bool ok = beta_err <= 1e-12;
    std::string d = fmt("|beta(1/2,1/2)-pi|=%.1e;", beta_err);
    for (double g : {0.5, 1.0}) {
        const int K = asymptotic_threshold(g);
        const ParametrixConstants pc = constants(1.0, g, 30);
        std::vector<double> ks, diff;
        for (int k = K; k <= 30; ++k) {
            ks.push_back(k);
            diff.push_back(pc.log_value(k) - log_constants_asymptotic(1.0, g, k));
        }
        const double mk = std::accumulate(ks.begin(), ks.end(), 0.0) / ks.size();
        const double md = std::accumulate(diff.begin(), diff.end(), 0.0) / diff.size();
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            sxx += (ks[i] - mk) * (ks[i] - mk);
            sxy += (ks[i] - mk) * (diff[i] - md);
        }
        const double slope = sxy / sxx;
        ok = ok && std::abs(slope) <= 1e-2;
        d += fmt(" gamma=%.1f log-difference slope %.4f", g, slope);
    }
    return {ok, d + " (tol 1e-2)"};
}

Outcome picard() {
    std::string d;
    bool ok = true;
    {
        SimulationConfig sc;
        sc.T = 0.5;
        sc.n_particles = 1000;
        const PicardReport r = picard_iterate(builtin_problem("gaussian"), reference_measure(1000), sc, 1e-8, 5);
        const bool exact = r.increments.size() >= 2 && r.increments[1] == 0.0;
        ok = ok && exact;
        d += fmt("gaussian Delta_2=%g;", r.increments.size() >= 2 ? r.increments[1] : -1.0);
    }
    {
        const std::size_t N = 10000;
        const double m0 = 0.4;
        SimulationConfig sc;
        sc.T = 0.5;
        sc.n_particles = N;
        const auto mu = EmpiricalMeasure::gaussian(1, N, m0, 0.5, 42);
        const ScalarFlow f = simulate_mkv(builtin_problem("mean-attract"), mu, sc).flow;
        const double mbar = moment(mu, [](const double* x) { return x[0]; });
        double worst = 0.0;
        for (std::size_t k = 0; k < f.times.size(); ++k)
            worst = std::max(worst, std::abs(f.w1[k] - mbar * std::exp(f.times[k])));
        const double tol = 3.0 / std::sqrt(static_cast<double>(N));
        ok = ok && worst <= tol;
        d += fmt(" mean-attract max |w1 - m0 e^s| %.2e (tol %.2e);", worst, tol);
    }
    {
        SimulationConfig sc;
        sc.T = 0.25;
        sc.n_particles = 1000;
        const PicardReport r = picard_iterate(builtin_problem("holder-drift"), reference_measure(1000), sc, 1e-8, 25);
        ok = ok && r.converged;
        d += fmt(" holder-drift Delta=%.2e after %d iterations", r.increments.back(), r.iterations);
    }
    return {ok, d};
}

Outcome smoothing_rate() {
    const std::size_t N = 1000;
    const auto& mu = reference_measure(N);
    std::vector<std::size_t> idx(N);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) {
        return std::abs(mu.point(a)[0] - 0.05) < std::abs(mu.point(b)[0] - 0.05);
    });
    SimulationConfig sc;
    sc.T = 0.5;
    sc.n_steps = 200;
    sc.n_particles = N;
    const std::vector<double> s{0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5};
    const TestFn identity = [](const double* x) { return x[0]; };
    const TestFn half = [](const double* x) { return std::sqrt(std::min(std::abs(x[0]), 1e6)); };
    bool ok = true;
    std::string d;
    for (const char* name : {"gaussian", "holder-diffusion"})
        for (double alpha : {1.0, 0.5}) {
            ScanOptions o;
            o.z_indices.assign(idx.begin(), idx.begin() + 16);
            const ScanResult r =
                mu_derivative_scan(builtin_problem(name), mu, alpha == 1.0 ? identity : half, alpha, s, sc, o);
            bool pass = r.pass;
            if (alpha == 1.0 && std::string(name) == "gaussian")
                pass = pass && !r.fit.degenerate && std::abs(r.fit.slope) <= 1e-3;
            ok = ok && pass;
            d += fmt("%s a=%.1f slope %.4f (floor %.3f)%s; ", name, alpha, r.fit.slope, r.floor - r.tolerance,
                     pass ? "" : " FAIL");
        }
    return {ok, d + "gaussian a=1 held to |slope| <= 1e-3"};
}

Outcome representation_cross_check() {
    const BTildeFn bt = [](double, double y, double w) { return std::cos(y) + 0.5 * std::tanh(w); };
    bool ok = true;
    std::string d;
    for (const auto& name : registry_names()) {
        const CoefficientSet c = builtin_problem(name);
        SimulationConfig fc;
        fc.T = 0.5;
        fc.n_steps = 200;
        fc.n_particles = 2000;
        const ScalarFlow f = simulate_mkv(c, reference_measure(2000), fc).flow;
        SimulationConfig pc = fc;
        pc.n_particles = 20000;
        pc.seed = 11;
        const MonteCarloValue fk = feynman_kac_u(c, bt, 0.2, f, pc);
        const double pu = parametrix_u(c, bt, 0.0, 0.2, 0.5, f, 3);
        const double thr = 3 * fk.std_error + 5e-3, diff = std::abs(fk.value - pu);
        ok = ok && diff <= thr;
        d += fmt("%s |diff| %.2e / %.2e; ", name.c_str(), diff, thr);
    }
    return {ok, d};
}

Outcome gradient_proxy() {
    GradientOptions o;
    o.flow_config.T = 0.5;
    o.flow_config.n_steps = 200;
    o.flow_config.n_particles = 1000;
    o.path_config = o.flow_config;
    o.path_config.n_particles = 20000;
    o.path_config.n_steps = 100;
    o.path_config.seed = 5;
    const BTildeFn bt = [](double, double y, double w) { return std::tanh(w) * std::cos(y); };
    const GradientReport r =
        u_gradient_bounds(builtin_problem("holder-drift"), bt, 0.5, reference_measure(1000), {0.5, 0.25, 0.125, 0.0625}, o);
    const bool ok = !r.dx_fit.degenerate && r.dx_fit.slope >= 0.0 && r.dx_fit.r_squared >= 0.9;
    return {ok, fmt("d_x u exponent %.4f, r^2 %.4f (need >= 0 and >= 0.9)", r.dx_fit.slope, r.dx_fit.r_squared)};
}

Outcome determinism() {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "mkv_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    {
        std::ofstream cfg(root / "config.json");
        cfg << R"({"problem": "holder-drift", "seed": 42,
                   "initial": {"kind": "gaussian", "n": 500, "mean": 0.3, "std": 0.5},
                   "simulation": {"T": 0.5, "n_steps": 100}})";
    }
    auto read = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    for (const char* run : {"a", "b"}) {
        const std::string cmd = std::string(MKV_TOOL_PATH) + " simulate -c " + (root / "config.json").string() +
                                " -o " + (root / run).string() + " 2>/dev/null";
        if (std::system(cmd.c_str()) != 0) return {false, "mkv simulate exited non-zero"};
    }
    std::size_t bytes = 0;
    for (const char* f : {"paths.csv", "flow.csv"}) {
        const std::string a = read(root / "a" / f), b = read(root / "b" / f);
        if (a.empty() || a != b) return {false, fmt("%s differs between runs", f)};
        bytes += a.size();
    }
    return {true, fmt("paths.csv and flow.csv identical (%zu bytes)", bytes)};
}

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        {"constant-coefficient-exactness", 1, constant_coefficient_exactness},
        {"normalization", 120, normalization},
        {"monte-carlo-agreement", 300, monte_carlo_agreement},
        {"kernel-bounds", 300, kernel_bounds},
        {"constants", 1, constants_closed_form},
        {"picard", 120, picard},
        {"smoothing-rate", 300, smoothing_rate},
        {"representation-cross-check", 300, representation_cross_check},
        {"gradient-proxy", 600, gradient_proxy},
        {"determinism", 120, determinism},
    };
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    std::string only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--list") {
            for (const auto& c : criteria()) std::cout << c.name << '\n';
            return 0;
        }
        if (a == "--criterion" && i + 1 < argc) only = argv[++i];
        else {
            std::cerr << "usage: mkv_acceptance [--list] [--criterion NAME]\n";
            return 2;
        }
    }
    int failed = 0, ran = 0;
    for (const auto& c : criteria()) {
        if (!only.empty() && c.name != only) continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_budget = secs < c.budget_seconds;
        const bool pass = o.pass && in_budget;
        std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail
                  << fmt(" [%.2fs, budget %.0fs%s]", secs, c.budget_seconds, in_budget ? "" : " EXCEEDED") << std::endl;
        failed += !pass;
    }
    if (ran == 0) {
        std::cerr << "unknown criterion '" << only << "'\n";
        return 2;
    }
    return failed == 0 ? 0 : 1;
}
