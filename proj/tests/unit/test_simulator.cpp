#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "mkv/errors.hpp"
#include "mkv/rng.hpp"
#include "mkv/simulator.hpp"
#include "support.hpp"

using namespace mkv;

namespace {
SimulationConfig cfg(double T, int steps, std::size_t n, std::uint64_t seed = 42) {
    SimulationConfig c;
    c.t = 0.0;
    c.T = T;
    c.n_steps = steps;
    c.n_particles = n;
    c.seed = seed;
    return c;
}
}  // namespace

TEST(Config, GridEndsExactlyAtHorizon) {
    SimulationConfig c = cfg(0.3, 7, 1);
    c.t = 0.1;
    const auto g = c.grid();
    ASSERT_EQ(g.size(), 8u);
    EXPECT_EQ(g.front(), 0.1);
    EXPECT_EQ(g.back(), 0.3);
    c.n_steps = 0;
    EXPECT_ANY_THROW(c.validate());
}

TEST(EulerMaruyama, NoDynamicsKeepsPathsConstant) {
    const CoefficientSet c = test_support::affine_1d(0.0, 0.0);
    const EmpiricalMeasure mu = EmpiricalMeasure::gaussian(1, 20, 0, 1, 2);
    const SimulationConfig sc = cfg(1.0, 10, 20);
    const PathEnsemble p = euler_maruyama(c, ScalarFlow::constant(sc.grid(), 0, 0), mu, sc);
    for (std::size_t k = 0; k < p.times.size(); ++k)
        for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(p.at(i, k)[0], mu.point(i)[0]);
}

TEST(EulerMaruyama, UnitDriftAddsElapsedTime) {
    const CoefficientSet c = test_support::affine_1d(1.0, 0.0);
    const EmpiricalMeasure mu(1, {0.0, 2.5});
    const SimulationConfig sc = cfg(0.75, 3, 2);
    const PathEnsemble p = euler_maruyama(c, ScalarFlow::constant(sc.grid(), 0, 0), mu, sc);
    EXPECT_EQ(p.terminal().point(0)[0], 0.75);
    EXPECT_EQ(p.terminal().point(1)[0], 3.25);
}

TEST(EulerMaruyama, BrownianVariance) {
    const CoefficientSet c = builtin_problem("gaussian");
    const std::size_t n = 10000;
    const SimulationConfig sc = cfg(0.5, 20, n, 77);
    const PathEnsemble p = euler_maruyama(c, ScalarFlow::constant(sc.grid(), 0, 0), EmpiricalMeasure::dirac({0.0}, n), sc);
    double m = 0, v = 0;
    for (std::size_t i = 0; i < n; ++i) m += p.terminal().point(i)[0];
    m /= n;
    for (std::size_t i = 0; i < n; ++i) v += std::pow(p.terminal().point(i)[0] - m, 2);
    v /= n - 1;
    EXPECT_NEAR(v, 0.5, 3.0 * 0.5 * std::sqrt(2.0 / (n - 1)));
}

TEST(EulerMaruyama, IncrementsComeFromTheNoiseStream) {
    const CoefficientSet c = builtin_problem("gaussian");
    const SimulationConfig sc = cfg(1.0, 4, 3, 5);
    const PathEnsemble p = euler_maruyama(c, ScalarFlow::constant(sc.grid(), 0, 0), EmpiricalMeasure::dirac({0.0}, 3), sc);
    const NoiseStream ns(5);
    for (std::size_t i = 0; i < 3; ++i) {
        double x = 0.0;
        for (int k = 0; k < 4; ++k) x += std::sqrt(0.25) * ns.normal(i, k);
        EXPECT_NEAR(p.terminal().point(i)[0], x, 1e-15);
    }
}

TEST(EulerMaruyama, DeterministicAndCsvStable) {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const EmpiricalMeasure mu = EmpiricalMeasure::gaussian(1, 30, 0, 1, 1);
    const SimulationConfig sc = cfg(0.5, 25, 30, 9);
    const ScalarFlow f = ScalarFlow::constant(sc.grid(), 0.2, 0.9);
    std::ostringstream a, b;
    euler_maruyama(c, f, mu, sc).write_csv(a);
    euler_maruyama(c, f, mu, sc).write_csv(b);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().substr(0, 23), "particle,step,time,x0\n0");
}

TEST(EulerMaruyama, FlowMustCoverInterval) {
    const CoefficientSet c = builtin_problem("gaussian");
    const SimulationConfig sc = cfg(1.0, 10, 2);
    const ScalarFlow f = ScalarFlow::constant({0.0, 0.5}, 0, 0);
    EXPECT_THROW(euler_maruyama(c, f, EmpiricalMeasure::dirac({0.0}, 2), sc), CoverageError);
}

TEST(EulerMaruyama, StreamVisitsTheStoredStates) {
    const CoefficientSet c = builtin_problem("holder-drift");
    const EmpiricalMeasure mu = EmpiricalMeasure::gaussian(1, 10, 0, 1, 1);
    const SimulationConfig sc = cfg(0.4, 8, 10, 3);
    const ScalarFlow f = ScalarFlow::constant(sc.grid(), 0.3, 0.0);
    const PathEnsemble p = euler_maruyama(c, f, mu, sc);
    int visits = 0;
    euler_stream(c, f, mu, sc, [&](std::size_t i, int k, const double* x) {
        ++visits;
        EXPECT_EQ(x[0], p.at(i, k)[0]);
    });
    EXPECT_EQ(visits, 10 * 9);
}

TEST(Picard, LawIndependentTelescopesAfterOneStep) {
    for (const char* name : {"gaussian"}) {
        const PicardReport r = picard_iterate(builtin_problem(name), EmpiricalMeasure::gaussian(1, 300, 0, 1, 4),
                                              cfg(1.0, 40, 300), 1e-300, 6);
        ASSERT_GE(r.increments.size(), 2u);
        EXPECT_GT(r.increments[0], 0.0);
        EXPECT_EQ(r.increments[1], 0.0);
        EXPECT_TRUE(r.converged);
    }
    const PicardReport r = picard_iterate(test_support::affine_1d(0.3, 1.2), EmpiricalMeasure::gaussian(1, 100, 0, 1, 4),
                                          cfg(1.0, 40, 100), 1e-300, 3);
    EXPECT_EQ(r.increments[1], 0.0);
}

TEST(Picard, MeanAttractFollowsMeanRecursion) {
    const std::size_t n = 10000;
    const SimulationConfig sc = cfg(0.5, 50, n, 42);
    const EmpiricalMeasure mu = EmpiricalMeasure::gaussian(1, n, 1.0, 0.5, 7);
    const MkvSolution sol = simulate_mkv(builtin_problem("mean-attract"), mu, sc, 1e-20, 60);
    const double m0 = moment(mu, [](const double* x) { return x[0]; });
    const double h = sc.step();
    double m = m0;
    for (int k = 0; k <= sc.n_steps; ++k) {
        EXPECT_NEAR(sol.flow.w1[k], m0 * std::exp(sol.flow.times[k]), 3.0 / std::sqrt(double(n)));
        // The particle mean obeys the deterministic recursion up to the noise average.
        EXPECT_NEAR(sol.flow.w1[k], m, 3.0 / std::sqrt(double(n)));
        m *= 1.0 + h;
    }
}

TEST(Picard, HolderDriftIncrementsDecrease) {
    const std::size_t n = 10000;
    const PicardReport r = picard_iterate(builtin_problem("holder-drift"), EmpiricalMeasure::gaussian(1, n, 0.3, 0.5, 42),
                                          cfg(0.25, 50, n, 42), 1e-8, 25);
    EXPECT_TRUE(r.converged);
    for (std::size_t m = 1; m < r.increments.size(); ++m) EXPECT_LT(r.increments[m], r.increments[m - 1]);
    double s = 0.0;
    for (double d : r.increments) s += std::sqrt(d);
    EXPECT_TRUE(std::isfinite(s));
}

TEST(Picard, BoundedPhiGivesBoundedFlow) {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const PicardReport r = picard_iterate(c, EmpiricalMeasure::gaussian(1, 500, 0.0, 2.0, 1), cfg(1.0, 40, 500), 1e-10, 40);
    for (double w : r.final_flow.w1) EXPECT_LE(std::abs(w), c.profile.sup_phi1);
}

TEST(Picard, InitialGuessDoesNotChangeTheFixedPoint) {
    const CoefficientSet c = builtin_problem("holder-drift");
    const EmpiricalMeasure mu = EmpiricalMeasure::gaussian(1, 2000, 0.3, 0.5, 3);
    const SimulationConfig sc = cfg(0.5, 50, 2000, 11);
    const double tol = 1e-8;
    const MkvSolution a = simulate_mkv(c, mu, sc, tol, 40);
    ScalarFlow ramp = ScalarFlow::constant(sc.grid(), 0.0, 0.0);
    for (std::size_t k = 0; k < ramp.times.size(); ++k) ramp.w1[k] = 3.0 * ramp.times[k];
    const MkvSolution b = simulate_mkv(c, mu, sc, tol, 40, &ramp);
    double gap = 0.0;
    for (std::size_t k = 0; k < a.flow.w1.size(); ++k) gap = std::max(gap, std::abs(a.flow.w1[k] - b.flow.w1[k]));
    // Delta is a squared path gap, so flows agree to the order of sqrt(tol).
    EXPECT_LE(gap, 10.0 * std::sqrt(tol));
}

TEST(Picard, NonConvergenceIsReported) {
    const CoefficientSet c = builtin_problem("mean-attract");
    const EmpiricalMeasure mu = EmpiricalMeasure::gaussian(1, 100, 1.0, 0.5, 3);
    EXPECT_THROW(simulate_mkv(c, mu, cfg(0.5, 20, 100), 1e-30, 2), ConvergenceError);
    EXPECT_FALSE(picard_iterate(c, mu, cfg(0.5, 20, 100), 1e-30, 2).converged);
}

TEST(Picard, WindowedMatchesSingleWindow) {
    const CoefficientSet c = builtin_problem("holder-drift");
    const EmpiricalMeasure mu = EmpiricalMeasure::gaussian(1, 200, 0.3, 0.5, 3);
    const SimulationConfig sc = cfg(0.5, 20, 200, 2);
    const MkvSolution one = simulate_mkv(c, mu, sc, 1e-12, 40);
    const WindowedSolution w1 = simulate_mkv_windowed(c, mu, sc, 1e-12, 40, 1.0);
    EXPECT_EQ(one.paths.data, w1.paths.data);
    const WindowedSolution w4 = simulate_mkv_windowed(c, mu, sc, 1e-12, 40, 0.125);
    EXPECT_TRUE(w4.converged);
    EXPECT_EQ(w4.windows.size(), 4u);
    EXPECT_EQ(w4.flow.times.size(), sc.grid().size());
}
