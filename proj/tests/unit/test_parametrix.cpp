#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "mkv/errors.hpp"
#include "mkv/frozen.hpp"
#include "mkv/parametrix.hpp"
#include "mkv/simulator.hpp"
#include "mkv/special.hpp"
#include "support.hpp"

using namespace mkv;

namespace {

ScalarFlow flow_for(const CoefficientSet& c, double T = 0.5) {
    SimulationConfig sc;
    sc.T = T;
    sc.n_steps = 100;
    sc.n_particles = 1000;
    return simulate_mkv(c, EmpiricalMeasure::gaussian(1, 1000, 0.3, 0.5, 42), sc).flow;
}

}  // namespace

TEST(KernelH, VanishesForSpaceHomogeneousCoefficients) {
    for (const char* name : {"gaussian", "mean-attract", "holder-drift"}) {
        const CoefficientSet c = builtin_problem(name);
        const ScalarFlow f = flow_for(c);
        EXPECT_EQ(kernel_H(c, f, 0.1, -0.3, 0.4, 0.8), 0.0) << name;
    }
}

TEST(KernelH, VanishesOnTheDiagonal) {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const ScalarFlow f = flow_for(c);
    EXPECT_EQ(kernel_H(c, f, 0.1, 0.37, 0.3, 0.37), 0.0);
}

TEST(KernelH, MatchesCompositionOfFrozenPieces) {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const ScalarFlow f = flow_for(c);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const double sp = 0.4 * U(rng), s = sp + 0.05 + 0.05 * U(rng);
        const double yp = 2 * U(rng) - 1, y = yp + 0.4 * (U(rng) - 0.5);
        const FrozenParams p = frozen_moments(c, f, {y}, sp, s);
        const double ay = c.a1(sp, y, f.w2_at(sp)), ayp = c.a1(sp, yp, f.w2_at(sp));
        const double expect = 0.5 * (ayp - ay) * frozen_density_dx2(p, yp, y);
        EXPECT_NEAR(kernel_H(c, f, sp, yp, s, y), expect, 1e-12 * std::max(1.0, std::abs(expect)));
    }
}

TEST(KernelH, IsTrueMinusFrozenGeneratorOnFrozenDensity) {
    // Affine-in-x drift so both the drift and diffusion differences contribute.
    CoefficientSet c = builtin_problem("holder-diffusion");
    c.b = [](double, const double* x, double, double* out) { out[0] = std::sin(x[0]); };
    const ScalarFlow f = ScalarFlow::constant({0.0, 0.25, 0.5}, 0.2, 0.9);
    const double sp = 0.1, s = 0.3, y = 0.4;
    const FrozenParams p = frozen_moments(c, f, {y}, sp, s);
    for (double yp : {-0.2, 0.1, 0.55, 0.9}) {
        const double h = 1e-4;
        auto g = [&](double u) { return frozen_density(p, {u}, {y}); };
        const double d1 = (g(yp + h) - g(yp - h)) / (2 * h);
        const double d2 = (g(yp + h) - 2 * g(yp) + g(yp - h)) / (h * h);
        const double lb = c.drift1(sp, yp, 0.2) * d1 + 0.5 * c.a1(sp, yp, 0.9) * d2;
        const double lf = c.drift1(sp, y, 0.2) * d1 + 0.5 * c.a1(sp, y, 0.9) * d2;
        EXPECT_NEAR(kernel_H(c, f, sp, yp, s, y), lb - lf, 1e-5);
    }
}

TEST(Constants, RecursionExamples) {
    const ParametrixConstants pc = constants(1.0, 1.0, 3);
    EXPECT_NEAR(pc.value(1), 1.0, 1e-15);
    EXPECT_NEAR(pc.value(2), std::numbers::pi, 1e-13);
    EXPECT_NEAR(pc.value(3), std::numbers::pi * beta(1.0, 0.5), 1e-12);
    EXPECT_THROW(constants(0.0, 1.0, 3), DomainError);
    EXPECT_THROW(constants(1.0, 1.5, 3), DomainError);
}

TEST(Constants, ThresholdAndDomain) {
    EXPECT_EQ(asymptotic_threshold(1.0), 2);
    EXPECT_EQ(asymptotic_threshold(0.5), 4);
    EXPECT_EQ(asymptotic_threshold(0.3), 7);
    EXPECT_THROW(constants_asymptotic(1.0, 0.5, 3), DomainError);
    EXPECT_NO_THROW(constants_asymptotic(1.0, 0.5, 4));
}

TEST(Constants, AnchorAtThreshold) {
    // Exact anchor when gamma = 1; otherwise the two forms differ by gamma^{-K}.
    for (double C : {0.5, 1.0, 3.0}) {
        EXPECT_NEAR(log_constants_asymptotic(C, 1.0, 2), constants(C, 1.0, 2).log_value(2), 1e-12);
        const double g = 0.5;
        const int K = asymptotic_threshold(g);
        EXPECT_NEAR(log_constants_asymptotic(C, g, K) - constants(C, g, K).log_value(K), -K * std::log(g), 1e-12);
    }
}

TEST(Constants, LogValuesStayFiniteForLargeOrders) {
    const ParametrixConstants pc = constants(50.0, 0.2, 400);
    for (int k = 1; k <= 400; ++k) EXPECT_TRUE(std::isfinite(pc.log_value(k)));
}

TEST(GradedRule, BetaWeightIdentity) {
    for (double g : {0.5, 1.0}) {
        std::vector<double> r, w;
        const double sp = 0.2, s = 0.7;
        graded_rule(sp, s, 2.0 / g, 48, r, w);
        double acc = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i)
            acc += w[i] * std::pow(s - r[i], g / 2 - 1) * std::pow(r[i] - sp, g / 2 - 1);
        const double expect = std::pow(s - sp, g - 1) * beta(g / 2, g / 2);
        EXPECT_LT(test_support::rel_err(acc, expect), 1e-6) << "gamma " << g;
    }
}

TEST(SpaceTimeGrid, SlicesEndAtTargetTime) {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const ScalarFlow f = flow_for(c);
    ParametrixOptions o;
    const SpaceTimeGrid g = SpaceTimeGrid::build(c, f, 0.1, 0.2, 0.4, o);
    ASSERT_EQ(static_cast<int>(g.slices.size()), o.slices);
    EXPECT_EQ(g.slices.back().time, 0.4);
    for (std::size_t i = 1; i < g.slices.size(); ++i) EXPECT_GT(g.slices[i].time, g.slices[i - 1].time);
    o.extent = 3.0;
    EXPECT_THROW(SpaceTimeGrid::build(c, f, 0.1, 0.2, 0.4, o), ResolutionError);
    EXPECT_THROW(SpaceTimeGrid::build(c, f, 0.1, 0.2, 0.9, ParametrixOptions{}), CoverageError);
}

TEST(IterateKernel, ZeroInGivesZeroOut) {
    const CoefficientSet c = builtin_problem("holder-drift");
    const ScalarFlow f = flow_for(c);
    const KernelSampler H(c, f);
    const KernelTable k1 = sample_kernel(H, SpaceTimeGrid::build(c, f, 0.0, 0.0, 0.3));
    EXPECT_TRUE(k1.is_zero());
    const KernelTable k2 = iterate_kernel(k1, H);
    EXPECT_TRUE(k2.is_zero());
    EXPECT_EQ(k2.k, 2);
    std::ostringstream os;
    k2.write_csv(os);
    EXPECT_EQ(os.str().substr(0, 27), "k,s_prime,y_prime,s,y,value");
}

TEST(ParametrixDensity, ConstantCoefficientsReduceToFrozenDensity) {
    const CoefficientSet c = test_support::affine_1d(0.3, 1.2);
    const ScalarFlow f = ScalarFlow::constant({0.0, 0.5, 1.0}, 0.0, 0.0);
    for (int K = 0; K <= 3; ++K) {
        ParametrixSolver s(c, f, 0.0, 0.1, 0.6, K);
        for (int i = 0; i < 100; ++i) {
            const double y = -3.0 + 6.0 * i / 99.0;
            const SeriesResult r = s.density(y);
            const double p = frozen_density(frozen_moments(c, f, {y}, 0.0, 0.6), {0.1}, {y});
            EXPECT_LE(test_support::rel_err(r.value, p), 1e-10);
            for (int k = 1; k <= K; ++k) EXPECT_EQ(r.per_order[k], 0.0);
        }
    }
}

TEST(ParametrixDensity, HolderDiffusionNormalizes) {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const ScalarFlow f = flow_for(c);
    ParametrixSolver s(c, f, 0.0, 0.0, 0.25, 3);
    const auto ys = s.output_grid();
    const auto res = s.density(ys);
    double mass = 0.0;
    for (const auto& r : res) mass += r.value;
    mass *= ys[1] - ys[0];
    EXPECT_NEAR(mass, 1.0, 1e-3);
}

TEST(ParametrixDensity, PerOrderTermsDecay) {
    const CoefficientSet c = builtin_problem("holder-diffusion");
    const ScalarFlow f = flow_for(c);
    for (double x : {0.0, 0.7}) {
        ParametrixSolver s(c, f, 0.0, x, 0.5, 3);
        const auto res = s.density(s.output_grid());
        std::vector<double> peak(4, 0.0);
        for (const auto& r : res)
            for (int k = 0; k <= 3; ++k) peak[k] = std::max(peak[k], std::abs(r.per_order[k]));
        for (int k = 1; k <= 3; ++k) EXPECT_LT(peak[k], 0.5 * peak[k - 1]) << "x=" << x << " k=" << k;
        for (const auto& r : res) EXPECT_GE(r.tail_bound, 0.0);
    }
}

TEST(ParametrixDensity, RejectsHigherDimensions) {
    ProblemOptions o;
    o.dim = 2;
    const CoefficientSet c = builtin_problem("gaussian", o);
    const ScalarFlow f = ScalarFlow::constant({0.0, 1.0}, 0.0, 0.0);
    EXPECT_THROW(parametrix_density(c, f, 0.0, 0.0, 0.5, 0.0, 1), UnsupportedInput);
}
