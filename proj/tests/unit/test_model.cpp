#include <cmath>

#include <gtest/gtest.h>

#include "mkv/errors.hpp"
#include "mkv/model.hpp"
#include "support.hpp"

using namespace mkv;

TEST(Registry, NamesResolve) {
    for (const std::string& name : registry_names()) {
        const CoefficientSet c = builtin_problem(name);
        EXPECT_EQ(c.name, name);
        EXPECT_NO_THROW(c.profile.validate());
    }
    EXPECT_THROW(builtin_problem("no-such-problem"), RegistryError);
}

TEST(Registry, MeanAttractDriftIsMean) {
    ProblemOptions o;
    o.dim = 3;
    const CoefficientSet c = builtin_problem("mean-attract", o);
    const std::vector<double> b = c.drift(0.0, {0.4, -2.0, 5.0}, 1.0);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_EQ(b[0], 1.0);
    EXPECT_EQ(b[1], 0.0);
    EXPECT_EQ(b[2], 0.0);
}

TEST(Registry, HolderDriftPhiQuotientBounded) {
    const CoefficientSet c = builtin_problem("holder-drift");
    double worst = 0.0;
    for (double h = 1.0; h > 1e-12; h /= 3.0) {
        const double x0 = 0.0;
        const double q = std::abs(c.phi1(&h) - c.phi1(&x0)) / std::pow(h, c.profile.alpha1);
        worst = std::max(worst, q);
    }
    EXPECT_LE(worst, c.profile.holder_phi1 * (1.0 + 1e-12));
}

class RegistryAssumptions : public ::testing::TestWithParam<std::string> {};

TEST_P(RegistryAssumptions, DeclaredProfileHolds) {
    for (std::uint64_t seed : {1u, 42u, 977u}) {
        const AssumptionReport r = validate_assumptions(builtin_problem(GetParam()), 10000, seed);
        EXPECT_TRUE(r.pass) << GetParam() << " seed " << seed;
        for (const auto& chk : r.checks) EXPECT_TRUE(chk.pass) << GetParam() << ": " << chk.name;
    }
}

INSTANTIATE_TEST_SUITE_P(AllProblems, RegistryAssumptions, ::testing::ValuesIn(registry_names()),
                         [](const auto& info) {
                             std::string s = info.param;
                             for (char& ch : s)
                                 if (ch == '-') ch = '_';
                             return s;
                         });

TEST(Assumptions, GaussianEllipticityIsExact) {
    const AssumptionReport r = validate_assumptions(builtin_problem("gaussian"), 1000, 5);
    EXPECT_NEAR(r.ellipticity_min, 1.0, 1e-12);
    EXPECT_NEAR(r.ellipticity_max, 1.0, 1e-12);
}

TEST(Assumptions, HolderDiffusionRayleighRange) {
    const AssumptionReport r = validate_assumptions(builtin_problem("holder-diffusion"), 10000, 3);
    EXPECT_GE(r.ellipticity_min, 1.0 - 1e-12);
    EXPECT_LE(r.ellipticity_max, 1.5 + 1e-12);
    EXPECT_TRUE(r.pass);
}

TEST(Assumptions, UnboundedDriftFailsSupBound) {
    CoefficientSet c = test_support::affine_1d(0.0, 1.0);
    c.b = [](double, const double* x, double, double* out) { out[0] = x[0]; };
    c.profile.c_b = 10.0;
    const AssumptionReport r = validate_assumptions(c, 1000, 1);
    EXPECT_FALSE(r.pass);
    EXPECT_FALSE(r.check("c_b").pass);
}

TEST(Assumptions, UnderstatedEllipticityFails) {
    CoefficientSet c = test_support::affine_1d(0.0, 2.0);
    c.profile.lambda = 2.0;
    const AssumptionReport r = validate_assumptions(c, 500, 1);
    EXPECT_FALSE(r.check("ellipticity_upper").pass);
}

TEST(Assumptions, RejectsTooFewSamples) {
    EXPECT_THROW(validate_assumptions(builtin_problem("gaussian"), 99, 1), DomainError);
}

TEST(Coefficients, FiniteDifferenceMeasureDerivative) {
    const CoefficientSet c = builtin_problem("holder-drift");
    for (double w : {-1.0, 0.0, 0.7}) {
        const double expect = 1.0 / (std::cosh(w) * std::cosh(w));
        EXPECT_NEAR(c.ddrift_dw1(0.0, 0.3, w), expect, 1e-8);
    }
}
