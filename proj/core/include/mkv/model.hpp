#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace mkv {

// Coefficients write into caller-owned buffers: b into d values, sigma into a
// row-major d x d block.
using DriftFn = std::function<void(double t, const double* x, double w, double* out)>;
using DiffusionFn = std::function<void(double t, const double* x, double w, double* out)>;
using TestFn = std::function<double(const double* x)>;

struct RegularityProfile {
    double alpha1 = 1.0;
    double alpha2 = 1.0;
    double gamma_a = 1.0;
    double gamma_a_prime = 1.0;
    double lambda = 2.0;
    double c_b = 1.0;
    double c_b_prime = 1.0;
    double c_sigma = 1.0;
    double c_sigma_prime = 1.0;
    // Hoelder seminorms of phi1 / phi2 for exponents alpha1 / alpha2, and
    // their sup norms (infinity when unbounded).
    double holder_phi1 = 1.0;
    double holder_phi2 = 1.0;
    double sup_phi1 = std::numeric_limits<double>::infinity();
    double sup_phi2 = std::numeric_limits<double>::infinity();

    void validate() const;
};

struct CoefficientSet {
    std::string name;
    int dim = 1;
    DriftFn b;
    DiffusionFn sigma;
    TestFn phi1;
    TestFn phi2;
    // Optional analytic derivatives in the measure argument w.
    DriftFn db_dw;
    DiffusionFn dsigma_dw;
    RegularityProfile profile;

    std::vector<double> drift(double t, const std::vector<double>& x, double w) const;
    std::vector<double> diffusion(double t, const std::vector<double>& x, double w) const;
    // a = sigma sigma^T, row-major.
    std::vector<double> diffusion_matrix(double t, const std::vector<double>& x, double w) const;

    // d = 1 shortcuts.
    double drift1(double t, double x, double w) const {
        double out;
        b(t, &x, w, &out);
        return out;
    }
    double a1(double t, double x, double w) const {
        double s;
        sigma(t, &x, w, &s);
        return s * s;
    }
    double ddrift_dw1(double t, double x, double w) const;
    double da_dw1(double t, double x, double w) const;
};

struct ProblemOptions {
    int dim = 1;
    // Space-Hoelder exponent of sigma for "holder-diffusion".
    double gamma_a = 0.5;
};

const std::vector<std::string>& registry_names();
CoefficientSet builtin_problem(const std::string& name, const ProblemOptions& opts = {});

struct AssumptionCheck {
    std::string name;
    double measured = 0.0;
    double declared = 0.0;
    bool pass = false;
};

struct AssumptionReport {
    int n_samples = 0;
    double ellipticity_min = 0.0;
    double ellipticity_max = 0.0;
    std::vector<AssumptionCheck> checks;
    bool pass = false;

    const AssumptionCheck& check(const std::string& name) const;
};

// Relative slack applied to every declared bound.
inline constexpr double kAssumptionSlack = 0.01;

AssumptionReport validate_assumptions(const CoefficientSet& coeffs, int n_samples, std::uint64_t seed);

}  // namespace mkv
