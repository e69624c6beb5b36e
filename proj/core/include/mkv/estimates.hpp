#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mkv/frozen.hpp"
#include "mkv/measure.hpp"
#include "mkv/model.hpp"
#include "mkv/parametrix.hpp"
#include "mkv/simulator.hpp"

namespace mkv {

struct ExponentFit {
    // (log scale, log magnitude) pairs that entered the regression.
    std::vector<std::pair<double, double>> samples;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    bool degenerate = false;
};

// Least-squares line through (log scale, log magnitude). Magnitudes below
// 1e-12 are dropped; fewer than two remaining points flag a degenerate fit.
ExponentFit fit_exponent(const std::vector<double>& scales, const std::vector<double>& magnitudes);

struct BoundReport {
    std::string claim;
    std::size_t grid_size = 0;
    double ratio = 0.0;
    bool pass = false;
    std::map<std::string, double> constants;
};

inline constexpr double kBoundSlack = 1e-6;

struct DominationNode {
    double t, x, s, y;
};

using DensitySampler = std::function<double(const DominationNode&)>;

// max |sampler| / (C * majorant) over the nodes; pass iff <= 1 + kBoundSlack.
BoundReport check_gaussian_domination(const DensitySampler& sampler, const GaussianMajorant& kern, double C,
                                      const std::vector<DominationNode>& nodes);

// Fits (C, c) in the single-constant form: c is the largest rate on a grid in
// [1/(4 Lambda), 1/(2 Lambda)) whose prefactor C = max ratio stays <= c_max.
BoundReport fit_gaussian_domination(const DensitySampler& sampler, double lambda,
                                    const std::vector<DominationNode>& nodes, double c_max = 10.0);

// Tensor grid of (s - t, y - x) offsets around (t, x).
std::vector<DominationNode> domination_grid(double t, double x, const std::vector<double>& taus, double lambda,
                                            int n_space, double extent = 6.0);

struct KernelBoundReport {
    double C = 0.0;
    double C_hat = 0.0;
    double c = 0.0;
    double gamma = 1.0;
    // reports[k-1] checks |H^{(k)}| <= C_k (s-s')^{k gamma/2 - 1} C_hat p_c.
    std::vector<BoundReport> reports;
    bool pass = false;
};

// Fits (C, C_hat, c) on the k = 1 layer of every origin and checks orders
// 1..k_max with those constants frozen.
KernelBoundReport check_kernel_bound(const CoefficientSet& coeffs, const ScalarFlow& flow,
                                     const std::vector<std::pair<double, double>>& origins, double s, int k_max = 3,
                                     const ParametrixOptions& opts = {});

using BTildeFn = std::function<double(double s, double y, double w)>;

struct MonteCarloValue {
    double value = 0.0;
    double std_error = 0.0;
};

// E int_t^T btilde(r, X_r, w1(r)) dr over config.n_particles paths from x
// driven by `flow`, trapezoid in time on the simulation grid. d = 1.
MonteCarloValue feynman_kac_u(const CoefficientSet& coeffs, const BTildeFn& b_tilde, double x, const ScalarFlow& flow,
                              const SimulationConfig& config);

// Resolves the flow from mu0 with simulate_mkv(flow_config) first.
MonteCarloValue feynman_kac_u(const CoefficientSet& coeffs, const BTildeFn& b_tilde, double x,
                              const EmpiricalMeasure& mu0, const SimulationConfig& flow_config,
                              const SimulationConfig& path_config, double tol = kDefaultPicardTol,
                              int m_max = kDefaultPicardMaxIter);

// int_t^T int btilde(r, y, w1(r)) p(t,x; r,y) dy dr with the order-K series.
// Slices closer than 1e-3 to t use the order-0 term only.
double parametrix_u(const CoefficientSet& coeffs, const BTildeFn& b_tilde, double t, double x, double T,
                    const ScalarFlow& flow, int K = 3, const ParametrixOptions& opts = {});

struct ScanOptions {
    double epsilon = kDefaultLionsEpsilon;
    int clones = 256;
    // Particles at which the derivative is evaluated; empty = first min(N, 8).
    std::vector<std::size_t> z_indices;
    // Picard tolerance for the coupled runs; the pair must resolve the flow
    // far below epsilon / N.
    double tol = 1e-26;
    int m_max = 60;
};

struct ScanResult {
    std::vector<double> s_values;
    std::vector<double> magnitudes;  // sup over z of |estimate|
    std::vector<double> std_errors;  // of the maximizing estimate
    ExponentFit fit;
    double alpha = 1.0;
    double floor = 0.0;  // (alpha - 1) / 2
    double tolerance = 0.15;
    bool pass = false;

    void write_csv(std::ostream& os) const;
};

inline constexpr double kExponentTolerance = 0.15;

ScanResult mu_derivative_scan(const CoefficientSet& coeffs, const EmpiricalMeasure& mu0, const TestFn& phi,
                              double alpha, const std::vector<double>& s_values, const SimulationConfig& config,
                              const ScanOptions& opts = {});

struct GradientOptions {
    SimulationConfig flow_config;   // law flow, over [t, max horizon]
    SimulationConfig path_config;   // Feynman-Kac paths (t and T are overridden)
    int K = 3;
    double h = 1e-2;                // central-difference step in x
    double epsilon = 1e-3;          // measure perturbation
    std::vector<std::size_t> z_indices{0};
    double tol = 1e-26;
    int m_max = 60;
    ParametrixOptions parametrix;
};

struct GradientReport {
    std::vector<double> horizons;
    std::vector<double> dx, dxx, dmu;
    ExponentFit dx_fit, dxx_fit, dmu_fit;
};

GradientReport u_gradient_bounds(const CoefficientSet& coeffs, const BTildeFn& b_tilde, double x,
                                 const EmpiricalMeasure& mu0, const std::vector<double>& horizons,
                                 const GradientOptions& opts);

}  // namespace mkv
