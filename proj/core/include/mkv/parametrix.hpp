#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "mkv/frozen.hpp"
#include "mkv/measure.hpp"
#include "mkv/model.hpp"

namespace mkv {

// H(s',y';s,y) for d = 1, with the frozen density taken at xi = y.
double kernel_H(const CoefficientSet& coeffs, const ScalarFlow& flow, double s_prime, double y_prime, double s,
                double y);

struct ParametrixConstants {
    double C = 1.0;
    double gamma = 1.0;
    int k_max = 1;
    // log C_k for k = 1..k_max (index k-1); values overflow to infinity.
    std::vector<double> log_values;

    double log_value(int k) const { return log_values.at(k - 1); }
    double value(int k) const;
};

ParametrixConstants constants(double C, double gamma, int k_max);

// Threshold K(gamma) = ceil(2/gamma) above which the closed form applies.
int asymptotic_threshold(double gamma);
double log_constants_asymptotic(double C, double gamma, int k);
double constants_asymptotic(double C, double gamma, int k);

struct ParametrixOptions {
    // Spatial half-width of every table, in standard deviations.
    double extent = 8.0;
    // Time slices per table; slice i sits at t + (s-t) (i/M)^{2/gamma}.
    int slices = 32;
    int table_nodes_per_sigma = 6;
    // Gauss-Legendre nodes of the graded time rule used for each target.
    int time_nodes = 48;
    int quad_nodes_per_sigma = 4;
    // Output grids use h_x = sqrt(Lambda (s-t)) / output_divisor.
    double output_divisor = 40.0;
    // Spacing of the freezing-point lattice used for the origin layer.
    double lattice_step = 5e-3;
};

struct SliceGrid {
    double time = 0.0;
    double lo = 0.0;
    double step = 1.0;
    int n = 0;

    double node(int i) const { return lo + step * i; }
    double hi() const { return lo + step * (n - 1); }
};

// Per-slice uniform spatial grids for a table rooted at (t0, x0).
struct SpaceTimeGrid {
    double t0 = 0.0;
    double x0 = 0.0;
    double s = 0.0;
    double lambda = 1.0;
    double gamma = 1.0;
    double extent = 8.0;
    std::vector<SliceGrid> slices;

    static SpaceTimeGrid build(const CoefficientSet& coeffs, const ScalarFlow& flow, double t0, double x0, double s,
                               const ParametrixOptions& opts = {});
    std::size_t node_count() const;
};

// Time nodes and weights of the graded rule on (a, b): both endpoints are
// clustered with exponent q.
void graded_rule(double a, double b, double q, int n, std::vector<double>& nodes, std::vector<double>& weights);

// Fast evaluator of H and of the convolution step shared by the series and
// the iterated kernels. Holds references to coeffs and flow.
class KernelSampler {
public:
    KernelSampler(const CoefficientSet& coeffs, const ScalarFlow& flow, const ParametrixOptions& opts = {});

    const CoefficientSet& coeffs() const { return *coeffs_; }
    const ScalarFlow& flow() const { return *flow_; }
    const ParametrixOptions& options() const { return opts_; }
    double lambda() const { return coeffs_->profile.lambda; }
    double gamma() const { return coeffs_->profile.gamma_a; }

    double H(double s_prime, double y_prime, double s, double y) const;

private:
    const CoefficientSet* coeffs_;
    const ScalarFlow* flow_;
    ParametrixOptions opts_;
};

// Sampled H^{(k)}(t0, x0; r, y) (or a series layer) on a SpaceTimeGrid.
struct KernelTable {
    SpaceTimeGrid grid;
    int k = 1;
    std::vector<std::vector<double>> values;
    // True when the k = 1 values are samples of the closed-form H, which
    // iterate_kernel then uses directly instead of interpolating.
    bool closed_form = false;

    bool is_zero() const;
    void write_csv(std::ostream& os) const;
};

KernelTable sample_kernel(const KernelSampler& H, const SpaceTimeGrid& grid);

// H^{(k+1)}(t0,x0; s,y) = int int H^{(k)}(t0,x0; r,u) H(r,u; s,y) du dr on every
// node of the grid. This is the recursion with the roles of the two factors
// exchanged, which gives the same kernel by associativity of the composition.
KernelTable iterate_kernel(const KernelTable& prev, const KernelSampler& H);

struct SeriesResult {
    double y = 0.0;
    double value = 0.0;
    std::vector<double> per_order;
    double tail_bound = 0.0;
    int K = 0;
};

// Truncated series for p(t,x; s,.) with tables built once and reused.
class ParametrixSolver {
public:
    // With tabulate_all, the order-K layer is also tabulated so that
    // slice_density covers every order.
    ParametrixSolver(const CoefficientSet& coeffs, const ScalarFlow& flow, double t, double x, double s, int K,
                     const ParametrixOptions& opts = {}, bool tabulate_all = false);
    ~ParametrixSolver();
    ParametrixSolver(const ParametrixSolver&) = delete;
    ParametrixSolver& operator=(const ParametrixSolver&) = delete;

    SeriesResult density(double y) const;
    std::vector<SeriesResult> density(const std::vector<double>& ys) const;

    const SpaceTimeGrid& grid() const;
    // Series value summed over orders 0..max_order (default K) at the nodes of slice i.
    std::vector<double> slice_density(std::size_t i, int max_order = -1) const;
    // Uniform output grid x + m +- L sqrt(Lambda (s-t)) with step h_x.
    std::vector<double> output_grid() const;
    // Fitted constant of |H(t,x; r,u)| <= C (r-t)^{gamma/2-1} g(r-t, u-x) used by tail_bound.
    double kernel_constant() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

SeriesResult parametrix_density(const CoefficientSet& coeffs, const ScalarFlow& flow, double t, double x, double s,
                                double y, int K, const ParametrixOptions& opts = {});

}  // namespace mkv
