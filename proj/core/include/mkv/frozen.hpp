#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "mkv/measure.hpp"
#include "mkv/model.hpp"

namespace mkv {

// Mean shift m and covariance a of the process frozen at xi over [s_prime, s].
struct FrozenParams {
    int dim = 1;
    std::vector<double> m;
    std::vector<double> a;  // row-major d x d
    double s_prime = 0.0;
    double s = 0.0;
};

// The time integrals use the piecewise-linear interpolant of the integrand
// through the flow nodes: the trapezoid rule on every full flow interval, and
// the exact integral of the interpolant on the partial intervals at s_prime
// and s.
FrozenParams frozen_moments(const CoefficientSet& coeffs, const ScalarFlow& flow, const std::vector<double>& xi,
                            double s_prime, double s);

double frozen_density(const FrozenParams& params, const std::vector<double>& y_prime, const std::vector<double>& y);

// d = 1. Derivatives are taken in the backward variable y_prime.
double frozen_density_dx(const FrozenParams& params, double y_prime, double y);
double frozen_density_dx2(const FrozenParams& params, double y_prime, double y);

inline double gauss1(double z, double a) {
    return std::exp(-0.5 * z * z / a) / std::sqrt(2.0 * std::numbers::pi * a);
}

// scale * (s-t)^{-d/2} * exp(-rate |y-x|^2 / (s-t)). The single-constant form
// uses scale = rate = c.
struct GaussianMajorant {
    double scale = 1.0;
    double rate = 1.0;

    GaussianMajorant() = default;
    explicit GaussianMajorant(double c) : scale(c), rate(c) {}
    GaussianMajorant(double scale_, double rate_) : scale(scale_), rate(rate_) {}

    // Prefactor that makes the d=1 kernel a probability density in y.
    static GaussianMajorant normalized(double rate) { return {std::sqrt(rate / std::numbers::pi), rate}; }
};

double majorant(const GaussianMajorant& kern, double t, const std::vector<double>& x, double s,
                const std::vector<double>& y);
double majorant(const GaussianMajorant& kern, double t, double x, double s, double y);

enum class FrozenCoefficient { drift, diffusion };

// d = 1 chain-rule integral  int_{s'}^{s} d_w c(r, xi, w(r)) * D(r) dr  where
// D holds the values of the flow derivative at the flow nodes. An integrable
// power singularity of D at the first node (non-finite value there) is
// integrated exactly on the first interval.
double frozen_mu_moment_derivative(const CoefficientSet& coeffs, const ScalarFlow& flow,
                                   const std::vector<double>& flow_derivative, FrozenCoefficient which, double xi,
                                   double s_prime, double s);

// d = 1 cumulative moment integrals for a fixed freezing point; queries cost
// O(log M) with no coefficient evaluations.
class FrozenColumn {
public:
    FrozenColumn() = default;
    FrozenColumn(const CoefficientSet& coeffs, const ScalarFlow& flow, double xi);

    // Returns (m, a) over [s_prime, s].
    void moments(double s_prime, double s, double& m, double& a) const;
    double xi() const { return xi_; }

private:
    const ScalarFlow* flow_ = nullptr;
    double xi_ = 0.0;
    std::vector<double> fb_, fa_, cb_, ca_;
};

// Columns on a uniform lattice of freezing points, linearly interpolated in xi.
class FrozenLattice {
public:
    FrozenLattice() = default;
    FrozenLattice(const CoefficientSet& coeffs, const ScalarFlow& flow, double lo, double hi, double step);

    void moments(double xi, double s_prime, double s, double& m, double& a) const;
    double lo() const { return lo_; }
    double hi() const { return lo_ + step_ * (static_cast<double>(cols_.size()) - 1.0); }

private:
    const CoefficientSet* coeffs_ = nullptr;
    const ScalarFlow* flow_ = nullptr;
    double lo_ = 0.0, step_ = 1.0;
    std::vector<FrozenColumn> cols_;
};

}  // namespace mkv
