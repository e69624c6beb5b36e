#include "mkv/frozen.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mkv/errors.hpp"

namespace mkv {

namespace {

void check_window(const ScalarFlow& flow, double s_prime, double s) {
    if (!(s > s_prime)) throw DomainError("frozen moments: need s_prime < s");
    if (!flow.covers(s_prime, s)) throw CoverageError("frozen moments: flow grid does not cover [s_prime, s]");
}

// Integral over [lo, hi] of the piecewise-linear interpolant of f through the
// nodes, for scalar nodal values; the partial end intervals are integrated
// exactly and interior intervals by the trapezoid rule.
template <class Nodal>
double interp_integral(const std::vector<double>& times, double lo, double hi, Nodal&& f) {
    const std::size_t last = times.size() - 2;
    auto find = [&](double r) {
        auto it = std::upper_bound(times.begin(), times.end(), r);
        std::size_t n = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
        return std::min(n, last);
    };
    auto value = [&](std::size_t n, double r) {
        double th = (r - times[n]) / (times[n + 1] - times[n]);
        return f(n) + th * (f(n + 1) - f(n));
    };
    std::size_t a = find(lo), b = find(hi);
    if (hi == times[b] && b > a) --b;
    if (a == b) return 0.5 * (value(a, lo) + value(a, hi)) * (hi - lo);
    double acc = 0.5 * (value(a, lo) + f(a + 1)) * (times[a + 1] - lo);
    for (std::size_t n = a + 1; n < b; ++n) acc += 0.5 * (f(n) + f(n + 1)) * (times[n + 1] - times[n]);
    acc += 0.5 * (f(b) + value(b, hi)) * (hi - times[b]);
    return acc;
}

}  // namespace

FrozenParams frozen_moments(const CoefficientSet& coeffs, const ScalarFlow& flow, const std::vector<double>& xi,
                            double s_prime, double s) {
    check_window(flow, s_prime, s);
    const int d = coeffs.dim;
    if (static_cast<int>(xi.size()) != d) throw DomainError("frozen moments: xi has the wrong dimension");
    const std::size_t nn = flow.times.size();
    std::vector<double> bn(nn * d), an(nn * d * d);
    std::vector<double> sv(d * d);
    for (std::size_t n = 0; n < nn; ++n) {
        const double r = flow.times[n];
        coeffs.b(r, xi.data(), flow.w1[n], bn.data() + n * d);
        coeffs.sigma(r, xi.data(), flow.w2[n], sv.data());
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double acc = 0.0;
                for (int k = 0; k < d; ++k) acc += sv[i * d + k] * sv[j * d + k];
                an[(n * d + i) * d + j] = acc;
            }
    }
    FrozenParams p;
    p.dim = d;
    p.s_prime = s_prime;
    p.s = s;
    p.m.resize(d);
    p.a.resize(d * d);
    for (int i = 0; i < d; ++i)
        p.m[i] = interp_integral(flow.times, s_prime, s, [&](std::size_t n) { return bn[n * d + i]; });
    for (int q = 0; q < d * d; ++q)
        p.a[q] = interp_integral(flow.times, s_prime, s, [&](std::size_t n) { return an[n * d * d + q]; });
    return p;
}

double frozen_density(const FrozenParams& params, const std::vector<double>& y_prime, const std::vector<double>& y) {
    const int d = params.dim;
    if (static_cast<int>(y.size()) != d || static_cast<int>(y_prime.size()) != d)
        throw DomainError("frozen_density: point dimension mismatch");
    if (d == 1) {
        if (!(params.a[0] > 0.0) || !std::isfinite(params.a[0])) throw MatrixError("frozen_density: a is not positive");
        return gauss1(y[0] - y_prime[0] - params.m[0], params.a[0]);
    }
    Eigen::Map<const Eigen::MatrixXd> a(params.a.data(), d, d);
    if (!a.isApprox(a.transpose(), 1e-12)) throw MatrixError("frozen_density: a is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw MatrixError("frozen_density: a is not positive definite");
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z[i] = y[i] - y_prime[i] - params.m[i];
    Eigen::VectorXd v = llt.matrixL().solve(z);
    double logdet = 0.0;
    for (int i = 0; i < d; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    return std::exp(-0.5 * v.squaredNorm() - 0.5 * logdet - 0.5 * d * std::log(2.0 * std::numbers::pi));
}

namespace {
void require_1d(const FrozenParams& p) {
    if (p.dim != 1) throw UnsupportedInput("frozen density derivatives are one-dimensional");
    if (!(p.a[0] > 0.0)) throw MatrixError("frozen density: a is not positive");
}
}  // namespace

double frozen_density_dx(const FrozenParams& params, double y_prime, double y) {
    require_1d(params);
    const double a = params.a[0];
    const double z = y - y_prime - params.m[0];
    return z / a * gauss1(z, a);
}

double frozen_density_dx2(const FrozenParams& params, double y_prime, double y) {
    require_1d(params);
    const double a = params.a[0];
    const double z = y - y_prime - params.m[0];
    return (z * z / (a * a) - 1.0 / a) * gauss1(z, a);
}

double majorant(const GaussianMajorant& kern, double t, const std::vector<double>& x, double s,
                const std::vector<double>& y) {
    if (!(s > t)) throw DomainError("majorant: need s > t");
    if (x.size() != y.size()) throw DomainError("majorant: point dimension mismatch");
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) r2 += (y[i] - x[i]) * (y[i] - x[i]);
    const double tau = s - t;
    return kern.scale * std::pow(tau, -0.5 * static_cast<double>(x.size())) * std::exp(-kern.rate * r2 / tau);
}

double majorant(const GaussianMajorant& kern, double t, double x, double s, double y) {
    if (!(s > t)) throw DomainError("majorant: need s > t");
    const double tau = s - t;
    return kern.scale / std::sqrt(tau) * std::exp(-kern.rate * (y - x) * (y - x) / tau);
}

double frozen_mu_moment_derivative(const CoefficientSet& coeffs, const ScalarFlow& flow,
                                   const std::vector<double>& flow_derivative, FrozenCoefficient which, double xi,
                                   double s_prime, double s) {
    if (coeffs.dim != 1) throw UnsupportedInput("frozen_mu_moment_derivative is one-dimensional");
    if (flow_derivative.size() != flow.times.size())
        throw DomainError("frozen_mu_moment_derivative: derivative values do not match the flow grid");
    check_window(flow, s_prime, s);
    const std::size_t nn = flow.times.size();
    std::vector<double> g(nn);
    for (std::size_t n = 0; n < nn; ++n) {
        double c = which == FrozenCoefficient::drift ? coeffs.ddrift_dw1(flow.times[n], xi, flow.w1[n])
                                                     : coeffs.da_dw1(flow.times[n], xi, flow.w2[n]);
        g[n] = c * flow_derivative[n];
    }
    if (std::isfinite(g[0]) || nn < 3) {
        for (double v : g)
            if (!std::isfinite(v)) throw EvaluationError("frozen_mu_moment_derivative: non-finite integrand");
        return interp_integral(flow.times, s_prime, s, [&](std::size_t n) { return g[n]; });
    }

    // Singular first node: D(r) ~ A (r - r0)^{-p} on [r0, r1], with p read off
    // the next two nodes.
    const double r0 = flow.times[0], r1 = flow.times[1], r2 = flow.times[2];
    const double d1 = flow_derivative[1], d2 = flow_derivative[2];
    if (!(d1 != 0.0 && d2 / d1 > 0.0)) throw EvaluationError("frozen_mu_moment_derivative: cannot resolve singular start");
    const double p = -std::log(d2 / d1) / std::log((r2 - r0) / (r1 - r0));
    if (!(p < 1.0)) throw EvaluationError("frozen_mu_moment_derivative: non-integrable singularity");
    const double amp = d1 * std::pow(r1 - r0, p);
    double c0 = which == FrozenCoefficient::drift ? coeffs.ddrift_dw1(r0, xi, flow.w1[0])
                                                  : coeffs.da_dw1(r0, xi, flow.w2[0]);
    double c1 = which == FrozenCoefficient::drift ? coeffs.ddrift_dw1(r1, xi, flow.w1[1])
                                                  : coeffs.da_dw1(r1, xi, flow.w2[1]);
    // Coefficient factor taken linear on the first interval.
    auto head = [&](double lo, double hi) {
        auto prim = [&](double r) {
            double u = r - r0;
            return amp * (c0 * std::pow(u, 1.0 - p) / (1.0 - p) +
                          (c1 - c0) / (r1 - r0) * std::pow(u, 2.0 - p) / (2.0 - p));
        };
        return prim(hi) - prim(lo);
    };
    if (s <= r1) return head(s_prime, s);
    double acc = s_prime < r1 ? head(s_prime, r1) : 0.0;
    double lo = std::max(s_prime, r1);
    g[0] = 0.0;  // never read: the remaining range starts at or after r1
    acc += interp_integral(flow.times, lo, s, [&](std::size_t n) { return g[n]; });
    return acc;
}

FrozenColumn::FrozenColumn(const CoefficientSet& coeffs, const ScalarFlow& flow, double xi) : flow_(&flow), xi_(xi) {
    const std::size_t nn = flow.times.size();
    fb_.resize(nn);
    fa_.resize(nn);
    cb_.assign(nn, 0.0);
    ca_.assign(nn, 0.0);
    for (std::size_t n = 0; n < nn; ++n) {
        fb_[n] = coeffs.drift1(flow.times[n], xi, flow.w1[n]);
        fa_[n] = coeffs.a1(flow.times[n], xi, flow.w2[n]);
    }
    for (std::size_t n = 1; n < nn; ++n) {
        const double h = flow.times[n] - flow.times[n - 1];
        cb_[n] = cb_[n - 1] + 0.5 * (fb_[n - 1] + fb_[n]) * h;
        ca_[n] = ca_[n - 1] + 0.5 * (fa_[n - 1] + fa_[n]) * h;
    }
}

void FrozenColumn::moments(double s_prime, double s, double& m, double& a) const {
    const std::vector<double>& t = flow_->times;
    const std::size_t last = t.size() - 2;
    auto find = [&](double r) {
        auto it = std::upper_bound(t.begin(), t.end(), r);
        std::size_t n = it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
        return std::min(n, last);
    };
    std::size_t i = find(s_prime), j = find(s);
    if (s == t[j] && j > i) --j;
    auto lerp = [&](const std::vector<double>& f, std::size_t n, double r) {
        return f[n] + (r - t[n]) / (t[n + 1] - t[n]) * (f[n + 1] - f[n]);
    };
    if (i == j) {
        const double h = s - s_prime;
        m = 0.5 * (lerp(fb_, i, s_prime) + lerp(fb_, i, s)) * h;
        a = 0.5 * (lerp(fa_, i, s_prime) + lerp(fa_, i, s)) * h;
        return;
    }
    const double h0 = t[i + 1] - s_prime, h1 = s - t[j];
    m = 0.5 * (lerp(fb_, i, s_prime) + fb_[i + 1]) * h0 + (cb_[j] - cb_[i + 1]) + 0.5 * (fb_[j] + lerp(fb_, j, s)) * h1;
    a = 0.5 * (lerp(fa_, i, s_prime) + fa_[i + 1]) * h0 + (ca_[j] - ca_[i + 1]) + 0.5 * (fa_[j] + lerp(fa_, j, s)) * h1;
}

FrozenLattice::FrozenLattice(const CoefficientSet& coeffs, const ScalarFlow& flow, double lo, double hi, double step)
    : coeffs_(&coeffs), flow_(&flow), lo_(lo), step_(step) {
    if (!(hi > lo) || !(step > 0.0)) throw DomainError("frozen lattice: bad range");
    const std::size_t n = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
    cols_.reserve(n);
    for (std::size_t l = 0; l < n; ++l) cols_.emplace_back(coeffs, flow, lo + step * static_cast<double>(l));
}

void FrozenLattice::moments(double xi, double s_prime, double s, double& m, double& a) const {
    const double pos = (xi - lo_) / step_;
    if (pos < 0.0 || pos > static_cast<double>(cols_.size() - 1)) {
        FrozenColumn(*coeffs_, *flow_, xi).moments(s_prime, s, m, a);
        return;
    }
    std::size_t l = std::min(static_cast<std::size_t>(pos), cols_.size() - 2);
    const double th = pos - static_cast<double>(l);
    double m0, a0, m1, a1;
    cols_[l].moments(s_prime, s, m0, a0);
    if (th == 0.0) {
        m = m0;
        a = a0;
        return;
    }
    cols_[l + 1].moments(s_prime, s, m1, a1);
    m = m0 + th * (m1 - m0);
    a = a0 + th * (a1 - a0);
}

}  // namespace mkv
