#include "mkv/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mkv/errors.hpp"
#include "mkv/rng.hpp"

namespace mkv {

void RegularityProfile::validate() const {
    auto in_unit = [](double e) { return e > 0.0 && e <= 1.0; };
    if (!in_unit(alpha1) || !in_unit(alpha2) || !in_unit(gamma_a) || !in_unit(gamma_a_prime))
        throw DomainError("regularity profile: exponents must lie in (0,1]");
    if (!(lambda > 1.0)) throw DomainError("regularity profile: lambda must exceed 1");
    for (double c : {c_b, c_b_prime, c_sigma, c_sigma_prime, holder_phi1, holder_phi2})
        if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("regularity profile: bounds must be finite and nonnegative");
}

std::vector<double> CoefficientSet::drift(double t, const std::vector<double>& x, double w) const {
    std::vector<double> out(dim);
    b(t, x.data(), w, out.data());
    return out;
}

std::vector<double> CoefficientSet::diffusion(double t, const std::vector<double>& x, double w) const {
    std::vector<double> out(dim * dim);
    sigma(t, x.data(), w, out.data());
    return out;
}

std::vector<double> CoefficientSet::diffusion_matrix(double t, const std::vector<double>& x, double w) const {
    std::vector<double> s = diffusion(t, x, w);
    std::vector<double> a(dim * dim, 0.0);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            double acc = 0.0;
            for (int k = 0; k < dim; ++k) acc += s[i * dim + k] * s[j * dim + k];
            a[i * dim + j] = acc;
        }
    return a;
}

namespace {
constexpr double kDiffStep = 1e-6;
}

double CoefficientSet::ddrift_dw1(double t, double x, double w) const {
    double out;
    if (db_dw) {
        db_dw(t, &x, w, &out);
        return out;
    }
    return (drift1(t, x, w + kDiffStep) - drift1(t, x, w - kDiffStep)) / (2.0 * kDiffStep);
}

double CoefficientSet::da_dw1(double t, double x, double w) const {
    double s;
    sigma(t, &x, w, &s);
    double ds;
    if (dsigma_dw) {
        dsigma_dw(t, &x, w, &ds);
    } else {
        double sp, sm;
        sigma(t, &x, w + kDiffStep, &sp);
        sigma(t, &x, w - kDiffStep, &sm);
        ds = (sp - sm) / (2.0 * kDiffStep);
    }
    return 2.0 * s * ds;
}

namespace {

constexpr double kClip = 1e6;
constexpr double kUnitSlack = 1e-6;

void zero_drift(double, const double*, double, double* out, int d) { std::fill(out, out + d, 0.0); }

void identity(double* out, int d) {
    std::fill(out, out + d * d, 0.0);
    for (int i = 0; i < d; ++i) out[i * d + i] = 1.0;
}

double tanh_first(const double* x) { return std::tanh(x[0]); }

CoefficientSet gaussian(int d) {
    CoefficientSet c;
    c.name = "gaussian";
    c.dim = d;
    c.b = [d](double t, const double* x, double w, double* out) { zero_drift(t, x, w, out, d); };
    c.sigma = [d](double, const double*, double, double* out) { identity(out, d); };
    c.db_dw = c.b;
    c.dsigma_dw = [d](double, const double*, double, double* out) { std::fill(out, out + d * d, 0.0); };
    c.phi1 = tanh_first;
    c.phi2 = tanh_first;
    RegularityProfile& p = c.profile;
    p.lambda = 1.0 + kUnitSlack;
    p.c_b = p.c_b_prime = p.c_sigma = p.c_sigma_prime = 0.0;
    p.sup_phi1 = p.sup_phi2 = 1.0;
    return c;
}

CoefficientSet mean_attract(int d) {
    CoefficientSet c = gaussian(d);
    c.name = "mean-attract";
    c.b = [d](double, const double*, double w, double* out) {
        std::fill(out, out + d, 0.0);
        out[0] = w;
    };
    c.db_dw = [d](double, const double*, double, double* out) {
        std::fill(out, out + d, 0.0);
        out[0] = 1.0;
    };
    c.phi1 = [](const double* x) { return std::clamp(x[0], -kClip, kClip); };
    c.profile.c_b = kClip;
    c.profile.c_b_prime = 1.0;
    c.profile.sup_phi1 = kClip;
    return c;
}

CoefficientSet holder_drift(int d) {
    CoefficientSet c = gaussian(d);
    c.name = "holder-drift";
    c.b = [d](double, const double*, double w, double* out) {
        std::fill(out, out + d, 0.0);
        out[0] = std::tanh(w);
    };
    c.db_dw = [d](double, const double*, double w, double* out) {
        std::fill(out, out + d, 0.0);
        double ch = std::cosh(w);
        out[0] = 1.0 / (ch * ch);
    };
    c.phi1 = [d](const double* x) {
        double r2 = 0.0;
        for (int i = 0; i < d; ++i) r2 += x[i] * x[i];
        return std::sqrt(std::min(std::sqrt(r2), kClip));
    };
    c.profile.alpha1 = 0.5;
    c.profile.c_b = 1.0;
    c.profile.c_b_prime = 1.0;
    c.profile.sup_phi1 = std::sqrt(kClip);
    return c;
}

CoefficientSet holder_diffusion(double gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("holder-diffusion: gamma_a must lie in (0,1]");
    CoefficientSet c;
    c.name = "holder-diffusion";
    c.dim = 1;
    c.b = [](double, const double*, double, double* out) { out[0] = 0.0; };
    c.db_dw = c.b;
    c.sigma = [gamma](double, const double* x, double w, double* out) {
        double s = std::pow(std::abs(std::sin(x[0])), gamma);
        out[0] = std::sqrt(1.0 + 0.25 * s * (1.0 + std::tanh(w)));
    };
    c.dsigma_dw = [gamma](double, const double* x, double w, double* out) {
        double s = std::pow(std::abs(std::sin(x[0])), gamma);
        double ch = std::cosh(w);
        double sig = std::sqrt(1.0 + 0.25 * s * (1.0 + std::tanh(w)));
        out[0] = 0.25 * s / (ch * ch) / (2.0 * sig);
    };
    c.phi1 = [](const double* x) { return std::sin(x[0]); };
    c.phi2 = [](const double* x) { return std::cos(x[0]); };
    RegularityProfile& p = c.profile;
    p.gamma_a = gamma;
    p.gamma_a_prime = gamma;
    p.lambda = 1.5;
    p.c_b = p.c_b_prime = 0.0;
    p.c_sigma = 0.25;
    p.c_sigma_prime = 0.125;
    p.sup_phi1 = p.sup_phi2 = 1.0;
    return c;
}

}  // namespace

const std::vector<std::string>& registry_names() {
    static const std::vector<std::string> names{"gaussian", "mean-attract", "holder-drift", "holder-diffusion"};
    return names;
}

CoefficientSet builtin_problem(const std::string& name, const ProblemOptions& opts) {
    if (opts.dim < 1) throw DomainError("builtin_problem: dim must be positive");
    if (name == "gaussian") return gaussian(opts.dim);
    if (name == "mean-attract") return mean_attract(opts.dim);
    if (name == "holder-drift") return holder_drift(opts.dim);
    if (name == "holder-diffusion") {
        if (opts.dim != 1) throw UnsupportedInput("holder-diffusion is one-dimensional");
        return holder_diffusion(opts.gamma_a);
    }
    throw RegistryError("unknown problem '" + name + "'");
}

const AssumptionCheck& AssumptionReport::check(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw std::out_of_range("no assumption check named " + name);
}

AssumptionReport validate_assumptions(const CoefficientSet& coeffs, int n_samples, std::uint64_t seed) {
    if (n_samples < 100) throw DomainError("validate_assumptions: n_samples must be at least 100");
    const int d = coeffs.dim;
    const RegularityProfile& prof = coeffs.profile;
    NoiseStream rng(seed);

    std::vector<double> x(d), xp(d), dir(d), bv(d), bp(d), bm(d);
    std::vector<double> s(d * d), sp(d * d), sm(d * d);
    Eigen::MatrixXd a(d, d);

    double sup_b = 0.0, sup_db = 0.0, sup_ds = 0.0, q_sigma = 0.0, q_phi1 = 0.0, q_phi2 = 0.0;
    double emin = std::numeric_limits<double>::infinity();
    double emax = 0.0;
    bool finite = true;

    auto frob = [](const std::vector<double>& u, const std::vector<double>& v) {
        double acc = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) acc += (u[i] - v[i]) * (u[i] - v[i]);
        return std::sqrt(acc);
    };

    for (int n = 0; n < n_samples; ++n) {
        std::uint64_t id = static_cast<std::uint64_t>(n);
        double t = rng.uniform(0, id);
        double w = -10.0 + 20.0 * rng.uniform(1, id);
        double h = std::pow(10.0, -6.0 + 7.0 * rng.uniform(2, id));
        rng.normals(id, 1u << 20, d, dir.data());
        double norm = 0.0;
        for (double v : dir) norm += v * v;
        norm = std::sqrt(norm);
        for (int i = 0; i < d; ++i) {
            double mag = std::pow(10.0, -3.0 + 6.0 * rng.uniform(3 + i % 4, id * 8 + i));
            double sign = rng.uniform(7, id * 8 + i) < 0.5 ? -1.0 : 1.0;
            x[i] = sign * mag;
            xp[i] = x[i] + h * (norm > 0.0 ? dir[i] / norm : 1.0);
        }
        double step = 0.0;
        for (int i = 0; i < d; ++i) step += (xp[i] - x[i]) * (xp[i] - x[i]);
        step = std::sqrt(step);

        coeffs.b(t, x.data(), w, bv.data());
        double nb = 0.0;
        for (double v : bv) nb += v * v;
        sup_b = std::max(sup_b, std::sqrt(nb));

        if (coeffs.db_dw) {
            coeffs.db_dw(t, x.data(), w, bp.data());
            std::fill(bm.begin(), bm.end(), 0.0);
            sup_db = std::max(sup_db, frob(bp, bm));
        } else {
            coeffs.b(t, x.data(), w + kDiffStep, bp.data());
            coeffs.b(t, x.data(), w - kDiffStep, bm.data());
            sup_db = std::max(sup_db, frob(bp, bm) / (2.0 * kDiffStep));
        }

        coeffs.sigma(t, x.data(), w, s.data());
        coeffs.sigma(t, xp.data(), w, sp.data());
        if (step > 0.0) q_sigma = std::max(q_sigma, frob(s, sp) / std::pow(step, prof.gamma_a));
        if (coeffs.dsigma_dw) {
            coeffs.dsigma_dw(t, x.data(), w, sp.data());
            std::fill(sm.begin(), sm.end(), 0.0);
            sup_ds = std::max(sup_ds, frob(sp, sm));
        } else {
            coeffs.sigma(t, x.data(), w + kDiffStep, sp.data());
            coeffs.sigma(t, x.data(), w - kDiffStep, sm.data());
            sup_ds = std::max(sup_ds, frob(sp, sm) / (2.0 * kDiffStep));
        }

        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double acc = 0.0;
                for (int k = 0; k < d; ++k) acc += s[i * d + k] * s[j * d + k];
                a(i, j) = acc;
            }
        if (!a.allFinite()) {
            finite = false;
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
            emin = std::min(emin, es.eigenvalues().minCoeff());
            emax = std::max(emax, es.eigenvalues().maxCoeff());
        }

        double f1 = coeffs.phi1(x.data()), f1p = coeffs.phi1(xp.data());
        double f2 = coeffs.phi2(x.data()), f2p = coeffs.phi2(xp.data());
        if (step > 0.0) {
            q_phi1 = std::max(q_phi1, std::abs(f1 - f1p) / std::pow(step, prof.alpha1));
            q_phi2 = std::max(q_phi2, std::abs(f2 - f2p) / std::pow(step, prof.alpha2));
        }
        for (double v : {nb, sup_db, sup_ds, q_sigma, f1, f1p, f2, f2p})
            if (!std::isfinite(v)) finite = false;
    }

    AssumptionReport rep;
    rep.n_samples = n_samples;
    rep.ellipticity_min = emin;
    rep.ellipticity_max = emax;
    auto upper = [&](const std::string& name, double measured, double declared) {
        rep.checks.push_back({name, measured, declared, measured <= declared * (1.0 + kAssumptionSlack)});
    };
    rep.checks.push_back({"finite", finite ? 1.0 : 0.0, 1.0, finite});
    rep.checks.push_back({"ellipticity_lower", emin, 1.0 / prof.lambda,
                          emin * (1.0 + kAssumptionSlack) >= 1.0 / prof.lambda});
    upper("ellipticity_upper", emax, prof.lambda);
    upper("c_b", sup_b, prof.c_b);
    upper("c_b_prime", sup_db, prof.c_b_prime);
    upper("c_sigma", q_sigma, prof.c_sigma);
    upper("c_sigma_prime", sup_ds, prof.c_sigma_prime);
    upper("holder_phi1", q_phi1, prof.holder_phi1);
    upper("holder_phi2", q_phi2, prof.holder_phi2);
    rep.pass = std::all_of(rep.checks.begin(), rep.checks.end(), [](const AssumptionCheck& c) { return c.pass; });
    return rep;
}

}  // namespace mkv
