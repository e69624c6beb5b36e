#include "mkv/parametrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "mkv/csv.hpp"
#include "mkv/errors.hpp"
#include "mkv/special.hpp"

namespace mkv {

namespace {

void require_1d(const CoefficientSet& coeffs) {
    if (coeffs.dim != 1) throw UnsupportedInput("parametrix: only d = 1 is supported");
}

// db, da are frozen minus actual coefficients. The kernel is the true minus the
// frozen generator applied to the frozen density, hence the overall sign.
double h_formula(double db, double da, double z, double a) {
    if (db == 0.0 && da == 0.0) return 0.0;
    const double g = gauss1(z, a);
    return -(db * (z / a) * g + 0.5 * da * (z * z / (a * a) - 1.0 / a) * g);
}

}  // namespace

double kernel_H(const CoefficientSet& coeffs, const ScalarFlow& flow, double s_prime, double y_prime, double s,
                double y) {
    require_1d(coeffs);
    if (!(s > s_prime)) throw DomainError("kernel_H: need s_prime < s");
    if (!flow.covers(s_prime, s)) throw CoverageError("kernel_H: flow grid does not cover [s_prime, s]");
    double m, a;
    FrozenColumn(coeffs, flow, y).moments(s_prime, s, m, a);
    const double w1 = flow.w1_at(s_prime), w2 = flow.w2_at(s_prime);
    const double db = coeffs.drift1(s_prime, y, w1) - coeffs.drift1(s_prime, y_prime, w1);
    const double da = coeffs.a1(s_prime, y, w2) - coeffs.a1(s_prime, y_prime, w2);
    return h_formula(db, da, y - y_prime - m, a);
}

double ParametrixConstants::value(int k) const { return std::exp(log_value(k)); }

ParametrixConstants constants(double C, double gamma, int k_max) {
    if (!(C > 0.0)) throw DomainError("constants: C must be positive");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("constants: gamma must lie in (0,1]");
    if (k_max < 1) throw DomainError("constants: k_max must be at least 1");
    ParametrixConstants pc;
    pc.C = C;
    pc.gamma = gamma;
    pc.k_max = k_max;
    pc.log_values.resize(k_max);
    pc.log_values[0] = std::log(C);
    for (int k = 1; k < k_max; ++k)
        pc.log_values[k] = pc.log_values[k - 1] + std::log(C) + log_beta(k * gamma / 2.0, gamma / 2.0);
    return pc;
}

int asymptotic_threshold(double gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("asymptotic_threshold: gamma must lie in (0,1]");
    return static_cast<int>(std::ceil(2.0 / gamma - 1e-12));
}

double log_constants_asymptotic(double C, double gamma, int k) {
    if (!(C > 0.0)) throw DomainError("constants_asymptotic: C must be positive");
    const int K = asymptotic_threshold(gamma);
    if (k < K) throw DomainError("constants_asymptotic: k is below the threshold ceil(2/gamma)");
    // log C(K) = -K log 4 + (gamma/2) log K! + sum_{l=1}^{K-1} log beta(l gamma/2, gamma/2)
    double log_cK = -K * std::log(4.0) + 0.5 * gamma * std::lgamma(K + 1.0);
    for (int l = 1; l < K; ++l) log_cK += log_beta(l * gamma / 2.0, gamma / 2.0);
    return log_cK + k * (std::log(C) + std::log(4.0) - std::log(gamma)) - 0.5 * gamma * std::lgamma(k + 1.0);
}

double constants_asymptotic(double C, double gamma, int k) { return std::exp(log_constants_asymptotic(C, gamma, k)); }

void graded_rule(double a, double b, double q, int n, std::vector<double>& nodes, std::vector<double>& weights) {
    GaussRule g = gauss_legendre_unit(n);
    nodes.resize(n);
    weights.resize(n);
    const double len = b - a;
    for (int j = 0; j < n; ++j) {
        const double v = g.nodes[j];
        const double p = std::pow(v, q), r = std::pow(1.0 - v, q);
        const double den = p + r;
        nodes[j] = a + len * p / den;
        const double dphi = q * std::pow(v, q - 1.0) * std::pow(1.0 - v, q - 1.0) / (den * den);
        weights[j] = len * dphi * g.weights[j];
    }
}

SpaceTimeGrid SpaceTimeGrid::build(const CoefficientSet& coeffs, const ScalarFlow& flow, double t0, double x0,
                                   double s, const ParametrixOptions& opts) {
    require_1d(coeffs);
    if (!(s > t0)) throw DomainError("space-time grid: need s > t0");
    if (!flow.covers(t0, s)) throw CoverageError("space-time grid: flow does not cover [t0, s]");
    if (opts.slices < 2 || opts.table_nodes_per_sigma < 1)
        throw ResolutionError("space-time grid: need at least two slices and one node per standard deviation");
    // Mass outside +-L standard deviations must stay below 1e-10.
    if (std::erfc(opts.extent / std::sqrt(2.0)) > 1e-10)
        throw ResolutionError("space-time grid: extent leaves a Gaussian tail above 1e-10");

    SpaceTimeGrid g;
    g.t0 = t0;
    g.x0 = x0;
    g.s = s;
    g.lambda = coeffs.profile.lambda;
    g.gamma = coeffs.profile.gamma_a;
    g.extent = opts.extent;
    const double q = 2.0 / g.gamma;
    FrozenColumn centre(coeffs, flow, x0);
    for (int i = 1; i <= opts.slices; ++i) {
        SliceGrid sl;
        sl.time = i == opts.slices ? s : t0 + (s - t0) * std::pow(static_cast<double>(i) / opts.slices, q);
        const double tau = sl.time - t0;
        double m, a;
        centre.moments(t0, sl.time, m, a);
        const double half = opts.extent * std::sqrt(g.lambda * tau);
        sl.step = std::sqrt(tau / g.lambda) / opts.table_nodes_per_sigma;
        const int n_half = static_cast<int>(std::ceil(half / sl.step));
        sl.n = 2 * n_half + 1;
        sl.lo = x0 + m - n_half * sl.step;
        g.slices.push_back(sl);
    }
    return g;
}

std::size_t SpaceTimeGrid::node_count() const {
    std::size_t n = 0;
    for (const auto& sl : slices) n += static_cast<std::size_t>(sl.n);
    return n;
}

KernelSampler::KernelSampler(const CoefficientSet& coeffs, const ScalarFlow& flow, const ParametrixOptions& opts)
    : coeffs_(&coeffs), flow_(&flow), opts_(opts) {
    require_1d(coeffs);
    flow.validate();
}

double KernelSampler::H(double s_prime, double y_prime, double s, double y) const {
    return kernel_H(*coeffs_, *flow_, s_prime, y_prime, s, y);
}

bool KernelTable::is_zero() const {
    for (const auto& row : values)
        for (double v : row)
            if (v != 0.0) return false;
    return true;
}

void KernelTable::write_csv(std::ostream& os) const {
    os << "k,s_prime,y_prime,s,y,value\n";
    for (std::size_t i = 0; i < grid.slices.size(); ++i) {
        const SliceGrid& sl = grid.slices[i];
        for (int j = 0; j < sl.n; ++j)
            os << k << ',' << fmt_double(grid.t0) << ',' << fmt_double(grid.x0) << ',' << fmt_double(sl.time) << ','
               << fmt_double(sl.node(j)) << ',' << fmt_double(values[i][j]) << '\n';
    }
}

namespace {

struct Support {
    double lo = 0.0, hi = -1.0, sigma_min = 0.0;
    bool empty() const { return !(hi >= lo); }
};

// A layer S(rho, u) that is integrated against H(rho, u; r, y).
class Source {
public:
    virtual ~Source() = default;
    virtual Support bind(double rho) = 0;
    virtual double eval(double u) const = 0;
};

// Closed-form layers rooted at (t0, x0): the frozen density p~^u(t0,x0; rho,u)
// or the kernel H(t0,x0; rho,u), both frozen at the moving point u.
class OriginSource : public Source {
public:
    OriginSource(const CoefficientSet& c, const ScalarFlow& f, const FrozenLattice& lattice, double t0, double x0,
                 double extent, bool kernel)
        : c_(c), lattice_(lattice), centre_(c, f, x0), t0_(t0), x0_(x0), extent_(extent), kernel_(kernel) {
        w1_ = f.w1_at(t0);
        w2_ = f.w2_at(t0);
        b0_ = c.drift1(t0, x0, w1_);
        a0_ = c.a1(t0, x0, w2_);
        lambda_ = c.profile.lambda;
    }

    Support bind(double rho) override {
        rho_ = rho;
        const double tau = rho - t0_;
        double m, a;
        centre_.moments(t0_, rho, m, a);
        const double half = extent_ * std::sqrt(lambda_ * tau);
        return {x0_ + m - half, x0_ + m + half, std::sqrt(tau / lambda_)};
    }

    double eval(double u) const override {
        double m, a;
        lattice_.moments(u, t0_, rho_, m, a);
        const double z = u - x0_ - m;
        if (!kernel_) return gauss1(z, a);
        const double db = c_.drift1(t0_, u, w1_) - b0_;
        const double da = c_.a1(t0_, u, w2_) - a0_;
        return h_formula(db, da, z, a);
    }

private:
    const CoefficientSet& c_;
    const FrozenLattice& lattice_;
    FrozenColumn centre_;
    double t0_, x0_, extent_;
    bool kernel_;
    double w1_ = 0.0, w2_ = 0.0, b0_ = 0.0, a0_ = 0.0, lambda_ = 1.0, rho_ = 0.0;
};

double cubic_at(const SliceGrid& sl, const std::vector<double>& v, double u) {
    const double pos = (u - sl.lo) / sl.step;
    if (!(pos >= 0.0) || pos > sl.n - 1) return 0.0;
    const int j = std::min(static_cast<int>(pos), sl.n - 2);
    const double t = pos - j;
    auto at = [&](int i) { return i < 0 || i >= sl.n ? 0.0 : v[i]; };
    const double f0 = at(j - 1), f1 = at(j), f2 = at(j + 1), f3 = at(j + 2);
    return f1 + 0.5 * t * (f2 - f0 + t * (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3 + t * (3.0 * (f1 - f2) + f3 - f0)));
}

// A tabulated layer, linear in the slice coordinate (i/M) between slices and
// cubic in space. Below the first slice the layer is taken as zero.
class TableSource : public Source {
public:
    explicit TableSource(const KernelTable& t) : t_(t) { q_ = 2.0 / t.grid.gamma; }

    Support bind(double rho) override {
        const SpaceTimeGrid& g = t_.grid;
        const int M = static_cast<int>(g.slices.size());
        const double theta = std::pow(std::max(rho - g.t0, 0.0) / (g.s - g.t0), 1.0 / q_);
        const double pos = theta * M;
        int i = static_cast<int>(std::floor(pos));
        if (i < 1) {
            active_ = false;
            return {};
        }
        active_ = true;
        if (i >= M) {
            i0_ = i1_ = M - 1;
            frac_ = 0.0;
        } else {
            i0_ = i - 1;
            i1_ = i;
            frac_ = pos - i;
        }
        const SliceGrid &a = g.slices[i0_], &b = g.slices[i1_];
        return {std::min(a.lo, b.lo), std::max(a.hi(), b.hi()), std::sqrt((rho - g.t0) / g.lambda)};
    }

    double eval(double u) const override {
        if (!active_) return 0.0;
        const double va = cubic_at(t_.grid.slices[i0_], t_.values[i0_], u);
        if (frac_ == 0.0) return va;
        const double vb = cubic_at(t_.grid.slices[i1_], t_.values[i1_], u);
        return va + frac_ * (vb - va);
    }

private:
    const KernelTable& t_;
    double q_ = 2.0;
    bool active_ = false;
    int i0_ = 0, i1_ = 0;
    double frac_ = 0.0;
};

// out[j] = int_{t0}^{r} int S(rho,u) H(rho,u; r, ys[j]) du drho.
void convolve(const KernelSampler& K, Source& src, double t0, double r, const std::vector<double>& ys,
              std::vector<double>& out) {
    const CoefficientSet& c = K.coeffs();
    const ScalarFlow& flow = K.flow();
    const ParametrixOptions& o = K.options();
    const double lambda = K.lambda();
    const double L = o.extent;
    const double kappa = o.quad_nodes_per_sigma;
    const std::size_t ny = ys.size();
    out.assign(ny, 0.0);

    std::vector<FrozenColumn> cols;
    cols.reserve(ny);
    for (double y : ys) cols.emplace_back(c, flow, y);

    std::vector<double> rho, W;
    graded_rule(t0, r, 2.0 / K.gamma(), o.time_nodes, rho, W);

    std::vector<double> mH(ny), aH(ny), by(ny), ay(ny);
    std::vector<double> un, sn, bn, an;
    for (std::size_t q = 0; q < rho.size(); ++q) {
        const double p = rho[q];
        // Graded nodes can round onto an endpoint when t0 is large relative to r - t0.
        if (!(p > t0 && p < r)) continue;
        const Support sup = src.bind(p);
        if (sup.empty() || !(sup.sigma_min > 0.0)) continue;
        const double tau = r - p;
        const double w1 = flow.w1_at(p), w2 = flow.w2_at(p);
        for (std::size_t j = 0; j < ny; ++j) {
            cols[j].moments(p, r, mH[j], aH[j]);
            by[j] = c.drift1(p, ys[j], w1);
            ay[j] = c.a1(p, ys[j], w2);
        }

        if (sup.sigma_min <= std::sqrt(tau / lambda)) {
            // Source narrower than the kernel: one node set shared by all targets.
            const double h = sup.sigma_min / kappa;
            const int n = static_cast<int>(std::floor((sup.hi - sup.lo) / h)) + 1;
            un.resize(n);
            sn.resize(n);
            bn.resize(n);
            an.resize(n);
            for (int i = 0; i < n; ++i) {
                const double u = sup.lo + i * h;
                un[i] = u;
                sn[i] = src.eval(u);
                bn[i] = c.drift1(p, u, w1);
                an[i] = c.a1(p, u, w2);
            }
            for (std::size_t j = 0; j < ny; ++j) {
                const double centre = ys[j] - mH[j];
                const double half = L * std::sqrt(aH[j]);
                const int i0 = std::max(0, static_cast<int>(std::ceil((centre - half - sup.lo) / h)));
                const int i1 = std::min(n - 1, static_cast<int>(std::floor((centre + half - sup.lo) / h)));
                double acc = 0.0;
                for (int i = i0; i <= i1; ++i) {
                    if (sn[i] == 0.0) continue;
                    acc += sn[i] * h_formula(by[j] - bn[i], ay[j] - an[i], ys[j] - un[i] - mH[j], aH[j]);
                }
                out[j] += W[q] * h * acc;
            }
        } else {
            for (std::size_t j = 0; j < ny; ++j) {
                const double sd = std::sqrt(aH[j]);
                const double h = std::min(sd, sup.sigma_min) / kappa;
                const double centre = ys[j] - mH[j];
                const double lo = std::max(centre - L * sd, sup.lo);
                const double hi = std::min(centre + L * sd, sup.hi);
                if (!(hi >= lo)) continue;
                // Nodes aligned on the kernel centre.
                const int i0 = static_cast<int>(std::ceil((lo - centre) / h));
                const int i1 = static_cast<int>(std::floor((hi - centre) / h));
                double acc = 0.0;
                for (int i = i0; i <= i1; ++i) {
                    const double u = centre + i * h;
                    const double db = by[j] - c.drift1(p, u, w1);
                    const double da = ay[j] - c.a1(p, u, w2);
                    if (db == 0.0 && da == 0.0) continue;
                    const double sv = src.eval(u);
                    if (sv == 0.0) continue;
                    acc += sv * h_formula(db, da, ys[j] - u - mH[j], aH[j]);
                }
                out[j] += W[q] * h * acc;
            }
        }
    }
}

std::vector<double> slice_nodes(const SliceGrid& sl) {
    std::vector<double> u(sl.n);
    for (int j = 0; j < sl.n; ++j) u[j] = sl.node(j);
    return u;
}

KernelTable build_layer(const KernelSampler& K, Source& src, const SpaceTimeGrid& grid, int k) {
    KernelTable t;
    t.grid = grid;
    t.k = k;
    t.values.resize(grid.slices.size());
    for (std::size_t i = 0; i < grid.slices.size(); ++i)
        convolve(K, src, grid.t0, grid.slices[i].time, slice_nodes(grid.slices[i]), t.values[i]);
    return t;
}

FrozenLattice lattice_for(const CoefficientSet& c, const ScalarFlow& f, const SpaceTimeGrid& g, double step,
                          double extra_lo, double extra_hi) {
    double lo = extra_lo, hi = extra_hi;
    for (const auto& sl : g.slices) {
        lo = std::min(lo, sl.lo);
        hi = std::max(hi, sl.hi());
    }
    const double pad = 4.0 * g.slices.back().step;
    return FrozenLattice(c, f, lo - pad, hi + pad, step);
}

}  // namespace

KernelTable sample_kernel(const KernelSampler& H, const SpaceTimeGrid& grid) {
    KernelTable t;
    t.grid = grid;
    t.k = 1;
    t.closed_form = true;
    t.values.resize(grid.slices.size());
    for (std::size_t i = 0; i < grid.slices.size(); ++i) {
        const SliceGrid& sl = grid.slices[i];
        t.values[i].resize(sl.n);
        for (int j = 0; j < sl.n; ++j) t.values[i][j] = H.H(grid.t0, grid.x0, sl.time, sl.node(j));
    }
    return t;
}

KernelTable iterate_kernel(const KernelTable& prev, const KernelSampler& H) {
    if (prev.k < 1) throw DomainError("iterate_kernel: need k >= 1");
    const SpaceTimeGrid& g = prev.grid;
    if (prev.values.size() != g.slices.size()) throw DomainError("iterate_kernel: table does not match its grid");
    if (prev.is_zero()) {
        KernelTable z = prev;
        z.k = prev.k + 1;
        z.closed_form = false;
        return z;
    }
    KernelTable out;
    if (prev.k == 1 && prev.closed_form) {
        FrozenLattice lat = lattice_for(H.coeffs(), H.flow(), g, H.options().lattice_step, g.x0, g.x0);
        OriginSource src(H.coeffs(), H.flow(), lat, g.t0, g.x0, g.extent, true);
        out = build_layer(H, src, g, 2);
    } else {
        TableSource src(prev);
        out = build_layer(H, src, g, prev.k + 1);
    }
    return out;
}

struct ParametrixSolver::Impl {
    const CoefficientSet& coeffs;
    const ScalarFlow& flow;
    double t, x, s;
    int K;
    ParametrixOptions opts;
    KernelSampler sampler;
    SpaceTimeGrid grid;
    FrozenLattice lattice;
    // layers[k-1] = tabulated order-k term.
    std::vector<KernelTable> layers;
    double out_lo = 0.0, out_hi = 0.0, out_step = 1.0;
    double kernel_c = 0.0;

    Impl(const CoefficientSet& c, const ScalarFlow& f, double t_, double x_, double s_, int K_,
         const ParametrixOptions& o)
        : coeffs(c), flow(f), t(t_), x(x_), s(s_), K(K_), opts(o), sampler(c, f, o) {}
};

ParametrixSolver::ParametrixSolver(const CoefficientSet& coeffs, const ScalarFlow& flow, double t, double x, double s,
                                   int K, const ParametrixOptions& opts, bool tabulate_all)
    : impl_(std::make_unique<Impl>(coeffs, flow, t, x, s, K, opts)) {
    if (K < 0) throw DomainError("parametrix: K must be nonnegative");
    Impl& im = *impl_;
    im.grid = SpaceTimeGrid::build(coeffs, flow, t, x, s, opts);

    const double lambda = coeffs.profile.lambda;
    double m, a;
    FrozenColumn(coeffs, flow, x).moments(t, s, m, a);
    const double sd = std::sqrt(lambda * (s - t));
    im.out_step = sd / opts.output_divisor;
    const int n_half = static_cast<int>(std::ceil(opts.extent * opts.output_divisor));
    im.out_lo = x + m - n_half * im.out_step;
    im.out_hi = x + m + n_half * im.out_step;
    im.lattice = lattice_for(coeffs, flow, im.grid, opts.lattice_step, im.out_lo, im.out_hi);

    const int n_tables = tabulate_all ? K : K - 1;
    if (n_tables >= 1) {
        OriginSource f0(coeffs, flow, im.lattice, t, x, opts.extent, false);
        im.layers.push_back(build_layer(im.sampler, f0, im.grid, 1));
        for (int k = 2; k <= n_tables; ++k) {
            if (im.layers.back().is_zero()) {
                KernelTable z = im.layers.back();
                z.k = k;
                im.layers.push_back(std::move(z));
                continue;
            }
            TableSource src(im.layers.back());
            im.layers.push_back(build_layer(im.sampler, src, im.grid, k));
        }
    }

    // Envelope constant of the first kernel from the origin, against the
    // normalized majorant with rate 1/(4 Lambda).
    const double gamma = coeffs.profile.gamma_a;
    const GaussianMajorant g = GaussianMajorant::normalized(1.0 / (4.0 * lambda));
    OriginSource h1(coeffs, flow, im.lattice, t, x, opts.extent, true);
    for (const SliceGrid& sl : im.grid.slices) {
        h1.bind(sl.time);
        const double tau = sl.time - t;
        for (int j = 0; j < sl.n; ++j) {
            const double env = std::pow(tau, gamma / 2.0 - 1.0) * majorant(g, t, x, sl.time, sl.node(j));
            if (env > 0.0) im.kernel_c = std::max(im.kernel_c, std::abs(h1.eval(sl.node(j))) / env);
        }
    }
    im.kernel_c *= 1.1;
}

ParametrixSolver::~ParametrixSolver() = default;

const SpaceTimeGrid& ParametrixSolver::grid() const { return impl_->grid; }

double ParametrixSolver::kernel_constant() const { return impl_->kernel_c; }

std::vector<double> ParametrixSolver::output_grid() const {
    const Impl& im = *impl_;
    const int n = static_cast<int>(std::lround((im.out_hi - im.out_lo) / im.out_step)) + 1;
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = im.out_lo + i * im.out_step;
    return y;
}

std::vector<SeriesResult> ParametrixSolver::density(const std::vector<double>& ys) const {
    const Impl& im = *impl_;
    const double lambda = im.coeffs.profile.lambda;
    const double gamma = im.coeffs.profile.gamma_a;
    std::vector<SeriesResult> res(ys.size());
    for (std::size_t j = 0; j < ys.size(); ++j) {
        double m, a;
        FrozenColumn(im.coeffs, im.flow, ys[j]).moments(im.t, im.s, m, a);
        res[j].y = ys[j];
        res[j].K = im.K;
        res[j].per_order.assign(im.K + 1, 0.0);
        res[j].per_order[0] = gauss1(ys[j] - im.x - m, a);
    }
    std::vector<double> vals;
    for (int k = 1; k <= im.K; ++k) {
        if (k >= 2 && im.layers[k - 2].is_zero()) continue;
        if (k == 1) {
            OriginSource f0(im.coeffs, im.flow, im.lattice, im.t, im.x, im.opts.extent, false);
            convolve(im.sampler, f0, im.t, im.s, ys, vals);
        } else {
            TableSource src(im.layers[k - 2]);
            convolve(im.sampler, src, im.t, im.s, ys, vals);
        }
        for (std::size_t j = 0; j < ys.size(); ++j) res[j].per_order[k] = vals[j];
    }

    // Tail envelope: |order k| <= C_k C0 (2/(k gamma)) (s-t)^{k gamma/2} g(s-t, y-x),
    // with C0 bounding the frozen density by the same normalized majorant.
    const double rate = 1.0 / (4.0 * lambda);
    const GaussianMajorant g = GaussianMajorant::normalized(rate);
    const double c0 = lambda * std::sqrt(2.0);
    const double tau = im.s - im.t;
    const double C = std::max(im.kernel_c, std::numeric_limits<double>::min());
    for (auto& r : res) {
        r.value = 0.0;
        for (double v : r.per_order) r.value += v;
        const double env = c0 * majorant(g, im.t, im.x, im.s, r.y);
        double log_ck = std::log(C);
        for (int k = 1; k <= im.K; ++k) log_ck += std::log(C) + log_beta(k * gamma / 2.0, gamma / 2.0);
        double tail = 0.0;
        for (int k = im.K + 1; k < im.K + 400; ++k) {
            const double term = std::exp(log_ck + 0.5 * k * gamma * std::log(tau)) * 2.0 / (k * gamma) * env;
            tail += term;
            if (term <= 1e-3 * tail || !std::isfinite(tail)) break;
            log_ck += std::log(C) + log_beta(k * gamma / 2.0, gamma / 2.0);
        }
        r.tail_bound = tail;
    }
    return res;
}

SeriesResult ParametrixSolver::density(double y) const { return density(std::vector<double>{y}).front(); }

std::vector<double> ParametrixSolver::slice_density(std::size_t i, int max_order) const {
    const Impl& im = *impl_;
    const SliceGrid& sl = im.grid.slices.at(i);
    const int top = max_order < 0 ? im.K : std::min(max_order, im.K);
    if (static_cast<int>(im.layers.size()) < top)
        throw DomainError("slice_density: solver was built without the top-order table");
    OriginSource f0(im.coeffs, im.flow, im.lattice, im.t, im.x, im.opts.extent, false);
    f0.bind(sl.time);
    std::vector<double> v(sl.n);
    for (int j = 0; j < sl.n; ++j) {
        double acc = f0.eval(sl.node(j));
        for (int k = 1; k <= top; ++k) acc += im.layers[k - 1].values[i][j];
        v[j] = acc;
    }
    return v;
}

SeriesResult parametrix_density(const CoefficientSet& coeffs, const ScalarFlow& flow, double t, double x, double s,
                                double y, int K, const ParametrixOptions& opts) {
    return ParametrixSolver(coeffs, flow, t, x, s, K, opts).density(y);
}

}  // namespace mkv
