#include "mkv/measure.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "mkv/csv.hpp"
#include "mkv/errors.hpp"
#include "mkv/rng.hpp"

namespace mkv {

EmpiricalMeasure::EmpiricalMeasure(int dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
    if (dim_ < 1) throw DomainError("empirical measure: dimension must be positive");
    if (coords_.empty() || coords_.size() % dim_ != 0)
        throw DomainError("empirical measure: need N >= 1 points of dimension d");
    for (std::size_t i = 0; i < coords_.size(); ++i)
        if (!std::isfinite(coords_[i]))
            throw DomainError("empirical measure: non-finite coordinate at particle " + std::to_string(i / dim_));
}

EmpiricalMeasure EmpiricalMeasure::from_points(const std::vector<std::vector<double>>& points) {
    if (points.empty()) throw DomainError("empirical measure: no points");
    int d = static_cast<int>(points.front().size());
    std::vector<double> c;
    c.reserve(points.size() * d);
    for (const auto& p : points) {
        if (static_cast<int>(p.size()) != d) throw DomainError("empirical measure: ragged points");
        c.insert(c.end(), p.begin(), p.end());
    }
    return EmpiricalMeasure(d, std::move(c));
}

EmpiricalMeasure EmpiricalMeasure::dirac(const std::vector<double>& x, std::size_t n) {
    std::vector<double> c;
    c.reserve(n * x.size());
    for (std::size_t i = 0; i < n; ++i) c.insert(c.end(), x.begin(), x.end());
    return EmpiricalMeasure(static_cast<int>(x.size()), std::move(c));
}

EmpiricalMeasure EmpiricalMeasure::gaussian(int dim, std::size_t n, double mean, double std, std::uint64_t seed) {
    NoiseStream rng(seed);
    std::vector<double> c(n * dim);
    // Step index far from anything the simulator uses for the same seed.
    const std::uint64_t step = 0xFFFFFFF0u;
    for (std::size_t i = 0; i < n; ++i) {
        rng.normals(i, step, dim, c.data() + i * dim);
        for (int j = 0; j < dim; ++j) c[i * dim + j] = mean + std * c[i * dim + j];
    }
    return EmpiricalMeasure(dim, std::move(c));
}

double EmpiricalMeasure::second_moment() const {
    double acc = 0.0;
    for (double v : coords_) acc += v * v;
    return acc / static_cast<double>(size());
}

void EmpiricalMeasure::write_csv(std::ostream& os) const {
    for (int j = 0; j < dim_; ++j) os << (j ? "," : "") << 'x' << j;
    os << '\n';
    for (std::size_t i = 0; i < size(); ++i) {
        for (int j = 0; j < dim_; ++j) os << (j ? "," : "") << fmt_double(point(i)[j]);
        os << '\n';
    }
}

EmpiricalMeasure EmpiricalMeasure::read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw DomainError("empirical measure csv: missing header");
    int d = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
    std::vector<double> c;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        int cols = 0;
        while (std::getline(ss, cell, ',')) {
            c.push_back(std::stod(cell));
            ++cols;
        }
        if (cols != d) throw DomainError("empirical measure csv: expected " + std::to_string(d) + " columns");
    }
    return EmpiricalMeasure(d, std::move(c));
}

ScalarFlow ScalarFlow::constant(const std::vector<double>& times, double w1, double w2) {
    ScalarFlow f;
    f.times = times;
    f.w1.assign(times.size(), w1);
    f.w2.assign(times.size(), w2);
    return f;
}

void ScalarFlow::validate() const {
    if (times.size() < 2) throw DomainError("scalar flow: need at least two nodes");
    if (w1.size() != times.size() || w2.size() != times.size())
        throw DomainError("scalar flow: moment arrays must match the grid");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw DomainError("scalar flow: grid must be strictly increasing");
}

bool ScalarFlow::covers(double a, double b) const {
    const double tol = 1e-12 * std::max(1.0, std::abs(times.back()));
    return a >= times.front() - tol && b <= times.back() + tol;
}

std::size_t ScalarFlow::locate(double r) const {
    auto it = std::upper_bound(times.begin(), times.end(), r);
    std::size_t n = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
    return std::min(n, times.size() - 2);
}

namespace {
double interp(const ScalarFlow& f, const std::vector<double>& w, double r) {
    std::size_t n = f.locate(r);
    double h = f.times[n + 1] - f.times[n];
    double th = (r - f.times[n]) / h;
    if (th == 0.0) return w[n];
    if (th == 1.0) return w[n + 1];
    return w[n] + th * (w[n + 1] - w[n]);
}
}  // namespace

double ScalarFlow::w1_at(double r) const { return interp(*this, w1, r); }
double ScalarFlow::w2_at(double r) const { return interp(*this, w2, r); }

void ScalarFlow::write_csv(std::ostream& os) const {
    os << "time,w1,w2\n";
    for (std::size_t i = 0; i < times.size(); ++i)
        os << fmt_double(times[i]) << ',' << fmt_double(w1[i]) << ',' << fmt_double(w2[i]) << '\n';
}

double moment(const EmpiricalMeasure& mu, const TestFn& phi) {
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        double v = phi(mu.point(i));
        if (!std::isfinite(v)) throw EvaluationError("moment: test function is not finite at particle " + std::to_string(i));
        acc += v;
    }
    return acc / static_cast<double>(mu.size());
}

double wasserstein2_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.dim() != 1 || nu.dim() != 1) throw UnsupportedInput("wasserstein2_1d: measures must be one-dimensional");
    if (mu.size() != nu.size()) throw UnsupportedInput("wasserstein2_1d: particle counts differ");
    std::vector<double> a = mu.coords(), b = nu.coords();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc / static_cast<double>(a.size()));
}

std::vector<double> lions_derivative_linear(const TestFn& phi, const std::vector<double>& z) {
    const double h = 1e-6;
    std::vector<double> grad(z.size()), p = z;
    for (std::size_t j = 0; j < z.size(); ++j) {
        p[j] = z[j] + h;
        double fp = phi(p.data());
        p[j] = z[j] - h;
        double fm = phi(p.data());
        p[j] = z[j];
        grad[j] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

std::vector<LionsDerivativeEstimate> lions_derivative_flow(const SimulationOracle& sim, const EmpiricalMeasure& mu,
                                                           std::size_t z_index, int j,
                                                           const std::vector<double>& s_values, const TestFn& phi,
                                                           double epsilon, int n_clones) {
    if (!(epsilon > 0.0)) throw DomainError("lions_derivative_flow: epsilon must be positive");
    if (z_index >= mu.size()) throw DomainError("lions_derivative_flow: particle index out of range");
    if (j < 0 || j >= mu.dim()) throw DomainError("lions_derivative_flow: coordinate out of range");
    if (n_clones < 0) throw DomainError("lions_derivative_flow: negative clone count");

    EmpiricalMeasure pert = mu;
    double before = pert.point(z_index)[j];
    pert.point(z_index)[j] = before + epsilon;
    if (pert.point(z_index)[j] == before)
        throw DegenerateStep("lions_derivative_flow: epsilon is below the resolution of the particle coordinate");

    CoupledSample base = sim(mu, z_index, n_clones, s_values);
    CoupledSample moved = sim(pert, z_index, n_clones, s_values);

    const std::size_t n = mu.size();
    std::vector<LionsDerivativeEstimate> out;
    out.reserve(s_values.size());
    for (std::size_t k = 0; k < s_values.size(); ++k) {
        const EmpiricalMeasure& xb = base.system[k];
        const EmpiricalMeasure& xp = moved.system[k];
        double interaction = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == z_index) continue;
            interaction += phi(xp.point(i)) - phi(xb.point(i));
        }
        interaction /= epsilon;

        double own = 0.0, spread = 0.0;
        if (n_clones == 0) {
            own = (phi(xp.point(z_index)) - phi(xb.point(z_index))) / epsilon;
        } else {
            const EmpiricalMeasure& cb = base.clones[k];
            const EmpiricalMeasure& cp = moved.clones[k];
            std::vector<double> diffs(static_cast<std::size_t>(n_clones));
            for (int c = 0; c < n_clones; ++c) diffs[c] = (phi(cp.point(c)) - phi(cb.point(c))) / epsilon;
            for (double v : diffs) own += v;
            own /= n_clones;
            if (n_clones > 1) {
                for (double v : diffs) spread += (v - own) * (v - own);
                spread = std::sqrt(spread / (n_clones - 1) / n_clones);
            }
        }
        LionsDerivativeEstimate e;
        e.z.assign(mu.point(z_index), mu.point(z_index) + mu.dim());
        e.component = j;
        e.s = s_values[k];
        e.value = own + interaction;
        if (!std::isfinite(e.value)) throw EvaluationError("lions_derivative_flow: non-finite estimate");
        e.epsilon = epsilon;
        e.n_particles = n;
        e.std_error = spread;
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace mkv
