#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mkv/model.hpp"

namespace mkv {

// N uniformly weighted particles in R^d, stored row-major.
class EmpiricalMeasure {
public:
    EmpiricalMeasure() = default;
    EmpiricalMeasure(int dim, std::vector<double> coords);

    static EmpiricalMeasure from_points(const std::vector<std::vector<double>>& points);
    static EmpiricalMeasure dirac(const std::vector<double>& x, std::size_t n = 1);
    // n i.i.d. N(mean, std^2 I) draws.
    static EmpiricalMeasure gaussian(int dim, std::size_t n, double mean, double std, std::uint64_t seed);

    int dim() const { return dim_; }
    std::size_t size() const { return dim_ > 0 ? coords_.size() / dim_ : 0; }
    const double* point(std::size_t i) const { return coords_.data() + i * dim_; }
    double* point(std::size_t i) { return coords_.data() + i * dim_; }
    const std::vector<double>& coords() const { return coords_; }
    double second_moment() const;

    void write_csv(std::ostream& os) const;
    static EmpiricalMeasure read_csv(std::istream& is);

private:
    int dim_ = 0;
    std::vector<double> coords_;
};

// Law moments w1, w2 on a strictly increasing time grid, linearly interpolated.
struct ScalarFlow {
    std::vector<double> times;
    std::vector<double> w1;
    std::vector<double> w2;

    static ScalarFlow constant(const std::vector<double>& times, double w1, double w2);

    void validate() const;
    double t0() const { return times.front(); }
    double horizon() const { return times.back(); }
    bool covers(double a, double b) const;
    // Index n with times[n] <= r < times[n+1] (clamped to the last interval).
    std::size_t locate(double r) const;
    double w1_at(double r) const;
    double w2_at(double r) const;

    void write_csv(std::ostream& os) const;
};

double moment(const EmpiricalMeasure& mu, const TestFn& phi);

double wasserstein2_1d(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

// Gradient of phi at z by central differences with step 1e-6.
std::vector<double> lions_derivative_linear(const TestFn& phi, const std::vector<double>& z);

// Positions produced by one deterministic simulation from an initial measure:
// `system[k]` is the particle system at s_values[k]; `clones[k]` holds the
// independent copies of the tagged particle at the same time.
struct CoupledSample {
    std::vector<EmpiricalMeasure> system;
    std::vector<EmpiricalMeasure> clones;
};

// Runs the dynamics from `mu`, with `n_clones` extra copies of particle
// `tagged` driven by their own noise under the resulting law flow. Must be a
// deterministic function of its inputs.
using SimulationOracle = std::function<CoupledSample(const EmpiricalMeasure& mu, std::size_t tagged,
                                                     int n_clones, const std::vector<double>& s_values)>;

struct LionsDerivativeEstimate {
    std::vector<double> z;
    int component = 0;
    double s = 0.0;
    double value = 0.0;
    double epsilon = 0.0;
    std::size_t n_particles = 0;
    double std_error = 0.0;
};

inline constexpr double kDefaultLionsEpsilon = 1e-4;

// Coupled-pair estimate of the j-th component of the Lions derivative of
// v_s = <phi, law of X_s> at the location of particle z_index, one entry per
// s in s_values.  The tagged particle's own response is averaged over
// n_clones copies (n_clones = 0 uses the particle itself and reports a zero
// standard error); the interaction response is summed over the others.
std::vector<LionsDerivativeEstimate> lions_derivative_flow(const SimulationOracle& sim, const EmpiricalMeasure& mu,
                                                           std::size_t z_index, int j,
                                                           const std::vector<double>& s_values, const TestFn& phi,
                                                           double epsilon = kDefaultLionsEpsilon, int n_clones = 64);

}  // namespace mkv
