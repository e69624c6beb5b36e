#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mkv/measure.hpp"
#include "mkv/model.hpp"

namespace mkv {

struct SimulationConfig {
    double t = 0.0;
    double T = 1.0;
    int n_steps = 100;
    std::size_t n_particles = 1000;
    std::uint64_t seed = 42;
    int dim = 1;

    void validate() const;
    double step() const { return (T - t) / n_steps; }
    std::vector<double> grid() const;
};

// Pre-drawn standard normal increments, indexed [particle][step][coordinate].
struct NoiseArray {
    std::size_t n_particles = 0;
    int n_steps = 0;
    int dim = 0;
    std::vector<double> z;

    const double* at(std::size_t particle, int step) const {
        return z.data() + (particle * n_steps + step) * dim;
    }
};

NoiseArray draw_noise(const SimulationConfig& config);

// Paths stored time-major: state of particle i at grid index k is at(i, k).
struct PathEnsemble {
    std::vector<double> times;
    std::size_t n_particles = 0;
    int dim = 0;
    std::uint64_t seed = 0;
    std::vector<double> data;

    const double* at(std::size_t i, std::size_t k) const { return data.data() + (k * n_particles + i) * dim; }
    double* at(std::size_t i, std::size_t k) { return data.data() + (k * n_particles + i) * dim; }
    EmpiricalMeasure marginal(std::size_t k) const;
    EmpiricalMeasure terminal() const { return marginal(times.size() - 1); }

    void write_csv(std::ostream& os) const;
};

struct PicardReport {
    int iterations = 0;
    double tol = 0.0;
    // increments[m-1] = Delta_m, the sup over grid times of the mean squared
    // gap between iterates m and m-1.
    std::vector<double> increments;
    std::vector<double> w2_gaps;
    bool converged = false;
    ScalarFlow final_flow;

    void write_csv(std::ostream& os) const;
};

inline constexpr double kDefaultPicardTol = 1e-8;
inline constexpr int kDefaultPicardMaxIter = 25;
inline constexpr double kDefaultPicardWindow = 0.5;

// Noise for particle i at step k is NoiseStream(config.seed) at
// (particle_offset + i, step_offset + k).
struct NoiseOffsets {
    std::uint64_t particle = 0;
    std::uint64_t step = 0;
};

PathEnsemble euler_maruyama(const CoefficientSet& coeffs, const ScalarFlow& flow, const EmpiricalMeasure& initial,
                            const SimulationConfig& config, const NoiseArray* noise = nullptr,
                            NoiseOffsets offsets = {});

// Same scheme without storing paths: visit(i, k, x) sees every state, k = 0..M.
void euler_stream(const CoefficientSet& coeffs, const ScalarFlow& flow, const EmpiricalMeasure& initial,
                  const SimulationConfig& config,
                  const std::function<void(std::size_t, int, const double*)>& visit, NoiseOffsets offsets = {});

ScalarFlow flow_from_paths(const CoefficientSet& coeffs, const PathEnsemble& paths);

PicardReport picard_iterate(const CoefficientSet& coeffs, const EmpiricalMeasure& mu0, const SimulationConfig& config,
                            double tol = kDefaultPicardTol, int m_max = kDefaultPicardMaxIter,
                            const ScalarFlow* initial_flow = nullptr);

struct MkvSolution {
    PathEnsemble paths;
    ScalarFlow flow;
    PicardReport report;
};

// Picard to convergence then one Euler pass under the final flow; throws
// ConvergenceError when Picard does not converge.
MkvSolution simulate_mkv(const CoefficientSet& coeffs, const EmpiricalMeasure& mu0, const SimulationConfig& config,
                         double tol = kDefaultPicardTol, int m_max = kDefaultPicardMaxIter,
                         const ScalarFlow* initial_flow = nullptr);

struct WindowedSolution {
    std::vector<PicardReport> windows;
    ScalarFlow flow;
    PathEnsemble paths;
    bool converged = false;
};

// Restarts Picard on consecutive windows of length <= window, each from the
// particle system at the end of the previous one.
WindowedSolution simulate_mkv_windowed(const CoefficientSet& coeffs, const EmpiricalMeasure& mu0,
                                       const SimulationConfig& config, double tol = kDefaultPicardTol,
                                       int m_max = kDefaultPicardMaxIter, double window = kDefaultPicardWindow);

// Oracle for lions_derivative_flow: resolves the law flow from the given
// initial measure by Picard (same noise for every call), then reports the
// system and the clones of the tagged particle at the requested times.
SimulationOracle make_simulation_oracle(const CoefficientSet& coeffs, const SimulationConfig& config,
                                        double tol = kDefaultPicardTol, int m_max = kDefaultPicardMaxIter);

}  // namespace mkv
