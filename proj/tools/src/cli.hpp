#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mkv/model.hpp"
#include "mkv/parametrix.hpp"
#include "mkv/simulator.hpp"

namespace mkv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfigError = 2;

struct InitialSpec {
    std::string kind = "gaussian";  // gaussian | dirac | csv
    std::size_t n = 1000;
    double mean = 0.0;
    double std = 1.0;
    std::vector<double> x;
    std::string path;
};

struct DensitySpec {
    double x = 0.0;
    std::optional<double> s;
    int K = 3;
    // Explicit output grid; the solver's own grid when absent.
    std::optional<double> lo, hi;
    int n = 0;
    // Euler samples from (t, x) for histogram.csv; none when zero.
    std::size_t mc_paths = 0;
    int bins = 50;
};

struct ConstantsSpec {
    double C = 1.0;
    double gamma = 1.0;
    int k_max = 30;
};

struct ScanSpec {
    std::vector<double> s_values;
    std::string phi = "phi1";
    std::optional<double> alpha;
    double epsilon = 1e-4;
    int clones = 256;
    std::vector<std::size_t> z_indices;
    double tol = 1e-26;
    int m_max = 60;
};

struct USpec {
    std::string b_tilde = "cos-plus-tanh";
    double x = 0.0;
    std::vector<double> horizons;
    int K = 3;
    std::size_t paths = 20000;
    int path_steps = 100;
};

struct VerifySpec {
    double x = 0.0;
    std::vector<double> taus{0.1, 0.25, 0.5};
    int space_points = 41;
    int assumption_samples = 2000;
    int k_max = 3;
    std::vector<std::pair<double, double>> kernel_origins;
};

struct ExperimentConfig {
    std::string problem;
    ProblemOptions problem_options;
    std::uint64_t seed = 42;
    std::string output_dir = ".";
    InitialSpec initial;
    SimulationConfig simulation;
    double picard_tol = kDefaultPicardTol;
    int picard_m_max = kDefaultPicardMaxIter;
    std::optional<double> picard_window;
    ParametrixOptions parametrix;
    DensitySpec density;
    ConstantsSpec constants;
    ScanSpec scan;
    USpec u;
    VerifySpec verify;
};

// Throws ConfigError on any schema violation.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

TestFn named_test_function(const std::string& name, const CoefficientSet& coeffs);
double named_test_function_alpha(const std::string& name, const CoefficientSet& coeffs);

const std::vector<std::string>& subcommands();

// Runs one subcommand and returns the process exit code.
int run(const std::string& subcommand, const ExperimentConfig& config, std::ostream& log);

// Full command line: `mkv <subcommand> --config FILE [--output-dir DIR]`.
int main_entry(int argc, const char* const* argv);

}  // namespace mkv::cli
