#pragma once

#include <cmath>
#include <string>

#include "mkv/model.hpp"

namespace mkv::test_support {

// d = 1 coefficients b = b0 + kb * w, sigma = s0, phi1 = phi2 = identity.
inline CoefficientSet affine_1d(double b0, double s0, double kb = 0.0, const std::string& name = "affine") {
    CoefficientSet c;
    c.name = name;
    c.dim = 1;
    c.b = [b0, kb](double, const double*, double w, double* out) { out[0] = b0 + kb * w; };
    c.sigma = [s0](double, const double*, double, double* out) { out[0] = s0; };
    c.phi1 = [](const double* x) { return x[0]; };
    c.phi2 = [](const double* x) { return x[0]; };
    c.profile.lambda = std::max({s0 * s0, 1.0 / std::max(s0 * s0, 1e-300), 1.0}) * (1.0 + 1e-9);
    c.profile.c_b = std::abs(b0) + std::abs(kb) * 1e6;
    c.profile.c_b_prime = std::abs(kb);
    c.profile.c_sigma = 0.0;
    c.profile.c_sigma_prime = 0.0;
    return c;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace mkv::test_support
