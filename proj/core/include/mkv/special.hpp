#pragma once

namespace mkv {

double log_beta(double a, double b);

// Euler beta function B(a,b) = G(a)G(b)/G(a+b), a,b > 0.
double beta(double a, double b);

// Nodes and weights of the n-point Gauss-Legendre rule on (0,1).
struct GaussRule {
    int n = 0;
    const double* nodes = nullptr;
    const double* weights = nullptr;
};
GaussRule gauss_legendre_unit(int n);

}  // namespace mkv
