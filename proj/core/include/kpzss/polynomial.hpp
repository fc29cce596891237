#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kpzss::poly {

// Polynomials are stored lowest power first: c[0] + c[1] x + ...

double horner(std::span<const double> coeffs, double x);

// Coefficients of p(a + (b - a) s) as a polynomial in s.
std::vector<double> restrict_to(std::span<const double> coeffs, double a, double b);

// Cubic/quintic/... Hermite interpolant matching values and first
// derivatives at distinct nodes; degree 2 * nodes.size() - 1.
std::vector<double> hermite_interpolant(std::span<const double> nodes,
                                        std::span<const double> values,
                                        std::span<const double> slopes);

}  // namespace kpzss::poly
