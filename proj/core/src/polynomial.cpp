#include "kpzss/polynomial.hpp"

#include <cassert>

namespace kpzss::poly {

double horner(std::span<const double> coeffs, double x) {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

std::vector<double> restrict_to(std::span<const double> coeffs, double a, double b) {
  // Taylor shift to a, then scale by (b - a).
  std::vector<double> c(coeffs.begin(), coeffs.end());
  const std::size_t n = c.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = n - 1; j > i; --j) c[j - 1] += a * c[j];
  }
  const double d = b - a;
  double scale = 1.0;
  for (double& v : c) {
    v *= scale;
    scale *= d;
  }
  return c;
}

std::vector<double> hermite_interpolant(std::span<const double> nodes,
                                        std::span<const double> values,
                                        std::span<const double> slopes) {
  assert(nodes.size() == values.size() && nodes.size() == slopes.size());
  const std::size_t m = 2 * nodes.size();
  std::vector<double> z(m), dd(m);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    z[2 * i] = z[2 * i + 1] = nodes[i];
    dd[2 * i] = dd[2 * i + 1] = values[i];
  }
  // Divided-difference table, in place; coincident nodes use the slope.
  for (std::size_t level = 1; level < m; ++level) {
    for (std::size_t i = m - 1; i >= level; --i) {
      const double dz = z[i] - z[i - level];
      dd[i] = dz == 0.0 ? slopes[i / 2] : (dd[i] - dd[i - 1]) / dz;
    }
  }
  // Newton form to monomials.
  std::vector<double> out(m, 0.0);
  for (std::size_t k = m; k-- > 0;) {
    // out <- out * (x - z[k]) + dd[k]
    for (std::size_t j = m - 1; j > 0; --j) out[j] = out[j - 1] - z[k] * out[j];
    out[0] = -z[k] * out[0] + dd[k];
  }
  return out;
}

}  // namespace kpzss::poly
