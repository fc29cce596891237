#include "kpzss/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "kpzss/error.hpp"

namespace kpzss {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<double> profile_sample_grid(const ProfileSolution& sol, std::size_t rows) {
  if (rows < 2) throw UsageError("profile CSV needs at least 2 rows");
  const double hi = sol.xi_max_reached;
  const double lo = std::min(1e-3, 0.5 * hi);
  std::vector<double> xs;
  xs.reserve(rows);
  xs.push_back(0.0);
  const std::size_t m = rows - 1;
  const double step = m > 1 ? std::log(hi / lo) / static_cast<double>(m - 1) : 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    xs.push_back(k + 1 == m ? hi : lo * std::exp(step * static_cast<double>(k)));
  }
  return xs;
}

void write_profile_csv(std::ostream& os, const ProfileSolution& sol, std::size_t rows) {
  os << "xi,f,fp,fpp\n";
  for (double xi : profile_sample_grid(sol, rows)) {
    const auto y = sol.trajectory.dense_eval(xi);
    const double fpp = profile_terms(xi, y[0], y[1], sol.params).fpp();
    os << format_double(xi) << ',' << format_double(y[0]) << ',' << format_double(y[1]) << ','
       << format_double(fpp) << '\n';
  }
}

void write_pde_csv(std::ostream& os, const PdeRun& run) {
  os << "x,u_numeric,u_exact,abs_err\n";
  const auto& f = run.numeric;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double exact = i < run.exact.size() ? run.exact[i] : std::nan("");
    os << format_double(f.x[i]) << ',' << format_double(f.u[i]) << ',' << format_double(exact)
       << ',' << format_double(std::abs(f.u[i] - exact)) << '\n';
  }
}

}  // namespace kpzss
