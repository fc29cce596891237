#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "kpzss/pde.hpp"
#include "kpzss/profile.hpp"

namespace kpzss {

// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

inline constexpr std::size_t kProfileCsvRows = 512;

// xi = 0 followed by rows - 1 log-spaced points from min(1e-3, xi_end / 2)
// to xi_max_reached.
std::vector<double> profile_sample_grid(const ProfileSolution& sol,
                                        std::size_t rows = kProfileCsvRows);

// Header xi,f,fp,fpp.
void write_profile_csv(std::ostream& os, const ProfileSolution& sol,
                       std::size_t rows = kProfileCsvRows);

// Header x,u_numeric,u_exact,abs_err.
void write_pde_csv(std::ostream& os, const PdeRun& run);

}  // namespace kpzss
