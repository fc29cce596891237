#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kpzss/profile.hpp"

namespace kpzss {

// C:  lim f(xi) / xi^(q/(q-1))
// C0: lim of g in log variables, root of 1 - lambda q g^(q-1)
// C1: root of 1/2 - lambda q g^(q-1)
struct Constants {
  double C = 0.0;
  double C0 = 0.0;
  double C1 = 0.0;
};

Constants constants(const ModelParams& params);

// Log variables: f'(xi) = xi^(1/(q-1)) g(t), xi = e^t.
double g_from_fp(double xi, double fp, double q);
double fp_from_g(double t, double g, double q);

struct LogTrace {
  ModelParams params;
  std::vector<double> t;
  std::vector<double> g;
  double dt = 0.0;                // uniform spacing of t
  std::optional<double> t_xi0;    // ln xi0 of the source profile
  double noise_rel = 0.0;         // relative noise level of g (from the solver tolerance)

  std::size_t size() const { return t.size(); }
};

struct TraceOptions {
  double points_per_decade = 60.0;
  double dt = 0.0;     // > 0 overrides points_per_decade
  double xi_lo = 0.0;  // <= 0 means max(xi0, 1)
};

LogTrace to_log_trace(const ProfileSolution& sol, const TraceOptions& opts = {});

// Start of the tail region used for the residual gate: one decade of xi
// past max(xi0, 1). Throws UsageError without xi0.
double tail_xi_lo(const ProfileSolution& sol);

// Terms of the transformed equation
//   g'' + (3-q)/(q-1) g' - (q-2)/(q-1)^2 g
//     = { g'/2 - lambda (g^q)' + g/(q-1) - lambda q/(q-1) g^q } e^(2t).
struct TransformedTerms {
  std::array<double, 3> lhs{};
  std::array<double, 4> brace{};  // right side before the e^(2t) factor
  double weight = 1.0;            // e^(2t)

  double residual() const;
  double largest_term() const;
};

TransformedTerms transformed_terms(double t, double g, double gp, double gpp,
                                   const ModelParams& params);

struct ResidualSample {
  double t = 0.0;
  double residual = 0.0;
  double scale = 0.0;
  double scaled = 0.0;
};

struct ResidualReport {
  std::vector<ResidualSample> samples;
  double max_scaled = 0.0;
  double t_at_max = 0.0;
  double dt = 0.0;
};

// Centered differences for g', g'' on the trace grid; throws UsageError
// with fewer than 5 samples.
ResidualReport check_transformed_residual(const LogTrace& trace, const ModelParams& params);

struct AitkenResult {
  double value = 0.0;
  std::string method;  // "aitken" or "none"
  double ratio = std::numeric_limits<double>::quiet_NaN();
  bool flagged = false;
};

// Aitken delta-squared on the last three entries. Differences below
// noise_rel * |x| count as converged; a sign flip or a non-contracting
// window falls back to the raw last value and sets `flagged`.
AitkenResult aitken_last_window(std::span<const double> seq, double noise_rel);

enum class LimitTarget { g_limit, ratio_limit };

struct AsymptoticEstimate {
  LimitTarget target = LimitTarget::ratio_limit;
  std::vector<double> sample_xi;
  std::vector<double> raw_values;
  double accelerated_value = 0.0;
  double exact_value = 0.0;
  double rel_error = 0.0;
  std::string accel_method;
  // Contraction factor of successive differences in the last window that
  // is above the noise floor, and the matching algebraic rate in xi.
  double observed_ratio = std::numeric_limits<double>::quiet_NaN();
  double observed_rate = std::numeric_limits<double>::quiet_NaN();
  bool flagged = false;
  double xi_max = 0.0;
  double lambda = 0.0;
  double q = 0.0;
};

std::string to_string(LimitTarget target);

inline constexpr std::size_t kAccelerationSamples = 8;

// g at 8 trace points spaced ~ln 2 apart ending at the last sample.
// Requires 5 decades of xi past xi0 (or past the first sample).
AsymptoticEstimate estimate_g_limit(const LogTrace& trace, const Constants& consts);

// r(xi) = f(xi) / xi^(q/(q-1)) at xi_max / 2^k, k = 7..0.
AsymptoticEstimate estimate_ratio_limit(const ProfileSolution& sol, const Constants& consts);

// |ratio - g (q-1)/q| / C against rel_error(ratio) + rel_error(g). Since
// g (q-1)/q - C = (q-1)/q (g - C0), the triangle inequality makes this
// tight when the two errors have opposite signs; `allowed` carries a
// rounding slack of 64 ulp.
struct CrossIdentity {
  double difference = 0.0;
  double allowed = 0.0;

  bool passed() const { return difference <= allowed; }
};

CrossIdentity check_cross_identity(const AsymptoticEstimate& ratio, const AsymptoticEstimate& g,
                                   const ModelParams& params, const Constants& consts);

}  // namespace kpzss
