#include "kpzss/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kpzss/error.hpp"

namespace kpzss {
namespace {

constexpr double kFiveDecades = 5.0 * std::numbers::ln10;

double noise_floor(double noise_rel) {
  return std::max(noise_rel, 64.0 * std::numeric_limits<double>::epsilon());
}

// Fills observed_ratio / observed_rate from the latest window whose
// differences are above the noise floor.
void observe_rate(AsymptoticEstimate& est, double noise_rel) {
  const auto& x = est.raw_values;
  const auto& xi = est.sample_xi;
  for (std::size_t k = x.size(); k-- > 2;) {
    const double d1 = x[k - 1] - x[k - 2];
    const double d2 = x[k] - x[k - 1];
    const double floor = noise_floor(noise_rel) * std::abs(x[k]);
    if (std::abs(d1) <= floor || std::abs(d2) <= floor) continue;
    est.observed_ratio = d2 / d1;
    const double spacing = std::log(xi[k] / xi[k - 1]);
    if (est.observed_ratio > 0.0 && spacing > 0.0)
      est.observed_rate = -std::log(est.observed_ratio) / spacing;
    return;
  }
}

void finish(AsymptoticEstimate& est, double noise_rel) {
  const auto acc = aitken_last_window(est.raw_values, noise_rel);
  est.accelerated_value = acc.value;
  est.accel_method = acc.method;
  est.flagged = acc.flagged;
  est.rel_error = std::abs(est.accelerated_value - est.exact_value) / est.exact_value;
  observe_rate(est, noise_rel);
}

}  // namespace

Constants constants(const ModelParams& params) {
  params.validate();
  const double lam = params.lambda;
  const double q = params.q;
  const double e = 1.0 / (q - 1.0);
  Constants c;
  c.C = std::pow(std::pow((q - 1.0) / q, q) / (lam * (q - 1.0)), e);
  c.C0 = std::pow(1.0 / (lam * q), e);
  c.C1 = std::pow(1.0 / (2.0 * lam * q), e);
  return c;
}

double g_from_fp(double xi, double fp, double q) { return fp * std::pow(xi, -1.0 / (q - 1.0)); }

double fp_from_g(double t, double g, double q) { return g * std::exp(t / (q - 1.0)); }

LogTrace to_log_trace(const ProfileSolution& sol, const TraceOptions& opts) {
  if (!(sol.f0 < 0.0)) throw UsageError("log trace requires an f0 < 0 profile");
  if (sol.termination.reason != ode::Termination::Reason::reached_t_end)
    throw UsageError("log trace requires a profile that reached xi_max");
  double xi_lo = opts.xi_lo;
  if (!(xi_lo > 0.0)) {
    if (!sol.xi0) throw UsageError("log trace: profile has no zero xi0; pass xi_lo");
    xi_lo = std::max(*sol.xi0, 1.0);
  }
  const double xi_hi = sol.xi_max_reached;
  if (!(xi_hi > xi_lo)) throw UsageError("log trace: empty xi range");

  const double t_lo = std::log(xi_lo);
  const double t_hi = std::log(xi_hi);
  LogTrace trace;
  trace.params = sol.params;
  if (sol.xi0) trace.t_xi0 = std::log(*sol.xi0);
  trace.noise_rel = 10.0 * sol.trajectory.tolerances().rel_tol;

  std::size_t n;
  if (opts.dt > 0.0) {
    trace.dt = opts.dt;
    n = static_cast<std::size_t>(std::floor((t_hi - t_lo) / opts.dt)) + 1;
  } else {
    const double decades = (t_hi - t_lo) / std::numbers::ln10;
    n = static_cast<std::size_t>(std::ceil(opts.points_per_decade * decades)) + 1;
    n = std::max<std::size_t>(n, 2);
    trace.dt = (t_hi - t_lo) / static_cast<double>(n - 1);
  }
  trace.t.reserve(n);
  trace.g.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double t = t_lo + static_cast<double>(j) * trace.dt;
    const double xi = std::clamp(std::exp(t), xi_lo, xi_hi);
    trace.t.push_back(t);
    trace.g.push_back(g_from_fp(xi, sol.fp(xi), sol.params.q));
  }
  return trace;
}

double tail_xi_lo(const ProfileSolution& sol) {
  if (!sol.xi0) throw UsageError("tail region: profile has no zero xi0");
  return 10.0 * std::max(*sol.xi0, 1.0);
}

double TransformedTerms::residual() const {
  double l = 0.0, r = 0.0;
  for (double v : lhs) l += v;
  for (double v : brace) r += v;
  return l - r * weight;
}

double TransformedTerms::largest_term() const {
  double m = 0.0;
  for (double v : lhs) m = std::max(m, std::abs(v));
  for (double v : brace) m = std::max(m, std::abs(v * weight));
  return m;
}

TransformedTerms transformed_terms(double t, double g, double gp, double gpp,
                                   const ModelParams& params) {
  const double q = params.q;
  const double lam = params.lambda;
  const double gq1 = std::pow(g, q - 1.0);
  TransformedTerms terms;
  terms.lhs = {gpp, (3.0 - q) / (q - 1.0) * gp, -(q - 2.0) / ((q - 1.0) * (q - 1.0)) * g};
  terms.brace = {0.5 * gp, -lam * q * gq1 * gp, g / (q - 1.0), -lam * q / (q - 1.0) * gq1 * g};
  terms.weight = std::exp(2.0 * t);
  return terms;
}

ResidualReport check_transformed_residual(const LogTrace& trace, const ModelParams& params) {
  if (trace.size() < 5) throw UsageError("transformed residual needs at least 5 samples");
  ResidualReport report;
  report.dt = trace.dt;
  const double h = trace.dt;
  for (std::size_t j = 1; j + 1 < trace.size(); ++j) {
    const double gm = trace.g[j - 1], g = trace.g[j], gp1 = trace.g[j + 1];
    const double d1 = (gp1 - gm) / (2.0 * h);
    const double d2 = (gp1 - 2.0 * g + gm) / (h * h);
    const auto terms = transformed_terms(trace.t[j], g, d1, d2, params);
    ResidualSample s;
    s.t = trace.t[j];
    s.residual = terms.residual();
    s.scale = terms.largest_term();
    s.scaled = s.scale > 0.0 ? std::abs(s.residual) / s.scale : 0.0;
    if (s.scaled > report.max_scaled) {
      report.max_scaled = s.scaled;
      report.t_at_max = s.t;
    }
    report.samples.push_back(s);
  }
  return report;
}

AitkenResult aitken_last_window(std::span<const double> seq, double noise_rel) {
  if (seq.size() < 3) throw UsageError("Aitken acceleration needs at least 3 values");
  const double x0 = seq[seq.size() - 3];
  const double x1 = seq[seq.size() - 2];
  const double x2 = seq[seq.size() - 1];
  const double d1 = x1 - x0;
  const double d2 = x2 - x1;
  const double floor = noise_floor(noise_rel) * std::max(std::abs(x2), 1e-300);
  AitkenResult res{x2, "none", std::numeric_limits<double>::quiet_NaN(), false};
  if (std::abs(d1) <= floor && std::abs(d2) <= floor) return res;  // converged
  if (d1 * d2 <= 0.0 || std::abs(d1) <= floor) {
    res.flagged = true;
    return res;
  }
  res.ratio = d2 / d1;
  const double denom = d2 - d1;
  if (res.ratio >= 1.0 || std::abs(denom) <= floor) {
    res.flagged = true;
    return res;
  }
  res.value = x2 - d2 * d2 / denom;
  res.method = "aitken";
  return res;
}

std::string to_string(LimitTarget target) {
  return target == LimitTarget::g_limit ? "g_limit" : "ratio_limit";
}

AsymptoticEstimate estimate_g_limit(const LogTrace& trace, const Constants& consts) {
  if (trace.size() < kAccelerationSamples) throw UsageError("g limit: trace too short");
  const double t_ref = trace.t_xi0.value_or(trace.t.front());
  if (trace.t.back() - t_ref < kFiveDecades * (1.0 - 1e-12)) {
    throw UsageError("g limit: trace must cover 5 decades of xi beyond xi0");
  }
  const auto stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(std::numbers::ln2 / trace.dt)));
  const std::size_t last = trace.size() - 1;
  if (last < stride * (kAccelerationSamples - 1)) throw UsageError("g limit: trace too short");

  AsymptoticEstimate est;
  est.target = LimitTarget::g_limit;
  est.exact_value = consts.C0;
  est.lambda = trace.params.lambda;
  est.q = trace.params.q;
  est.xi_max = std::exp(trace.t.back());
  for (std::size_t k = kAccelerationSamples; k-- > 0;) {
    const std::size_t i = last - k * stride;
    est.sample_xi.push_back(std::exp(trace.t[i]));
    est.raw_values.push_back(trace.g[i]);
  }
  finish(est, trace.noise_rel);
  return est;
}

AsymptoticEstimate estimate_ratio_limit(const ProfileSolution& sol, const Constants& consts) {
  if (!(sol.f0 < 0.0)) throw UsageError("ratio limit requires an f0 < 0 profile");
  if (sol.termination.reason != ode::Termination::Reason::reached_t_end)
    throw UsageError("ratio limit requires a profile that reached xi_max");
  if (!sol.xi0) throw UsageError("ratio limit: profile has no zero xi0");
  if (std::log(sol.xi_max_reached) - std::log(*sol.xi0) < kFiveDecades)
    throw UsageError("ratio limit: xi_max must exceed xi0 by 5 decades");

  const double q = sol.params.q;
  const double power = q / (q - 1.0);
  AsymptoticEstimate est;
  est.target = LimitTarget::ratio_limit;
  est.exact_value = consts.C;
  est.lambda = sol.params.lambda;
  est.q = q;
  est.xi_max = sol.xi_max_reached;
  for (std::size_t k = kAccelerationSamples; k-- > 0;) {
    const double xi = std::ldexp(sol.xi_max_reached, -static_cast<int>(k));
    est.sample_xi.push_back(xi);
    est.raw_values.push_back(sol.f(xi) / std::pow(xi, power));
  }
  finish(est, 10.0 * sol.trajectory.tolerances().rel_tol);
  return est;
}

CrossIdentity check_cross_identity(const AsymptoticEstimate& ratio, const AsymptoticEstimate& g,
                                   const ModelParams& params, const Constants& consts) {
  if (ratio.target != LimitTarget::ratio_limit || g.target != LimitTarget::g_limit)
    throw UsageError("cross identity needs a ratio estimate and a g estimate");
  const double factor = (params.q - 1.0) / params.q;
  CrossIdentity c;
  c.difference = std::abs(ratio.accelerated_value - g.accelerated_value * factor) / consts.C;
  c.allowed = ratio.rel_error + g.rel_error + 64.0 * std::numeric_limits<double>::epsilon();
  return c;
}

}  // namespace kpzss
