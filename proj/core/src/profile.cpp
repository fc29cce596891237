#include "kpzss/profile.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kpzss/error.hpp"

namespace kpzss {

void ModelParams::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw UsageError("lambda must be a finite positive number");
  if (!(q > 2.0) || !std::isfinite(q)) throw UsageError("q must be a finite number > 2");
  if (!(T0 > 0.0) || !std::isfinite(T0)) throw UsageError("T0 must be a finite positive number");
}

SelfSimilarExponents exponents(const ModelParams& params) {
  params.validate();
  return {(params.q - 2.0) / (2.0 * (params.q - 1.0)), -0.5};
}

double abs_pow(double s, double q) {
  if (s == 0.0) return 0.0;
  return std::pow(std::abs(s), q);
}

ProfileTerms profile_terms(double xi, double f, double fp, const ModelParams& params) {
  const double alpha = (params.q - 2.0) / (2.0 * (params.q - 1.0));
  return {params.lambda * abs_pow(fp, params.q), 0.5 * xi * fp, alpha * f};
}

std::array<double, 2> profile_rhs(double xi, std::array<double, 2> state,
                                  const ModelParams& params) {
  return {state[1], profile_terms(xi, state[0], state[1], params).fpp()};
}

ode::IvpSpec profile_ivp(const ModelParams& params, double f0, double xi_max) {
  ode::IvpSpec spec;
  spec.dimension = 2;
  spec.t_start = 0.0;
  spec.t_end = xi_max;
  spec.y_start = {f0, 0.0};
  spec.rhs = [params](double xi, std::span<const double> y, std::span<double> dy) {
    dy[0] = y[1];
    dy[1] = profile_terms(xi, y[0], y[1], params).fpp();
  };
  spec.jacobian = [params](double xi, std::span<const double> y, std::span<double> jac) {
    const double alpha = (params.q - 2.0) / (2.0 * (params.q - 1.0));
    const double fp = y[1];
    const double dgrad =
        fp == 0.0 ? 0.0
                  : params.lambda * params.q * std::pow(std::abs(fp), params.q - 1.0) *
                        (fp > 0.0 ? 1.0 : -1.0);
    jac[0] = 0.0;
    jac[1] = 1.0;
    jac[2] = -alpha;
    jac[3] = -dgrad + 0.5 * xi;
  };
  return spec;
}

double ProfileSolution::fpp(double xi) const {
  const auto s = trajectory.dense_eval(xi);
  return profile_terms(xi, s[0], s[1], params).fpp();
}

std::vector<ProfileNode> ProfileSolution::nodes() const {
  std::vector<ProfileNode> out;
  out.reserve(trajectory.size());
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const auto s = trajectory.state(i);
    out.push_back({trajectory.time(i), s[0], s[1]});
  }
  return out;
}

ProfileSolution solve_profile(const ModelParams& params, double f0, double xi_max,
                              const ode::Tolerances& tol, ProfileMethod method) {
  params.validate();
  if (f0 == 0.0 || !std::isfinite(f0))
    throw UsageError("f0 must be nonzero and finite (f0 = 0 gives the trivial profile)");
  if (!(xi_max > 0.0) || !std::isfinite(xi_max))
    throw UsageError("xi_max must be a finite positive number");

  if (method == ProfileMethod::automatic)
    method = f0 < 0.0 ? ProfileMethod::implicit_radau : ProfileMethod::explicit_rk;
  const auto ode_method = method == ProfileMethod::implicit_radau ? ode::Method::radau_iia
                                                                  : ode::Method::dormand_prince;

  const ode::Event events[] = {ode::Event::sign_change(0), ode::Event::collapse()};
  ProfileSolution sol;
  sol.params = params;
  sol.f0 = f0;
  sol.xi_max_requested = xi_max;
  // On the slow manifold f'' is a cancellation of terms of size ~xi |f'|, so
  // node slopes carry round-off amplified by xi/2. Short steps keep that
  // out of the Hermite dense output.
  ode::Tolerances run_tol = tol;
  if (ode_method == ode::Method::radau_iia)
    run_tol.max_step_rel = std::min(tol.max_step_rel, kStiffStepFraction);
  sol.trajectory = ode::integrate(profile_ivp(params, f0, xi_max), run_tol, events, ode_method);
  sol.termination = sol.trajectory.termination();
  sol.xi_max_reached = sol.trajectory.t_last();
  for (const auto& hit : sol.trajectory.events()) {
    if (hit.event_id == 0) {
      sol.xi0 = hit.t;
      break;
    }
  }

  std::ostringstream os;
  if (f0 < 0.0 && sol.collapsed()) {
    os << "INVARIANT VIOLATION: step collapse at xi=" << sol.xi_max_reached
       << " for f0 < 0 (the profile must exist on [0, xi_max])";
    sol.invariant_violations.push_back(os.str());
  }
  if (f0 > 0.0 && !sol.collapsed()) {
    os << "INVARIANT VIOLATION: reached xi=" << sol.xi_max_reached
       << " without collapse for f0 > 0 (the profile must break down at finite xi)";
    sol.invariant_violations.push_back(os.str());
  }
  return sol;
}

CheckReport check_lemma_monotonicity(const ModelParams& params,
                                     std::span<const ProfileNode> nodes) {
  CheckReport report{"monotonicity (f' > 0, f'' > 0)", 0, {}};
  for (const auto& n : nodes) {
    if (!(n.xi > 0.0)) continue;
    ++report.nodes_checked;
    if (!(n.fp > 0.0)) report.violations.push_back({n.xi, n.fp, 0.0, "f' <= 0"});
    const double fpp = profile_terms(n.xi, n.f, n.fp, params).fpp();
    if (!(fpp > 0.0)) report.violations.push_back({n.xi, fpp, 0.0, "f'' <= 0"});
  }
  return report;
}

CheckReport check_lemma_monotonicity(const ProfileSolution& sol) {
  if (!(sol.f0 < 0.0))
    throw UsageError("monotonicity check applies to f0 < 0 (f0 > 0 profiles decrease)");
  return check_lemma_monotonicity(sol.params, sol.nodes());
}

double gradient_bound(double xi, const ModelParams& params) {
  return std::pow(xi / (2.0 * params.lambda), 1.0 / (params.q - 1.0));
}

CheckReport check_gradient_bound(const ModelParams& params, double xi0,
                                 std::span<const ProfileNode> nodes) {
  CheckReport report{"gradient bound f' < (xi/(2 lambda))^(1/(q-1))", 0, {}};
  for (const auto& n : nodes) {
    if (n.xi < xi0) continue;
    ++report.nodes_checked;
    const double bound = gradient_bound(n.xi, params);
    if (!(n.fp < bound)) report.violations.push_back({n.xi, n.fp, bound, "f' >= bound"});
  }
  return report;
}

CheckReport check_gradient_bound(const ProfileSolution& sol) {
  if (!(sol.f0 < 0.0)) throw UsageError("gradient bound check applies to f0 < 0");
  if (!sol.xi0) throw UsageError("gradient bound check needs the zero xi0 of f");
  return check_gradient_bound(sol.params, *sol.xi0, sol.nodes());
}

OdeResidualReport check_ode_residual(const ProfileSolution& sol, std::size_t samples) {
  if (samples < 2) throw UsageError("ODE residual check needs at least 2 samples");
  OdeResidualReport rep;
  const double lo = std::min(1e-3, 0.5 * sol.xi_max_reached);
  const double hi = sol.xi_max_reached;
  const double step = std::log(hi / lo) / static_cast<double>(samples - 1);
  for (std::size_t k = 0; k < samples; ++k) {
    const double xi = k + 1 == samples ? hi : lo * std::exp(step * static_cast<double>(k));
    const auto y = sol.trajectory.dense_eval(xi);
    const double fpp = sol.trajectory.dense_derivative(xi, 1);
    const auto terms = profile_terms(xi, y[0], y[1], sol.params);
    const double r = fpp + terms.gradient - terms.drift + terms.decay;
    const double scale = std::max({1.0, std::abs(fpp), terms.gradient, std::abs(terms.drift),
                                   std::abs(terms.decay)});
    const double scaled = std::abs(r) / scale;
    ++rep.samples;
    if (scaled > rep.max_scaled) {
      rep.max_scaled = scaled;
      rep.xi_at_max = xi;
    }
  }
  return rep;
}

std::size_t count_sign_changes(const ProfileSolution& sol) {
  std::size_t changes = 0;
  const auto& tr = sol.trajectory;
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    const double a = tr.state(i)[0];
    const double b = tr.state(i + 1)[0];
    if ((a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0)) ++changes;
  }
  return changes;
}

Rescaling rescale_initial_value(const ModelParams& params, double f0_neg) {
  params.validate();
  if (!(f0_neg < 0.0)) throw UsageError("rescale_initial_value requires f0 < 0");
  const double scale = -f0_neg;
  ModelParams scaled = params;
  scaled.lambda = params.lambda * std::pow(scale, params.q - 1.0);
  return {scaled, scale};
}

}  // namespace kpzss
