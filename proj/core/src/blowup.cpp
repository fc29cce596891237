#include "kpzss/blowup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "kpzss/error.hpp"

namespace kpzss {
namespace {

// State (xi, f) against tau = ln|f'| with f' = -e^tau:
//   dxi/dtau = 1 / (lambda e^((q-1) tau) + xi/2 + alpha f e^(-tau)),
//   df/dtau  = -e^tau dxi/dtau.
ode::IvpSpec tau_ivp(const ModelParams& params, double tau0, double tau1, double xi1,
                     double f1) {
  const double lam = params.lambda;
  const double q = params.q;
  const double alpha = exponents(params).alpha;
  ode::IvpSpec spec;
  spec.dimension = 2;
  spec.t_start = tau0;
  spec.t_end = tau1;
  spec.y_start = {xi1, f1};
  spec.rhs = [lam, q, alpha](double tau, std::span<const double> y, std::span<double> dy) {
    const double e = std::exp(tau);
    const double rate = lam * std::exp((q - 1.0) * tau) + 0.5 * y[0] + alpha * y[1] / e;
    dy[0] = 1.0 / rate;
    dy[1] = -e / rate;
  };
  return spec;
}

double allowance(double xi, const ode::Tolerances& tol) {
  return 10.0 * (tol.abs_tol + tol.rel_tol * std::max(1.0, xi)) +
         4.0 * std::numeric_limits<double>::epsilon() * xi;
}

AprioriBound make_bound(double xi1, double fp1, const ModelParams& params,
                        const ode::Tolerances& tol) {
  AprioriBound b;
  b.xi1 = xi1;
  b.fp1 = fp1;
  b.bound = xi1 + 1.0 / (params.lambda * (params.q - 1.0) *
                         std::pow(std::abs(fp1), params.q - 1.0));
  b.allowance = allowance(xi1, tol);
  return b;
}

void append_nodes(const ode::Trajectory& tr, std::vector<ProfileNode>& out, bool tau_phase,
                  bool skip_first) {
  for (std::size_t i = skip_first ? 1 : 0; i < tr.size(); ++i) {
    const auto y = tr.state(i);
    if (tau_phase) {
      out.push_back({y[0], y[1], -std::exp(tr.time(i))});
    } else {
      out.push_back({tr.time(i), y[0], y[1]});
    }
  }
}

}  // namespace

std::string to_string(BlowupStop stop) {
  switch (stop) {
    case BlowupStop::gradient_threshold: return "gradient_threshold";
    case BlowupStop::step_collapse: return "step_collapse";
    case BlowupStop::reached_xi_max: return "reached_xi_max";
  }
  return "unknown";
}

BlowupReport detect_blowup(const ModelParams& params, double f0, const ode::Tolerances& tol,
                           double xi_max) {
  params.validate();
  tol.validate();
  if (!(f0 > 0.0) || !std::isfinite(f0))
    throw UsageError("blow-up detection requires a finite f0 > 0");
  if (!(xi_max > 0.0) || !std::isfinite(xi_max))
    throw UsageError("xi_max must be a finite positive number");

  BlowupReport rep;
  rep.params = params;
  rep.f0 = f0;
  rep.tol = tol;
  rep.xi_max = xi_max;

  // Phase 1: xi from 0 until f' = -1.
  const ode::Event events[] = {ode::Event::crossing(1, -1.0, ode::Direction::falling),
                               ode::Event::collapse()};
  const auto xi_run = ode::integrate(profile_ivp(params, f0, xi_max), tol, events,
                                     ode::Method::dormand_prince);
  append_nodes(xi_run, rep.nodes, false, false);
  rep.xi_phase_nodes = rep.nodes.size();

  const auto& term = xi_run.termination();
  if (term.reason == ode::Termination::Reason::event_fired && term.event_id == 0) {
    // Phase 2: tau = ln|f'| from 0 to ln(kBlowupGradient).
    const auto y1 = xi_run.state(xi_run.size() - 1);
    rep.xi_switch = xi_run.t_last();
    const double tau1 = std::log(kBlowupGradient);
    const ode::Event collapse[] = {ode::Event::collapse()};
    const auto tau_run =
        ode::integrate(tau_ivp(params, 0.0, tau1, rep.xi_switch, y1[0]), tol, collapse,
                       ode::Method::dormand_prince);
    append_nodes(tau_run, rep.nodes, true, true);
    rep.stop = tau_run.termination().reason == ode::Termination::Reason::reached_t_end
                   ? BlowupStop::gradient_threshold
                   : BlowupStop::step_collapse;

    const double tau_end = tau_run.t_last();
    for (std::size_t k = 0; k < kAprioriSamples; ++k) {
      const double tau = tau_end * static_cast<double>(k) / (kAprioriSamples - 1);
      const double xi1 = tau_run.dense_eval(tau, 0);
      rep.apriori_bounds.push_back(make_bound(xi1, -std::exp(tau), params, tol));
    }
  } else {
    rep.stop = term.reason == ode::Termination::Reason::step_collapsed
                   ? BlowupStop::step_collapse
                   : BlowupStop::reached_xi_max;
    std::vector<ProfileNode> falling;
    for (const auto& n : rep.nodes)
      if (n.fp < 0.0) falling.push_back(n);
    const std::size_t m = falling.size();
    const std::size_t count = std::min(m, kAprioriSamples);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t i = count == 1 ? m - 1 : (m - 1) * k / (count - 1);
      rep.apriori_bounds.push_back(make_bound(falling[i].xi, falling[i].fp, params, tol));
    }
  }

  rep.last_state = rep.nodes.back();
  rep.f_at_collapse = rep.last_state.f;
  rep.fp_at_collapse = rep.last_state.fp;
  // The last node carries the same global error as xi1 in the bounds.
  rep.xi_star_bracket.lo = rep.last_state.xi - allowance(rep.last_state.xi, tol);
  rep.xi_star_bracket.hi = std::numeric_limits<double>::infinity();
  for (const auto& b : rep.apriori_bounds)
    rep.xi_star_bracket.hi = std::min(rep.xi_star_bracket.hi, b.certified());

  std::ostringstream os;
  if (!rep.collapsed()) {
    os << "INVARIANT VIOLATION: reached xi=" << rep.last_state.xi
       << " without breakdown for f0=" << f0 << " > 0";
    rep.invariant_violations.push_back(os.str());
  }
  if (rep.collapsed() && !(rep.xi_star_bracket.lo < rep.xi_star_bracket.hi)) {
    os.str("");
    os << "INVARIANT VIOLATION: empty xi_star bracket [" << rep.xi_star_bracket.lo << ", "
       << rep.xi_star_bracket.hi << "]";
    rep.invariant_violations.push_back(os.str());
  }
  for (const auto& b : rep.apriori_bounds) {
    if (b.certified() < rep.last_state.xi) {
      os.str("");
      os << "INVARIANT VIOLATION: a priori bound " << b.certified() << " from xi1=" << b.xi1
         << " lies below the last existence point " << rep.last_state.xi;
      rep.invariant_violations.push_back(os.str());
    }
  }
  return rep;
}

CheckReport check_differential_inequality(const ModelParams& params,
                                          std::span<const ProfileNode> nodes) {
  CheckReport report{"differential inequality f'' < -lambda |f'|^q", 0, {}};
  for (const auto& n : nodes) {
    ++report.nodes_checked;
    const auto terms = profile_terms(n.xi, n.f, n.fp, params);
    const double excess = terms.excess_over_gradient();
    if (!(excess < 0.0))
      report.violations.push_back({n.xi, excess, 0.0, "f'' + lambda |f'|^q >= 0"});
    if (n.xi > 0.0) {
      if (!(n.fp < 0.0)) report.violations.push_back({n.xi, n.fp, 0.0, "f' >= 0"});
      if (!(terms.fpp() < 0.0))
        report.violations.push_back({n.xi, terms.fpp(), 0.0, "f'' >= 0"});
    }
  }
  return report;
}

CheckReport check_differential_inequality(const BlowupReport& report) {
  return check_differential_inequality(report.params, report.nodes);
}

CheckReport check_differential_inequality(const ProfileSolution& sol) {
  if (!(sol.f0 > 0.0)) throw UsageError("differential inequality check applies to f0 > 0");
  return check_differential_inequality(sol.params, sol.nodes());
}

}  // namespace kpzss
