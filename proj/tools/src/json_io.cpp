#include "kpzss/json_io.hpp"

#include <cmath>

namespace kpzss {
namespace {

// nlohmann writes NaN and inf as null; keep that explicit.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json node_json(const ProfileNode& n) { return {{"xi", n.xi}, {"f", n.f}, {"fp", n.fp}}; }

}  // namespace

json to_json(const ModelParams& p) {
  return {{"lambda", p.lambda}, {"q", p.q}, {"T0", p.T0}};
}

json to_json(const ode::Tolerances& tol) {
  return {{"rel_tol", tol.rel_tol},
          {"abs_tol", tol.abs_tol},
          {"min_step", tol.min_step},
          {"max_step", num(tol.max_step)},
          {"max_step_rel", num(tol.max_step_rel)}};
}

json to_json(const CheckReport& r, std::size_t max_listed) {
  json v = json::array();
  for (std::size_t i = 0; i < r.violations.size() && i < max_listed; ++i) {
    const auto& x = r.violations[i];
    v.push_back({{"xi", x.xi}, {"value", num(x.value)}, {"bound", num(x.bound)}, {"what", x.what}});
  }
  return {{"name", r.name},
          {"nodes_checked", r.nodes_checked},
          {"violation_count", r.violations.size()},
          {"violations", v},
          {"passed", r.passed()}};
}

json to_json(const OdeResidualReport& r) {
  return {{"samples", r.samples},
          {"max_scaled", r.max_scaled},
          {"xi_at_max", r.xi_at_max},
          {"threshold", r.threshold},
          {"passed", r.passed()}};
}

json to_json(const ResidualReport& r) {
  return {{"samples", r.samples.size()},
          {"dt", r.dt},
          {"max_scaled", r.max_scaled},
          {"t_at_max", r.t_at_max}};
}

json to_json(const AsymptoticEstimate& e) {
  return {{"target", to_string(e.target)},
          {"exact", e.exact_value},
          {"estimate", e.accelerated_value},
          {"rel_error", e.rel_error},
          {"method", e.accel_method},
          {"xi_max", e.xi_max},
          {"lambda", e.lambda},
          {"q", e.q},
          {"flagged", e.flagged},
          {"observed_ratio", num(e.observed_ratio)},
          {"observed_rate", num(e.observed_rate)},
          {"sample_xi", e.sample_xi},
          {"raw_values", e.raw_values}};
}

json to_json(const BlowupReport& r) {
  json bounds = json::array();
  for (const auto& b : r.apriori_bounds) {
    bounds.push_back({{"xi1", b.xi1},
                      {"fp1", b.fp1},
                      {"bound", b.bound},
                      {"allowance", b.allowance},
                      {"certified", b.certified()}});
  }
  return {{"params", to_json(r.params)},
          {"f0", r.f0},
          {"stop", to_string(r.stop)},
          {"xi_star_bracket", {{"lo", r.xi_star_bracket.lo}, {"hi", num(r.xi_star_bracket.hi)}}},
          {"bracket_width", num(r.bracket_width())},
          {"last_state", node_json(r.last_state)},
          {"f_at_collapse", r.f_at_collapse},
          {"fp_at_collapse", r.fp_at_collapse},
          {"xi_switch", r.xi_switch},
          {"xi_phase_nodes", r.xi_phase_nodes},
          {"total_nodes", r.nodes.size()},
          {"apriori_bounds", bounds},
          {"invariant_violations", r.invariant_violations}};
}

json to_json(const PdeRun& r) {
  return {{"L", r.L},
          {"N", r.N},
          {"t_end", r.t_end},
          {"completed", r.completed},
          {"collapse_t", r.collapse_t ? num(*r.collapse_t) : json(nullptr)},
          {"max_abs_err", r.max_abs_err},
          {"max_rel_err", r.max_rel_err},
          {"l2_rel_err", r.l2_rel_err},
          {"evenness_defect", r.evenness_defect},
          {"grad_times", r.grad_times},
          {"grad_max", r.grad_max},
          {"grad_monotone", r.grad_monotone},
          {"steps_accepted", r.stats.accepted},
          {"steps_rejected", r.stats.rejected}};
}

json pde_summary(const ModelParams& p, const PdeRefinement& r) {
  return {{"lambda", p.lambda},
          {"q", p.q},
          {"T0", p.T0},
          {"L", r.coarse.L},
          {"N", r.coarse.N},
          {"t_end", r.coarse.t_end},
          {"max_rel_err", r.coarse.max_rel_err},
          {"l2_rel_err", r.coarse.l2_rel_err},
          {"refinement_ratio", num(r.ratio)},
          {"coarse", to_json(r.coarse)},
          {"fine", to_json(r.fine)}};
}

json profile_summary(const ProfileSolution& sol) {
  const auto& tr = sol.trajectory;
  return {{"params", to_json(sol.params)},
          {"f0", sol.f0},
          {"xi0", sol.xi0 ? json(*sol.xi0) : json(nullptr)},
          {"xi_max_requested", sol.xi_max_requested},
          {"xi_max_reached", sol.xi_max_reached},
          {"termination", sol.termination.label()},
          {"method", tr.method() == ode::Method::radau_iia ? "radau_iia" : "dormand_prince"},
          {"nodes", tr.size()},
          {"steps_accepted", tr.stats().accepted},
          {"steps_rejected", tr.stats().rejected},
          {"f_last", tr.state(tr.size() - 1)[0]},
          {"fp_last", tr.state(tr.size() - 1)[1]},
          {"invariant_violations", sol.invariant_violations}};
}

}  // namespace kpzss
