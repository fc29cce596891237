#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kpzss/ode.hpp"
#include "kpzss/profile.hpp"

namespace kpzss {

// Finite-xi breakdown of the profile equation for f(0) = f0 > 0.
//
// The run integrates in xi until f' = -1, then switches to tau = ln|f'| as
// the independent variable, where the approach to the singularity is
// smooth, and stops once |f'| reaches kBlowupGradient.

inline constexpr double kBlowupGradient = 1e12;
inline constexpr std::size_t kAprioriSamples = 16;

// lo: last accepted xi less the integration allowance; hi: tightest
// certified a priori bound.
struct XiBracket {
  double lo = 0.0;
  double hi = 0.0;
};

// From xi1 on, 1/((q-1)|f'|^(q-1)) decreases faster than lambda (xi - xi1),
// so xi_star < xi1 + 1/(lambda (q-1) |f'(xi1)|^(q-1)). `allowance` covers the
// integration error in the computed xi1.
struct AprioriBound {
  double xi1 = 0.0;
  double fp1 = 0.0;
  double bound = 0.0;
  double allowance = 0.0;

  double certified() const { return bound + allowance; }
};

enum class BlowupStop {
  gradient_threshold,  // |f'| reached kBlowupGradient
  step_collapse,       // solver step fell below min_step
  reached_xi_max,      // no breakdown seen: contradicts finite-xi blow-up
};

std::string to_string(BlowupStop stop);

struct BlowupReport {
  ModelParams params;
  double f0 = 0.0;
  ode::Tolerances tol;
  double xi_max = 0.0;
  BlowupStop stop = BlowupStop::reached_xi_max;
  XiBracket xi_star_bracket;
  ProfileNode last_state;
  std::vector<AprioriBound> apriori_bounds;
  double f_at_collapse = 0.0;
  double fp_at_collapse = 0.0;
  double xi_switch = 0.0;  // where f' = -1 and tau takes over (0 if never)
  std::vector<ProfileNode> nodes;  // accepted nodes of both phases, xi ascending
  std::size_t xi_phase_nodes = 0;
  std::vector<std::string> invariant_violations;

  bool collapsed() const { return stop != BlowupStop::reached_xi_max; }
  double bracket_width() const { return xi_star_bracket.hi - xi_star_bracket.lo; }
};

// Throws UsageError unless f0 > 0.
BlowupReport detect_blowup(const ModelParams& params, double f0, const ode::Tolerances& tol = {},
                           double xi_max = kDefaultXiMax);

// f'' < -lambda |f'|^q, checked as xi f'/2 - alpha f < 0 so that the large
// gradient term cancels exactly. Also f' < 0 and f'' < 0 for xi > 0.
CheckReport check_differential_inequality(const BlowupReport& report);
CheckReport check_differential_inequality(const ModelParams& params,
                                          std::span<const ProfileNode> nodes);
// Same check on the nodes of a plain xi integration; throws unless f0 > 0.
CheckReport check_differential_inequality(const ProfileSolution& sol);

}  // namespace kpzss
