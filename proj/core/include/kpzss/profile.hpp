#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kpzss/ode.hpp"

namespace kpzss {

// Free inputs of the model u_t = u_xx + lambda |u_x|^q.
struct ModelParams {
  double lambda = 1.0;
  double q = 3.0;
  double T0 = 1.0;  // blow-up time, used only for the PDE cross-check

  // Throws UsageError unless lambda > 0, q > 2, T0 > 0.
  void validate() const;
};

// u(x, t) = (T0 - t)^alpha f(xi), xi = |x| (T0 - t)^beta.
struct SelfSimilarExponents {
  double alpha = 0.0;
  double beta = -0.5;
};

SelfSimilarExponents exponents(const ModelParams& params);

// |s|^q with 0^q = 0.
double abs_pow(double s, double q);

// The three non-diffusive terms of the profile equation
//   f'' + lambda |f'|^q - (xi / 2) f' + alpha f = 0,
// kept separate so sign checks can avoid cancellation.
struct ProfileTerms {
  double gradient = 0.0;  // lambda |f'|^q
  double drift = 0.0;     // (xi / 2) f'
  double decay = 0.0;     // alpha f

  double fpp() const { return -gradient + drift - decay; }
  // f'' + lambda |f'|^q, evaluated without forming f''.
  double excess_over_gradient() const { return drift - decay; }
};

ProfileTerms profile_terms(double xi, double f, double fp, const ModelParams& params);

// (f, f') -> (f', f'').
std::array<double, 2> profile_rhs(double xi, std::array<double, 2> state,
                                  const ModelParams& params);

// The profile equation as a first-order IVP on [0, xi_max] with an
// analytic Jacobian.
ode::IvpSpec profile_ivp(const ModelParams& params, double f0, double xi_max);

struct ProfileNode {
  double xi = 0.0;
  double f = 0.0;
  double fp = 0.0;
};

enum class ProfileMethod {
  automatic,  // implicit for f0 < 0 (stiff tail), explicit for f0 > 0
  explicit_rk,
  implicit_radau,
};

struct ProfileSolution {
  ModelParams params;
  double f0 = -1.0;
  ode::Trajectory trajectory;
  std::optional<double> xi0;  // first zero of f
  double xi_max_requested = 0.0;
  double xi_max_reached = 0.0;
  ode::Termination termination;
  std::vector<std::string> invariant_violations;

  double f(double xi) const { return trajectory.dense_eval(xi, 0); }
  double fp(double xi) const { return trajectory.dense_eval(xi, 1); }
  double fpp(double xi) const;
  std::vector<ProfileNode> nodes() const;
  bool collapsed() const {
    return termination.reason == ode::Termination::Reason::step_collapsed;
  }
};

inline constexpr double kDefaultXiMax = 1e6;
// Implicit runs cap steps at this fraction of xi.
inline constexpr double kStiffStepFraction = 0.01;

// Integrates the profile equation from (f0, 0). f0 < 0 runs are expected
// to exist on all of [0, xi_max]; f0 > 0 runs are expected to collapse.
// Outcomes contradicting either are recorded in invariant_violations.
ProfileSolution solve_profile(const ModelParams& params, double f0,
                              double xi_max = kDefaultXiMax, const ode::Tolerances& tol = {},
                              ProfileMethod method = ProfileMethod::automatic);

struct Violation {
  double xi = 0.0;
  double value = 0.0;
  double bound = 0.0;
  std::string what;
};

struct CheckReport {
  std::string name;
  std::size_t nodes_checked = 0;
  std::vector<Violation> violations;

  bool passed() const { return violations.empty(); }
};

// f' > 0 and f'' > 0 at every node with xi > 0 (requires f0 < 0).
CheckReport check_lemma_monotonicity(const ProfileSolution& sol);
CheckReport check_lemma_monotonicity(const ModelParams& params,
                                     std::span<const ProfileNode> nodes);

// f' < (xi / (2 lambda))^(1/(q-1)) for xi >= xi0 (requires f0 < 0, xi0).
CheckReport check_gradient_bound(const ProfileSolution& sol);
CheckReport check_gradient_bound(const ModelParams& params, double xi0,
                                 std::span<const ProfileNode> nodes);
double gradient_bound(double xi, const ModelParams& params);

// |f'' + lambda |f'|^q - xi f'/2 + alpha f| / max(1, |each term|) at
// log-spaced points in [1e-3, xi_max_reached], with f'' taken as the
// derivative of the dense f' (not from the right-hand side, which would
// make the residual vanish by construction).
struct OdeResidualReport {
  std::size_t samples = 0;
  double max_scaled = 0.0;
  double xi_at_max = 0.0;
  double threshold = 1e-6;

  bool passed() const { return max_scaled < threshold; }
};

OdeResidualReport check_ode_residual(const ProfileSolution& sol, std::size_t samples = 1000);

// Sign changes of f across consecutive nodes.
std::size_t count_sign_changes(const ProfileSolution& sol);

struct Rescaling {
  ModelParams params;
  double scale = 1.0;
};

// f = |f0| h maps the f(0) = f0 problem to h(0) = -1 with
// lambda' = lambda |f0|^(q-1).
Rescaling rescale_initial_value(const ModelParams& params, double f0_neg);

}  // namespace kpzss
