#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "kpzss/ode.hpp"
#include "kpzss/profile.hpp"

namespace kpzss {

// u_t = u_xx + lambda |u_x|^q on a uniform grid over [-L, L].
struct PdeField {
  std::vector<double> x;
  std::vector<double> u;
  double time = 0.0;
  double dx = 0.0;

  std::size_t size() const { return x.size(); }
};

inline constexpr std::size_t kMinPdeNodes = 65;

// N odd and >= 65, so x = 0 is a node. u is zero-filled.
PdeField make_grid(double L, std::size_t N);

// u(x, t) = (T0 - t)^alpha f(|x| (T0 - t)^(-1/2)) from a computed profile.
class SelfSimilarField {
 public:
  SelfSimilarField(const ModelParams& params, std::shared_ptr<const ProfileSolution> profile);

  const ModelParams& params() const { return params_; }
  const ProfileSolution& profile() const { return *profile_; }

  // xi reached at (x, t); throws UsageError unless 0 <= t < T0.
  double xi(double x, double t) const;
  // Largest |x| the profile covers at time t.
  double reach(double t) const;
  // RangeError when xi lies outside the computed profile.
  double u(double x, double t) const;
  // (T0 - t)^(alpha - 1) (xi f'/2 - alpha f).
  double u_t(double x, double t) const;
  double u_x(double x, double t) const;

 private:
  ModelParams params_;
  double alpha_ = 0.0;
  std::shared_ptr<const ProfileSolution> profile_;
};

double self_similar_u(const SelfSimilarField& field, double x, double t);

// Fills field.u with the exact solution at field.time.
void set_exact(PdeField& field, const SelfSimilarField& exact);

// Central differences at interior nodes. Boundary entries carry the time
// derivative of the exact Dirichlet data, so evolving all N values keeps
// the boundaries on the exact solution.
std::vector<double> semidiscrete_rhs(const PdeField& field, const ModelParams& params,
                                     const SelfSimilarField& boundary);

struct PdeRun {
  double L = 0.0;
  std::size_t N = 0;
  double t_end = 0.0;
  bool completed = false;           // false: the discrete system broke down
  std::optional<double> collapse_t;
  PdeField numeric;                 // at t_end (or the last time reached)
  std::vector<double> exact;        // exact u on the same nodes
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;         // max |u - u_exact| / max |u_exact|
  double l2_rel_err = 0.0;          // ||u - u_exact||_2 / ||u_exact||_2
  double evenness_defect = 0.0;     // max |u(x) - u(-x)|
  std::vector<double> grad_times;
  std::vector<double> grad_max;     // max |u_x| by central differences
  bool grad_monotone = false;
  ode::StepStats stats;
};

inline constexpr double kPdeStepFraction = 0.4;  // dt <= 0.4 dx^2

// Method of lines from exact data at t = 0 to t_end.
PdeRun evolve_and_compare(const ModelParams& params,
                          std::shared_ptr<const ProfileSolution> profile, double L,
                          std::size_t N, double t_end, const ode::Tolerances& tol = {});

struct PdeRefinement {
  PdeRun coarse;  // N
  PdeRun fine;    // 2N - 1
  double ratio = 0.0;  // coarse.max_rel_err / fine.max_rel_err
};

PdeRefinement refinement_study(const ModelParams& params,
                               std::shared_ptr<const ProfileSolution> profile, double L,
                               std::size_t N, double t_end, const ode::Tolerances& tol = {});

}  // namespace kpzss
