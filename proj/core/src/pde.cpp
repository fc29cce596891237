#include "kpzss/pde.hpp"

#include <algorithm>
#include <cmath>

#include "kpzss/error.hpp"

namespace kpzss {
namespace {

double max_gradient(const PdeField& field) {
  double g = 0.0;
  const double inv = 0.5 / field.dx;
  for (std::size_t i = 1; i + 1 < field.size(); ++i)
    g = std::max(g, std::abs((field.u[i + 1] - field.u[i - 1]) * inv));
  return g;
}

void compare(PdeRun& run, const SelfSimilarField& exact) {
  const auto& f = run.numeric;
  const std::size_t n = f.size();
  run.exact.resize(n);
  double max_exact = 0.0, sum_err = 0.0, sum_exact = 0.0;
  run.max_abs_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    run.exact[i] = exact.u(f.x[i], f.time);
    const double e = f.u[i] - run.exact[i];
    run.max_abs_err = std::max(run.max_abs_err, std::abs(e));
    max_exact = std::max(max_exact, std::abs(run.exact[i]));
    sum_err += e * e;
    sum_exact += run.exact[i] * run.exact[i];
  }
  run.max_rel_err = max_exact > 0.0 ? run.max_abs_err / max_exact : run.max_abs_err;
  run.l2_rel_err = sum_exact > 0.0 ? std::sqrt(sum_err / sum_exact) : std::sqrt(sum_err);
  run.evenness_defect = 0.0;
  for (std::size_t i = 0; i < n / 2; ++i)
    run.evenness_defect = std::max(run.evenness_defect, std::abs(f.u[i] - f.u[n - 1 - i]));
}

}  // namespace

PdeField make_grid(double L, std::size_t N) {
  if (!(L > 0.0) || !std::isfinite(L)) throw UsageError("PDE grid: L must be positive");
  if (N < kMinPdeNodes || N % 2 == 0) throw UsageError("PDE grid: N must be odd and >= 65");
  PdeField f;
  f.dx = 2.0 * L / static_cast<double>(N - 1);
  f.x.resize(N);
  f.u.assign(N, 0.0);
  const std::size_t mid = N / 2;
  // Symmetric construction keeps x(-i) = -x(i) exactly.
  for (std::size_t i = 0; i < N; ++i) {
    const double k = static_cast<double>(i) - static_cast<double>(mid);
    f.x[i] = k * f.dx;
  }
  f.x.front() = -L;
  f.x.back() = L;
  return f;
}

SelfSimilarField::SelfSimilarField(const ModelParams& params,
                                   std::shared_ptr<const ProfileSolution> profile)
    : params_(params), alpha_(exponents(params).alpha), profile_(std::move(profile)) {
  params_.validate();
  if (!profile_) throw UsageError("SelfSimilarField: missing profile");
}

double SelfSimilarField::xi(double x, double t) const {
  if (!(t >= 0.0) || !(t < params_.T0)) throw UsageError("self-similar field needs 0 <= t < T0");
  return std::abs(x) / std::sqrt(params_.T0 - t);
}

double SelfSimilarField::reach(double t) const {
  if (!(t >= 0.0) || !(t < params_.T0)) throw UsageError("self-similar field needs 0 <= t < T0");
  return profile_->xi_max_reached * std::sqrt(params_.T0 - t);
}

double SelfSimilarField::u(double x, double t) const {
  const double s = params_.T0 - t;
  return std::pow(s, alpha_) * profile_->f(xi(x, t));
}

double SelfSimilarField::u_t(double x, double t) const {
  const double s = params_.T0 - t;
  const double z = xi(x, t);
  const auto y = profile_->trajectory.dense_eval(z);
  return std::pow(s, alpha_ - 1.0) * (0.5 * z * y[1] - alpha_ * y[0]);
}

double SelfSimilarField::u_x(double x, double t) const {
  const double s = params_.T0 - t;
  const double sign = x < 0.0 ? -1.0 : 1.0;
  return sign * std::pow(s, alpha_ - 0.5) * profile_->fp(xi(x, t));
}

double self_similar_u(const SelfSimilarField& field, double x, double t) {
  return field.u(x, t);
}

void set_exact(PdeField& field, const SelfSimilarField& exact) {
  for (std::size_t i = 0; i < field.size(); ++i) field.u[i] = exact.u(field.x[i], field.time);
}

std::vector<double> semidiscrete_rhs(const PdeField& field, const ModelParams& params,
                                     const SelfSimilarField& boundary) {
  const std::size_t n = field.size();
  std::vector<double> du(n, 0.0);
  if (n < 3) return du;
  const double inv_dx2 = 1.0 / (field.dx * field.dx);
  const double inv_2dx = 0.5 / field.dx;
  const auto& u = field.u;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double uxx = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_dx2;
    const double ux = (u[i + 1] - u[i - 1]) * inv_2dx;
    du[i] = uxx + params.lambda * abs_pow(ux, params.q);
  }
  du.front() = boundary.u_t(field.x.front(), field.time);
  du.back() = boundary.u_t(field.x.back(), field.time);
  return du;
}

PdeRun evolve_and_compare(const ModelParams& params,
                          std::shared_ptr<const ProfileSolution> profile, double L,
                          std::size_t N, double t_end, const ode::Tolerances& tol) {
  params.validate();
  tol.validate();
  if (!(t_end >= 0.0) || !(t_end < params.T0))
    throw UsageError("PDE check: require 0 <= t_end < T0");
  const SelfSimilarField exact(params, std::move(profile));
  if (L > exact.reach(t_end))
    throw RangeError("PDE check: profile does not cover xi = L (T0 - t_end)^(-1/2); raise xi_max");

  PdeRun run;
  run.L = L;
  run.N = N;
  run.t_end = t_end;
  PdeField field = make_grid(L, N);
  set_exact(field, exact);

  run.grad_times.push_back(0.0);
  run.grad_max.push_back(max_gradient(field));

  if (t_end == 0.0) {
    run.completed = true;
    run.numeric = field;
    compare(run, exact);
    run.grad_monotone = true;
    return run;
  }

  // Four chunks so max |u_x| can be sampled without keeping the history.
  constexpr int kChunks = 4;
  PdeField scratch = field;
  ode::Tolerances run_tol = tol;
  run_tol.max_step = std::min(tol.max_step, kPdeStepFraction * field.dx * field.dx);
  const ode::Event events[] = {ode::Event::collapse()};
  run.completed = true;
  for (int k = 1; k <= kChunks && run.completed; ++k) {
    ode::IvpSpec spec;
    spec.dimension = N;
    spec.t_start = field.time;
    spec.t_end = k == kChunks ? t_end : t_end * k / kChunks;
    spec.y_start = field.u;
    spec.keep_history = false;
    spec.rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
      std::copy(y.begin(), y.end(), scratch.u.begin());
      scratch.time = t;
      const auto du = semidiscrete_rhs(scratch, params, exact);
      std::copy(du.begin(), du.end(), dy.begin());
    };
    const auto traj = ode::integrate(spec, run_tol, events, ode::Method::dormand_prince);
    const auto& st = traj.stats();
    run.stats.accepted += st.accepted;
    run.stats.rejected += st.rejected;
    run.stats.rhs_evaluations += st.rhs_evaluations;
    if (traj.termination().reason != ode::Termination::Reason::reached_t_end) {
      run.completed = false;
      run.collapse_t = traj.t_last();
    }
    field.time = traj.t_last();
    const auto y_last = traj.state(traj.size() - 1);
    std::copy(y_last.begin(), y_last.end(), field.u.begin());
    run.grad_times.push_back(field.time);
    run.grad_max.push_back(max_gradient(field));
  }
  if (run.completed) field.time = t_end;
  run.numeric = field;
  compare(run, exact);
  run.grad_monotone = std::is_sorted(run.grad_max.begin(), run.grad_max.end(),
                                     [](double a, double b) { return a <= b; });
  return run;
}

PdeRefinement refinement_study(const ModelParams& params,
                               std::shared_ptr<const ProfileSolution> profile, double L,
                               std::size_t N, double t_end, const ode::Tolerances& tol) {
  PdeRefinement r;
  r.coarse = evolve_and_compare(params, profile, L, N, t_end, tol);
  r.fine = evolve_and_compare(params, profile, L, 2 * N - 1, t_end, tol);
  r.ratio = r.fine.max_rel_err > 0.0 ? r.coarse.max_rel_err / r.fine.max_rel_err : 0.0;
  return r;
}

}  // namespace kpzss
