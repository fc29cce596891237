#pragma once

#include <memory>
#include <span>
#include <vector>

#include "kpzss/ode.hpp"

namespace kpzss::ode {

// Accumulates nodes and segment polynomials for a Trajectory.
class TrajectoryBuilder {
 public:
  TrajectoryBuilder(std::size_t dim, std::size_t degree, const Tolerances& tol, Method method,
                    bool keep_history = true);

  void start(double t, std::span<const double> y);
  void append(double t1, std::span<const double> y1, std::span<const double> coeffs);
  // Cuts the last segment at t (inside it) and makes (t, interpolant) the last node.
  void truncate_last(double t);
  void record(EventHit hit) { traj_.hits_.push_back(std::move(hit)); }

  const Trajectory& view() const { return traj_; }
  Trajectory finish(Termination term, const StepStats& stats);

 private:
  Trajectory traj_;
  bool keep_history_;
};

namespace detail {

struct StepPiece {
  double t1 = 0.0;
  State y1;
  std::vector<double> coeffs;  // dim * (degree + 1), component-major
};

struct StepAttempt {
  bool usable = true;  // false: non-finite values or failed nonlinear solve
  double error_norm = 0.0;
  std::vector<StepPiece> pieces;
  State f_end;
};

class Stepper {
 public:
  virtual ~Stepper() = default;
  // Exponent base of the error estimate: err ~ h^order.
  virtual double order() const = 0;
  virtual std::size_t dense_degree() const = 0;
  virtual StepAttempt attempt(double t, std::span<const double> y, std::span<const double> f,
                              double t_new) = 0;
};

std::unique_ptr<Stepper> make_dormand_prince(const IvpSpec& spec, const Tolerances& tol,
                                             StepStats& stats);
std::unique_ptr<Stepper> make_radau(const IvpSpec& spec, const Tolerances& tol,
                                    StepStats& stats);

double error_norm(std::span<const double> err, std::span<const double> y0,
                  std::span<const double> y1, const Tolerances& tol);

bool all_finite(std::span<const double> v);

}  // namespace detail
}  // namespace kpzss::ode
