#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kpzss::ode {

using State = std::vector<double>;

// dydt = f(t, y); the output span has the same length as y.
using RhsFunction =
    std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

// Row-major n x n Jacobian d f_i / d y_j.
using JacobianFunction =
    std::function<void(double t, std::span<const double> y, std::span<double> jac)>;

struct IvpSpec {
  std::size_t dimension = 0;
  RhsFunction rhs;
  double t_start = 0.0;
  double t_end = 0.0;
  State y_start;
  // Optional; the implicit method falls back to forward differences.
  JacobianFunction jacobian;
  // false: the trajectory keeps only the last accepted segment (large
  // systems where the history does not fit in memory).
  bool keep_history = true;

  void validate() const;
};

// Mixed error criterion abs_tol + rel_tol * |y| per component. min_step is
// relative: a step collapses once it would fall below min_step * max(1, |t|).
// max_step_rel caps steps at max_step_rel * max(1, |t|) on top of max_step.
struct Tolerances {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  double max_step_rel = std::numeric_limits<double>::infinity();
  double min_step = 1e-14;

  void validate() const;
  Tolerances tightened(double factor) const;
};

enum class EventKind { sign_change_of_component, threshold_on_component, step_collapse };
enum class Direction { rising, falling, any };

struct Event {
  EventKind kind = EventKind::sign_change_of_component;
  std::size_t component_index = 0;
  double threshold = 0.0;
  Direction direction = Direction::any;
  // Non-terminal events are recorded and integration continues.
  bool terminal = true;

  static Event sign_change(std::size_t component, bool terminal = false,
                           Direction direction = Direction::any);
  static Event crossing(std::size_t component, double threshold, Direction direction,
                        bool terminal = true);
  static Event collapse();
};

struct EventHit {
  std::size_t event_id = 0;
  double t = 0.0;
  State y;
};

struct Termination {
  enum class Reason { reached_t_end, event_fired, step_collapsed };
  Reason reason = Reason::reached_t_end;
  std::size_t event_id = 0;  // valid for event_fired
  double t = 0.0;            // t_end, t_event or t_last

  std::string label() const;
};

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
  std::size_t jacobian_evaluations = 0;
  std::size_t newton_failures = 0;
};

enum class Method {
  dormand_prince,  // explicit 5(4), FSAL, quartic dense output
  radau_iia,       // implicit 3-stage order 5, step doubling, quintic Hermite dense output
};

// Accepted nodes plus one polynomial per node interval. Immutable once
// returned from integrate().
class Trajectory {
 public:
  Trajectory() = default;

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return times_.size(); }
  std::span<const double> times() const { return times_; }
  double time(std::size_t i) const { return times_[i]; }
  std::span<const double> state(std::size_t i) const;
  double t_first() const { return times_.front(); }
  double t_last() const { return times_.back(); }

  // Exact node values at node abscissae; interpolant elsewhere.
  State dense_eval(double t) const;
  double dense_eval(double t, std::size_t component) const;
  // d/dt of the interpolant; at a node, the segment to its right (left at the end).
  double dense_derivative(double t, std::size_t component) const;

  const Termination& termination() const { return termination_; }
  const StepStats& stats() const { return stats_; }
  const std::vector<EventHit>& events() const { return hits_; }
  const Tolerances& tolerances() const { return tol_; }
  Method method() const { return method_; }

 private:
  friend class TrajectoryBuilder;

  std::size_t segment_index(double t) const;

  std::size_t dim_ = 0;
  std::vector<double> times_;
  std::vector<double> states_;  // size() * dim_, row per node
  // Segment i spans [times_[i], times_[i+1]]; coefficients in the local
  // variable theta in [0, 1], stored component-major with stride order_+1.
  std::size_t order_ = 0;
  std::vector<double> coeffs_;
  Termination termination_;
  StepStats stats_;
  std::vector<EventHit> hits_;
  Tolerances tol_;
  Method method_ = Method::dormand_prince;
};

Trajectory integrate(const IvpSpec& spec, const Tolerances& tol,
                     std::span<const Event> events = {},
                     Method method = Method::dormand_prince);

// Smallest t where the component's interpolant crosses zero, refined by
// bisection on the dense output. Throws UsageError for a bad component.
std::optional<double> locate_sign_change(const Trajectory& traj, std::size_t component);

}  // namespace kpzss::ode
