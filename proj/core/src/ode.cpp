#include "kpzss/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kpzss/error.hpp"
#include "kpzss/polynomial.hpp"
#include "stepper.hpp"

namespace kpzss::ode {

void IvpSpec::validate() const {
  if (dimension < 1) throw UsageError("IvpSpec: dimension must be >= 1");
  if (y_start.size() != dimension) throw UsageError("IvpSpec: y_start size != dimension");
  if (!rhs) throw UsageError("IvpSpec: missing right-hand side");
  if (!std::isfinite(t_start) || !std::isfinite(t_end) || !(t_end > t_start))
    throw UsageError("IvpSpec: require finite t_end > t_start");
  if (!detail::all_finite(y_start)) throw UsageError("IvpSpec: y_start not finite");
}

void Tolerances::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
    throw UsageError("Tolerances: rel_tol and abs_tol must be positive");
  if (!(min_step > 0.0) || !(max_step > 0.0) || !(min_step < max_step))
    throw UsageError("Tolerances: require 0 < min_step < max_step");
  if (!(max_step_rel > min_step)) throw UsageError("Tolerances: require max_step_rel > min_step");
}

Tolerances Tolerances::tightened(double factor) const {
  Tolerances t = *this;
  t.rel_tol /= factor;
  t.abs_tol /= factor;
  return t;
}

Event Event::sign_change(std::size_t component, bool terminal, Direction direction) {
  return Event{EventKind::sign_change_of_component, component, 0.0, direction, terminal};
}

Event Event::crossing(std::size_t component, double threshold, Direction direction,
                      bool terminal) {
  return Event{EventKind::threshold_on_component, component, threshold, direction, terminal};
}

Event Event::collapse() { return Event{EventKind::step_collapse, 0, 0.0, Direction::any, true}; }

std::string Termination::label() const {
  switch (reason) {
    case Reason::reached_t_end: return "reached_t_end";
    case Reason::event_fired: return "event_fired";
    case Reason::step_collapsed: return "step_collapsed";
  }
  return "unknown";
}

// --- Trajectory -----------------------------------------------------------

std::span<const double> Trajectory::state(std::size_t i) const {
  return std::span<const double>(states_).subspan(i * dim_, dim_);
}

std::size_t Trajectory::segment_index(double t) const {
  if (times_.empty() || t < times_.front() || t > times_.back() || std::isnan(t)) {
    std::ostringstream os;
    os << "dense_eval: t=" << t << " outside [" << (times_.empty() ? 0.0 : times_.front())
       << ", " << (times_.empty() ? 0.0 : times_.back()) << "]";
    throw RangeError(os.str());
  }
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t idx = static_cast<std::size_t>(it - times_.begin());
  return idx == 0 ? 0 : idx - 1;
}

double Trajectory::dense_eval(double t, std::size_t component) const {
  if (component >= dim_) throw UsageError("dense_eval: component out of range");
  const std::size_t i = segment_index(t);
  if (times_[i] == t || i + 1 == times_.size()) return states_[i * dim_ + component];
  const double theta = (t - times_[i]) / (times_[i + 1] - times_[i]);
  const std::size_t stride = order_ + 1;
  return poly::horner(
      std::span<const double>(coeffs_).subspan((i * dim_ + component) * stride, stride), theta);
}

double Trajectory::dense_derivative(double t, std::size_t component) const {
  if (component >= dim_) throw UsageError("dense_derivative: component out of range");
  if (times_.size() < 2) throw UsageError("dense_derivative: need at least two nodes");
  std::size_t i = segment_index(t);
  if (i + 1 == times_.size()) --i;
  const double width = times_[i + 1] - times_[i];
  const double theta = (t - times_[i]) / width;
  const std::size_t stride = order_ + 1;
  const auto seg =
      std::span<const double>(coeffs_).subspan((i * dim_ + component) * stride, stride);
  double acc = 0.0;
  for (std::size_t k = stride; k-- > 1;) acc = acc * theta + static_cast<double>(k) * seg[k];
  return acc / width;
}

State Trajectory::dense_eval(double t) const {
  State out(dim_);
  for (std::size_t c = 0; c < dim_; ++c) out[c] = dense_eval(t, c);
  return out;
}

TrajectoryBuilder::TrajectoryBuilder(std::size_t dim, std::size_t degree, const Tolerances& tol,
                                     Method method, bool keep_history)
    : keep_history_(keep_history) {
  traj_.dim_ = dim;
  traj_.order_ = degree;
  traj_.tol_ = tol;
  traj_.method_ = method;
}

void TrajectoryBuilder::start(double t, std::span<const double> y) {
  traj_.times_.push_back(t);
  traj_.states_.insert(traj_.states_.end(), y.begin(), y.end());
}

void TrajectoryBuilder::append(double t1, std::span<const double> y1,
                               std::span<const double> coeffs) {
  if (!keep_history_ && traj_.times_.size() >= 2) {
    traj_.times_.erase(traj_.times_.begin());
    traj_.states_.erase(traj_.states_.begin(),
                        traj_.states_.begin() + static_cast<std::ptrdiff_t>(traj_.dim_));
    traj_.coeffs_.clear();
  }
  traj_.times_.push_back(t1);
  traj_.states_.insert(traj_.states_.end(), y1.begin(), y1.end());
  traj_.coeffs_.insert(traj_.coeffs_.end(), coeffs.begin(), coeffs.end());
}

void TrajectoryBuilder::truncate_last(double t) {
  auto& tr = traj_;
  const std::size_t n = tr.times_.size();
  const double t0 = tr.times_[n - 2];
  const double t1 = tr.times_[n - 1];
  if (t >= t1) return;
  const double theta = (t - t0) / (t1 - t0);
  const std::size_t stride = tr.order_ + 1;
  const std::size_t base = (n - 2) * tr.dim_ * stride;
  for (std::size_t c = 0; c < tr.dim_; ++c) {
    std::span<double> seg(tr.coeffs_.data() + base + c * stride, stride);
    tr.states_[(n - 1) * tr.dim_ + c] = poly::horner(seg, theta);
    auto cut = poly::restrict_to(seg, 0.0, theta);
    std::copy(cut.begin(), cut.end(), seg.begin());
  }
  tr.times_[n - 1] = t;
}

Trajectory TrajectoryBuilder::finish(Termination term, const StepStats& stats) {
  traj_.termination_ = term;
  traj_.stats_ = stats;
  return std::move(traj_);
}

namespace detail {

double error_norm(std::span<const double> err, std::span<const double> y0,
                  std::span<const double> y1, const Tolerances& tol) {
  double worst = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double scale = tol.abs_tol + tol.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    worst = std::max(worst, std::abs(err[i]) / scale);
  }
  return worst;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace detail

namespace {

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

bool crosses(double v0, double v1, Direction dir) {
  const bool rising = v0 < 0.0 && v1 >= 0.0;
  const bool falling = v0 > 0.0 && v1 <= 0.0;
  switch (dir) {
    case Direction::rising: return rising;
    case Direction::falling: return falling;
    case Direction::any: return rising || falling;
  }
  return false;
}

// Bisection on a segment polynomial for the first sign change of p - level.
double bisect_theta(std::span<const double> coeffs, double level, double v0) {
  double lo = 0.0, hi = 1.0;
  const bool neg_left = v0 < 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double v = poly::horner(coeffs, mid) - level;
    if ((v < 0.0) == neg_left && v != 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double initial_step(const IvpSpec& spec, const Tolerances& tol, std::span<const double> f0,
                    double order, StepStats& stats) {
  const std::size_t n = spec.dimension;
  const auto& y0 = spec.y_start;
  double d0 = 0.0, d1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sk = tol.abs_tol + tol.rel_tol * std::abs(y0[i]);
    d0 = std::max(d0, std::abs(y0[i]) / sk);
    d1 = std::max(d1, std::abs(f0[i]) / sk);
  }
  const double span = spec.t_end - spec.t_start;
  const double cap = std::min(tol.max_step, tol.max_step_rel * std::max(1.0, std::abs(spec.t_start)));
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min({h0, cap, span});
  State y1(n), f1(n);
  for (std::size_t i = 0; i < n; ++i) y1[i] = y0[i] + h0 * f0[i];
  spec.rhs(spec.t_start + h0, y1, f1);
  ++stats.rhs_evaluations;
  if (!detail::all_finite(f1)) return 0.1 * h0;
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sk = tol.abs_tol + tol.rel_tol * std::abs(y0[i]);
    d2 = std::max(d2, std::abs(f1[i] - f0[i]) / sk / h0);
  }
  const double dm = std::max(d1, d2);
  const double h1 = dm <= 1e-15 ? std::max(1e-6, 1e-3 * h0) : std::pow(0.01 / dm, 1.0 / order);
  return std::min({100.0 * h0, h1, cap, span});
}

}  // namespace

Trajectory integrate(const IvpSpec& spec, const Tolerances& tol, std::span<const Event> events,
                     Method method) {
  spec.validate();
  tol.validate();
  for (const auto& ev : events) {
    if (ev.kind != EventKind::step_collapse && ev.component_index >= spec.dimension)
      throw UsageError("Event: component_index >= dimension");
  }

  StepStats stats;
  auto stepper = method == Method::radau_iia ? detail::make_radau(spec, tol, stats)
                                             : detail::make_dormand_prince(spec, tol, stats);
  const std::size_t n = spec.dimension;
  const std::size_t degree = stepper->dense_degree();
  TrajectoryBuilder builder(n, degree, tol, method, spec.keep_history);

  double t = spec.t_start;
  State y = spec.y_start;
  State f(n);
  spec.rhs(t, y, f);
  ++stats.rhs_evaluations;
  builder.start(t, y);

  auto collapse = [&](double t_last) {
    for (std::size_t id = 0; id < events.size(); ++id) {
      if (events[id].kind == EventKind::step_collapse) builder.record(EventHit{id, t_last, y});
    }
    return builder.finish(
        Termination{Termination::Reason::step_collapsed, 0, t_last}, stats);
  };

  if (!detail::all_finite(f)) return collapse(t);

  double h = initial_step(spec, tol, f, stepper->order(), stats);
  double err_prev = 1e-4;
  bool last_rejected = false;
  const double k = stepper->order();

  while (t < spec.t_end) {
    const double remaining = spec.t_end - t;
    const double h_min = tol.min_step * std::max(1.0, std::abs(t));
    h = std::min({h, tol.max_step, tol.max_step_rel * std::max(1.0, std::abs(t))});
    double t_new;
    if (h >= remaining || t + 1.01 * h >= spec.t_end) {
      h = remaining;
      t_new = spec.t_end;
    } else {
      if (h < h_min) return collapse(t);
      t_new = t + h;
    }

    auto att = stepper->attempt(t, y, f, t_new);
    if (!att.usable) {
      ++stats.rejected;
      h *= 0.25;
      last_rejected = true;
      if (h < h_min && remaining > h_min) return collapse(t);
      continue;
    }
    const double err = att.error_norm;
    if (err > 1.0) {
      ++stats.rejected;
      h *= std::max(kMinFactor, kSafety * std::pow(err, -1.0 / k));
      last_rejected = true;
      continue;
    }

    ++stats.accepted;
    // Append pieces and scan events segment by segment.
    for (auto& piece : att.pieces) {
      const double t_left = builder.view().t_last();
      const std::size_t stride = degree + 1;
      std::vector<std::pair<double, std::size_t>> found;
      const auto left_state = builder.view().state(builder.view().size() - 1);
      for (std::size_t id = 0; id < events.size(); ++id) {
        const auto& ev = events[id];
        if (ev.kind == EventKind::step_collapse) continue;
        const double v0 = left_state[ev.component_index] - ev.threshold;
        const double v1 = piece.y1[ev.component_index] - ev.threshold;
        if (!crosses(v0, v1, ev.direction)) continue;
        std::span<const double> poly(piece.coeffs.data() + ev.component_index * stride, stride);
        const double theta = bisect_theta(poly, ev.threshold, v0);
        found.emplace_back(t_left + theta * (piece.t1 - t_left), id);
      }
      std::sort(found.begin(), found.end());
      builder.append(piece.t1, piece.y1, piece.coeffs);
      for (const auto& [te, id] : found) {
        const bool terminal = events[id].terminal;
        if (terminal) builder.truncate_last(te);
        builder.record(EventHit{id, te, builder.view().dense_eval(te)});
        if (terminal) {
          return builder.finish(Termination{Termination::Reason::event_fired, id, te}, stats);
        }
      }
    }

    t = t_new;
    y = att.pieces.back().y1;
    f = std::move(att.f_end);

    const double e = std::max(err, 1e-10);
    double fac = kSafety * std::pow(e, -0.7 / k) * std::pow(err_prev, 0.4 / k);
    fac = std::clamp(fac, kMinFactor, kMaxFactor);
    if (last_rejected) fac = std::min(fac, 1.0);
    h *= fac;
    err_prev = std::max(err, 1e-4);
    last_rejected = false;
  }

  return builder.finish(Termination{Termination::Reason::reached_t_end, 0, spec.t_end}, stats);
}

std::optional<double> locate_sign_change(const Trajectory& traj, std::size_t component) {
  if (component >= traj.dimension()) throw UsageError("locate_sign_change: component out of range");
  if (traj.size() < 2) throw UsageError("locate_sign_change: need at least two nodes");
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const double a = traj.state(i)[component];
    const double b = traj.state(i + 1)[component];
    if (!crosses(a, b, Direction::any)) continue;
    double lo = traj.time(i), hi = traj.time(i + 1);
    const bool neg_left = a < 0.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double v = traj.dense_eval(mid, component);
      if ((v < 0.0) == neg_left && v != 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return hi;
  }
  return std::nullopt;
}

}  // namespace kpzss::ode
