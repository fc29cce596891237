#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "kpzss/polynomial.hpp"
#include "stepper.hpp"

namespace kpzss::ode::detail {
namespace {

// Three-stage Radau IIA collocation (order 5, stiffly accurate, L-stable).
const double kSqrt6 = std::sqrt(6.0);
const std::array<double, 3> kC = {(4.0 - kSqrt6) / 10.0, (4.0 + kSqrt6) / 10.0, 1.0};
const double kA[3][3] = {
    {(88.0 - 7.0 * kSqrt6) / 360.0, (296.0 - 169.0 * kSqrt6) / 1800.0,
     (-2.0 + 3.0 * kSqrt6) / 225.0},
    {(296.0 + 169.0 * kSqrt6) / 1800.0, (88.0 + 7.0 * kSqrt6) / 360.0,
     (-2.0 - 3.0 * kSqrt6) / 225.0},
    {(16.0 - kSqrt6) / 36.0, (16.0 + kSqrt6) / 36.0, 1.0 / 9.0},
};

// L_k'(1) for the Lagrange basis on {0, c1, c2, 1}.
const std::array<double, 4> kEndWeights = [] {
  const std::array<double, 4> x = {0.0, kC[0], kC[1], kC[2]};
  std::array<double, 4> w{};
  for (std::size_t k = 0; k < 3; ++k) {
    double num = 1.0, den = 1.0;
    for (std::size_t m = 0; m < 4; ++m) {
      if (m == k) continue;
      den *= x[k] - x[m];
      if (m != 3) num *= 1.0 - x[m];
    }
    w[k] = num / den;
  }
  for (std::size_t m = 0; m < 3; ++m) w[3] += 1.0 / (1.0 - x[m]);
  return w;
}();

constexpr int kMaxNewton = 12;
constexpr double kNewtonAccept = 1e-3;

// Dense LU with partial pivoting; returns false if singular.
bool solve_in_place(std::vector<double>& m, std::vector<double>& rhs, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(m[col * n + col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::abs(m[r * n + col]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (!(best > 0.0) || !std::isfinite(best)) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(m[piv * n + c], m[col * n + c]);
      std::swap(rhs[piv], rhs[col]);
    }
    const double inv = 1.0 / m[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = m[r * n + col] * inv;
      if (factor == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) m[r * n + c] -= factor * m[col * n + c];
      rhs[r] -= factor * rhs[col];
    }
  }
  for (std::size_t r = n; r-- > 0;) {
    double acc = rhs[r];
    for (std::size_t c = r + 1; c < n; ++c) acc -= m[r * n + c] * rhs[c];
    rhs[r] = acc / m[r * n + r];
  }
  return true;
}

class Radau final : public Stepper {
 public:
  Radau(const IvpSpec& spec, const Tolerances& tol, StepStats& stats)
      : spec_(spec), tol_(tol), stats_(stats), n_(spec.dimension) {}

  double order() const override { return 6.0; }
  std::size_t dense_degree() const override { return 5; }

  StepAttempt attempt(double t, std::span<const double> y, std::span<const double> f,
                      double t_new) override {
    StepAttempt out;
    const double h = t_new - t;
    const double t_mid = t + 0.5 * h;

    auto big = solve_stages(t, y, h);
    if (!big) return fail(out);
    auto first = solve_stages(t, y, 0.5 * h);
    if (!first) return fail(out);
    State y_mid(first->begin() + 2 * n_, first->end());
    auto second = solve_stages(t_mid, y_mid, 0.5 * h);
    if (!second) return fail(out);
    State y_new(second->begin() + 2 * n_, second->end());

    // Richardson estimate for the two half steps: (y_half - y_full) / (2^5 - 1).
    State err(n_);
    for (std::size_t i = 0; i < n_; ++i) err[i] = (y_new[i] - (*big)[2 * n_ + i]) / 31.0;
    out.error_norm = error_norm(err, y, y_new, tol_);

    const State f_mid = end_slope(y, *first, 0.5 * h);
    State f_new = end_slope(y_mid, *second, 0.5 * h);
    if (!all_finite(y_new) || !all_finite(f_mid) || !all_finite(f_new) ||
        !std::isfinite(out.error_norm)) {
      return fail(out);
    }

    const std::array<double, 3> nodes = {0.0, 0.5, 1.0};
    StepPiece left, right;
    left.t1 = t_mid;
    right.t1 = t_new;
    left.coeffs.reserve(n_ * 6);
    right.coeffs.reserve(n_ * 6);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::array<double, 3> values = {y[i], y_mid[i], y_new[i]};
      const std::array<double, 3> slopes = {h * f[i], h * f_mid[i], h * f_new[i]};
      const auto poly = poly::hermite_interpolant(nodes, values, slopes);
      const auto a = poly::restrict_to(poly, 0.0, 0.5);
      const auto b = poly::restrict_to(poly, 0.5, 1.0);
      left.coeffs.insert(left.coeffs.end(), a.begin(), a.end());
      right.coeffs.insert(right.coeffs.end(), b.begin(), b.end());
    }
    left.y1 = std::move(y_mid);
    right.y1 = std::move(y_new);
    out.pieces.push_back(std::move(left));
    out.pieces.push_back(std::move(right));
    out.f_end = std::move(f_new);
    return out;
  }

 private:
  StepAttempt& fail(StepAttempt& out) {
    out.usable = false;
    out.pieces.clear();
    return out;
  }

  // Derivative of the collocation polynomial at the end of a step, from
  // the stage values. Equals f(Y3) in exact arithmetic but avoids
  // evaluating f on stiff components, where round-off in y is amplified
  // by the Jacobian.
  State end_slope(std::span<const double> y, const State& z, double h) const {
    State s(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = kEndWeights[0] * y[i];
      for (std::size_t k = 0; k < 3; ++k) acc += kEndWeights[k + 1] * z[k * n_ + i];
      s[i] = acc / h;
    }
    return s;
  }

  void jacobian(double t, std::span<const double> y, std::span<const double> fy,
                std::span<double> jac) {
    ++stats_.jacobian_evaluations;
    if (spec_.jacobian) {
      spec_.jacobian(t, y, jac);
      return;
    }
    State yp(y.begin(), y.end()), fp(n_);
    const double eps = std::sqrt(std::numeric_limits<double>::epsilon());
    for (std::size_t j = 0; j < n_; ++j) {
      const double delta = eps * std::max(std::abs(y[j]), 1.0);
      yp[j] = y[j] + delta;
      spec_.rhs(t, yp, fp);
      ++stats_.rhs_evaluations;
      for (std::size_t i = 0; i < n_; ++i) jac[i * n_ + j] = (fp[i] - fy[i]) / delta;
      yp[j] = y[j];
    }
  }

  // Full Newton on the 3n stage equations Y_i = y + h sum_j a_ij f(Y_j).
  // Returns the stacked stage values; the last block is the step result.
  std::optional<State> solve_stages(double t, std::span<const double> y, double h) {
    const std::size_t m = 3 * n_;
    State z(m);
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t i = 0; i < n_; ++i) z[s * n_ + i] = y[i];

    std::vector<double> fz(m), jz(3 * n_ * n_), mat(m * m), rhs(m);
    double prev = std::numeric_limits<double>::infinity();
    int polish = 0;
    for (int it = 0; it < kMaxNewton; ++it) {
      for (std::size_t s = 0; s < 3; ++s) {
        std::span<const double> ys(z.data() + s * n_, n_);
        std::span<double> fs(fz.data() + s * n_, n_);
        spec_.rhs(t + kC[s] * h, ys, fs);
        ++stats_.rhs_evaluations;
        if (!all_finite(fs)) return std::nullopt;
        jacobian(t + kC[s] * h, ys, fs, std::span<double>(jz.data() + s * n_ * n_, n_ * n_));
      }
      for (std::size_t s = 0; s < 3; ++s) {
        for (std::size_t i = 0; i < n_; ++i) {
          double acc = 0.0;
          for (std::size_t r = 0; r < 3; ++r) acc += kA[s][r] * fz[r * n_ + i];
          rhs[s * n_ + i] = -(z[s * n_ + i] - y[i] - h * acc);
        }
      }
      for (std::size_t s = 0; s < 3; ++s) {
        for (std::size_t r = 0; r < 3; ++r) {
          const double ha = h * kA[s][r];
          for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
              double v = -ha * jz[r * n_ * n_ + i * n_ + j];
              if (s == r && i == j) v += 1.0;
              mat[(s * n_ + i) * m + (r * n_ + j)] = v;
            }
          }
        }
      }
      if (!solve_in_place(mat, rhs, m)) return std::nullopt;
      double nrm = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        z[k] += rhs[k];
        const double scale = tol_.abs_tol + tol_.rel_tol * std::abs(z[k]);
        nrm = std::max(nrm, std::abs(rhs[k]) / scale);
      }
      if (!std::isfinite(nrm)) return std::nullopt;
      if (nrm <= kNewtonAccept) {
        // Converged to tolerance; a couple more sweeps bring the stage
        // equations to round-off, which keeps stiff components on their
        // slow manifold.
        if (++polish >= 2 || nrm == 0.0) return z;
      } else if (it >= 2 && nrm > 2.0 * prev) {
        break;
      }
      prev = nrm;
    }
    if (polish > 0) return z;
    ++stats_.newton_failures;
    return std::nullopt;
  }

  const IvpSpec& spec_;
  const Tolerances& tol_;
  StepStats& stats_;
  std::size_t n_;
};

}  // namespace

std::unique_ptr<Stepper> make_radau(const IvpSpec& spec, const Tolerances& tol,
                                    StepStats& stats) {
  return std::make_unique<Radau>(spec, tol, stats);
}

}  // namespace kpzss::ode::detail
