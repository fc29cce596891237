#include <array>
#include <cmath>

#include "stepper.hpp"

namespace kpzss::ode::detail {
namespace {

// Dormand & Prince (1980) 5(4) tableau with Shampine's quartic continuous
// extension.
constexpr std::array<double, 6> kC = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0};
constexpr double kA[6][5] = {
    {0, 0, 0, 0, 0},
    {1.0 / 5, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
};
constexpr std::array<double, 6> kB = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192,
                                      -2187.0 / 6784, 11.0 / 84};
constexpr std::array<double, 7> kE = {-71.0 / 57600, 0, 71.0 / 16695, -71.0 / 1920,
                                      17253.0 / 339200, -22.0 / 525, 1.0 / 40};
constexpr double kP[7][4] = {
    {1, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432},
    {0, 0, 0, 0},
    {0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933,
     87487479700.0 / 32700410799},
    {0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072},
    {0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408,
     701980252875.0 / 199316789632},
    {0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844},
    {0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423},
};

class DormandPrince final : public Stepper {
 public:
  DormandPrince(const IvpSpec& spec, const Tolerances& tol, StepStats& stats)
      : spec_(spec), tol_(tol), stats_(stats), n_(spec.dimension) {
    for (auto& k : k_) k.resize(n_);
    tmp_.resize(n_);
  }

  double order() const override { return 5.0; }
  std::size_t dense_degree() const override { return 4; }

  StepAttempt attempt(double t, std::span<const double> y, std::span<const double> f,
                      double t_new) override {
    const double h = t_new - t;
    StepAttempt out;
    std::copy(f.begin(), f.end(), k_[0].begin());
    for (std::size_t s = 1; s < 6; ++s) {
      for (std::size_t i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < s; ++j) acc += kA[s][j] * k_[j][i];
        tmp_[i] = y[i] + h * acc;
      }
      spec_.rhs(t + kC[s] * h, tmp_, k_[s]);
    }
    State y_new(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < 6; ++j) acc += kB[j] * k_[j][i];
      y_new[i] = y[i] + h * acc;
    }
    spec_.rhs(t_new, y_new, k_[6]);
    stats_.rhs_evaluations += 6;

    if (!all_finite(y_new) || !all_finite(k_[6])) {
      out.usable = false;
      return out;
    }
    State err(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < 7; ++j) acc += kE[j] * k_[j][i];
      err[i] = h * acc;
    }
    out.error_norm = error_norm(err, y, y_new, tol_);
    if (!std::isfinite(out.error_norm)) {
      out.usable = false;
      return out;
    }

    StepPiece piece;
    piece.t1 = t_new;
    piece.coeffs.assign(n_ * 5, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double* c = piece.coeffs.data() + i * 5;
      c[0] = y[i];
      for (std::size_t p = 0; p < 4; ++p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < 7; ++j) acc += kP[j][p] * k_[j][i];
        c[p + 1] = h * acc;
      }
    }
    piece.y1 = std::move(y_new);
    out.f_end = k_[6];
    out.pieces.push_back(std::move(piece));
    return out;
  }

 private:
  const IvpSpec& spec_;
  const Tolerances& tol_;
  StepStats& stats_;
  std::size_t n_;
  std::array<State, 7> k_;
  State tmp_;
};

}  // namespace

std::unique_ptr<Stepper> make_dormand_prince(const IvpSpec& spec, const Tolerances& tol,
                                             StepStats& stats) {
  return std::make_unique<DormandPrince>(spec, tol, stats);
}

}  // namespace kpzss::ode::detail
