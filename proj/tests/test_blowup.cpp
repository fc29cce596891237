#include <doctest.h>

#include <cmath>
#include <vector>

#include "kpzss/blowup.hpp"
#include "kpzss/error.hpp"

using namespace kpzss;

namespace {

ModelParams mp(double lambda, double q) {
  ModelParams p;
  p.lambda = lambda;
  p.q = q;
  return p;
}

}  // namespace

TEST_CASE("lambda=1, q=3, f0=1 gives a finite certified bracket") {
  const auto r = detect_blowup(mp(1, 3), 1.0);
  CHECK(r.stop == BlowupStop::gradient_threshold);
  CHECK(r.collapsed());
  CHECK(r.invariant_violations.empty());
  CHECK(std::isfinite(r.xi_star_bracket.lo));
  CHECK(std::isfinite(r.xi_star_bracket.hi));
  CHECK(r.xi_star_bracket.lo < r.xi_star_bracket.hi);
  CHECK(r.bracket_width() < 1e-6);
  CHECK(std::abs(r.fp_at_collapse) > 1e6);
  CHECK(r.last_state.xi > r.xi_star_bracket.lo);
  CHECK(r.last_state.xi < r.xi_star_bracket.hi);
  CHECK(r.xi_switch > 0.0);
  CHECK(r.xi_switch < r.xi_star_bracket.lo);
  CHECK(std::isfinite(r.f_at_collapse));
  REQUIRE(r.apriori_bounds.size() == kAprioriSamples);
  double tightest = INFINITY;
  for (const auto& b : r.apriori_bounds) {
    CHECK(b.fp1 < 0.0);
    CHECK(b.certified() >= r.last_state.xi);
    tightest = std::min(tightest, b.certified());
  }
  CHECK(r.xi_star_bracket.hi == tightest);
}

TEST_CASE("bracket shrinks when tolerances tighten by 100") {
  ode::Tolerances loose;
  loose.rel_tol = 1e-8;
  loose.abs_tol = 1e-10;
  const auto a = detect_blowup(mp(1, 3), 1.0, loose);
  const auto b = detect_blowup(mp(1, 3), 1.0, loose.tightened(100.0));
  CHECK(b.bracket_width() * 2.0 <= a.bracket_width());
  // Both brackets hold the same xi_star.
  CHECK(b.xi_star_bracket.lo <= a.xi_star_bracket.hi);
  CHECK(a.xi_star_bracket.lo <= b.xi_star_bracket.hi);
}

TEST_CASE("brackets across five decades of tolerance contain the tightest estimate") {
  ode::Tolerances tight;
  tight.rel_tol = 1e-13;
  tight.abs_tol = 1e-15;
  const double ref = detect_blowup(mp(1, 3), 1.0, tight).last_state.xi;
  for (double rtol : {1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11}) {
    ode::Tolerances tol;
    tol.rel_tol = rtol;
    tol.abs_tol = rtol * 1e-2;
    const auto r = detect_blowup(mp(1, 3), 1.0, tol);
    CAPTURE(rtol);
    CHECK(r.xi_star_bracket.lo < ref);
    CHECK(ref < r.xi_star_bracket.hi);
  }
}

TEST_CASE("differential inequality at every node including the origin") {
  const auto r = detect_blowup(mp(1, 3), 1.0);
  REQUIRE(r.nodes.front().xi == 0.0);
  const auto rep = check_differential_inequality(r);
  CHECK(rep.passed());
  CHECK(rep.nodes_checked == r.nodes.size());
  // Near breakdown xi advances by less than an ulp per tau step, so only
  // f' is strictly ordered there.
  for (std::size_t i = 0; i + 1 < r.nodes.size(); ++i) {
    CHECK(r.nodes[i].xi <= r.nodes[i + 1].xi);
    CHECK(r.nodes[i].fp > r.nodes[i + 1].fp);
  }
  for (std::size_t i = 1; i < r.nodes.size(); ++i) CHECK(r.nodes[i].fp < 0.0);
}

TEST_CASE("inequality check on a plain xi integration") {
  const auto sol = solve_profile(mp(1, 3), 1.0);
  CHECK(sol.collapsed());
  CHECK(check_differential_inequality(sol).passed());
  CHECK_THROWS_AS(check_differential_inequality(solve_profile(mp(1, 3), -1.0, 10.0)), UsageError);
}

TEST_CASE("inequality check flags a planted defect") {
  auto nodes = detect_blowup(mp(1, 3), 1.0).nodes;
  const std::size_t k = nodes.size() / 3;
  nodes[k].fp = 0.05;
  const auto rep = check_differential_inequality(mp(1, 3), nodes);
  REQUIRE_FALSE(rep.passed());
  bool found = false;
  for (const auto& v : rep.violations) found = found || v.xi == nodes[k].xi;
  CHECK(found);
}

TEST_CASE("f0 must be positive") {
  CHECK_THROWS_AS(detect_blowup(mp(1, 3), 0.0), UsageError);
  CHECK_THROWS_AS(detect_blowup(mp(1, 3), -1.0), UsageError);
  CHECK(to_string(BlowupStop::gradient_threshold) == "gradient_threshold");
  CHECK(to_string(BlowupStop::reached_xi_max) == "reached_xi_max");
}

TEST_CASE("every grid cell breaks down at finite xi") {
  for (double lambda : {0.5, 1.0, 2.0}) {
    for (double q : {2.5, 3.0, 4.0}) {
      for (double f0 : {0.5, 1.0, 2.0}) {
        CAPTURE(lambda);
        CAPTURE(q);
        CAPTURE(f0);
        const auto r = detect_blowup(mp(lambda, q), f0);
        CHECK(r.collapsed());
        CHECK(r.xi_star_bracket.hi < kDefaultXiMax);
        CHECK(std::abs(r.fp_at_collapse) > 1e6);
        CHECK(r.xi_star_bracket.lo < r.xi_star_bracket.hi);
        CHECK(check_differential_inequality(r).passed());
      }
    }
  }
}

TEST_CASE("brackets are consistent under the f0 rescaling") {
  // f = f0 h maps (lambda, f0) to (lambda f0^(q-1), 1) with the same xi_star.
  const auto a = detect_blowup(mp(0.5, 3), 2.0);
  const auto b = detect_blowup(mp(2.0, 3), 1.0);
  CHECK(a.xi_star_bracket.lo < b.xi_star_bracket.hi);
  CHECK(b.xi_star_bracket.lo < a.xi_star_bracket.hi);
  CHECK(std::abs(a.xi_star_bracket.lo - b.xi_star_bracket.lo) < 1e-8);
}

TEST_CASE("larger f0 breaks down earlier (observation)") {
  const auto one = detect_blowup(mp(1, 3), 1.0);
  const auto two = detect_blowup(mp(1, 3), 2.0);
  WARN(two.xi_star_bracket.hi < one.xi_star_bracket.lo);
  MESSAGE("xi_star(f0=1) in [" << one.xi_star_bracket.lo << ", " << one.xi_star_bracket.hi
                               << "], xi_star(f0=2) in [" << two.xi_star_bracket.lo << ", "
                               << two.xi_star_bracket.hi << "]");
}
