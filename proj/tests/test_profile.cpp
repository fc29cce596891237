#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "kpzss/csv.hpp"
#include "kpzss/error.hpp"
#include "kpzss/profile.hpp"

using namespace kpzss;

namespace {

ModelParams mp(double lambda, double q) {
  ModelParams p;
  p.lambda = lambda;
  p.q = q;
  return p;
}

const ProfileSolution& base_solution() {
  static const ProfileSolution sol = solve_profile(mp(1.0, 3.0), -1.0);
  return sol;
}

}  // namespace

TEST_CASE("self-similar exponents") {
  CHECK(exponents(mp(1, 3)).alpha == 0.25);
  CHECK(exponents(mp(1, 3)).beta == -0.5);
  CHECK(exponents(mp(1, 4)).alpha == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(std::abs(exponents(mp(1, 2.0 + 1e-9)).alpha) < 1e-9);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(mp(1, 2).validate(), UsageError);
  CHECK_THROWS_AS(mp(0, 3).validate(), UsageError);
  CHECK_THROWS_AS(mp(-1, 3).validate(), UsageError);
  ModelParams p = mp(1, 3);
  p.T0 = 0.0;
  CHECK_THROWS_AS(p.validate(), UsageError);
  CHECK_NOTHROW(mp(0.5, 2.5).validate());
}

TEST_CASE("profile right-hand side") {
  for (double lambda : {0.5, 1.0, 2.0}) {
    for (double q : {2.5, 3.0, 4.0}) {
      const auto p = mp(lambda, q);
      const double a = exponents(p).alpha;
      const auto neg = profile_rhs(0.0, {-1.0, 0.0}, p);
      CHECK(neg[0] == 0.0);
      CHECK(neg[1] == a);
      const auto pos = profile_rhs(0.0, {0.7, 0.0}, p);
      CHECK(pos[1] == -a * 0.7);
      CHECK(pos[1] < 0.0);
    }
  }
  const auto r = profile_rhs(1.0, {0.0, 1.0}, mp(1, 3));
  CHECK(r[0] == 1.0);
  CHECK(r[1] == -0.5);
  CHECK(abs_pow(0.0, 2.5) == 0.0);
  CHECK(abs_pow(-2.0, 3.0) == 8.0);
}

TEST_CASE("solve_profile preconditions") {
  CHECK_THROWS_AS(solve_profile(mp(1, 3), 0.0), UsageError);
  CHECK_THROWS_AS(solve_profile(mp(1, 3), -1.0, 0.0), UsageError);
  CHECK_THROWS_AS(solve_profile(mp(1, 3), -1.0, -5.0), UsageError);
}

TEST_CASE("state at the origin is exact") {
  const auto& sol = base_solution();
  CHECK(sol.trajectory.time(0) == 0.0);
  CHECK(sol.trajectory.state(0)[0] == -1.0);
  CHECK(sol.trajectory.state(0)[1] == 0.0);
  CHECK(sol.f(0.0) == -1.0);
  CHECK(sol.fp(0.0) == 0.0);
}

TEST_CASE("small-xi Taylor expansion") {
  // f = -1 + a xi^2/2 + a(1-a) xi^4/24 + O(xi^6); the quartic term is
  // 7.8e-11 at xi = 0.01, so the two-term form alone cannot meet 1e-12.
  const auto& sol = base_solution();
  const double a = 0.25, xi = 0.01;
  const double two_term = -1.0 + 0.5 * a * xi * xi;
  const double four_term = two_term + a * (1.0 - a) * std::pow(xi, 4) / 24.0;
  CHECK(std::abs(sol.f(xi) - four_term) < 1e-12);
  CHECK(std::abs(sol.f(xi) - (-1.0 + 1.25e-5)) < 1e-10);
  CHECK(std::abs(sol.f(xi) - two_term) > 1e-11);
}

TEST_CASE("f0 = -1 run reaches xi_max with one zero") {
  const auto& sol = base_solution();
  CHECK(sol.termination.reason == ode::Termination::Reason::reached_t_end);
  CHECK(sol.xi_max_reached == kDefaultXiMax);
  CHECK(sol.invariant_violations.empty());
  REQUIRE(sol.xi0.has_value());
  CHECK(std::abs(sol.f(*sol.xi0)) < 1e-9);
  CHECK(count_sign_changes(sol) == 1);
  for (const auto& n : sol.nodes()) {
    if (n.xi > 0.0 && n.xi < *sol.xi0) CHECK(n.f < 0.0);
    if (n.xi > *sol.xi0) CHECK(n.f > 0.0);
  }
}

TEST_CASE("xi0 agrees across tolerances an order apart") {
  ode::Tolerances loose;
  loose.rel_tol = 1e-9;
  loose.abs_tol = 1e-11;
  const auto a = solve_profile(mp(1, 3), -1.0, 100.0, loose);
  const auto b = solve_profile(mp(1, 3), -1.0, 100.0, loose.tightened(10.0));
  REQUIRE(a.xi0.has_value());
  REQUIRE(b.xi0.has_value());
  CHECK(std::abs(*a.xi0 - *b.xi0) < 1e-7 * *b.xi0);
  CHECK(std::abs(*b.xi0 - *base_solution().xi0) < 1e-8 * *b.xi0);
}

TEST_CASE("f0 = +1 collapses at finite xi") {
  const auto sol = solve_profile(mp(1, 3), 1.0);
  CHECK(sol.collapsed());
  CHECK(sol.xi_max_reached < 10.0);
  CHECK(sol.invariant_violations.empty());
}

TEST_CASE("monotonicity lemma over the parameter grid") {
  for (double lambda : {0.5, 1.0, 2.0}) {
    for (double q : {2.5, 3.0, 4.0}) {
      CAPTURE(lambda);
      CAPTURE(q);
      const auto sol = solve_profile(mp(lambda, q), -1.0, 100.0);
      const auto rep = check_lemma_monotonicity(sol);
      CHECK(rep.passed());
      CHECK(rep.nodes_checked + 1 == sol.trajectory.size());
      CHECK(count_sign_changes(sol) == 1);
    }
  }
}

TEST_CASE("monotonicity check refuses positive f0 and finds planted defects") {
  const auto pos = solve_profile(mp(1, 3), 1.0);
  CHECK_THROWS_AS(check_lemma_monotonicity(pos), UsageError);

  auto nodes = solve_profile(mp(1, 3), -1.0, 50.0).nodes();
  REQUIRE(nodes.size() > 10);
  const std::size_t k = nodes.size() / 2;
  nodes[k].fp = -1e-3;
  const auto rep = check_lemma_monotonicity(mp(1, 3), nodes);
  REQUIRE(rep.violations.size() >= 1);
  bool found = false;
  for (const auto& v : rep.violations) found = found || v.xi == nodes[k].xi;
  CHECK(found);
}

TEST_CASE("gradient bound") {
  for (double q : {2.5, 3.0, 4.0, 7.0}) CHECK(gradient_bound(2.0, mp(1, q)) == 1.0);
  CHECK(gradient_bound(4.0, mp(2, 2.5)) == 1.0);

  const auto& sol = base_solution();
  CHECK(check_gradient_bound(sol).passed());

  const auto sol2 = solve_profile(mp(2, 2.5), -1.0);
  const auto rep = check_gradient_bound(sol2);
  CHECK(rep.passed());
  CHECK(rep.nodes_checked > 100);
  const auto tight = solve_profile(mp(2, 2.5), -1.0, kDefaultXiMax, ode::Tolerances{}.tightened(10.0));
  CHECK(check_gradient_bound(tight).passed());

  auto nodes = sol.nodes();
  const std::size_t k = nodes.size() - 5;
  nodes[k].fp = 2.0 * gradient_bound(nodes[k].xi, sol.params);
  const auto bad = check_gradient_bound(sol.params, *sol.xi0, nodes);
  REQUIRE(bad.violations.size() == 1);
  CHECK(bad.violations[0].xi == nodes[k].xi);
}

TEST_CASE("rescaling of the initial value") {
  const auto id = rescale_initial_value(mp(1, 3), -1.0);
  CHECK(id.params.lambda == 1.0);
  CHECK(id.scale == 1.0);
  const auto r = rescale_initial_value(mp(1, 3), -2.0);
  CHECK(r.params.lambda == 4.0);
  CHECK(r.params.q == 3.0);
  CHECK(r.scale == 2.0);
  CHECK_THROWS_AS(rescale_initial_value(mp(1, 3), 0.0), UsageError);
  CHECK_THROWS_AS(rescale_initial_value(mp(1, 3), 1.0), UsageError);

  for (auto [lambda, q, f0] : {std::tuple{1.0, 3.0, -2.0}, {0.5, 2.5, -3.0}, {2.0, 4.0, -0.5}}) {
    const auto direct = solve_profile(mp(lambda, q), f0, 100.0);
    const auto rs = rescale_initial_value(mp(lambda, q), f0);
    const auto unit = solve_profile(rs.params, -1.0, 100.0);
    for (double xi : {0.5, 1.0, 2.0, 5.0, 20.0}) {
      const double a = direct.f(xi), b = rs.scale * unit.f(xi);
      CHECK(std::abs(a - b) < 1e-8 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST_CASE("dense output agrees with tighter re-integration") {
  const auto& sol = base_solution();
  const auto tight = solve_profile(mp(1, 3), -1.0, kDefaultXiMax, ode::Tolerances{}.tightened(10.0));
  const auto& tol = sol.trajectory.tolerances();
  double worst = 0.0;
  for (double xi = 1e-3; xi < kDefaultXiMax; xi *= 1.37) {
    const double ref = tight.f(xi);
    worst = std::max(worst, std::abs(sol.f(xi) - ref) / (10.0 * (tol.abs_tol + tol.rel_tol * std::abs(ref))));
  }
  CHECK(worst < 1.0);
}

TEST_CASE("ODE residual of the dense output") {
  for (double lambda : {0.5, 1.0, 2.0}) {
    for (double q : {2.5, 3.0, 4.0}) {
      const auto rep = check_ode_residual(solve_profile(mp(lambda, q), -1.0));
      CAPTURE(rep.xi_at_max);
      CHECK(rep.samples == 1000);
      CHECK(rep.passed());
    }
  }
}

TEST_CASE("profile CSV export") {
  const auto& sol = base_solution();
  std::ostringstream os;
  write_profile_csv(os, sol);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "xi,f,fp,fpp");
  std::vector<double> xs;
  while (std::getline(is, line)) xs.push_back(std::stod(line.substr(0, line.find(','))));
  REQUIRE(xs.size() == kProfileCsvRows);
  CHECK(xs.front() == 0.0);
  CHECK(xs.back() == sol.xi_max_reached);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) CHECK(xs[i] < xs[i + 1]);
  CHECK(std::stod(format_double(0.1)) == 0.1);
  CHECK(format_double(0.1) == "0.1");
}
