#include "clab/contraction_harness.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace clab;

namespace {

SystemPtr burgers() { return make_system("burgers", 1.4, 1.0); }

ExperimentSpec burgers_spec(int n = 400) {
  ExperimentSpec s;
  s.grid = Grid1D::make(-2, 2, n);
  s.u_L = make_state({1.0});
  return s;
}

}  // namespace

TEST_SUITE("contraction_harness") {

TEST_CASE("cone speed: fallback when the fields agree") {
  auto b = burgers();
  Grid1D g = Grid1D::make(-1, 1, 100);
  auto traj = simulate(*b, riemann_data(g, make_state({1.5}), make_state({-0.5}), 0.0), SourceOperator::zero(), 0.4, 0.2);
  auto r = compute_r(*b, traj, traj, std::vector<double>(traj.size(), 0.0));
  CHECK(r.fallback);
  CHECK(r.pairs == 0);
  CHECK(r.r == doctest::Approx(2 * 1.5).epsilon(1e-12));
}

TEST_CASE("cone speed for burgers is max |2u + ub| / 3") {
  // q(u;v) = (u - v)^2 (2u + v) / 6 and eta(u|v) = (u - v)^2 / 2
  auto b = burgers();
  Grid1D g = Grid1D::make(0, 1, 200);
  std::vector<FieldSnapshot> u, ub;
  double expect = 0.0;
  for (int k = 0; k < 200; ++k) {
    FieldSnapshot a{g, 0.01 * k, Field(200)}, c{g, 0.01 * k, Field(200)};
    for (int j = 0; j < 200; ++j) {
      const double x = g.center(j), t = 0.01 * k;
      a.cells[j] = make_state({std::sin(3 * x + t)});
      c.cells[j] = make_state({0.5 * std::cos(2 * x - t)});
      if (std::abs(a.cells[j][0] - c.cells[j][0]) > 1e-6)
        expect = std::max(expect, std::abs(2 * a.cells[j][0] + c.cells[j][0]) / 3);
    }
    u.push_back(a);
    ub.push_back(c);
  }
  auto r = compute_r(*b, u, ub, std::vector<double>(u.size(), 0.0));
  CHECK_FALSE(r.fallback);
  CHECK(r.raw == doctest::Approx(expect).epsilon(1e-9));
  CHECK(r.r == doctest::Approx(1.05 * expect).epsilon(1e-9));
  // the certificate holds for every pair
  for (std::size_t k = 0; k < u.size(); ++k)
    for (int j = 0; j < 200; ++j) {
      const double e = rel_entropy(*b, u[k].cells[j], ub[k].cells[j]);
      CHECK(std::abs(rel_entropy_flux(*b, u[k].cells[j], ub[k].cells[j])) <= r.r * e + 1e-15);
    }
}

TEST_CASE("cone speed is stable under time subsampling") {
  auto s = make_system("isentropic_euler", 1.4, 1.0);
  ExperimentSpec spec;
  spec.grid = Grid1D::make(-2, 2, 200);
  spec.u_L = make_state({1.0, 1.3});
  spec.s_R = 0.3;
  spec.B = 0.6;
  spec.ball_center = make_state({1.2, 1.25});
  spec.rho = 0.2;
  auto run = run_experiment(*s, spec);
  std::vector<FieldSnapshot> u, ub;
  std::vector<double> X;
  for (std::size_t k = 0; k < run.u.size(); k += 2) {
    u.push_back(run.u[k]);
    ub.push_back(run.ubar[k]);
    X.push_back(run.shift.X[k]);
  }
  auto half = compute_r(*s, u, ub, X);
  CHECK(std::abs(half.r - run.r.r) <= 0.02 * run.r.r);
  CHECK(half.r <= run.r.r);
}

TEST_CASE("weighted relative entropy") {
  auto b = burgers();
  const int n = 4000;
  Grid1D g = Grid1D::make(0, 1, n);
  FieldSnapshot u{g, 0.0, Field(n)}, zero{g, 0.0, Field(n, make_state({0.0}))};
  for (int j = 0; j < n; ++j) u.cells[j] = make_state({g.center(j)});
  RefView self{&u, 0}, ref{&zero, 0};
  CHECK(weighted_relative_entropy(*b, u, self, 0.0, 0.5, 0.3, 0.1, 0.9) == 0.0);

  // eta(u|0) = x^2/2: a int_{0.1}^{0.5} + int_{0.5}^{0.9}
  const double a = 0.3;
  const double exact = a * (std::pow(0.5, 3) - std::pow(0.1, 3)) / 6 + (std::pow(0.9, 3) - std::pow(0.5, 3)) / 6;
  const double E = weighted_relative_entropy(*b, u, ref, 0.0, 0.5, a, 0.1, 0.9);
  CHECK(std::abs(E - exact) <= 1e-6 * exact);
  // a on the right part instead
  const double flipped = (std::pow(0.5, 3) - std::pow(0.1, 3)) / 6 + a * (std::pow(0.9, 3) - std::pow(0.5, 3)) / 6;
  CHECK(std::abs(weighted_relative_entropy(*b, u, ref, 0.0, 0.5, a, 0.1, 0.9, false) - flipped) <= 1e-6 * flipped);
  // a = 1 is half the L2 distance for a quadratic entropy, wherever h sits
  const double l2 = windowed_l2(u, ref, 0.0, 0.1, 0.9);
  CHECK(weighted_relative_entropy(*b, u, ref, 0.0, 0.37, 1.0, 0.1, 0.9) == doctest::Approx(0.5 * l2).epsilon(1e-13));
  // overlap weighting at a window edge inside a cell
  const double part = weighted_relative_entropy(*b, u, ref, 0.0, 0.5, 1.0, 0.10001, 0.5);
  CHECK(std::abs(part - (std::pow(0.5, 3) - std::pow(0.10001, 3)) / 6) < 1e-6 * part);

  CHECK_THROWS_AS(weighted_relative_entropy(*b, u, ref, 0.0, 0.95, a, 0.1, 0.9), Error);
  try {
    weighted_relative_entropy(*b, u, ref, 0.0, 0.5, a, -0.1, 0.9);
    FAIL("expected an extension error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Extension);
  }
}

TEST_CASE("shifted reference lookup") {
  Grid1D g = Grid1D::make(0, 1, 100);
  FieldSnapshot r{g, 0.0, Field(100)};
  for (int j = 0; j < 100; ++j) r.cells[j] = make_state({2 * g.center(j)});
  RefView v{&r, 0};
  // linear data is reproduced exactly by linear interpolation
  CHECK(v.at(40, 0.0)[0] == doctest::Approx(2 * g.center(40)).epsilon(1e-15));
  CHECK(v.at(40, 0.0037)[0] == doctest::Approx(2 * (g.center(40) + 0.0037)).epsilon(1e-13));
  CHECK(v.slope(40, 0.0037)[0] == doctest::Approx(2.0).epsilon(1e-12));
  Grid1D wide{-0.1, 1.1, 120};
  CHECK(grid_offset(g, wide) == 10);
}

TEST_CASE("gronwall fit") {
  std::vector<double> t, E, Xd;
  for (int k = 0; k <= 100; ++k) {
    t.push_back(0.01 * k);
    E.push_back(1e-3 * std::exp(2.0 * t.back()));
    Xd.push_back(0.0);
  }
  auto g = verify_gronwall(t, E, Xd, 1e-3, 0.0);
  CHECK(g.pass());
  CHECK(g.mu2 == 1.0);
  CHECK(g.mu1 == doctest::Approx(2.0).epsilon(1e-9));
  for (std::size_t k = 0; k < t.size(); ++k) CHECK(E[k] <= g.envelope[k] * (1 + 1e-12));

  // mu2 absorbs E(0) above the window mass
  auto g2 = verify_gronwall(t, E, Xd, 5e-4, 0.0);
  CHECK(g2.mu2 == doctest::Approx(2.0));
  CHECK(g2.mu1 == doctest::Approx(2.0).epsilon(1e-9));

  // shift control binds: int Xdot^2 = 4 t against 2e-3 (1 + e^{mu t})
  std::vector<double> Xs(t.size(), 2.0), flat(t.size(), 1e-3);
  auto gs = verify_gronwall(t, flat, Xs, 1e-3, 0.0);
  CHECK(gs.pass());
  CHECK(gs.mu1 > 0.0);
  CHECK(gs.xdot_integral == doctest::Approx(4.0).epsilon(1e-12));

  // growth beyond mu_max is a failure, not a clamp
  std::vector<double> steep;
  for (double s : t) steep.push_back(1e-3 * std::exp(50.0 * s));
  CHECK_FALSE(verify_gronwall(t, steep, Xd, 1e-3, 0.0, 10.0).pass());

  // zero initial distance: uniqueness branch
  std::vector<double> zeros(t.size(), 0.0);
  auto u = verify_gronwall(t, zeros, zeros, 0.0, 1e-10);
  CHECK(u.uniqueness_branch);
  CHECK(u.pass());
  std::vector<double> leak(t.size(), 1e-6);
  CHECK_FALSE(verify_gronwall(t, leak, zeros, 0.0, 1e-10).pass());
}

TEST_CASE("identical data stays identical") {
  auto b = burgers();
  auto spec = burgers_spec();
  spec.amplitude = 0.0;
  auto run = run_experiment(*b, spec);
  CHECK(run.gronwall.uniqueness_branch);
  CHECK(run.gronwall.pass());
  CHECK(run.gronwall.max_E <= run.gronwall.uniqueness_tol);
  for (double X : run.shift.X) CHECK(std::abs(X) < 1e-12);
}

TEST_CASE("burgers run: contraction, monotonicity, equivalence") {
  auto b = burgers();
  auto spec = burgers_spec();
  auto run = run_experiment(*b, spec);
  CHECK(run.gronwall.pass());
  CHECK(run.l2_equivalence_ok);
  CHECK(run.shift.X.front() == 0.0);
  CHECK(run.facts.lip_ok);
  // zero source and constant sides: E does not grow beyond the discretisation defect
  INFO("defect " << run.monotonicity_defect << ", E0 " << run.E.front());
  CHECK(run.monotonicity_defect <= 10 * spec.grid.dx());
  // same inputs, same numbers
  auto again = run_experiment(*b, spec);
  CHECK(again.E == run.E);
  CHECK(again.shift.h == run.shift.h);
}

TEST_CASE("envelope rate is insensitive to the perturbation size") {
  auto b = burgers();
  auto spec = burgers_spec();
  auto r1 = run_experiment(*b, spec);
  spec.amplitude *= 2;
  auto r2 = run_experiment(*b, spec);
  CHECK(r1.gronwall.pass());
  CHECK(r2.gronwall.pass());
  // E and the window mass both scale like amplitude^2
  CHECK(r2.gronwall.E0_window == doctest::Approx(4 * r1.gronwall.E0_window).epsilon(0.05));
  const double m1 = r1.gronwall.mu1, m2 = r2.gronwall.mu1;
  const bool both_zero = m1 < 1e-9 && m2 < 1e-9;
  CHECK((both_zero || std::abs(m2 - m1) < 0.5 * std::max(m1, m2)));
}

TEST_CASE("dissipation audit") {
  auto b = burgers();
  {
    // a pure shock on both fields: every term vanishes
    auto spec = burgers_spec();
    spec.amplitude = 0.0;
    auto run = run_experiment(*b, spec);
    auto a = dissipation_audit(*b, run, 10 * spec.grid.dx());
    CHECK(a.pass);
    for (double m : a.cumulative_margin) CHECK(std::abs(m) < 1e-12);
    CHECK(a.left.boundary == 0.0);
    // interior terms interpolate ubar at s - h, which leaves ulp-sized differences
    CHECK(std::abs(a.left.interior) < 1e-15);
    CHECK(std::abs(a.right.interior) < 1e-15);
  }
  for (int n : {200, 400, 800}) {
    auto spec = burgers_spec(n);
    spec.amplitude = 0.02;
    spec.source = SourceOperator::linear(-0.1);
    auto run = run_experiment(*b, spec);
    auto a = dissipation_audit(*b, run, spec.tolerance_factor * spec.grid.dx());
    INFO("n = " << n << ", worst " << a.worst_cumulative);
    CHECK(a.pass);
    CHECK(a.t.size() + 1 == run.u.size());  // one entry per step
  }
}

TEST_CASE("cone that does not fit the grid is rejected") {
  auto b = burgers();
  auto spec = burgers_spec(100);
  spec.grid = Grid1D::make(-0.6, 0.6, 100);
  try {
    run_experiment(*b, spec);
    FAIL("expected a parameter error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parameter);
  }
}

}  // TEST_SUITE
