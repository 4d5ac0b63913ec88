#include "clab/fv_solver.hpp"
#include "clab/shock_curves.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace clab;

namespace {

SystemPtr burgers() { return make_system("burgers", 1.4, 1.0); }

// x where the profile first drops through the midpoint of (hi, lo).
double midpoint_crossing(const FieldSnapshot& s, double hi, double lo) {
  const double m = 0.5 * (hi + lo);
  for (int j = 0; j + 1 < s.grid.n_cells; ++j) {
    const double a = s.cells[j][0], b = s.cells[j + 1][0];
    if (a >= m && b < m) return s.grid.center(j) + (a - m) / (a - b) * s.grid.dx();
  }
  return std::nan("");
}

double total(const FieldSnapshot& s, int c = 0) {
  double m = 0.0;
  for (const Vec& v : s.cells) m += v[c];
  return m * s.grid.dx();
}

}  // namespace

TEST_SUITE("fv_solver") {

TEST_CASE("constant states are fixed points") {
  auto s = make_system("isentropic_euler", 1.4, 1.0);
  FieldSnapshot f{Grid1D::make(0, 1, 50), 0.0, Field(50, make_state({1.3, 0.4}))};
  FieldSnapshot n = step(*s, f, SourceOperator::zero(), 0.5);
  for (const Vec& v : n.cells) CHECK((v - f.cells[0]).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(n.t > 0.0);
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(Grid1D::make(0, 1, 4), Error);
  CHECK_THROWS_AS(Grid1D::make(1, 0, 40), Error);
}

TEST_CASE("burgers shock speed and first-order convergence") {
  auto b = burgers();
  std::vector<double> err;
  for (int n : {200, 400, 800}) {
    Grid1D g = Grid1D::make(-1, 2, n);
    auto traj = simulate(*b, riemann_data(g, make_state({1.0}), make_state({0.0}), 0.0), SourceOperator::zero(), 0.5,
                         1.0, 1000000);
    const double x = midpoint_crossing(traj.back(), 1.0, 0.0);
    err.push_back(std::abs(x - 0.5 * traj.back().t));
    CHECK(err.back() < 3 * g.dx());
  }
  INFO("errors " << err[0] << " " << err[1] << " " << err[2]);
  for (int i = 0; i < 2; ++i) {
    const double ratio = err[i] / err[i + 1];
    CHECK(ratio >= 1.5);
    CHECK(ratio <= 3.0);
  }
}

TEST_CASE("linear damping tracks the decay ODE") {
  auto b = burgers();
  const double c = -0.1;
  std::vector<double> err;
  for (int n : {50, 100}) {
    Grid1D g = Grid1D::make(0, 1, n);
    FieldSnapshot f{g, 0.0, Field(n, make_state({1.0}))};
    auto traj = simulate(*b, f, SourceOperator::linear(c), 0.5, 1.0, 1000000, Boundary::Periodic);
    const double dt = traj[1].t - traj[0].t;
    const double e = std::abs(traj.back().cells[n / 2][0] - std::exp(c * traj.back().t));
    CHECK(e < 0.1 * dt);  // forward Euler: |c|^2 t dt / 2 exp(...)
    err.push_back(e);
  }
  CHECK(err[1] < 0.6 * err[0]);
}

TEST_CASE("periodic conservation and scalar maximum principle") {
  auto b = burgers();
  Grid1D g = Grid1D::make(0, 1, 128);
  FieldSnapshot f{g, 0.0, Field(128)};
  for (int j = 0; j < 128; ++j) f.cells[j] = make_state({std::sin(2 * M_PI * g.center(j)) + 0.3});
  auto traj = simulate(*b, f, SourceOperator::zero(), 0.8, 0.6, 1, Boundary::Periodic);
  const double m0 = total(f);
  double prev_max = 1e300;
  for (const auto& s : traj) {
    CHECK(std::abs(total(s) - m0) < 1e-13);
    double mx = 0.0;
    for (const Vec& v : s.cells) mx = std::max(mx, std::abs(v[0]));
    CHECK(mx <= prev_max + 1e-15);
    prev_max = mx;
  }

  auto e = make_system("full_euler", 1.4, 1.0);
  auto fe = std::dynamic_pointer_cast<const FullEuler>(e);
  FieldSnapshot fs{g, 0.0, Field(128)};
  for (int j = 0; j < 128; ++j)
    fs.cells[j] = fe->from_primitive(1 + 0.2 * std::sin(2 * M_PI * g.center(j)), 0.3, 1.0);
  auto te = simulate(*e, fs, SourceOperator::zero(), 0.5, 0.3, 1000000, Boundary::Periodic);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(total(te.back(), c) - total(fs, c)) < 1e-13);
}

TEST_CASE("source operators are certified") {
  for (auto src : {SourceOperator::zero(), SourceOperator::linear(-0.1),
                   SourceOperator::convolution({0.25, 0.5, 0.25}, -0.2)}) {
    for (int dim : {1, 2}) {
      auto c = certify(src, dim, 64, 100, 11);
      CHECK(c.pass);
      CHECK(c.translation_error < 1e-14);
      CHECK(c.l2_ratio <= c.lipschitz * (1 + 1e-12));
      CHECK(c.linf_ratio <= c.lipschitz * (1 + 1e-12));
    }
  }
  // position-dependent damping breaks translation invariance
  auto bad = SourceOperator::custom(
      [](const Field& u) {
        Field out(u.size());
        for (std::size_t j = 0; j < u.size(); ++j) out[j] = -static_cast<double>(j) / u.size() * u[j];
        return out;
      },
      1.0, "ramp");
  CHECK_FALSE(certify(bad, 1, 64, 100, 12).pass);
  // an understated Lipschitz constant is caught
  auto liar = SourceOperator::custom([](const Field& u) {
    Field out(u);
    for (auto& v : out) v *= 2.0;
    return out;
  }, 1.0, "liar");
  CHECK_FALSE(certify(liar, 1, 64, 100, 13).pass);
}

TEST_CASE("entropy residual") {
  auto b = burgers();
  {
    Grid1D g = Grid1D::make(0, 1, 40);
    FieldSnapshot f{g, 0.0, Field(40, make_state({0.7}))};
    auto traj = simulate(*b, f, SourceOperator::zero(), 0.5, 0.2);
    auto r = entropy_residual(*b, traj, SourceOperator::zero());
    CHECK(r.max_positive < 1e-14);
    CHECK(r.min_value > -1e-13);
  }
  {
    // admissible shock: dissipation concentrates there, never production
    Grid1D g = Grid1D::make(-1, 1, 200);
    auto traj = simulate(*b, riemann_data(g, make_state({1.0}), make_state({0.0}), -0.3), SourceOperator::zero(), 0.5, 0.5);
    auto r = entropy_residual(*b, traj, SourceOperator::zero());
    CHECK(r.max_positive <= 1e-10);
    CHECK(r.min_value < -1e-3);
  }
  {
    // rarefaction: the positive part stays at round-off on both grids
    std::vector<double> pos;
    for (int n : {200, 400}) {
      Grid1D g = Grid1D::make(-1, 1, n);
      auto traj = simulate(*b, riemann_data(g, make_state({-0.5}), make_state({1.0}), 0.0), SourceOperator::zero(), 0.5, 0.5);
      pos.push_back(entropy_residual(*b, traj, SourceOperator::zero()).max_positive);
    }
    CHECK(pos[0] < 1e-10);
    CHECK(pos[1] < 1e-10);
  }
}

TEST_CASE("positivity failure is reported") {
  auto s = make_system("isentropic_euler", 1.4, 1.0);
  Grid1D g = Grid1D::make(-1, 1, 40);
  // strong rarefaction into near vacuum with an absurd time step
  FieldSnapshot f = riemann_data(g, make_state({1.0, -3.0}), make_state({1.0, 3.0}), 0.0);
  try {
    step_with_dt(*s, f, SourceOperator::zero(), 0.5);
    FAIL("expected a positivity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Positivity);
  }
}

TEST_CASE("reference solutions") {
  auto b = burgers();
  ReferenceSpec spec;
  spec.u_L = make_state({1.0});
  spec.u_R = make_state({0.0});
  spec.grid = Grid1D::make(-1, 1, 200);
  spec.t_end = 0.4;
  auto exact = make_reference(*b, spec);
  CHECK(exact.exact);
  for (std::size_t k = 0; k < exact.t.size(); ++k) {
    CHECK(exact.s[k] == doctest::Approx(0.5 * exact.t[k]).epsilon(1e-14));
    CHECK(exact.left[k][0] == 1.0);
    CHECK(exact.right[k][0] == 0.0);
  }

  ReferenceSpec damp = spec;
  damp.source = SourceOperator::linear(-0.1);
  damp.grid = Grid1D::make(-1, 1, 800);
  auto rd = make_reference(*b, damp);
  CHECK_FALSE(rd.exact);
  CHECK(rd.rh_max < 1e-3);
  // the integrated path stays with the conserved mass
  CHECK(rd.path_drift < 2 * damp.grid.dx());
  CHECK(rd.s_mass.size() == rd.t.size());
  CHECK(rd.rho > 0.5);

  ReferenceSpec mod = spec;
  mod.left_amplitude = 0.05;
  mod.right_amplitude = 0.05;
  mod.grid = Grid1D::make(-1, 1, 800);
  auto rm = make_reference(*b, mod);
  CHECK(std::isfinite(rm.lipschitz));
  CHECK(rm.rho >= 0.9 * 1.0);
  CHECK(rm.rho <= 1.1 * 1.0);

  ReferenceSpec collapse = spec;
  collapse.u_R = make_state({0.95});
  collapse.min_gap = 0.1;
  collapse.force_simulated = true;
  try {
    make_reference(*b, collapse);
    FAIL("expected a reference error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Reference);
  }
}

}  // TEST_SUITE
