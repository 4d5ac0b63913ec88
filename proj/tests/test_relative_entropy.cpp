#include "clab/relative_entropy.hpp"
#include "clab/shift_filippov.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace clab;

TEST_SUITE("relative_entropy") {

TEST_CASE("burgers closed forms") {
  auto b = make_system("burgers", 1.4, 1.0);
  const Vec one = make_state({1.0}), zero = make_state({0.0}), half = make_state({0.5});
  CHECK(rel_entropy(*b, one, one) == 0.0);
  CHECK(rel_entropy(*b, one, zero) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rel_entropy_flux(*b, zero, zero) == 0.0);
  CHECK(rel_entropy_flux(*b, zero, half) == doctest::Approx(oracle::burgers_rel_flux_q(0.0, 0.5)).epsilon(1e-14));
  CHECK(rel_entropy_flux(*b, zero, half) == doctest::Approx(1.0 / 48.0).epsilon(1e-14));
  CHECK(rel_flux(*b, one, zero)[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rel_flux(*b, one, one)[0] == 0.0);
  // quadratic entropy: the relative gradient vanishes identically
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-2, 2);
  for (int i = 0; i < 50; ++i) CHECK(std::abs(rel_entropy_gradient(*b, make_state({U(rng)}), make_state({U(rng)}))[0]) < 1e-14);
}

TEST_CASE("isentropic pair against direct formulas") {
  auto s = make_system("isentropic_euler", 1.4, 1.0);
  oracle::Isen o{1.4, 1.0};
  const Vec u = make_state({1.2, 0.1}), v = make_state({1.0, 0.0});
  CHECK(std::abs(rel_entropy(*s, u, v) - o.rel_eta(1.2, 0.1, 1.0, 0.0)) < 1e-12);
  Vec rf = rel_flux(*s, u, v);
  auto ro = o.rel_flux(1.2, 0.1, 1.0, 0.0);
  CHECK(std::abs(rf[0] - ro[0]) < 1e-12);
  CHECK(std::abs(rf[1] - ro[1]) < 1e-12);
  CHECK(rel_entropy(*s, u, u) == 0.0);
  CHECK(rel_flux(*s, u, u).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("full euler pair against direct formulas") {
  auto f = make_system("full_euler", 1.4, 1.0);
  oracle::Full o{1.4};
  std::array<double, 3> ua{1.1, 0.3, 2.4}, va{0.9, 0.45, 2.7};
  Vec u = make_state({ua[0], ua[1], ua[2]}), v = make_state({va[0], va[1], va[2]});
  CHECK(std::abs(rel_entropy(*f, u, v) - o.rel_eta(ua, va)) < 1e-12);
  CHECK(std::abs(rel_entropy_flux(*f, u, v) - o.rel_q(ua, va)) < 1e-12);
  // relative gradient from the same closed forms plus a central-difference Hessian
  auto gu = o.grad(ua[0], ua[1], ua[2]), gv = o.grad(va[0], va[1], va[2]);
  Vec expect(3);
  for (int i = 0; i < 3; ++i) {
    double hess_row = 0.0;
    for (int j = 0; j < 3; ++j) {
      std::array<double, 3> p = va, m = va;
      const double h = 1e-5;
      p[j] += h;
      m[j] -= h;
      hess_row += (o.grad(p[0], p[1], p[2])[i] - o.grad(m[0], m[1], m[2])[i]) / (2 * h) * (ua[j] - va[j]);
    }
    expect[i] = gu[i] - gv[i] - hess_row;
  }
  Vec got = rel_entropy_gradient(*f, u, v);
  CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("triangle identity") {
  auto s = make_system("isentropic_euler", 1.4, 1.0);
  const Vec u = make_state({1.2, 0.1}), v = make_state({1.0, 0.0}), w = make_state({0.8, -0.3});
  CHECK(triangle_identity_residual(*s, u, v, v, 0.3) < 1e-15);
  CHECK(triangle_identity_residual(*s, u, v, u, 0.3) < 1e-15);
  CHECK(triangle_identity_residual(*s, u, v, w, 0.3) < 1e-12);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> S(-2, 2);
  std::vector<Vec> pts = sample_ball(*s, StateBall(0.6, make_state({1.2, 0.5})), 3000, rng);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i)
    worst = std::max(worst, triangle_identity_residual(*s, pts[3 * i], pts[3 * i + 1], pts[3 * i + 2], S(rng)));
  CHECK(worst < 1e-10);
}

TEST_CASE("relative entropy is nonnegative and vanishes only on the diagonal") {
  for (auto sys : {make_system("isentropic_euler", 1.4, 1.0), make_system("full_euler", 1.4, 1.0)}) {
    Vec c = sys->dim() == 2 ? make_state({1.2, 0.5}) : make_state({1.0, 0.5, 2.625});
    std::mt19937_64 rng(3);
    auto pts = sample_ball(*sys, StateBall(0.3, c), 20000, rng);
    for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
      const double e = rel_entropy(*sys, pts[i], pts[i + 1]);
      REQUIRE(e > 0.0);
    }
  }
}

TEST_CASE("relative flux and gradient are second order") {
  auto s = make_system("full_euler", 1.4, 1.0);
  const Vec v = make_state({1.0, 0.5, 2.625});
  const Vec d = make_state({0.3, -0.2, 0.5}).normalized();
  auto ratio = [&](double eps) {
    return std::make_pair(rel_flux(*s, v + eps * d, v).norm() / (eps * eps),
                          rel_entropy_gradient(*s, v + eps * d, v).norm() / (eps * eps));
  };
  auto [f2, g2] = ratio(1e-2);
  auto [f3, g3] = ratio(1e-3);
  CHECK(std::abs(f2 / f3 - 1) < 0.2);
  CHECK(std::abs(g2 / g3 - 1) < 0.2);
}

TEST_CASE("quadratic bounds") {
  auto b = make_system("burgers", 1.4, 1.0);
  auto qb = estimate_quadratic_bounds(*b, make_state({0.0}), 2.0, 500, 1);
  CHECK(qb.raw_min == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(qb.raw_max == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(qb.c_star < 0.5);
  CHECK(qb.c_double_star > 0.5);

  // isentropic, rho in [0.5, 2]: the bracket lies inside the Hessian eigen range over the ball
  auto s = make_system("isentropic_euler", 1.4, 1.0);
  const Vec c = make_state({1.25, 0.0});
  auto q = estimate_quadratic_bounds(*s, c, 0.75, 4000, 2);
  CHECK(q.c_star > 0.0);
  std::mt19937_64 rng(9);
  double lo = 1e300, hi = 0.0;
  for (const Vec& u : sample_ball(*s, StateBall(0.75, c), 4000, rng)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s->entropy_hess(u));
    lo = std::min(lo, 0.5 * es.eigenvalues().minCoeff());
    hi = std::max(hi, 0.5 * es.eigenvalues().maxCoeff());
  }
  CHECK(q.raw_min >= lo * (1 - 1e-2));
  CHECK(q.raw_max <= hi * (1 + 1e-2));
  CHECK(q.c_star <= q.raw_min);
  CHECK(q.c_double_star >= q.raw_max);

  // every in-ball pair satisfies both inequalities
  auto pts = sample_ball(*s, StateBall(0.75, c), 2000, rng);
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    const double d2 = (pts[i] - pts[i + 1]).squaredNorm();
    const double e = rel_entropy(*s, pts[i], pts[i + 1]);
    CHECK(e >= q.c_star * d2);
    CHECK(e <= q.c_double_star * d2);
  }

  try {
    estimate_quadratic_bounds(*b, make_state({0.0}), 1.0, 0, 1);
    FAIL("expected a sampling error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Sampling);
  }
}

}  // TEST_SUITE
