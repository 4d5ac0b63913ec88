#include "clab/relative_entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace clab {

double rel_entropy(const System& sys, const Vec& u, const Vec& v) {
  return sys.entropy(u) - sys.entropy(v) - sys.entropy_grad(v).dot(u - v);
}

double rel_entropy_flux(const System& sys, const Vec& u, const Vec& v) {
  return sys.entropy_flux(u) - sys.entropy_flux(v) - sys.entropy_grad(v).dot(sys.flux(u) - sys.flux(v));
}

Vec rel_flux(const System& sys, const Vec& u, const Vec& v) {
  return sys.flux(u) - sys.flux(v) - sys.jacobian(v) * (u - v);
}

Vec rel_entropy_gradient(const System& sys, const Vec& u, const Vec& v) {
  return sys.entropy_grad(u) - sys.entropy_grad(v) - sys.entropy_hess(v) * (u - v);
}

double triangle_identity_residual(const System& sys, const Vec& u, const Vec& v, const Vec& w, double sigma) {
  const double lhs = rel_entropy_flux(sys, u, v) - sigma * rel_entropy(sys, u, v);
  const double rhs = (rel_entropy_flux(sys, u, w) - sigma * rel_entropy(sys, u, w)) +
                     (rel_entropy_flux(sys, w, v) - sigma * rel_entropy(sys, w, v)) -
                     (sys.entropy_grad(w) - sys.entropy_grad(v)).dot(sys.flux(w) - sys.flux(u) - sigma * (w - u));
  return std::abs(lhs - rhs);
}

QuadraticBounds estimate_quadratic_bounds(const System& sys, const Vec& center, double radius,
                                          std::size_t n_samples, std::uint64_t seed, double margin) {
  if (n_samples == 0)
    throw Error(ErrorKind::Sampling, "relative_entropy.n_samples", "no samples requested");
  if (!(radius >= 0.0))
    throw Error(ErrorKind::Parameter, "relative_entropy.radius", "radius must be non-negative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const int n = sys.dim();
  auto draw = [&]() -> Vec {
    for (int tries = 0; tries < 1000; ++tries) {
      Vec d(n);
      for (int i = 0; i < n; ++i) d[i] = U(rng);
      if (d.norm() > 1.0) continue;
      Vec x = center + radius * d;
      if (sys.admissible(x)) return x;
    }
    throw Error(ErrorKind::Sampling, "relative_entropy.radius", "ball contains no admissible states");
  };

  QuadraticBounds qb;
  qb.center = center;
  qb.radius = radius;
  qb.margin = margin;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    Vec u = draw(), v = draw();
    const double d2 = (u - v).squaredNorm();
    if (d2 < 1e-16 * (1.0 + center.squaredNorm())) continue;
    const double r = rel_entropy(sys, u, v) / d2;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    ++qb.n_pairs;
  }
  if (qb.n_pairs == 0)
    throw Error(ErrorKind::Sampling, "relative_entropy.n_samples", "all sampled pairs coincide");
  qb.raw_min = lo;
  qb.raw_max = hi;
  qb.c_star = lo * (1.0 - margin);
  qb.c_double_star = hi * (1.0 + margin);
  return qb;
}

}  // namespace clab
