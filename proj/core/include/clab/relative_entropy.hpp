#pragma once

#include "clab/system_model.hpp"

#include <cstdint>

namespace clab {

// eta(u|v) = eta(u) - eta(v) - grad eta(v).(u - v)
double rel_entropy(const System& sys, const Vec& u, const Vec& v);
// q(u;v) = q(u) - q(v) - grad eta(v).(f(u) - f(v))
double rel_entropy_flux(const System& sys, const Vec& u, const Vec& v);
// f(u|v) = f(u) - f(v) - grad f(v)(u - v)
Vec rel_flux(const System& sys, const Vec& u, const Vec& v);
// grad eta(u|v) = grad eta(u) - grad eta(v) - (u - v)^T hess eta(v)
Vec rel_entropy_gradient(const System& sys, const Vec& u, const Vec& v);

// |lhs - rhs| of the three-state splitting
//   q(u;v) - s eta(u|v) = [q(u;w) - s eta(u|w)] + [q(w;v) - s eta(w|v)]
//                         - (grad eta(w) - grad eta(v)).(f(w) - f(u) - s (w - u)).
double triangle_identity_residual(const System& sys, const Vec& u, const Vec& v, const Vec& w, double sigma);

struct QuadraticBounds {
  double c_star = 0.0;         // lower constant, after the safety shrink
  double c_double_star = 0.0;  // upper constant, after the safety inflation
  double raw_min = 0.0;        // sampled extremes before the margin
  double raw_max = 0.0;
  double margin = 0.01;
  Vec center;
  double radius = 0.0;
  std::size_t n_pairs = 0;
};

// Samples pairs in the ball |u - center| <= radius (admissible points only)
// and brackets eta(u|v)/|u - v|^2.
QuadraticBounds estimate_quadratic_bounds(const System& sys, const Vec& center, double radius,
                                          std::size_t n_samples, std::uint64_t seed, double margin = 0.01);

}  // namespace clab
