#include "clab/shift_filippov.hpp"
#include "clab/parallel.hpp"
#include "clab/relative_entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace clab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string num(double x) {
  std::ostringstream os;
  os.precision(8);
  os << x;
  return os.str();
}

std::vector<double> grid_between(double a, double b, int points) {
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) g[i] = points == 1 ? a : a + (b - a) * i / (points - 1);
  return g;
}

Vec random_unit(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  for (;;) {
    Vec d(n);
    for (int i = 0; i < n; ++i) d[i] = N(rng);
    const double nd = d.norm();
    if (nd > 1e-12) return d / nd;
  }
}

// eta(u|u_L) - a eta(u|u_R); R_a is where this is <= 0.
double ra_gap(const System& sys, double a, const Vec& u, const Vec& u_L, const Vec& u_R) {
  return rel_entropy(sys, u, u_L) - a * rel_entropy(sys, u, u_R);
}

// Distance from u_L to the edge of R_a (intersected with the admissible set)
// along d.
double ray_to_boundary(const System& sys, double a, const Vec& u_L, const Vec& u_R, const Vec& d) {
  auto inside = [&](double t) {
    Vec u = u_L + t * d;
    return sys.admissible(u) && ra_gap(sys, a, u, u_L, u_R) <= 0.0;
  };
  double lo = 0.0, hi = 1e-3 * std::max(1.0, u_L.norm());
  int grow = 0;
  while (inside(hi)) {
    lo = hi;
    hi *= 2.0;
    if (++grow > 80) throw Error(ErrorKind::Sampling, "shift_filippov.R_a", "R_a appears unbounded along a ray");
  }
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (inside(mid) ? lo : hi) = mid;
  }
  return lo;
}

void check_weight(double a) {
  if (!(a >= 0.0 && a < 1.0)) throw Error(ErrorKind::Parameter, "shift_filippov.a", "weight must lie in [0, 1)");
}

void check_bases(const System& sys, const std::vector<Vec>& bases, const StateBall& ball) {
  if (bases.empty()) throw Error(ErrorKind::Parameter, "shift_filippov.bases", "no base states");
  for (const Vec& u : bases) {
    sys.require_admissible(u, "shift_filippov.bases");
    if (!ball.contains(u)) throw Error(ErrorKind::Parameter, "shift_filippov.bases", "base state outside the ball");
  }
}

}  // namespace

// ------------------------------------------------------------ c1 -----

double shock_dissipation_lhs(const System& sys, double a, const Vec& u, const Vec& u_L, const Vec& u_R,
                             const Vec& S, double sigma) {
  return a * (rel_entropy_flux(sys, S, u_R) - sigma * rel_entropy(sys, S, u_R)) - rel_entropy_flux(sys, u, u_L) +
         sigma * rel_entropy(sys, u, u_L);
}

double boundary_dissipation_lhs(const System& sys, double a, const Vec& u, const Vec& u_L, const Vec& u_R) {
  const double l = sys.lambda_min(u);
  return a * (rel_entropy_flux(sys, u, u_R) - l * rel_entropy(sys, u, u_R)) - rel_entropy_flux(sys, u, u_L) +
         l * rel_entropy(sys, u, u_L);
}

std::vector<Vec> sample_r_a(const System& sys, double a, const Vec& u_L, const Vec& u_R, int n_dirs,
                            const std::vector<double>& fractions, std::uint64_t seed) {
  check_weight(a);
  const int n = sys.dim();
  std::vector<Vec> dirs;
  if (n == 1) {
    dirs = {make_state({1.0}), make_state({-1.0})};
  } else {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < n; ++i) {
      Vec e = Vec::Zero(n);
      e[i] = 1.0;
      dirs.push_back(e);
      dirs.push_back(-e);
    }
    for (int k = 0; k < n_dirs; ++k) dirs.push_back(random_unit(n, rng));
  }
  std::vector<Vec> out{u_L};
  for (const Vec& d : dirs) {
    const double tb = ray_to_boundary(sys, a, u_L, u_R, d);
    for (double f : fractions) {
      if (f <= 0.0) continue;
      Vec u = u_L + f * tb * d;
      if (sys.admissible(u) && ra_gap(sys, a, u, u_L, u_R) <= 0.0) out.push_back(u);
    }
  }
  return out;
}

C1Fit fit_c1(const System& sys, double a, const std::vector<Vec>& bases, const StateBall& ball, double rho,
             const C1Options& opt) {
  check_weight(a);
  const double B = ball.radius;
  if (!(rho > 0.0 && rho < B)) throw Error(ErrorKind::Parameter, "shift_filippov.rho", "need 0 < rho < B");
  if (opt.n_sR < 1 || opt.n_s < 2) throw Error(ErrorKind::Parameter, "shift_filippov.c1", "grid too small");
  check_bases(sys, bases, ball);
  const std::vector<double> sR = grid_between(rho, B, opt.n_sR);
  const std::vector<double> sg = grid_between(0.0, B, opt.n_s + 1);

  struct Part {
    double ratio = kInf, bnd = kInf, flat = -kInf;
    std::size_t n_shock = 0, n_bnd = 0, n_flat = 0, trunc = 0;
  };
  const std::size_t jobs = bases.size() * sR.size();
  std::vector<Part> parts(jobs);
  parallel_for(jobs, [&](std::size_t job) {
    const Vec& uL = bases[job / sR.size()];
    const double s_R = sR[job % sR.size()];
    Part& P = parts[job];
    ContinuationOptions copt;
    copt.partial_ok = true;
    LocusPath pr = trace_locus(sys, uL, Family::First, {s_R}, copt);
    if (pr.stopped_early || pr.size() == 0) {
      ++P.trunc;
      return;
    }
    const Vec uR = pr.S.back();
    const double sigR = pr.sigma.back();
    const double scale = 1.0 + std::abs(sys.entropy_flux(uL)) + std::abs(sys.entropy(uL));
    for (const Vec& u : sample_r_a(sys, a, uL, uR, opt.n_dirs, opt.fractions, opt.seed + job)) {
      LocusPath p = trace_locus(sys, u, Family::First, sg, copt);
      if (p.stopped_early) ++P.trunc;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double lhs = shock_dissipation_lhs(sys, a, u, uL, uR, p.S[i], p.sigma[i]);
        const double ds = sigR - p.sigma[i];
        if (std::abs(ds) <= 1e-7) {
          P.flat = std::max(P.flat, lhs / scale);
          ++P.n_flat;
        } else {
          P.ratio = std::min(P.ratio, -lhs / (ds * ds));
          ++P.n_shock;
        }
      }
      P.bnd = std::min(P.bnd, -boundary_dissipation_lhs(sys, a, u, uL, uR));
      ++P.n_bnd;
    }
  });

  C1Fit fit;
  fit.min_ratio_shock = kInf;
  fit.min_boundary = kInf;
  fit.max_lhs_flat = -kInf;
  for (const Part& P : parts) {
    fit.min_ratio_shock = std::min(fit.min_ratio_shock, P.ratio);
    fit.min_boundary = std::min(fit.min_boundary, P.bnd);
    fit.max_lhs_flat = std::max(fit.max_lhs_flat, P.flat);
    fit.n_shock += P.n_shock;
    fit.n_boundary += P.n_bnd;
    fit.n_flat += P.n_flat;
    fit.n_truncated += P.trunc;
  }
  if (fit.n_shock == 0 || fit.n_boundary == 0)
    throw Error(ErrorKind::Sampling, "shift_filippov.fit_c1", "no usable samples");
  if (fit.n_flat == 0) fit.max_lhs_flat = 0.0;
  fit.c1 = 0.9 * std::min(fit.min_ratio_shock, fit.min_boundary);
  if (!(fit.c1 > 0.0) || fit.max_lhs_flat > 1e-10)
    throw Error(ErrorKind::WeightTooLarge, "shift_filippov.a",
                "no positive c1 at a = " + num(a) + " (min shock ratio " + num(fit.min_ratio_shock) +
                    ", min boundary margin " + num(fit.min_boundary) + "); shrink a");
  return fit;
}

// ------------------------------------------------------- c4, gamma0 ---

bool StateBall::contains(const Vec& u, double slack) const {
  return (u - centre(static_cast<int>(u.size()))).norm() <= radius * (1.0 + slack) + slack;
}

std::vector<Vec> sample_ball(const System& sys, const StateBall& ball, std::size_t count, std::mt19937_64& rng) {
  const double B = ball.radius;
  if (!(B >= 0.0)) throw Error(ErrorKind::Parameter, "shift_filippov.B", "B must be >= 0");
  const int n = sys.dim();
  const Vec c = ball.centre(n);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<Vec> out;
  out.reserve(count);
  const std::size_t max_tries = 1000 * std::max<std::size_t>(count, 1);
  for (std::size_t tries = 0; out.size() < count && tries < max_tries; ++tries) {
    Vec u = c + B * std::pow(U(rng), 1.0 / n) * random_unit(n, rng);
    if (sys.admissible(u)) out.push_back(u);
  }
  if (out.size() < count)
    throw Error(ErrorKind::Sampling, "shift_filippov.B", "too few admissible states in |u| <= " + num(B));
  return out;
}

namespace {

double boundary_map(const System& sys, double a, const Vec& u, const Vec& uL, const Vec& uR) {
  return boundary_dissipation_lhs(sys, a, u, uL, uR);
}

}  // namespace

C4Fit fit_c4_gamma0(const System& sys, double a, double c1, const StateBall& ball, const C4Options& opt) {
  const double B = ball.radius;
  check_weight(a);
  if (!(c1 > 0.0)) throw Error(ErrorKind::Parameter, "shift_filippov.c1", "c1 must be positive");
  const int n = sys.dim();
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  C4Fit fit;

  // Lipschitz constant of the boundary map by difference quotients.
  const double h = opt.lip_step * std::max(1.0, B);
  auto pts = sample_ball(sys, ball, 3 * opt.n_lip_pairs, rng);
  for (std::size_t i = 0; i < opt.n_lip_pairs; ++i) {
    Vec u = pts[3 * i], uL = pts[3 * i + 1], uR = pts[3 * i + 2];
    Vec du = h * random_unit(n, rng), dL = h * random_unit(n, rng), dR = h * random_unit(n, rng);
    const double w = U(rng);
    du *= w;
    dL *= w;
    dR *= w;
    Vec u2 = u + du, uL2 = uL + dL, uR2 = uR + dR;
    if (!sys.admissible(u2) || !sys.admissible(uL2) || !sys.admissible(uR2)) continue;
    const double dist = std::sqrt(du.squaredNorm() + dL.squaredNorm() + dR.squaredNorm());
    if (dist == 0.0) continue;
    const double q = std::abs(boundary_map(sys, a, u2, uL2, uR2) - boundary_map(sys, a, u, uL, uR)) / dist;
    fit.raw_lip = std::max(fit.raw_lip, q);
    ++fit.n_lip;
  }
  if (fit.n_lip == 0) throw Error(ErrorKind::Sampling, "shift_filippov.L_star", "no admissible pairs");
  fit.L_star = 1.05 * fit.raw_lip;
  if (!(fit.L_star > 0.0)) fit.L_star = 1e-300;
  fit.gamma0 = c1 / (2.0 * fit.L_star);

  // Points at distance >= gamma0 beyond the edge of R_a along rays from u_L.
  auto base = sample_ball(sys, ball, 2 * opt.n_triples, rng);
  double inf = kInf;
  for (std::size_t i = 0; i < opt.n_triples; ++i) {
    const Vec& uL = base[2 * i];
    const Vec uR = (i % 10 == 0) ? uL : base[2 * i + 1];
    const Vec d = random_unit(n, rng);
    const double xi = (i % 4 == 0) ? 0.0 : 3.0 * U(rng);
    const double tb = ray_to_boundary(sys, a, uL, uR, d);
    const Vec u = uL + (tb + fit.gamma0 * (1.0 + xi)) * d;
    if (!sys.admissible(u)) continue;
    inf = std::min(inf, ra_gap(sys, a, u, uL, uR) / (fit.gamma0 * fit.gamma0));
    ++fit.n_triples;
  }
  if (fit.n_triples == 0) throw Error(ErrorKind::Sampling, "shift_filippov.c4", "no admissible triples");
  if (!(inf > 0.0))
    throw Error(ErrorKind::Hypothesis, "shift_filippov.c4", "sampled infimum is not positive (" + num(inf) + ")");
  fit.raw_inf = inf;
  fit.c4 = 0.9 * inf;
  return fit;
}

// ----------------------------------------------------------- C_star ---

CStarFit compute_C_star(const System& sys, double a, double c4, double gamma0, const StateBall& ball, std::size_t n_samples,
                        std::uint64_t seed) {
  check_weight(a);
  if (!(c4 > 0.0 && gamma0 > 0.0))
    throw Error(ErrorKind::Parameter, "shift_filippov.C_star", "c4 and gamma0 must be positive");
  if (n_samples == 0) throw Error(ErrorKind::Sampling, "shift_filippov.C_star", "no samples requested");
  std::mt19937_64 rng(seed);
  auto pts = sample_ball(sys, ball, 3 * n_samples, rng);
  CStarFit f;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const Vec &u = pts[3 * i], &uL = pts[3 * i + 1], &uR = pts[3 * i + 2];
    f.sup_q = std::max(f.sup_q, std::abs(a * rel_entropy_flux(sys, u, uR) - rel_entropy_flux(sys, u, uL)));
    for (const Vec* v : {&u, &uL, &uR}) f.sup_lambda = std::max(f.sup_lambda, std::abs(sys.lambda_min(*v)));
    ++f.n_samples;
  }
  f.C_star = (1.05 * f.sup_q + 1.0) / (c4 * gamma0 * gamma0) + 2.0 * 1.05 * f.sup_lambda;
  return f;
}

// --------------------------------------------------- weight search ---

WeightReport build_weights(const System& sys, const std::vector<Vec>& bases, const StateBall& ball, double rho,
                           const WeightOptions& opt) {
  const double B = ball.radius;
  if (!(opt.a0 > 0.0 && opt.a0 < 1.0)) throw Error(ErrorKind::Parameter, "shift_filippov.a0", "must lie in (0, 1)");
  if (!(rho > 0.0 && rho < B)) throw Error(ErrorKind::Parameter, "shift_filippov.rho", "need 0 < rho < B");
  check_bases(sys, bases, ball);

  // Containment constant from the shocks at both ends of [rho, B].
  double alpha = kInf, C_geom = 0.0;
  for (const Vec& uL : bases)
    for (double s : {rho, B}) {
      ContinuationOptions copt;
      copt.partial_ok = true;
      LocusPath p = trace_locus(sys, uL, Family::First, {s}, copt);
      if (p.stopped_early || p.size() == 0) continue;
      RaGeometry g = r_a_geometry(sys, uL, p.S.back(), opt.theta, opt.geometry_grid, 2000, opt.seed);
      if (g.alpha < alpha) {
        alpha = g.alpha;
        C_geom = g.C;
      }
    }

  WeightReport rep;
  double a = opt.a0;
  bool ok = false;
  for (int k = 0; k <= opt.max_halvings; ++k, a *= 0.5) {
    rep.tried.push_back(a);
    rep.halvings = k;
    if (a >= alpha) continue;
    try {
      rep.c1 = fit_c1(sys, a, bases, ball, rho, opt.c1);
      ok = true;
      break;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::WeightTooLarge) throw;
    }
  }
  if (!ok)
    throw Error(ErrorKind::WeightTooLarge, "shift_filippov.a0",
                "no admissible weight after " + std::to_string(opt.max_halvings) + " halvings");
  rep.c4 = fit_c4_gamma0(sys, a, rep.c1.c1, ball, opt.c4);
  rep.cstar = compute_C_star(sys, a, rep.c4.c4, rep.c4.gamma0, ball, opt.n_cstar, opt.seed);

  ContractionWeights& w = rep.w;
  w.a = a;
  w.c1 = rep.c1.c1;
  w.c4 = rep.c4.c4;
  w.gamma0 = rep.c4.gamma0;
  w.L_star = rep.c4.L_star;
  w.C_star = rep.cstar.C_star;
  w.B = B;
  w.center = ball.center;
  w.rho = rho;
  w.c = w.c1;
  w.theta = opt.theta;
  w.C_geom = C_geom;
  w.alpha = alpha;
  return rep;
}

// ----------------------------------------------------------- shift ---

bool drift_indicator(const System& sys, const Vec& u, const Vec& ubar_minus, const Vec& ubar_plus, double a) {
  return a * rel_entropy(sys, u, ubar_plus) < rel_entropy(sys, u, ubar_minus);
}

double shift_velocity(const System& sys, const Vec& u, const Vec& ubar_minus, const Vec& ubar_plus,
                      const ContractionWeights& w) {
  return sys.lambda_min(u) - (drift_indicator(sys, u, ubar_minus, ubar_plus, w.a) ? w.C_star : 0.0);
}

int default_mollification(double dx) { return static_cast<int>(std::ceil(1.0 / (4.0 * dx))); }

std::vector<double> centered_rate(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  d[0] = (y[1] - y[0]) / (t[1] - t[0]);
  d[n - 1] = (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2]);
  for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (y[k + 1] - y[k - 1]) / (t[k + 1] - t[k - 1]);
  return d;
}

namespace {

// Piecewise-constant V on breakpoints xs with its running integral.
struct FrozenField {
  std::vector<double> xs, V, P;

  void clear() {
    xs.clear();
    V.clear();
  }
  int piece_right(double x) const {  // piece containing [x, x + 0)
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    return std::clamp(static_cast<int>(it - xs.begin()) - 1, 0, static_cast<int>(V.size()) - 1);
  }
  int piece_left(double x) const {  // piece containing (x - 0, x]
    const auto it = std::lower_bound(xs.begin(), xs.end(), x);
    return std::clamp(static_cast<int>(it - xs.begin()) - 1, 0, static_cast<int>(V.size()) - 1);
  }
  void finish() {
    P.assign(V.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < V.size(); ++i) {
      P[i] = acc;
      acc += V[i] * (xs[i + 1] - xs[i]);
    }
  }
  double integral(double x) const {
    const int i = piece_right(x);
    return P[i] + V[i] * (x - xs[i]);
  }
  double next_edge(double x, int dir) const {
    if (dir > 0) {
      const auto it = std::upper_bound(xs.begin(), xs.end(), x);
      return it == xs.end() ? kInf : *it;
    }
    const auto it = std::lower_bound(xs.begin(), xs.end(), x);
    return it == xs.begin() ? -kInf : *(it - 1);
  }
};

// Where the drift indicator flips between two neighbouring centres, locate
// the flip on the linear interpolant (bisection on eta(u|ub-) - a eta(u|ub+)).
double indicator_crossing(const System& sys, const Vec& u0, const Vec& u1, const Vec& bm, const Vec& bp, double a) {
  auto phi = [&](double th) {
    const Vec u = (1.0 - th) * u0 + th * u1;
    return rel_entropy(sys, u, bm) - a * rel_entropy(sys, u, bp);
  };
  double lo = 0.0, hi = 1.0;
  const bool lo_on = phi(lo) > 0.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((phi(mid) > 0.0) == lo_on) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

ShiftTrajectory integrate_filippov(const System& sys, const std::vector<FieldSnapshot>& field,
                                   const ContractionWeights& w, const ReferenceSolution& refs, double x0, int n) {
  if (field.size() < 2) throw Error(ErrorKind::Parameter, "shift_filippov.field", "need at least two time levels");
  if (refs.left.size() != field.size() || refs.right.size() != field.size())
    throw Error(ErrorKind::Parameter, "shift_filippov.refs", "trace series and field have different lengths");
  for (std::size_t k = 0; k < field.size(); ++k)
    if (std::abs(refs.t[k] - field[k].t) > 1e-12 * std::max(1.0, std::abs(field[k].t)))
      throw Error(ErrorKind::Parameter, "shift_filippov.refs", "trace series and field are on different time levels");
  const Grid1D& g = field[0].grid;
  if (n == 0) n = default_mollification(g.dx());
  if (n < 1) throw Error(ErrorKind::Parameter, "shift_filippov.n", "mollification index must be >= 1");

  ShiftTrajectory run;
  run.mollification_n = n;
  run.window = 1.0 / n;
  run.under_resolved = run.window < g.dx();
  const double win = run.window;
  const double x_end = g.x_max;
  // h below is the left end of the averaging window; the reported shift is
  // its centre, so a standing discontinuity holds the shift on itself.
  const double half = 0.5 * win;
  double h = x0 - half;

  FrozenField F;
  std::vector<char> on(g.n_cells);

  auto in_domain = [&](double x, double t) {
    if (x < g.x_min || x + win > x_end) {
      std::ostringstream os;
      os << "shift h = " << x + half << " left the grid at t = " << t;
      throw Error(ErrorKind::DomainExit, "shift_filippov.integrate", os.str());
    }
  };
  auto record = [&](std::size_t k) {
    run.t.push_back(field[k].t);
    run.h.push_back(h + half);
    const int j = std::clamp(g.cell_of(h + half), 0, g.n_cells - 1);
    run.indicator.push_back(drift_indicator(sys, field[k].cells[j], refs.left[k], refs.right[k], w.a) ? 1 : 0);
  };

  in_domain(h, field[0].t);
  record(0);
  for (std::size_t k = 0; k + 1 < field.size(); ++k) {
    const auto& cells = field[k].cells;
    // lambda_1 is constant per cell; the indicator switches on the linear
    // reconstruction, so the sliding position moves continuously.
    const Vec& bm = refs.left[k];
    const Vec& bp = refs.right[k];
    for (int j = 0; j < g.n_cells; ++j) on[j] = drift_indicator(sys, cells[j], bm, bp, w.a);
    F.clear();
    const double dx = g.dx();
    auto push = [&](double x0, double v) {
      if (!F.xs.empty() && x0 <= F.xs.back()) return;
      F.xs.push_back(x0);
      F.V.push_back(v);
      run.V_sup = std::max(run.V_sup, std::abs(v));
    };
    for (int j = 0; j < g.n_cells; ++j) {
      const double lam = sys.lambda_min(cells[j]);
      const double xl = g.x_min + j * dx, xc = xl + 0.5 * dx;
      auto vel = [&](bool flag) { return lam - (flag ? w.C_star : 0.0); };
      // left half: shares the centre-to-centre segment with j - 1
      if (j > 0 && on[j - 1] != on[j]) {
        const double th = indicator_crossing(sys, cells[j - 1], cells[j], bm, bp, w.a);
        const double xs = xc - dx + th * dx;
        if (xs > xl) {
          push(xl, vel(on[j - 1]));
          push(xs, vel(on[j]));
        } else {
          push(xl, vel(on[j]));
        }
      } else {
        push(xl, vel(on[j]));
      }
      if (j + 1 < g.n_cells && on[j + 1] != on[j]) {
        const double th = indicator_crossing(sys, cells[j], cells[j + 1], bm, bp, w.a);
        const double xs = xc + th * dx;
        if (xs < xl + dx) push(xs, vel(on[j + 1]));
      }
    }
    F.xs.push_back(g.x_max);
    F.finish();
    const double dt = field[k + 1].t - field[k].t;
    const double h_start = h;
    double rem = dt;
    for (int it = 0; rem > 0.0 && it < 1000000; ++it) {
      in_domain(h, field[k].t);
      const double v0 = n * (F.integral(h + win) - F.integral(h));
      if (v0 == 0.0) break;
      const int dir = v0 > 0 ? 1 : -1;
      const double Va = dir > 0 ? F.V[F.piece_right(h)] : F.V[F.piece_left(h)];
      const double Vb = dir > 0 ? F.V[F.piece_right(h + win)] : F.V[F.piece_left(h + win)];
      const double beta = n * (Vb - Va);
      const double p1 = F.next_edge(h, dir), p2 = F.next_edge(h + win, dir) - win;
      double p = dir > 0 ? std::min(p1, p2) : std::max(p1, p2);
      if ((p - h) * dir <= 0.0) p = std::nextafter(h, dir > 0 ? kInf : -kInf);
      bool reach = true;
      double tau = 0.0;
      if (beta == 0.0) {
        tau = (p - h) / v0;
      } else {
        const double arg = beta * (p - h) / v0;
        if (arg <= -1.0) reach = false;  // equilibrium before p
        else tau = std::log1p(arg) / beta;
      }
      if (reach && tau < rem) {
        h = p;
        rem -= tau;
        ++run.events;
        continue;
      }
      h += beta == 0.0 ? v0 * rem : (v0 / beta) * std::expm1(beta * rem);
      rem = 0.0;
    }
    in_domain(h, field[k + 1].t);
    run.hdot_step.push_back((h - h_start) / dt);
    record(k + 1);
  }
  // h' at t_k: the mean over the step the field at t_k drives. The sliding
  // mode is too stiff for the instantaneous v_n to mean anything, and a
  // centred difference smears the kink where h lands on a shock.
  run.hdot = run.hdot_step;
  run.hdot.push_back(run.hdot_step.back());
  run.X.resize(run.h.size());
  const bool have_s = refs.s.size() == run.h.size();
  for (std::size_t k = 0; k < run.h.size(); ++k) run.X[k] = have_s ? refs.s[k] - run.h[k] : 0.0;
  // X' feeds a time integral: centred differences, second order there
  run.Xdot = centered_rate(run.t, run.X);
  return run;
}

DissipationSeries verify_dissipation(const System& sys, const ShiftTrajectory& run,
                                     const std::vector<FieldSnapshot>& field, const ReferenceSolution& refs,
                                     const ContractionWeights& w, double tolerance) {
  if (run.h.size() != field.size() || refs.sdot.size() != field.size())
    throw Error(ErrorKind::Parameter, "shift_filippov.verify", "run, field and reference lengths differ");
  DissipationSeries out;
  out.tolerance = tolerance;
  out.worst_margin = kInf;
  double cfit = kInf;
  bool any_over = false;
  std::size_t pass = 0, used = 0;
  for (std::size_t k = 0; k < field.size(); ++k) {
    const Grid1D& g = field[k].grid;
    const int j = g.cell_of(run.h[k]);
    if (j - 1 < 0 || j + 1 >= g.n_cells) {
      ++out.missing;
      continue;
    }
    const Vec& um = field[k].cells[j - 1];
    const Vec& up = field[k].cells[j + 1];
    const double hd = run.hdot[k], sd = refs.sdot[k];
    const Vec& bm = refs.left[k];
    const Vec& bp = refs.right[k];
    const double lhs = w.a * (rel_entropy_flux(sys, up, bp) - hd * rel_entropy(sys, up, bp)) -
                       rel_entropy_flux(sys, um, bm) + hd * rel_entropy(sys, um, bm);
    const double gap = (sd - hd) * (sd - hd);
    const double bound = -w.c * gap + tolerance;
    const bool ok = lhs <= bound;
    out.t.push_back(field[k].t);
    out.lhs.push_back(lhs);
    out.bound.push_back(bound);
    out.sdot.push_back(sd);
    out.hdot.push_back(hd);
    out.ok.push_back(ok ? 1 : 0);
    out.worst_margin = std::min(out.worst_margin, bound - lhs);
    if (lhs > tolerance) any_over = true;
    else if (gap > 0.0) cfit = std::min(cfit, (tolerance - lhs) / gap);
    pass += ok;
    ++used;
  }
  if (field.size() > 0 && used == 0)
    throw Error(ErrorKind::Extension, "shift_filippov.verify", "no time level has traces on both sides of h");
  out.pass_fraction = used ? static_cast<double>(pass) / used : 0.0;
  out.c_fit = any_over ? 0.0 : (std::isfinite(cfit) ? cfit : 0.0);
  if (!std::isfinite(out.worst_margin)) out.worst_margin = 0.0;
  return out;
}

FilippovCheck check_filippov_facts(const System& sys, const ShiftTrajectory& run,
                                   const std::vector<FieldSnapshot>& field, const ReferenceSolution& refs,
                                   const ContractionWeights& w, double tolerance, double noise) {
  if (run.h.size() != field.size()) throw Error(ErrorKind::Parameter, "shift_filippov.facts", "length mismatch");
  FilippovCheck c;
  for (double v : run.hdot_step) c.lip_ratio = std::max(c.lip_ratio, std::abs(v) / std::max(run.V_sup, 1e-300));
  c.lip_ok = c.lip_ratio <= 1.0 + 1e-12;

  const std::size_t K = field.size();
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t k0 = k == 0 ? 0 : k - 1;
    const std::size_t k1 = std::min(K - 1, k + 1);
    double lo = kInf, hi = -kInf;
    for (std::size_t i = k0; i <= k1; ++i) {
      lo = std::min(lo, run.h[i]);
      hi = std::max(hi, run.h[i]);
    }
    double vmin = kInf, vmax = -kInf;
    // Fields that drove the steps entering the centred difference.
    for (std::size_t m = k0; m < std::max(k1, k0 + 1) && m < K; ++m) {
      const Grid1D& g = field[m].grid;
      const int ja = std::max(0, g.cell_of(lo - run.window));
      const int jb = std::min(g.n_cells - 1, g.cell_of(hi + run.window));
      for (int j = ja; j <= jb; ++j) {
        const double v = shift_velocity(sys, field[m].cells[j], refs.left[m], refs.right[m], w);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
      }
    }
    const double hd = run.hdot[k];
    const double slack = 1e-9 * std::max(1.0, std::max(std::abs(vmin), std::abs(vmax)));
    ++c.n_samples;
    if (hd >= vmin - slack && hd <= vmax + slack) ++c.inclusion_hits;

    const Grid1D& g = field[k].grid;
    const int j = g.cell_of(run.h[k]);
    if (j - 1 >= 0 && j + 1 < g.n_cells) {
      const Vec& um = field[k].cells[j - 1];
      const Vec& up = field[k].cells[j + 1];
      if ((up - um).norm() > noise) {
        ++c.rh_checked;
        const double r = rh_residual(sys, um, up, hd);
        c.rh_worst = std::max(c.rh_worst, r);
        if (r > tolerance) ++c.rh_violations;
      }
    }
  }
  c.inclusion_fraction = c.n_samples ? static_cast<double>(c.inclusion_hits) / c.n_samples : 0.0;
  return c;
}

}  // namespace clab
