#include "clab/contraction_harness.hpp"
#include "clab/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace clab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void fractional_index(const FieldSnapshot& s, double p, int& i, double& w) {
  const int n = s.grid.n_cells;
  if (!(p >= 0.0 && p <= n - 1)) {
    std::ostringstream os;
    os << "reference lookup at fractional cell " << p << " outside [0, " << n - 1
       << "]; widen the reference grid";
    throw Error(ErrorKind::Extension, "contraction_harness.reference", os.str());
  }
  i = std::min(static_cast<int>(std::floor(p)), n - 2);
  w = p - i;
}

Vec lerp_at(const FieldSnapshot& s, double p) {
  int i;
  double w;
  fractional_index(s, p, i, w);
  if (w == 0.0) return s.cells[i];
  return (1.0 - w) * s.cells[i] + w * s.cells[i + 1];
}

double position_index(const FieldSnapshot& s, double x) { return (x - s.grid.x_min) / s.grid.dx() - 0.5; }

double overlap(double a, double b, double lo, double hi) { return std::max(0.0, std::min(b, hi) - std::max(a, lo)); }

}  // namespace

Vec RefView::at(int j, double X) const { return lerp_at(*snap, j + offset + X / dx()); }

Vec RefView::slope(int j, double X) const {
  int i;
  double w;
  fractional_index(*snap, j + offset + X / dx(), i, w);
  return (snap->cells[i + 1] - snap->cells[i]) / dx();
}

int grid_offset(const Grid1D& test, const Grid1D& ref) {
  const double dx = test.dx();
  if (std::abs(ref.dx() - dx) > 1e-12 * dx)
    throw Error(ErrorKind::Parameter, "contraction_harness.grid", "reference and test grids need the same dx");
  const double o = (test.x_min - ref.x_min) / dx;
  const long r = std::lround(o);
  if (std::abs(o - r) > 1e-6)
    throw Error(ErrorKind::Parameter, "contraction_harness.grid", "reference grid is not cell-aligned with the test grid");
  return static_cast<int>(r);
}

RFit compute_r(const System& sys, const std::vector<FieldSnapshot>& field, const std::vector<FieldSnapshot>& ref,
               const std::vector<double>& X) {
  if (field.size() != ref.size() || X.size() != field.size())
    throw Error(ErrorKind::Parameter, "contraction_harness.compute_r", "series lengths differ");
  RFit out;
  double lam = 0.0;
  for (std::size_t k = 0; k < field.size(); ++k) {
    RefView view{&ref[k], grid_offset(field[k].grid, ref[k].grid)};
    for (int j = 0; j < field[k].grid.n_cells; ++j) {
      const Vec& u = field[k].cells[j];
      const Vec ub = view.at(j, X[k]);
      lam = std::max({lam, sys.max_abs_speed(u), sys.max_abs_speed(ub)});
      const double e = rel_entropy(sys, u, ub);
      if (e <= 1e-14) continue;
      out.raw = std::max(out.raw, std::abs(rel_entropy_flux(sys, u, ub)) / e);
      ++out.pairs;
    }
  }
  if (out.pairs == 0) {
    out.fallback = true;
    out.r = 2.0 * lam;
    out.note = "no pair with eta(u|ub) > 1e-14; using 2 sup|lambda|";
    if (!(out.r > 0.0)) out.r = 1.0;
  } else {
    out.r = 1.05 * out.raw;
  }
  return out;
}

double weighted_relative_entropy(const System& sys, const FieldSnapshot& u, const RefView& ref, double X, double h,
                                 double a, double x1, double x2, bool weight_left) {
  const Grid1D& g = u.grid;
  if (!(x1 <= h && h <= x2))
    throw Error(ErrorKind::Parameter, "contraction_harness.h", "h must lie inside [x1, x2]");
  if (x1 < g.x_min || x2 > g.x_max)
    throw Error(ErrorKind::Extension, "contraction_harness.cone", "window leaves the test grid");
  const double wl = weight_left ? a : 1.0, wr = weight_left ? 1.0 : a;
  const double dx = g.dx();
  const int ja = std::max(0, g.cell_of(x1)), jb = std::min(g.n_cells - 1, g.cell_of(x2));
  double total = 0.0;
  for (int j = ja; j <= jb; ++j) {
    const double lo = g.x_min + j * dx, hi = lo + dx;
    const double L = overlap(lo, hi, x1, h), Rr = overlap(lo, hi, h, x2);
    if (L == 0.0 && Rr == 0.0) continue;
    total += (wl * L + wr * Rr) * rel_entropy(sys, u.cells[j], ref.at(j, X));
  }
  return total;
}

double windowed_l2(const FieldSnapshot& u, const RefView& ref, double X, double x1, double x2) {
  const Grid1D& g = u.grid;
  if (x1 < g.x_min || x2 > g.x_max)
    throw Error(ErrorKind::Extension, "contraction_harness.cone", "window leaves the test grid");
  const double dx = g.dx();
  const int ja = std::max(0, g.cell_of(x1)), jb = std::min(g.n_cells - 1, g.cell_of(x2));
  double total = 0.0;
  for (int j = ja; j <= jb; ++j) {
    const double lo = g.x_min + j * dx;
    const double L = overlap(lo, lo + dx, x1, x2);
    if (L > 0.0) total += L * (u.cells[j] - ref.at(j, X)).squaredNorm();
  }
  return total;
}

// ----------------------------------------------------------- Gronwall ---

GronwallReport verify_gronwall(const std::vector<double>& t, const std::vector<double>& E,
                               const std::vector<double>& Xdot, double E0_window, double uniqueness_tol,
                               double mu_max) {
  if (t.size() != E.size() || t.size() != Xdot.size() || t.empty())
    throw Error(ErrorKind::Parameter, "contraction_harness.gronwall", "series lengths differ or are empty");
  GronwallReport g;
  g.t = t;
  g.E = E;
  g.E0_window = E0_window;
  g.uniqueness_tol = uniqueness_tol;
  std::vector<double> I(t.size(), 0.0);
  for (std::size_t k = 1; k < t.size(); ++k)
    I[k] = I[k - 1] + 0.5 * (Xdot[k] * Xdot[k] + Xdot[k - 1] * Xdot[k - 1]) * (t[k] - t[k - 1]);
  g.xdot_integral = I.back();
  for (double e : E) g.max_E = std::max(g.max_E, e);

  if (!(E0_window > 0.0)) {
    g.uniqueness_branch = true;
    g.mu1 = 0.0;
    g.mu2 = 1.0;
    g.envelope.assign(t.size(), 0.0);
    g.envelope_ok = g.max_E <= uniqueness_tol;
    g.shift_bound = 0.0;
    g.shift_control_ok = g.xdot_integral <= uniqueness_tol;
    g.worst_envelope_margin = -g.max_E;
    return g;
  }

  g.mu2 = std::max(1.0, E.front() / E0_window);
  const double base = g.mu2 * E0_window;
  double mu = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double dt = t[k] - t.front();
    if (dt <= 0.0) continue;
    if (E[k] > base) mu = std::max(mu, std::log(E[k] / base) / dt);
    if (I[k] > 2.0 * base) mu = std::max(mu, std::log(I[k] / base - 1.0) / dt);
  }
  // Nudge past round-off so the fitted value passes its own check.
  mu = mu > 0.0 ? mu * (1.0 + 1e-12) + 1e-15 : 0.0;
  g.mu1 = mu;
  const bool finite = mu <= mu_max;
  g.envelope.resize(t.size());
  g.worst_envelope_margin = kInf;
  bool env = true, shift = true;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double dt = t[k] - t.front();
    g.envelope[k] = base * std::exp(mu * dt);
    g.worst_envelope_margin = std::min(g.worst_envelope_margin, g.envelope[k] - E[k]);
    if (E[k] > g.envelope[k] * (1.0 + 1e-12)) env = false;
    if (I[k] > base * (1.0 + std::exp(mu * dt)) * (1.0 + 1e-12)) shift = false;
  }
  g.shift_bound = base * (1.0 + std::exp(mu * (t.back() - t.front())));
  g.envelope_ok = finite && env;
  g.shift_control_ok = finite && shift;
  return g;
}

// -------------------------------------------------------------- audit ---

AuditReport dissipation_audit(const System& sys, const RunBundle& b, double tolerance) {
  const auto& u = b.u;
  const auto& ub = b.ubar;
  const std::size_t K = u.size();
  if (K < 2 || ub.size() != K || b.shift.h.size() != K)
    throw Error(ErrorKind::Parameter, "contraction_harness.audit", "incomplete run bundle");
  const SourceOperator& G = b.spec.source;

  struct Level {
    double BL = 0, BR = 0, IL = 0, IR = 0, EL = 0, ER = 0;
    std::size_t excluded = 0;
  };
  std::vector<Level> lv(K);
  parallel_for(K, [&](std::size_t k) {
    const FieldSnapshot& f = u[k];
    const Grid1D& g = f.grid;
    const double dx = g.dx();
    RefView view{&ub[k], b.offset};
    const double t = f.t;
    const double h1 = b.cone.h1(t), h2 = b.cone.h2(t), h = b.shift.h[k];
    const double hd = b.shift.hdot[k], X = b.shift.X[k], Xd = b.shift.Xdot[k];
    const double hd1 = b.cone.r, hd2 = -b.cone.r;
    const int jh = g.cell_of(h), j1 = g.cell_of(h1), j2 = std::min(g.n_cells - 1, g.cell_of(h2));
    // ubar at the same points as u: the balance is local, so with u == ubar
    // every term vanishes. The plateau traces belong to the pointwise check.
    const Vec bm = view.at(std::max(0, jh - 1), X);
    const Vec bp = view.at(std::min(g.n_cells - 1, jh + 1), X);
    const Vec ub1 = lerp_at(ub[k], position_index(ub[k], h1 + X));
    const Vec ub2 = lerp_at(ub[k], position_index(ub[k], h2 + X));
    const Vec& u1 = f.cells[j1];
    const Vec& u2 = f.cells[j2];
    const Vec& um = f.cells[std::max(0, jh - 1)];
    const Vec& up = f.cells[std::min(g.n_cells - 1, jh + 1)];
    Level& L = lv[k];
    L.BL = rel_entropy_flux(sys, u1, ub1) - hd1 * rel_entropy(sys, u1, ub1) - rel_entropy_flux(sys, um, bm) +
           hd * rel_entropy(sys, um, bm);
    L.BR = rel_entropy_flux(sys, up, bp) - hd * rel_entropy(sys, up, bp) - rel_entropy_flux(sys, u2, ub2) +
           hd2 * rel_entropy(sys, u2, ub2);
    L.EL = weighted_relative_entropy(sys, f, view, X, h1, 1.0, h1, h);
    L.ER = weighted_relative_entropy(sys, f, view, X, h, 1.0, h, h2);

    Field Gu, Gb;
    if (!G.is_zero()) {
      G.apply_into(f.cells, Gu);
      G.apply_into(ub[k].cells, Gb);
    }
    for (int j = std::max(0, j1); j <= j2; ++j) {
      const double lo = g.x_min + j * dx;
      const double wl = overlap(lo, lo + dx, h1, h), wr = overlap(lo, lo + dx, h, h2);
      if (wl == 0.0 && wr == 0.0) continue;
      const bool wide = b.ref.left_offset.size() == K;
      const int ml = wide ? b.ref.left_offset[k] : b.ref.trace_offset;
      const int mr = wide ? b.ref.right_offset[k] : b.ref.trace_offset + 1;
      if (j >= jh - ml && j <= jh + mr) {
        ++L.excluded;
        continue;
      }
      const Vec& uj = f.cells[j];
      const double p = j + b.offset + X / dx;
      int i;
      double w;
      fractional_index(ub[k], p, i, w);
      const Vec v = (1.0 - w) * ub[k].cells[i] + w * ub[k].cells[i + 1];
      const Vec dv = (ub[k].cells[i + 1] - ub[k].cells[i]) / dx;
      const Vec dgrad = (sys.entropy_grad(ub[k].cells[i + 1]) - sys.entropy_grad(ub[k].cells[i])) / dx;
      const Mat H = sys.entropy_hess(v);
      const Vec diff = uj - v;
      double I = dgrad.dot(rel_flux(sys, uj, v)) + 2.0 * Xd * dv.dot(H * diff);
      if (!G.is_zero()) {
        const Vec gb = (1.0 - w) * Gb[i] + (w == 0.0 ? Vec::Zero(v.size()) : Vec(w * Gb[i + 1]));
        I += -rel_entropy_gradient(sys, uj, v).dot(Gu[j]) + (gb - Gu[j]).dot(H * diff);
      }
      L.IL += wl * I;
      L.IR += wr * I;
    }
  });

  AuditReport rep;
  rep.tolerance = tolerance;
  rep.worst_cumulative = kInf;
  double cl = 0.0, cr = 0.0;
  bool ok = true;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const double dt = u[k + 1].t - u[k].t;
    const double bl = 0.5 * (lv[k].BL + lv[k + 1].BL) * dt, br = 0.5 * (lv[k].BR + lv[k + 1].BR) * dt;
    const double il = 0.5 * (lv[k].IL + lv[k + 1].IL) * dt, ir = 0.5 * (lv[k].IR + lv[k + 1].IR) * dt;
    const double el = lv[k + 1].EL - lv[k].EL, er = lv[k + 1].ER - lv[k].ER;
    rep.left.boundary += bl;
    rep.left.interior += il;
    rep.left.delta_E += el;
    rep.right.boundary += br;
    rep.right.interior += ir;
    rep.right.delta_E += er;
    const double ml = bl - el - il, mr = br - er - ir;
    cl += ml;
    cr += mr;
    rep.t.push_back(u[k + 1].t);
    rep.step_margin.push_back(ml + mr);
    rep.cumulative_margin.push_back(cl + cr);
    rep.worst_cumulative = std::min({rep.worst_cumulative, cl, cr});
    if (cl < -tolerance || cr < -tolerance) ok = false;
  }
  for (const auto& l : lv) rep.excluded_cells += l.excluded;
  if (!std::isfinite(rep.worst_cumulative)) rep.worst_cumulative = 0.0;
  rep.pass = ok;
  return rep;
}

// ---------------------------------------------------------- experiment ---

RunBundle run_experiment(const System& sys, const ExperimentSpec& spec) {
  const auto started = std::chrono::steady_clock::now();
  RunBundle b;
  b.spec = spec;
  const Grid1D& g = spec.grid;
  Grid1D::make(g.x_min, g.x_max, g.n_cells);
  const double dx = g.dx();
  if (!(spec.t0 > 0.0)) throw Error(ErrorKind::Parameter, "contraction_harness.t0", "must be positive");
  if (!(spec.R > 0.0)) throw Error(ErrorKind::Parameter, "contraction_harness.R", "must be positive");
  sys.require_admissible(spec.u_L, "contraction_harness.u_L");

  // Reference shock.
  ShockCurvePoint sp = hugoniot_locus(sys, spec.u_L, Family::First, spec.s_R);
  b.u_R = sp.locus;
  b.sigma = sp.speed;

  // Weights.
  if (spec.fixed_a >= 0.0) {
    b.w = spec.fixed;
    b.w.a = spec.fixed_a;
  } else {
    b.weights = build_weights(sys, {spec.u_L}, StateBall(spec.B, spec.ball_center), spec.rho, spec.weight_opt);
    b.w = b.weights.w;
  }
  if (spec.C_star_override >= 0.0) b.w.C_star = spec.C_star_override;

  // Reference grid: wider by the distance information can travel plus R.
  const double lam = 1.1 * std::max(sys.max_abs_speed(spec.u_L), sys.max_abs_speed(b.u_R));
  const int pad = static_cast<int>(std::ceil((2.0 * lam * spec.t0 + spec.R) / dx));
  b.ref_grid = Grid1D{g.x_min - pad * dx, g.x_max + pad * dx, g.n_cells + 2 * pad};
  b.offset = pad;

  FieldSnapshot u0 = riemann_data(g, spec.u_L, b.u_R, spec.s0);
  FieldSnapshot ub0 = riemann_data(b.ref_grid, spec.u_L, b.u_R, spec.s0);
  const Vec ones = Vec::Ones(spec.u_L.size());
  for (FieldSnapshot* f : {&u0, &ub0}) {
    if (spec.left_modulation != 0.0)
      add_bump(*f, ones, spec.left_modulation, spec.s0 - 1.5 * spec.modulation_width, spec.modulation_width);
    if (spec.right_modulation != 0.0)
      add_bump(*f, ones, spec.right_modulation, spec.s0 + 1.5 * spec.modulation_width, spec.modulation_width);
  }
  if (spec.amplitude != 0.0) add_bump(u0, ones, spec.amplitude, spec.center, spec.width);

  auto trajs = simulate_lockstep(sys, {u0, ub0}, spec.source, spec.cfl, spec.t0, Boundary::Outflow);
  b.u = std::move(trajs[0]);
  b.ubar = std::move(trajs[1]);

  ReferenceSolution mass = extract_reference(sys, b.ubar, spec.u_L, b.u_R, spec.trace_offset, 0.0, spec.plateau_tol);
  b.s_mass = mass.s_mass;
  b.ref = std::move(mass);
  b.ref.trajectory.clear();  // the bundle keeps ubar itself

  // The reference path is the shift of ubar itself, so u == ubar gives X == 0.
  b.ref_shift = integrate_filippov(sys, b.ubar, b.w, b.ref, spec.s0, spec.mollification_n);
  b.ref.s = b.ref_shift.h;
  b.ref.sdot = centered_rate(b.ref.t, b.ref.s);
  b.shift = integrate_filippov(sys, b.u, b.w, b.ref, spec.s0, spec.mollification_n);

  const double tol = spec.tolerance_factor * dx;
  b.dissipation = verify_dissipation(sys, b.shift, b.u, b.ref, b.w, tol);
  b.facts = check_filippov_facts(sys, b.shift, b.u, b.ref, b.w, tol, tol);

  b.r = compute_r(sys, b.u, b.ubar, b.shift.X);
  b.cone = ConeSpec{spec.R, spec.t0, b.r.r, spec.s0};
  if (b.cone.h1(0.0) < g.x_min + 2 * dx || b.cone.h2(0.0) > g.x_max - 2 * dx) {
    std::ostringstream os;
    os << "cone [" << b.cone.h1(0.0) << ", " << b.cone.h2(0.0) << "] at t = 0 does not fit in the grid";
    throw Error(ErrorKind::Parameter, "contraction_harness.grid", os.str());
  }

  const std::size_t K = b.u.size();
  b.E.resize(K);
  std::vector<double> t(K);
  for (std::size_t k = 0; k < K; ++k) {
    t[k] = b.u[k].t;
    const double h = std::clamp(b.shift.h[k], b.cone.h1(t[k]), b.cone.h2(t[k]));
    if (h != b.shift.h[k])
      throw Error(ErrorKind::Parameter, "contraction_harness.R", "shift left the cone; increase R");
    b.E[k] = weighted_relative_entropy(sys, b.u[k], RefView{&b.ubar[k], b.offset}, b.shift.X[k], h, b.w.a,
                                       b.cone.h1(t[k]), b.cone.h2(t[k]), spec.weight_left);
  }
  const double E0w = windowed_l2(b.u[0], RefView{&b.ubar[0], b.offset}, 0.0, b.cone.h1(0.0), b.cone.h2(0.0));
  const double scale = b.cone.h2(0.0) - b.cone.h1(0.0);
  b.gronwall = verify_gronwall(t, b.E, b.shift.Xdot, E0w, 1e-8 * scale);

  double run_min = kInf;
  for (std::size_t k = 0; k < K; ++k) {
    if (k > 0) b.monotonicity_defect = std::max(b.monotonicity_defect, b.E[k] - run_min);
    run_min = std::min(run_min, b.E[k]);
  }

  // Functional versus windowed L2 mass at t0.
  const std::size_t kl = K - 1;
  RefView last{&b.ubar[kl], b.offset};
  const double x1 = spec.s0 - spec.R, x2 = spec.s0 + spec.R;
  b.l2_t0 = windowed_l2(b.u[kl], last, b.shift.X[kl], x1, x2);
  const int j1 = std::max(0, g.cell_of(x1)), j2 = std::min(g.n_cells - 1, g.cell_of(x2));
  Vec lo = b.u[kl].cells[j1], hi = lo;
  for (int j = j1; j <= j2; ++j) {
    for (const Vec& v : {b.u[kl].cells[j], last.at(j, b.shift.X[kl])}) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }
  b.qb = estimate_quadratic_bounds(sys, 0.5 * (lo + hi), std::max(0.5 * (hi - lo).norm(), 1e-6), 2000, spec.seed);
  const double Et0 = b.E[kl];
  const double wmin = std::min(1.0, b.w.a);
  b.l2_equivalence_ok = Et0 <= b.qb.c_double_star * b.l2_t0 * (1 + 1e-9) + 1e-300 &&
                        wmin * b.qb.c_star * b.l2_t0 <= Et0 * (1 + 1e-9) + 1e-300;

  b.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return b;
}

}  // namespace clab
