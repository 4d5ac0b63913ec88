#include "clab/fv_solver.hpp"
#include "clab/shock_curves.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace clab {

Grid1D Grid1D::make(double x_min, double x_max, int n_cells) {
  if (n_cells < 8) throw Error(ErrorKind::Parameter, "fv_solver.grid.n_cells", "need at least 8 cells");
  if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max))
    throw Error(ErrorKind::Parameter, "fv_solver.grid", "need finite x_min < x_max");
  return Grid1D{x_min, x_max, n_cells};
}

int Grid1D::cell_of(double x) const { return static_cast<int>(std::floor((x - x_min) / dx())); }

// ------------------------------------------------------------ sources ---

SourceOperator SourceOperator::zero() { return SourceOperator{}; }

SourceOperator SourceOperator::linear(double c) {
  if (!std::isfinite(c)) throw Error(ErrorKind::Parameter, "fv_solver.source.c", "must be finite");
  SourceOperator g;
  g.kind_ = Kind::Linear;
  g.c_ = c;
  g.lip_ = std::abs(c);
  return g;
}

SourceOperator SourceOperator::convolution(std::vector<double> kernel, double scale) {
  if (kernel.empty()) throw Error(ErrorKind::Parameter, "fv_solver.source.kernel", "kernel is empty");
  double l1 = 0.0;
  for (double k : kernel) {
    if (!std::isfinite(k)) throw Error(ErrorKind::Parameter, "fv_solver.source.kernel", "non-finite entry");
    l1 += std::abs(k);
  }
  SourceOperator g;
  g.kind_ = Kind::Convolution;
  g.kernel_ = std::move(kernel);
  g.scale_ = scale;
  g.lip_ = std::abs(scale) * l1;
  return g;
}

SourceOperator SourceOperator::custom(Fn fn, double lipschitz, std::string label) {
  if (!fn) throw Error(ErrorKind::Parameter, "fv_solver.source", "custom operator has no function");
  if (!(lipschitz >= 0.0)) throw Error(ErrorKind::Parameter, "fv_solver.source.lipschitz", "must be >= 0");
  SourceOperator g;
  g.kind_ = Kind::Custom;
  g.fn_ = std::move(fn);
  g.lip_ = lipschitz;
  g.label_ = std::move(label);
  return g;
}

std::string SourceOperator::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::Zero: os << "zero"; break;
    case Kind::Linear: os << "linear(c=" << c_ << ")"; break;
    case Kind::Convolution: os << "convolution(len=" << kernel_.size() << ", scale=" << scale_ << ")"; break;
    case Kind::Custom: os << label_; break;
  }
  return os.str();
}

void SourceOperator::apply_into(const Field& u, Field& out) const {
  const int n = static_cast<int>(u.size());
  out.resize(u.size());
  if (n == 0) return;
  const int d = static_cast<int>(u[0].size());
  switch (kind_) {
    case Kind::Zero:
      for (auto& v : out) v = Vec::Zero(d);
      return;
    case Kind::Linear:
      for (int j = 0; j < n; ++j) out[j] = c_ * u[j];
      return;
    case Kind::Convolution: {
      const int len = static_cast<int>(kernel_.size());
      const int half = len / 2;
      for (int j = 0; j < n; ++j) {
        Vec acc = Vec::Zero(d);
        for (int k = 0; k < len; ++k) {
          int i = ((j + k - half) % n + n) % n;
          acc += kernel_[k] * u[i];
        }
        out[j] = scale_ * acc;
      }
      return;
    }
    case Kind::Custom:
      out = fn_(u);
      if (out.size() != u.size())
        throw Error(ErrorKind::Parameter, "fv_solver.source", "custom operator changed the field size");
      return;
  }
}

Field SourceOperator::apply(const Field& u) const {
  Field out;
  apply_into(u, out);
  return out;
}

SourceCertificate certify(const SourceOperator& g, int dim, int n_cells, std::size_t n_pairs, std::uint64_t seed) {
  if (dim < 1 || dim > kMaxDim) throw Error(ErrorKind::Parameter, "fv_solver.certify.dim", "out of range");
  if (n_cells < 1) throw Error(ErrorKind::Parameter, "fv_solver.certify.n_cells", "must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_int_distribution<int> R(1, n_cells - 1 > 0 ? n_cells - 1 : 1);
  auto rand_field = [&] {
    Field f(n_cells, Vec(dim));
    for (auto& v : f)
      for (int i = 0; i < dim; ++i) v[i] = U(rng);
    return f;
  };
  auto l2 = [](const Field& f) {
    double s = 0.0;
    for (const auto& v : f) s += v.squaredNorm();
    return std::sqrt(s);
  };
  auto linf = [](const Field& f) {
    double s = 0.0;
    for (const auto& v : f) s = std::max(s, v.cwiseAbs().maxCoeff());
    return s;
  };

  SourceCertificate c;
  c.lipschitz = g.lipschitz();
  double scale = 1.0;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    Field u = rand_field(), v = rand_field();
    Field gu = g.apply(u), gv = g.apply(v);
    const int r = R(rng);
    Field ur(n_cells), gur(n_cells);
    for (int j = 0; j < n_cells; ++j) {
      ur[j] = u[(j + r) % n_cells];
      gur[j] = gu[(j + r) % n_cells];
    }
    Field gru = g.apply(ur);
    for (int j = 0; j < n_cells; ++j)
      c.translation_error = std::max(c.translation_error, (gru[j] - gur[j]).cwiseAbs().maxCoeff());
    Field du(n_cells), dg(n_cells);
    for (int j = 0; j < n_cells; ++j) {
      du[j] = u[j] - v[j];
      dg[j] = gu[j] - gv[j];
    }
    const double n_du = l2(du);
    if (n_du > 0) c.l2_ratio = std::max(c.l2_ratio, l2(dg) / n_du);
    const double n_u = linf(u);
    if (n_u > 0) c.linf_ratio = std::max(c.linf_ratio, linf(gu) / n_u);
    scale = std::max(scale, linf(gu));
    ++c.pairs;
  }
  const double slack = 1e-12 * std::max(1.0, c.lipschitz);
  c.pass = c.translation_error <= 1e-12 * scale && c.l2_ratio <= c.lipschitz + slack &&
           c.linf_ratio <= c.lipschitz + slack;
  return c;
}

// ------------------------------------------------------------ scheme ---

Vec rusanov_flux(const System& sys, const Vec& uL, const Vec& uR) {
  const double a = std::max(sys.max_abs_speed(uL), sys.max_abs_speed(uR));
  return 0.5 * (sys.flux(uL) + sys.flux(uR)) - 0.5 * a * (uR - uL);
}

double rusanov_entropy_flux(const System& sys, const Vec& uL, const Vec& uR) {
  const double a = std::max(sys.max_abs_speed(uL), sys.max_abs_speed(uR));
  return 0.5 * (sys.entropy_flux(uL) + sys.entropy_flux(uR)) - 0.5 * a * (sys.entropy(uR) - sys.entropy(uL));
}

double stable_dt(const System& sys, const Field& u, double cfl, double dx) {
  double amax = 0.0;
  for (const auto& v : u) amax = std::max(amax, sys.max_abs_speed(v));
  return cfl * dx / std::max(amax, 1e-8);
}

namespace {

inline int ghost(int j, int n, Boundary bc) {
  if (bc == Boundary::Periodic) return ((j % n) + n) % n;
  return std::clamp(j, 0, n - 1);
}

void check_cfl(double cfl) {
  if (!(cfl > 0.0 && cfl < 1.0)) throw Error(ErrorKind::Parameter, "fv_solver.cfl", "cfl must lie in (0, 1)");
}

// Interface fluxes F_{j-1/2}, j = 0..n, with per-cell flux and speed cached.
void interface_fluxes(const System& sys, const Field& u, Boundary bc, std::vector<Vec>& F, std::vector<double>* Q) {
  const int n = static_cast<int>(u.size());
  std::vector<Vec> f(n);
  std::vector<double> a(n), q, e;
  for (int j = 0; j < n; ++j) {
    f[j] = sys.flux(u[j]);
    a[j] = sys.max_abs_speed(u[j]);
  }
  if (Q) {
    q.resize(n);
    e.resize(n);
    for (int j = 0; j < n; ++j) {
      q[j] = sys.entropy_flux(u[j]);
      e[j] = sys.entropy(u[j]);
    }
    Q->assign(n + 1, 0.0);
  }
  F.assign(n + 1, Vec());
  for (int i = 0; i <= n; ++i) {
    const int l = ghost(i - 1, n, bc), r = ghost(i, n, bc);
    const double al = std::max(a[l], a[r]);
    F[i] = 0.5 * (f[l] + f[r]) - 0.5 * al * (u[r] - u[l]);
    if (Q) (*Q)[i] = 0.5 * (q[l] + q[r]) - 0.5 * al * (e[r] - e[l]);
  }
}

}  // namespace

FieldSnapshot step_with_dt(const System& sys, const FieldSnapshot& snap, const SourceOperator& source, double dt,
                           Boundary bc) {
  if (!(dt > 0.0) || !std::isfinite(dt) || snap.t + dt == snap.t)
    throw Error(ErrorKind::Positivity, "fv_solver.dt", "time step underflow (dt = " + std::to_string(dt) + ")");
  const int n = snap.grid.n_cells;
  if (static_cast<int>(snap.cells.size()) != n)
    throw Error(ErrorKind::Parameter, "fv_solver.snapshot", "cell count does not match the grid");
  std::vector<Vec> F;
  interface_fluxes(sys, snap.cells, bc, F, nullptr);
  Field G;
  if (!source.is_zero()) source.apply_into(snap.cells, G);
  FieldSnapshot out;
  out.grid = snap.grid;
  out.t = snap.t + dt;
  out.cells.resize(n);
  const double k = dt / snap.grid.dx();
  for (int j = 0; j < n; ++j) {
    Vec v = snap.cells[j] - k * (F[j + 1] - F[j]);
    if (!G.empty()) v += dt * G[j];
    if (auto why = sys.violation(v)) {
      std::ostringstream os;
      os << "cell " << j << " at t = " << out.t << " became inadmissible (" << *why << "); try a smaller cfl";
      throw Error(ErrorKind::Positivity, "fv_solver.step", os.str());
    }
    out.cells[j] = v;
  }
  return out;
}

FieldSnapshot step(const System& sys, const FieldSnapshot& snap, const SourceOperator& source, double cfl,
                   Boundary bc) {
  check_cfl(cfl);
  for (int j = 0; j < snap.grid.n_cells; ++j) sys.require_admissible(snap.cells[j], "fv_solver.snapshot");
  return step_with_dt(sys, snap, source, stable_dt(sys, snap.cells, cfl, snap.grid.dx()), bc);
}

std::vector<FieldSnapshot> simulate(const System& sys, const FieldSnapshot& initial, const SourceOperator& source,
                                    double cfl, double t_end, int stride, Boundary bc) {
  check_cfl(cfl);
  if (stride < 1) throw Error(ErrorKind::Parameter, "fv_solver.snapshot_stride", "must be >= 1");
  if (!(t_end >= initial.t)) throw Error(ErrorKind::Parameter, "fv_solver.t_end", "t_end precedes the initial time");
  for (const auto& v : initial.cells) sys.require_admissible(v, "fv_solver.initial");
  std::vector<FieldSnapshot> out{initial};
  FieldSnapshot cur = initial;
  long k = 0;
  while (cur.t < t_end) {
    double dt = stable_dt(sys, cur.cells, cfl, cur.grid.dx());
    const bool last = cur.t + dt >= t_end;
    if (last) dt = t_end - cur.t;
    cur = step_with_dt(sys, cur, source, dt, bc);
    if (last) cur.t = t_end;
    ++k;
    if (last || k % stride == 0) out.push_back(cur);
  }
  return out;
}

std::vector<std::vector<FieldSnapshot>> simulate_lockstep(const System& sys, const std::vector<FieldSnapshot>& initial,
                                                          const SourceOperator& source, double cfl, double t_end,
                                                          Boundary bc) {
  check_cfl(cfl);
  if (initial.empty()) throw Error(ErrorKind::Parameter, "fv_solver.lockstep", "no fields");
  std::vector<std::vector<FieldSnapshot>> out(initial.size());
  std::vector<FieldSnapshot> cur = initial;
  for (std::size_t i = 0; i < cur.size(); ++i) {
    for (const auto& v : cur[i].cells) sys.require_admissible(v, "fv_solver.initial");
    cur[i].t = initial[0].t;
    out[i].push_back(cur[i]);
  }
  double t = initial[0].t;
  while (t < t_end) {
    double dt = std::numeric_limits<double>::infinity();
    for (const auto& c : cur) dt = std::min(dt, stable_dt(sys, c.cells, cfl, c.grid.dx()));
    const bool last = t + dt >= t_end;
    if (last) dt = t_end - t;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      cur[i] = step_with_dt(sys, cur[i], source, dt, bc);
      if (last) cur[i].t = t_end;
      out[i].push_back(cur[i]);
    }
    t = cur[0].t;
  }
  return out;
}

EntropyResidual entropy_residual(const System& sys, const std::vector<FieldSnapshot>& traj,
                                 const SourceOperator& source, Boundary bc) {
  EntropyResidual res;
  res.min_value = std::numeric_limits<double>::infinity();
  std::vector<Vec> F;
  std::vector<double> Q;
  Field G;
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const auto& a = traj[k];
    const auto& b = traj[k + 1];
    const double dt = b.t - a.t;
    if (!(dt > 0.0)) throw Error(ErrorKind::Parameter, "fv_solver.entropy_residual", "snapshots not increasing in t");
    const double dx = a.grid.dx();
    interface_fluxes(sys, a.cells, bc, F, &Q);
    if (!source.is_zero()) source.apply_into(a.cells, G);
    std::vector<double> r(a.cells.size());
    for (std::size_t j = 0; j < a.cells.size(); ++j) {
      double v = (sys.entropy(b.cells[j]) - sys.entropy(a.cells[j])) / dt + (Q[j + 1] - Q[j]) / dx;
      if (!source.is_zero()) v -= sys.entropy_grad(a.cells[j]).dot(G[j]);
      r[j] = v;
      if (v > res.max_positive) {
        res.max_positive = v;
        res.worst_step = static_cast<int>(k);
        res.worst_cell = static_cast<int>(j);
      }
      res.min_value = std::min(res.min_value, v);
    }
    res.r.push_back(std::move(r));
  }
  if (res.r.empty()) res.min_value = 0.0;
  return res;
}

// ------------------------------------------------------ initial data ---

FieldSnapshot riemann_data(const Grid1D& grid, const Vec& uL, const Vec& uR, double x0) {
  FieldSnapshot s;
  s.grid = grid;
  s.cells.resize(grid.n_cells);
  const double dx = grid.dx();
  for (int j = 0; j < grid.n_cells; ++j) {
    const double a = grid.x_min + j * dx;
    const double w = std::clamp((x0 - a) / dx, 0.0, 1.0);  // fraction left of x0
    s.cells[j] = w * uL + (1.0 - w) * uR;
  }
  return s;
}

double bump_average(double a, double b, double center, double width) {
  auto P = [](double z) {
    z = std::clamp(z, -1.0, 1.0);
    return z - 2.0 * z * z * z / 3.0 + z * z * z * z * z / 5.0;
  };
  return width * (P((b - center) / width) - P((a - center) / width)) / (b - a);
}

void add_bump(FieldSnapshot& snap, const Vec& direction, double amplitude, double center, double width) {
  if (!(width > 0.0)) throw Error(ErrorKind::Parameter, "fv_solver.perturbation.width", "must be positive");
  const double dx = snap.grid.dx();
  for (int j = 0; j < snap.grid.n_cells; ++j) {
    const double a = snap.grid.x_min + j * dx;
    snap.cells[j] += amplitude * bump_average(a, a + dx, center, width) * direction;
  }
}

Vec sample_linear(const FieldSnapshot& snap, double x) {
  const Grid1D& g = snap.grid;
  if (!(x >= g.x_min && x <= g.x_max)) {
    std::ostringstream os;
    os << "x = " << x << " outside [" << g.x_min << ", " << g.x_max << "]";
    throw Error(ErrorKind::Extension, "fv_solver.sample", os.str());
  }
  const double p = (x - g.x_min) / g.dx() - 0.5;
  if (p <= 0.0) return snap.cells.front();
  if (p >= g.n_cells - 1) return snap.cells.back();
  const int j = static_cast<int>(std::floor(p));
  const double w = p - j;
  return (1.0 - w) * snap.cells[j] + w * snap.cells[j + 1];
}

// --------------------------------------------------------- reference ---

int steepest_jump(const Field& u, int lo, int hi) {
  int best = lo;
  double bv = -1.0;
  for (int j = std::max(lo, 0); j < hi && j + 1 < static_cast<int>(u.size()); ++j) {
    const double d = (u[j + 1] - u[j]).norm();
    if (d > bv) {
      bv = d;
      best = j;
    }
  }
  return best;
}

namespace {

double shock_speed(const System& sys, const Vec& l, const Vec& r) {
  const Vec d = r - l;
  const double n2 = d.squaredNorm();
  if (n2 == 0.0) return 0.0;
  return d.dot(sys.flux(r) - sys.flux(l)) / n2;
}

}  // namespace

ReferenceSolution extract_reference(const System& sys, std::vector<FieldSnapshot> traj, const Vec& u_L,
                                    const Vec& u_R, int m, double min_gap, double plateau_tol) {
  if (traj.empty()) throw Error(ErrorKind::Parameter, "fv_solver.reference", "empty trajectory");
  if (m < 1) throw Error(ErrorKind::Parameter, "fv_solver.reference.trace_offset", "must be >= 1");
  ReferenceSolution ref;
  ref.u_L = u_L;
  ref.u_R = u_R;
  ref.trace_offset = m;
  ref.sigma = shock_speed(sys, u_L, u_R);
  ref.rho = std::numeric_limits<double>::infinity();
  const int n = traj[0].grid.n_cells;
  const double dx = traj[0].grid.dx();
  const double step_tol = plateau_tol * (u_R - u_L).norm();
  const int reach = std::max(m, n / 8);
  for (const auto& snap : traj) {
    const int js = steepest_jump(snap.cells, 0, n - 1);
    int il = js - m, ir = js + 1 + m;
    // Walk out of a wide numerical profile onto the plateaus.
    if (plateau_tol > 0.0) {
      while (il > 0 && js - il < reach && (snap.cells[il] - snap.cells[il - 1]).norm() > step_tol) --il;
      while (ir + 1 < n && ir - js - 1 < reach && (snap.cells[ir + 1] - snap.cells[ir]).norm() > step_tol) ++ir;
    }
    if (il < 0 || ir >= n) {
      std::ostringstream os;
      os << "front at cell " << js << " too close to the boundary at t = " << snap.t;
      throw Error(ErrorKind::Reference, "fv_solver.reference", os.str());
    }
    const Vec& l = snap.cells[il];
    const Vec& r = snap.cells[ir];
    const Vec d = l - r;
    const double gap = d.norm();
    if (!(gap > min_gap) || gap == 0.0) {
      std::ostringstream os;
      os << "discontinuity gap collapsed to " << gap << " at t = " << snap.t;
      throw Error(ErrorKind::Reference, "fv_solver.reference.rho", os.str());
    }
    Vec mass = Vec::Zero(l.size());
    for (int j = il; j <= ir; ++j) mass += snap.cells[j] * dx;
    const double a = snap.grid.x_min + il * dx, b = snap.grid.x_min + (ir + 1) * dx;
    const double xs = a + d.dot(mass - r * (b - a)) / d.squaredNorm();
    ref.t.push_back(snap.t);
    ref.s.push_back(xs);
    ref.left.push_back(l);
    ref.right.push_back(r);
    ref.front_cell.push_back(js);
    ref.left_offset.push_back(js - il);
    ref.right_offset.push_back(ir - js);
    ref.rho = std::min(ref.rho, gap);
    for (int j = 0; j + 1 < n; ++j) {
      if (j + 1 >= il && j <= ir) continue;
      ref.lipschitz = std::max(ref.lipschitz, (snap.cells[j + 1] - snap.cells[j]).norm() / dx);
    }
  }
  // The mass location jitters by a fraction of a cell whenever the front or a
  // trace cell moves, which differencing turns into O(1) speed noise. The path
  // is therefore the integral of the traces' jump speed, started at the mass
  // location and checked against it.
  ref.s_mass = ref.s;
  ref.sdot.resize(ref.t.size());
  for (std::size_t k = 0; k < ref.t.size(); ++k) ref.sdot[k] = shock_speed(sys, ref.left[k], ref.right[k]);
  for (std::size_t k = 1; k < ref.t.size(); ++k)
    ref.s[k] = ref.s[k - 1] + 0.5 * (ref.sdot[k] + ref.sdot[k - 1]) * (ref.t[k] - ref.t[k - 1]);
  for (std::size_t k = 0; k < ref.t.size(); ++k) {
    ref.rh_max = std::max(ref.rh_max, rh_residual(sys, ref.left[k], ref.right[k], ref.sdot[k]));
    ref.path_drift = std::max(ref.path_drift, std::abs(ref.s[k] - ref.s_mass[k]));
  }
  ref.trajectory = std::move(traj);
  return ref;
}

ReferenceSolution make_reference(const System& sys, const ReferenceSpec& spec) {
  sys.require_admissible(spec.u_L, "fv_solver.reference.u_L");
  sys.require_admissible(spec.u_R, "fv_solver.reference.u_R");
  if (!(spec.t_end >= 0.0)) throw Error(ErrorKind::Parameter, "fv_solver.reference.t_end", "must be >= 0");
  check_cfl(spec.cfl);
  const double sigma = shock_speed(sys, spec.u_L, spec.u_R);
  const double rh = rh_residual(sys, spec.u_L, spec.u_R, sigma);
  if (rh > 1e-8 * std::max(1.0, sys.flux(spec.u_L).cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::Parameter, "fv_solver.reference.u_R", "u_L and u_R are not joined by a shock");
  if (spec.u_L.size() != spec.u_R.size() || (spec.u_L - spec.u_R).norm() == 0.0)
    throw Error(ErrorKind::Parameter, "fv_solver.reference.u_R", "u_R must differ from u_L");

  const bool exact = !spec.force_simulated && spec.left_amplitude == 0.0 && spec.right_amplitude == 0.0 &&
                     spec.source.is_zero();
  if (exact) {
    ReferenceSolution ref;
    ref.exact = true;
    ref.u_L = spec.u_L;
    ref.u_R = spec.u_R;
    ref.sigma = sigma;
    ref.trace_offset = spec.trace_offset;
    ref.rho = (spec.u_L - spec.u_R).norm();
    ref.rh_max = rh;
    if (!(ref.rho > spec.min_gap))
      throw Error(ErrorKind::Reference, "fv_solver.reference.rho", "jump does not exceed the gap floor");
    const double amax = std::max(sys.max_abs_speed(spec.u_L), sys.max_abs_speed(spec.u_R));
    const double dt = spec.cfl * spec.grid.dx() / std::max(amax, 1e-8);
    double t = 0.0;
    for (;;) {
      FieldSnapshot snap = riemann_data(spec.grid, spec.u_L, spec.u_R, spec.s0 + sigma * t);
      snap.t = t;
      ref.trajectory.push_back(std::move(snap));
      ref.t.push_back(t);
      ref.s.push_back(spec.s0 + sigma * t);
      ref.sdot.push_back(sigma);
      ref.left.push_back(spec.u_L);
      ref.right.push_back(spec.u_R);
      ref.front_cell.push_back(spec.grid.cell_of(spec.s0 + sigma * t));
      ref.left_offset.push_back(spec.trace_offset);
      ref.right_offset.push_back(spec.trace_offset + 1);
      if (t >= spec.t_end) break;
      t = std::min(spec.t_end, t + dt);
    }
    return ref;
  }

  FieldSnapshot init = riemann_data(spec.grid, spec.u_L, spec.u_R, spec.s0);
  const Vec ones = Vec::Ones(spec.u_L.size());
  if (spec.left_amplitude != 0.0) add_bump(init, ones, spec.left_amplitude, spec.s0 - 1.5 * spec.width, spec.width);
  if (spec.right_amplitude != 0.0)
    add_bump(init, ones, spec.right_amplitude, spec.s0 + 1.5 * spec.width, spec.width);
  auto traj = simulate(sys, init, spec.source, spec.cfl, spec.t_end, 1, Boundary::Outflow);
  return extract_reference(sys, std::move(traj), spec.u_L, spec.u_R, spec.trace_offset, spec.min_gap,
                           spec.plateau_tol);
}

}  // namespace clab
