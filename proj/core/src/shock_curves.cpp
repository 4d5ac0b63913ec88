#include "clab/shock_curves.hpp"
#include "clab/parallel.hpp"
#include "clab/relative_entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace clab {

namespace {

SystemPtr borrow(const System& s) {
  return SystemPtr(&s, [](const System*) {});
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(8);
  os << x;
  return os.str();
}

double lambda1_slope(const System& sys, const Vec& u, const Vec& r) {
  const double h = fd_step(u);
  return (sys.lambda_min(u + h * r) - sys.lambda_min(u - h * r)) / (2 * h);
}

struct Newton {
  const System& sys;
  const Vec& base;
  Vec fbase;

  // [RH; (|S - Sk|^2 - d^2) / (2d)]
  Vec residual(const Vec& S, double sig, const Vec& Sk, double d) const {
    const int n = sys.dim();
    Vec F(n + 1);
    F.head(n) = sys.flux(S) - fbase - sig * (S - base);
    F[n] = ((S - Sk).squaredNorm() - d * d) / (2 * d);
    return F;
  }

  bool solve(Vec& S, double& sig, const Vec& Sk, double d, double tol, int max_it) const {
    const int n = sys.dim();
    const double scale = std::max(1.0, fbase.cwiseAbs().maxCoeff());
    Vec F = residual(S, sig, Sk, d);
    double fn = F.norm();
    for (int it = 0; it < max_it; ++it) {
      if (F.cwiseAbs().maxCoeff() <= tol * scale) return true;
      Mat J = Mat::Zero(n + 1, n + 1);
      J.topLeftCorner(n, n) = sys.jacobian(S) - sig * Mat::Identity(n, n);
      J.block(0, n, n, 1) = -(S - base);
      J.block(n, 0, 1, n) = (S - Sk).transpose() / d;
      Eigen::FullPivLU<Mat> lu(J);
      if (!lu.isInvertible()) return false;
      Vec dy = lu.solve(-F);
      double lam = 1.0;
      bool moved = false;
      for (int k = 0; k < 16; ++k, lam *= 0.5) {
        Vec St = S + lam * dy.head(n);
        double st = sig + lam * dy[n];
        if (!sys.admissible(St)) continue;
        Vec Ft = residual(St, st, Sk, d);
        double ft = Ft.norm();
        if (ft < fn || (ft <= fn && lam * dy.norm() < 1e-15)) {
          S = St;
          sig = st;
          F = Ft;
          fn = ft;
          moved = true;
          break;
        }
      }
      if (!moved) {
        // Stalled at round-off: accept when the jump condition is already tight.
        return F.head(n).cwiseAbs().maxCoeff() <= 1e-10 * scale &&
               std::abs(F[n]) <= 1e-10 * std::max(1.0, d);
      }
    }
    return F.cwiseAbs().maxCoeff() <= tol * scale;
  }
};

// Unit tangent (dS, dsigma per unit arc length) by implicit differentiation.
void tangent_at(const System& sys, const Vec& base, const Vec& S, double sig, const Vec& dir, Vec& dS,
                double& dsig) {
  const int n = sys.dim();
  Mat K = Mat::Zero(n + 1, n + 1);
  K.topLeftCorner(n, n) = sys.jacobian(S) - sig * Mat::Identity(n, n);
  K.block(0, n, n, 1) = -(S - base);
  K.block(n, 0, 1, n) = dir.transpose();
  Vec rhs = Vec::Zero(n + 1);
  rhs[n] = 1.0;
  Vec z = Eigen::FullPivLU<Mat>(K).solve(rhs);
  const double nz = z.head(n).norm();
  dS = z.head(n) / nz;
  dsig = z[n] / nz;
}

LocusPath trace_first(const System& sys, const Vec& base, const std::vector<double>& targets,
                      const ContinuationOptions& opt) {
  LocusPath path;
  path.base = base;
  const int n = sys.dim();

  Vec r = sys.first_eigenvector(base);
  double dl = lambda1_slope(sys, base, r);
  if (std::abs(dl) > 1e-10) {
    if (dl > 0) {
      r = -r;
      dl = -dl;
    }
  } else {
    // No genuine nonlinearity at base: fall back to the branch where the
    // first nonzero component decreases.
    for (int i = 0; i < n; ++i)
      if (std::abs(r[i]) > 1e-12) {
        if (r[i] > 0) {
          r = -r;
          dl = -dl;
        }
        break;
      }
  }
  r *= opt.direction;
  dl *= opt.direction;

  Newton newton{sys, base, sys.flux(base)};
  Vec S = base;
  double sig = sys.lambda_min(base);
  Vec tS = r;
  double tsig = 0.5 * dl;
  double s = 0.0;
  double ds = opt.step;

  auto record = [&](double at) {
    path.s.push_back(at);
    path.S.push_back(S);
    path.sigma.push_back(sig);
    path.rh.push_back(rh_residual(sys, base, S, sig));
    if (at == 0.0) {
      path.dS.push_back(r);
      path.dsigma.push_back(0.5 * dl);
    } else {
      Vec dS;
      double dsg;
      tangent_at(sys, base, S, sig, tS, dS, dsg);
      path.dS.push_back(dS);
      path.dsigma.push_back(dsg);
    }
  };

  for (double T : targets) {
    while (s < T) {
      // Accumulated steps can land a round-off short of T; an arc-length
      // constraint that small is below what Newton can resolve.
      if (T - s <= 1e-13 * std::max(1.0, T)) {
        s = T;
        break;
      }
      const double d = std::min(ds, T - s);
      Vec Sp = S + d * tS;
      double sp = sig + d * tsig;
      bool ok = true;
      if (!sys.admissible(Sp)) {
        // Pull the predictor back toward the last accepted point.
        Sp = S + 0.5 * d * tS;
        ok = sys.admissible(Sp);
      }
      ok = ok && newton.solve(Sp, sp, S, d, opt.newton_tol, opt.max_newton);
      ok = ok && (Sp - S).dot(tS) > 0.0;
      if (ok) {
        tS = (Sp - S) / d;
        tsig = (sp - sig) / d;
        S = Sp;
        sig = sp;
        s = (d == T - s) ? T : s + d;
        if (ds < opt.step) ds = std::min(opt.step, 2 * ds);
        continue;
      }
      ds = 0.5 * d;
      ++path.halvings;
      if (ds < opt.min_step) {
        const bool exited = !sys.admissible(S + d * tS);
        std::string why = exited ? "shock curve leaves the admissible set near s = " + fmt(s)
                                 : "Newton corrector failed; last good s = " + fmt(s);
        if (opt.partial_ok) {
          path.stopped_early = true;
          path.stop_reason = why;
          return path;
        }
        throw Error(exited ? ErrorKind::DomainExit : ErrorKind::Continuation, "shock_curves.hugoniot_locus", why);
      }
    }
    record(T);
  }
  return path;
}

}  // namespace

double rh_residual(const System& sys, const Vec& left, const Vec& right, double speed) {
  return (sys.flux(right) - sys.flux(left) - speed * (right - left)).cwiseAbs().maxCoeff();
}

LocusPath trace_locus(const System& sys, const Vec& base, Family family, const std::vector<double>& targets,
                      const ContinuationOptions& opt) {
  sys.require_admissible(base, "shock_curves.base");
  if (!(opt.step > 0.0)) throw Error(ErrorKind::Parameter, "shock_curves.step", "step must be positive");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!(targets[i] >= 0.0)) throw Error(ErrorKind::Parameter, "shock_curves.s", "arc length must be >= 0");
    if (i > 0 && targets[i] < targets[i - 1])
      throw Error(ErrorKind::Parameter, "shock_curves.s", "arc lengths must be ascending");
  }
  if (family == Family::First) {
    LocusPath p = trace_first(sys, base, targets, opt);
    p.family = family;
    return p;
  }
  ReflectedSystem refl(borrow(sys));
  LocusPath p = trace_first(refl, base, targets, opt);
  p.family = family;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p.sigma[i] = -p.sigma[i];
    p.dsigma[i] = -p.dsigma[i];
    p.rh[i] = rh_residual(sys, base, p.S[i], p.sigma[i]);
  }
  return p;
}

ShockCurvePoint hugoniot_locus(const System& sys, const Vec& base, Family family, double s, double step) {
  ContinuationOptions opt;
  opt.step = step;
  LocusPath p = trace_locus(sys, base, family, {s}, opt);
  return {base, s, p.S.back(), p.sigma.back(), p.rh.back()};
}

// ----------------------------------------------------- Liu / strength ---

namespace {

std::vector<double> centered(const std::vector<double>& y, double h) {
  const std::size_t n = y.size();
  std::vector<double> d(n, 0.0);
  if (n < 3) return d;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (y[i + 1] - y[i - 1]) / (2 * h);
  d[0] = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * h);
  d[n - 1] = (3 * y[n - 1] - 4 * y[n - 2] + y[n - 3]) / (2 * h);
  return d;
}

std::vector<double> uniform(double a, double b, int intervals) {
  std::vector<double> g(intervals + 1);
  for (int i = 0; i <= intervals; ++i) g[i] = a + (b - a) * i / intervals;
  g.back() = b;
  return g;
}

}  // namespace

LiuStrengthReport check_liu_strength(const System& sys, const std::vector<Vec>& bases, double s_max, double rho,
                                     int n_s, Family family) {
  if (!(rho > 0.0 && rho < s_max))
    throw Error(ErrorKind::Parameter, "shock_curves.rho", "need 0 < rho < s_max");
  if (n_s < 4) throw Error(ErrorKind::Parameter, "shock_curves.n_s", "need at least 4 grid intervals");
  if (bases.empty()) throw Error(ErrorKind::Parameter, "shock_curves.bases", "no base states");

  LiuStrengthReport rep;
  rep.s_max = s_max;
  rep.rho = rho;
  rep.n_s = n_s;
  rep.bases = bases;
  const std::vector<double> grid = uniform(0.0, s_max, n_s);
  const double h = s_max / n_s;
  const std::size_t nb = bases.size();
  std::vector<double> bM(nb), bP(nb), bErr(nb), bChord(nb);

  parallel_for(nb, [&](std::size_t b) {
    const Vec& u = bases[b];
    LocusPath p;
    try {
      p = trace_locus(sys, u, family, grid);
    } catch (const Error& e) {
      std::ostringstream os;
      os << "base " << b << ": " << e.what();
      throw Error(e.kind(), "shock_curves.check_liu_strength", os.str());
    }
    std::vector<double> eta(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) eta[i] = rel_entropy(sys, u, p.S[i]);
    auto ds = centered(p.sigma, h);
    auto de = centered(eta, h);
    double M = -std::numeric_limits<double>::infinity(), P = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p.size(); ++i) {
      M = std::max(M, ds[i]);
      if (grid[i] >= rho - 1e-14) P = std::min(P, de[i]);
    }
    const double lam0 = family == Family::First ? sys.lambda_min(u) : sys.lambda_max(u);
    double chord = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = i + 1; j < p.size(); ++j)
        chord = std::min(chord, (p.S[i] - p.S[j]).norm() / (grid[j] - grid[i]));
    bM[b] = M;
    bP[b] = P;
    bErr[b] = std::abs(p.sigma[0] - lam0);
    bChord[b] = chord;
  });

  rep.M = -std::numeric_limits<double>::infinity();
  rep.P = std::numeric_limits<double>::infinity();
  rep.min_chord_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < nb; ++b) {
    if (bM[b] > rep.M) {
      rep.M = bM[b];
      rep.worst_liu_base = static_cast<int>(b);
    }
    rep.P = std::min(rep.P, bP[b]);
    rep.start_speed_error = std::max(rep.start_speed_error, bErr[b]);
    rep.min_chord_ratio = std::min(rep.min_chord_ratio, bChord[b]);
  }
  rep.base_M = bM;
  rep.base_P = bP;
  // For the last family the speed increases along the curve of -f.
  rep.liu_ok = family == Family::First ? rep.M < 0.0 : rep.M > 0.0;
  if (family == Family::Last) {
    rep.M = -rep.M;
    for (double& m : rep.base_M) m = -m;
    rep.liu_ok = rep.M < 0.0;
  }
  rep.strength_ok = rep.P > 0.0;
  return rep;
}

// ---------------------------------------------- discontinuity sweep ---

namespace {

double polyline_distance(const std::vector<Vec>& pts, const Vec& x) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    Vec a = pts[i], d = pts[i + 1] - pts[i];
    double L2 = d.squaredNorm();
    double t = L2 > 0 ? std::clamp((x - a).dot(d) / L2, 0.0, 1.0) : 0.0;
    best = std::min(best, (a + t * d - x).norm());
  }
  if (pts.size() == 1) best = (pts[0] - x).norm();
  return best;
}

}  // namespace

DiscontinuitySweepReport sweep_entropic_discontinuities(const System& sys, const std::vector<Vec>& bases,
                                                        int n_probe, double B) {
  if (n_probe < 1) throw Error(ErrorKind::Parameter, "shock_curves.n_probe", "need at least one probe");
  if (!(B > 0.0)) throw Error(ErrorKind::Parameter, "shock_curves.B", "B must be positive");
  const std::size_t nb = bases.size();
  std::vector<DiscontinuitySweepReport> per(nb);
  const double membership_tol = 1e-5;

  parallel_for(nb, [&](std::size_t b) {
    const Vec& uL = bases[b];
    sys.require_admissible(uL, "shock_curves.bases");
    DiscontinuitySweepReport& rep = per[b];
    rep.worst_speed_margin = std::numeric_limits<double>::infinity();
    const double lamL = sys.lambda_min(uL);
    const double scale = 1.0 + std::abs(sys.entropy_flux(uL)) + std::abs(sys.entropy(uL));

    // Dense first-family curve for the membership test.
    ContinuationOptions dense;
    dense.step = 1e-3;
    dense.partial_ok = true;
    LocusPath ref = trace_locus(sys, uL, Family::First, uniform(0.0, B, static_cast<int>(std::ceil(B / 1e-3))), dense);
    rep.explored_s = ref.s.empty() ? 0.0 : ref.s.back();

    auto examine = [&](const Vec& uR, double sig, bool contact) {
      ++rep.candidates;
      const double D = sys.entropy_flux(uR) - sys.entropy_flux(uL) - sig * (sys.entropy(uR) - sys.entropy(uL));
      if (D > 1e-9 * scale) return;
      ++rep.entropic;
      if (contact) ++rep.contacts;
      const double margin = sig - sys.lambda_min(uR);
      rep.worst_speed_margin = std::min(rep.worst_speed_margin, margin);
      if (!(margin > 0.0)) ++rep.speed_violations;
      if (sig <= lamL) {
        ++rep.membership_checked;
        const double dist = polyline_distance(ref.S, uR);
        rep.worst_membership_distance = std::max(rep.worst_membership_distance, dist);
        if (dist > membership_tol) ++rep.membership_violations;
      } else if (contact) {
        ++rep.contacts_excluded;
      }
    };

    const std::vector<double> probes = [&] {
      std::vector<double> g;
      for (int k = 1; k <= n_probe; ++k) g.push_back(B * k / n_probe);
      return g;
    }();
    for (Family fam : {Family::First, Family::Last}) {
      for (int dir : {+1, -1}) {
        ContinuationOptions opt;
        opt.direction = dir;
        opt.partial_ok = true;
        LocusPath p = trace_locus(sys, uL, fam, probes, opt);
        for (std::size_t i = 0; i < p.size(); ++i) examine(p.S[i], p.sigma[i], false);
      }
    }
    for (auto& [uR, sig] : sys.contact_probes(uL, n_probe))
      if (sys.admissible(uR)) examine(uR, sig, true);
  });

  DiscontinuitySweepReport all;
  all.worst_speed_margin = std::numeric_limits<double>::infinity();
  all.explored_s = std::numeric_limits<double>::infinity();
  for (const auto& r : per) {
    all.candidates += r.candidates;
    all.entropic += r.entropic;
    all.contacts += r.contacts;
    all.contacts_excluded += r.contacts_excluded;
    all.membership_checked += r.membership_checked;
    all.speed_violations += r.speed_violations;
    all.membership_violations += r.membership_violations;
    all.worst_speed_margin = std::min(all.worst_speed_margin, r.worst_speed_margin);
    all.worst_membership_distance = std::max(all.worst_membership_distance, r.worst_membership_distance);
    all.explored_s = std::min(all.explored_s, r.explored_s);
  }
  if (per.empty()) all.explored_s = 0.0;
  return all;
}

// ------------------------------------------------------- dissipation ---

DissipationPair dissipation(const System& sys, const Vec& base, double s, double s0, Family family, double h) {
  if (!(s >= 0.0 && s0 >= 0.0))
    throw Error(ErrorKind::Parameter, "shock_curves.dissipation", "s and s0 must be >= 0");
  if (!(h > 0.0)) throw Error(ErrorKind::Parameter, "shock_curves.dissipation", "h must be positive");
  if (s == s0) return {0.0, 0.0};
  const double lo = std::min(s, s0), hi = std::max(s, s0);
  int N = 2 * static_cast<int>(std::ceil((hi - lo) / (2 * h)));
  N = std::max(N, 2);
  std::vector<double> targets;
  if (lo > 0.0) targets.push_back(0.0);
  for (double t : uniform(lo, hi, N)) targets.push_back(t);
  ContinuationOptions opt;
  opt.step = std::min(1e-2, h);
  LocusPath p = trace_locus(sys, base, family, targets, opt);
  const std::size_t off = lo > 0.0 ? 1 : 0;
  const std::size_t i_s = s > s0 ? off + N : off;
  const std::size_t i_0 = s > s0 ? off : off + N;

  DissipationPair out;
  const Vec& Ss = p.S[i_s];
  const Vec& S0 = p.S[i_0];
  out.direct = rel_entropy_flux(sys, Ss, S0) - p.sigma[i_s] * rel_entropy(sys, Ss, S0);

  const double eta0 = rel_entropy(sys, base, S0);
  const double dt = (hi - lo) / N;
  double acc = 0.0;
  for (int k = 0; k <= N; ++k) {
    const std::size_t i = off + k;
    const double w = (k == 0 || k == N) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * p.dsigma[i] * (rel_entropy(sys, base, p.S[i]) - eta0);
  }
  acc *= dt / 3.0;
  out.integral = s > s0 ? acc : -acc;
  return out;
}

// ---------------------------------------------------- DiPerna bounds ---

namespace {

struct CurveTable {
  std::vector<double> s;
  LocusPath p;
  std::size_t at(double x) const {
    auto it = std::lower_bound(s.begin(), s.end(), x - 1e-13);
    return static_cast<std::size_t>(it - s.begin());
  }
};

CurveTable tabulate(const System& sys, const Vec& base, std::vector<double> targets) {
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-13; }),
                targets.end());
  CurveTable t;
  t.s = targets;
  t.p = trace_locus(sys, base, Family::First, targets);
  return t;
}

double direct_dissipation(const System& sys, const CurveTable& c, std::size_t i, std::size_t j) {
  const Vec& S = c.p.S[i];
  const Vec& S0 = c.p.S[j];
  return rel_entropy_flux(sys, S, S0) - c.p.sigma[i] * rel_entropy(sys, S, S0);
}

void validate_diperna(const System& sys, const std::vector<Vec>& bases, double B, double rho, int n_grid) {
  if (!(rho > 0.0)) throw Error(ErrorKind::Parameter, "shock_curves.rho", "rho must be positive");
  if (!(rho < B)) throw Error(ErrorKind::Parameter, "shock_curves.rho", "need rho < B, got rho = " + fmt(rho) + ", B = " + fmt(B));
  if (n_grid < 4) throw Error(ErrorKind::Parameter, "shock_curves.n_grid", "need at least 4 grid points");
  if (bases.empty()) throw Error(ErrorKind::Parameter, "shock_curves.bases", "no base states");
  for (const Vec& u : bases) {
    sys.require_admissible(u, "shock_curves.bases");
    if (u.norm() > B) throw Error(ErrorKind::Parameter, "shock_curves.bases", "base outside |u| <= B");
  }
}

}  // namespace

DipernaFit fit_diperna_bounds(const System& sys, const std::vector<Vec>& bases, double B, double rho, int n_grid) {
  validate_diperna(sys, bases, B, rho, n_grid);
  const int n_fine = 4 * n_grid;
  const double h = B / n_fine;
  const std::vector<double> fine = uniform(0.0, B, n_fine);
  const std::vector<double> sg = uniform(0.0, B, n_grid - 1);
  const std::vector<double> s0g = uniform(rho, B, n_grid - 1);

  const std::size_t nb = bases.size();
  std::vector<CurveTable> tabs(nb);
  parallel_for(nb, [&](std::size_t b) {
    std::vector<double> t = fine;
    t.insert(t.end(), sg.begin(), sg.end());
    t.insert(t.end(), s0g.begin(), s0g.end());
    tabs[b] = tabulate(sys, bases[b], t);
  });

  // Derivatives along the curve from the tangents.
  std::vector<std::vector<double>> dsig(nb), deta(nb);
  DipernaFit fit;
  fit.B = B;
  fit.rho = rho;
  fit.n_grid = n_grid;
  fit.M = -std::numeric_limits<double>::infinity();
  fit.P = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < nb; ++b) {
    const CurveTable& c = tabs[b];
    for (double x : fine) {
      const std::size_t i = c.at(x);
      const Vec& S = c.p.S[i];
      const double ds = c.p.dsigma[i];
      const double de = (S - bases[b]).dot(sys.entropy_hess(S) * c.p.dS[i]);
      dsig[b].push_back(ds);
      deta[b].push_back(de);
      if (x > 0.0) fit.M = std::max(fit.M, ds);
      if (x >= rho - 1e-14) fit.P = std::min(fit.P, de);
    }
  }
  if (!(fit.M < 0.0))
    throw Error(ErrorKind::Hypothesis, "shock_curves.fit_diperna_bounds",
                "speed is not strictly decreasing along the curve (M = " + fmt(fit.M) + ")");
  if (!(fit.P > 0.0))
    throw Error(ErrorKind::Hypothesis, "shock_curves.fit_diperna_bounds",
                "shock does not strengthen for s >= rho (P = " + fmt(fit.P) + ")");

  // Largest delta (multiple of the fine spacing) keeping both derivatives
  // within half of their extreme margins of the value at s0.
  int j_ok = 0;
  for (int j = 1; j <= n_fine; ++j) {
    bool good = true;
    for (std::size_t b = 0; b < nb && good; ++b)
      for (int i0 = 0; i0 <= n_fine && good; ++i0) {
        if (fine[i0] < rho - 1e-14) continue;
        for (int i : {i0 - j, i0 + j}) {
          if (i < 0 || i > n_fine) continue;
          if (std::abs(dsig[b][i] - dsig[b][i0]) > 0.5 * std::abs(fit.M) ||
              std::abs(deta[b][i] - deta[b][i0]) > 0.5 * fit.P) {
            good = false;
            break;
          }
        }
      }
    if (!good) break;
    j_ok = j;
  }
  if (j_ok == 0)
    throw Error(ErrorKind::Hypothesis, "shock_curves.fit_diperna_bounds",
                "derivatives vary too fast to resolve delta0 on the grid");
  fit.delta0 = std::min(B, j_ok * h);

  double kmin = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < nb; ++b) {
    const CurveTable& c = tabs[b];
    for (double s0 : s0g) {
      const std::size_t j = c.at(s0);
      for (double s : sg) {
        if (std::abs(s - s0) < 1e-13) continue;
        const std::size_t i = c.at(s);
        const double D = direct_dissipation(sys, c, i, j);
        const double dsg = std::abs(c.p.sigma[i] - c.p.sigma[j]);
        if (dsg < 1e-14) continue;
        ++fit.n_pairs;
        if (!(D < 0.0))
          throw Error(ErrorKind::Hypothesis, "shock_curves.fit_diperna_bounds",
                      "non-negative dissipation at s = " + fmt(s) + ", s0 = " + fmt(s0));
        const double ratio = std::abs(s - s0) < fit.delta0 ? -D / (dsg * dsg) : -D / (fit.delta0 * dsg);
        kmin = std::min(kmin, ratio);
      }
    }
  }
  // The linear-regime ratio is smallest right at |s - s0| = delta0, which the
  // coarse grid may straddle; add the fine-spacing pairs up to just past it.
  const int j_max = std::min(n_fine, j_ok + 4);
  for (std::size_t b = 0; b < nb; ++b) {
    const CurveTable& c = tabs[b];
    for (int i0 = 0; i0 <= n_fine; ++i0) {
      if (fine[i0] < rho - 1e-14) continue;
      const std::size_t j = c.at(fine[i0]);
      for (int d = 1; d <= j_max; ++d)
        for (int i : {i0 - d, i0 + d}) {
          if (i < 0 || i > n_fine) continue;
          const std::size_t k = c.at(fine[i]);
          const double D = direct_dissipation(sys, c, k, j);
          const double dsg = std::abs(c.p.sigma[k] - c.p.sigma[j]);
          if (dsg < 1e-14) continue;
          ++fit.n_pairs;
          if (!(D < 0.0))
            throw Error(ErrorKind::Hypothesis, "shock_curves.fit_diperna_bounds",
                        "non-negative dissipation at s = " + fmt(fine[i]) + ", s0 = " + fmt(fine[i0]));
          const double ratio =
              std::abs(fine[i] - fine[i0]) < fit.delta0 ? -D / (dsg * dsg) : -D / (fit.delta0 * dsg);
          kmin = std::min(kmin, ratio);
        }
    }
  }
  fit.k = 0.9 * kmin;
  return fit;
}

DipernaCheck verify_diperna_bounds(const System& sys, const std::vector<Vec>& bases, const DipernaFit& fit,
                                   int n_grid) {
  validate_diperna(sys, bases, fit.B, fit.rho, n_grid);
  const std::vector<double> sg = uniform(0.0, fit.B, n_grid - 1);
  const std::vector<double> s0g = uniform(fit.rho, fit.B, n_grid - 1);
  DipernaCheck chk;
  chk.worst_margin = std::numeric_limits<double>::infinity();
  std::vector<DipernaCheck> per(bases.size());
  parallel_for(bases.size(), [&](std::size_t b) {
    std::vector<double> t = sg;
    t.insert(t.end(), s0g.begin(), s0g.end());
    CurveTable c = tabulate(sys, bases[b], t);
    DipernaCheck& r = per[b];
    r.worst_margin = std::numeric_limits<double>::infinity();
    for (double s0 : s0g) {
      const std::size_t j = c.at(s0);
      for (double s : sg) {
        const std::size_t i = c.at(s);
        const double D = direct_dissipation(sys, c, i, j);
        const double dsg = std::abs(c.p.sigma[i] - c.p.sigma[j]);
        const double bound = std::abs(s - s0) < fit.delta0 ? -fit.k * dsg * dsg : -fit.k * fit.delta0 * dsg;
        ++r.n_pairs;
        const double margin = bound - D;
        r.worst_margin = std::min(r.worst_margin, margin);
        if (margin < -1e-13) ++r.violations;
      }
    }
  });
  for (auto& r : per) {
    chk.n_pairs += r.n_pairs;
    chk.violations += r.violations;
    chk.worst_margin = std::min(chk.worst_margin, r.worst_margin);
  }
  return chk;
}

// ------------------------------------------------------ R_a geometry ---

RaGeometry r_a_geometry(const System& sys, const Vec& u_L, const Vec& u_R, double theta, std::size_t grid_points,
                        std::size_t n_samples, std::uint64_t seed) {
  if (!(theta > 0.0 && theta < 1.0))
    throw Error(ErrorKind::Parameter, "shock_curves.theta", "theta must lie in (0, 1), got " + fmt(theta));
  sys.require_admissible(u_L, "shock_curves.u_L");
  sys.require_admissible(u_R, "shock_curves.u_R");
  if ((u_L - u_R).norm() == 0.0)
    throw Error(ErrorKind::Parameter, "shock_curves.u_R", "u_R must differ from u_L");
  const int n = sys.dim();
  const Vec gL = sys.entropy_grad(u_L), gR = sys.entropy_grad(u_R);
  const double c0 = sys.entropy(u_L) - sys.entropy(u_R) - gL.dot(u_L) + gR.dot(u_R);
  auto affine = [&](const Vec& u) { return c0 + (gL - gR).dot(u); };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < n_samples * 20 && used < n_samples; ++k) {
    Vec d(n);
    for (int i = 0; i < n; ++i) d[i] = U(rng);
    if (d.norm() > 1.0 || d.norm() < 1e-6) continue;
    Vec u = u_L + d;
    if (!sys.admissible(u)) continue;
    lo = std::min(lo, rel_entropy(sys, u, u_L) / d.squaredNorm());
    hi = std::max(hi, std::abs(affine(u)) / (1.0 + u.norm()));
    ++used;
  }
  if (used == 0) throw Error(ErrorKind::Sampling, "shock_curves.r_a_geometry", "no admissible samples near u_L");

  RaGeometry g;
  g.c_lower = 0.9 * lo;
  g.growth = 1.05 * std::max(hi, 1e-300);
  // |u - u_L|^2 <= eta(u|u_L)/c <= (a/(1-a)) |affine(u)| / c <= 2 a growth (2 + |u_L|) / c
  g.C = 2.0 * g.growth * (2.0 + u_L.norm()) / g.c_lower;
  g.alpha = theta * theta / (2.0 * g.C);
  g.a_tested = {0.0, 0.25 * g.alpha, 0.5 * g.alpha, 0.99 * g.alpha};

  const int m = std::max(2, static_cast<int>(std::lround(std::pow(static_cast<double>(grid_points), 1.0 / n))));
  const double w = 2.0;
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(m);
  g.grid_points = total;
  std::vector<int> idx(n, 0);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t r = k;
    Vec u(n);
    for (int i = 0; i < n; ++i) {
      idx[i] = static_cast<int>(r % m);
      r /= m;
      u[i] = u_L[i] - w + 2.0 * w * idx[i] / (m - 1);
    }
    if (!sys.admissible(u)) continue;
    const double eL = rel_entropy(sys, u, u_L), eR = rel_entropy(sys, u, u_R);
    const double dist = (u - u_L).norm();
    for (double a : g.a_tested) {
      if (eL <= a * eR) {
        ++g.members;
        if (dist > theta) ++g.escapes;
      }
    }
  }
  g.containment_ok = g.escapes == 0;
  return g;
}

}  // namespace clab
