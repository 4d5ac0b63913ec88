#pragma once

#include "clab/system_model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace clab {

enum class Family { First, Last };

struct ShockCurvePoint {
  Vec base;
  double s = 0.0;       // arc length along the curve
  Vec locus;            // right state S(s)
  double speed = 0.0;   // sigma(s)
  double rh_residual = 0.0;
};

struct ContinuationOptions {
  double step = 1e-2;        // largest arc-length increment
  double min_step = 1e-9;    // give up below this after repeated halving
  double newton_tol = 1e-12; // on the scaled RH + arc-length residual
  int max_newton = 40;
  // +1 follows the branch on which the first characteristic speed drops
  // (the admissible side); -1 follows the opposite branch.
  int direction = +1;
  // Stop quietly at the first failure and return what was traced so far.
  bool partial_ok = false;
};

// Points of a traced shock curve together with tangents. dS is the unit
// tangent and dsigma the speed derivative with respect to arc length, both
// from implicit differentiation of the jump condition.
struct LocusPath {
  Vec base;
  Family family = Family::First;
  std::vector<double> s;
  std::vector<Vec> S;
  std::vector<double> sigma;
  std::vector<double> rh;
  std::vector<Vec> dS;
  std::vector<double> dsigma;
  int halvings = 0;
  bool stopped_early = false;
  std::string stop_reason;
  std::size_t size() const { return s.size(); }
};

// Follows the Hugoniot curve of `family` from base and reports it at every
// requested arc length (sorted ascending, all >= 0). Each accepted step solves
// f(S) - f(base) = sigma (S - base) together with |S - S_prev| = ds by damped
// Newton; failures halve ds. The last family is the first family of -f with
// the speeds negated.
LocusPath trace_locus(const System& sys, const Vec& base, Family family, const std::vector<double>& targets,
                      const ContinuationOptions& opt = {});

ShockCurvePoint hugoniot_locus(const System& sys, const Vec& base, Family family, double s, double step = 1e-2);

double rh_residual(const System& sys, const Vec& left, const Vec& right, double speed);

// Liu condition (speed decreasing along the curve) and shock strengthening
// (eta(base|S(s)) increasing for s >= rho), by centered differences on a
// uniform s-grid.
struct LiuStrengthReport {
  double M = 0.0;           // sup d sigma/ds, must be < 0
  double P = 0.0;           // inf d eta(base|S)/ds over s >= rho, must be > 0
  bool liu_ok = false;
  bool strength_ok = false;
  double start_speed_error = 0.0;  // max |sigma(0) - lambda_1(base)|
  double min_chord_ratio = 0.0;    // min |S(s)-S(t)| / |s-t|: curve does not fold back
  double s_max = 0.0, rho = 0.0;
  int n_s = 0;
  std::vector<Vec> bases;
  std::vector<double> base_M, base_P;
  int worst_liu_base = -1;
  bool pass() const { return liu_ok && strength_ok; }
};

LiuStrengthReport check_liu_strength(const System& sys, const std::vector<Vec>& bases, double s_max, double rho,
                                     int n_s, Family family = Family::First);

// Samples entropic jump discontinuities from each base (both branches of the
// first and last shock curves, plus any registered contact probes) and checks
// that (i) every one travels faster than lambda_1 of its right state and
// (ii) every one no faster than lambda_1 of its left state lies on the first
// shock curve of the left state.
struct DiscontinuitySweepReport {
  std::size_t candidates = 0;
  std::size_t entropic = 0;
  std::size_t contacts = 0;
  std::size_t contacts_excluded = 0;  // contacts with speed > lambda_1(left)
  std::size_t membership_checked = 0;
  std::size_t speed_violations = 0;
  std::size_t membership_violations = 0;
  double worst_speed_margin = 0.0;    // min sigma - lambda_1(u_R)
  double worst_membership_distance = 0.0;
  double explored_s = 0.0;
  bool pass() const { return speed_violations == 0 && membership_violations == 0; }
};

DiscontinuitySweepReport sweep_entropic_discontinuities(const System& sys, const std::vector<Vec>& bases,
                                                        int n_probe, double B);

// Entropy dissipated by the shock (S(s0), S(s)) measured two ways: the direct
// value q(S(s);S(s0)) - sigma(s) eta(S(s)|S(s0)) and the integral
// int_{s0}^{s} sigma'(t) [eta(base|S(t)) - eta(base|S(s0))] dt (Simpson).
struct DissipationPair {
  double direct = 0.0;
  double integral = 0.0;
};

DissipationPair dissipation(const System& sys, const Vec& base, double s, double s0,
                            Family family = Family::First, double h = 1e-3);

// Constants k, delta0 with, for s0 in [rho, B] and s in [0, B],
//   D(s, s0) <= -k |sigma(s) - sigma(s0)|^2        for |s - s0| <  delta0
//   D(s, s0) <= -k delta0 |sigma(s) - sigma(s0)|   for |s - s0| >= delta0
// where D is the direct dissipation above.
struct DipernaFit {
  double k = 0.0;
  double delta0 = 0.0;
  double B = 0.0;
  double rho = 0.0;
  double M = 0.0, P = 0.0;
  int n_grid = 0;
  std::size_t n_pairs = 0;
};

DipernaFit fit_diperna_bounds(const System& sys, const std::vector<Vec>& bases, double B, double rho,
                              int n_grid = 50);

struct DipernaCheck {
  std::size_t n_pairs = 0;
  std::size_t violations = 0;
  double worst_margin = 0.0;  // min over pairs of (bound - D)
  bool pass() const { return violations == 0; }
};

DipernaCheck verify_diperna_bounds(const System& sys, const std::vector<Vec>& bases, const DipernaFit& fit,
                                   int n_grid);

// The sublevel set R_a = {u : eta(u|u_L) <= a eta(u|u_R)} sits inside the
// ball B_theta(u_L) once a < alpha = theta^2 / (2C); C is sampled.
struct RaGeometry {
  double C = 0.0;
  double alpha = 0.0;
  double c_lower = 0.0;     // sampled eta(u|u_L)/|u-u_L|^2 lower bound
  double growth = 0.0;      // sampled |affine part| / (1 + |u|) upper bound
  std::vector<double> a_tested;
  std::size_t grid_points = 0;
  std::size_t members = 0;  // grid points inside R_a, summed over a_tested
  std::size_t escapes = 0;  // members outside B_theta(u_L)
  bool containment_ok = false;
};

RaGeometry r_a_geometry(const System& sys, const Vec& u_L, const Vec& u_R, double theta,
                        std::size_t grid_points = 40000, std::size_t n_samples = 4000, std::uint64_t seed = 7);

}  // namespace clab
