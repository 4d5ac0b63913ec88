#pragma once

#include "clab/fv_solver.hpp"
#include "clab/shock_curves.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace clab {

// The compact state set |u - center| <= radius the constants are fitted on.
// An empty center is the origin; Euler needs one away from vacuum.
struct StateBall {
  double radius = 0.0;
  Vec center;
  StateBall(double r = 0.0, Vec c = Vec()) : radius(r), center(std::move(c)) {}  // NOLINT: implicit from B
  Vec centre(int dim) const { return center.size() ? center : Vec(Vec::Zero(dim)); }
  bool contains(const Vec& u, double slack = 1e-12) const;
};

struct ContractionWeights {
  double a = 0.0;        // weight on the a-scaled side
  double c1 = 0.0;       // shock-dissipation margin
  double c4 = 0.0;       // growth of eta(u|u_L) - a eta(u|u_R) away from R_a
  double gamma0 = 0.0;   // c1 / (2 L_star)
  double L_star = 0.0;   // Lipschitz constant of the boundary dissipation map
  double C_star = 0.0;   // drift strength of the shift
  double B = 0.0;        // state bound (ball radius)
  Vec center;            // ball centre, empty = origin
  double rho = 0.0;      // shock-strength floor
  double c = 0.0;        // margin constant in the pointwise dissipation check
  double theta = 0.5;    // containment radius for R_a
  double C_geom = 0.0;   // sampled constant behind alpha
  double alpha = 0.0;    // theta^2 / (2 C_geom)
};

// ------------------------------------------------------------ c1 -----

struct C1Options {
  int n_sR = 6;          // s_R grid on [rho, B]
  int n_s = 20;          // s grid on [0, B]
  int n_dirs = 8;        // ray directions into R_a (dimension 1 uses +-1)
  std::vector<double> fractions{0.0, 0.5, 1.0};  // positions along each ray
  std::uint64_t seed = 11;
};

struct C1Fit {
  double c1 = 0.0;
  double min_ratio_shock = 0.0;     // min -LHS/|dsigma|^2 over the shock samples
  double min_boundary = 0.0;        // min -LHS over the characteristic samples
  double max_lhs_flat = 0.0;        // largest LHS where dsigma vanishes (must be <= 0)
  std::size_t n_shock = 0, n_boundary = 0, n_flat = 0;
  std::size_t n_truncated = 0;      // shock curves that left the admissible set early
};

// Left-hand sides of the two shock-dissipation inequalities.
double shock_dissipation_lhs(const System& sys, double a, const Vec& u, const Vec& u_L, const Vec& u_R,
                             const Vec& S, double sigma);
double boundary_dissipation_lhs(const System& sys, double a, const Vec& u, const Vec& u_L, const Vec& u_R);

// Points of R_a(u_L, u_R) along rays from u_L, at the requested fractions of
// the distance to its boundary.
std::vector<Vec> sample_r_a(const System& sys, double a, const Vec& u_L, const Vec& u_R, int n_dirs,
                            const std::vector<double>& fractions, std::uint64_t seed);

C1Fit fit_c1(const System& sys, double a, const std::vector<Vec>& bases, const StateBall& ball, double rho,
             const C1Options& opt = {});

// ------------------------------------------------------- c4, gamma0 ---

struct C4Options {
  std::size_t n_triples = 4000;
  std::size_t n_lip_pairs = 4000;
  double lip_step = 1e-3;
  std::uint64_t seed = 13;
};

struct C4Fit {
  double c4 = 0.0;
  double raw_inf = 0.0;       // before the 10% shrink
  double gamma0 = 0.0;
  double L_star = 0.0;
  double raw_lip = 0.0;       // before the 5% inflation
  std::size_t n_triples = 0, n_lip = 0;
};

C4Fit fit_c4_gamma0(const System& sys, double a, double c1, const StateBall& ball, const C4Options& opt = {});

// ----------------------------------------------------------- C_star ---

struct CStarFit {
  double C_star = 0.0;
  double sup_q = 0.0;       // sampled sup |a q(u;u_R) - q(u;u_L)|
  double sup_lambda = 0.0;  // sampled sup |lambda_1|
  std::size_t n_samples = 0;
};

CStarFit compute_C_star(const System& sys, double a, double c4, double gamma0, const StateBall& ball,
                        std::size_t n_samples = 10000, std::uint64_t seed = 17);

// Admissible points of the ball, uniform (rejection sampling).
std::vector<Vec> sample_ball(const System& sys, const StateBall& ball, std::size_t count, std::mt19937_64& rng);

// --------------------------------------------------- weight search ---

struct WeightOptions {
  double a0 = 1e-2;
  int max_halvings = 30;
  double theta = 0.5;
  C1Options c1;
  C4Options c4;
  std::size_t n_cstar = 10000;
  std::size_t geometry_grid = 2500;
  std::uint64_t seed = 17;
};

struct WeightReport {
  ContractionWeights w;
  C1Fit c1;
  C4Fit c4;
  CStarFit cstar;
  int halvings = 0;
  std::vector<double> tried;  // every a attempted
};

// Starts at a0 and halves until the c1 fit succeeds and a < alpha.
WeightReport build_weights(const System& sys, const std::vector<Vec>& bases, const StateBall& ball, double rho,
                           const WeightOptions& opt = {});

// ----------------------------------------------------------- shift ---

bool drift_indicator(const System& sys, const Vec& u, const Vec& ubar_minus, const Vec& ubar_plus, double a);
double shift_velocity(const System& sys, const Vec& u, const Vec& ubar_minus, const Vec& ubar_plus,
                      const ContractionWeights& w);

struct ShiftTrajectory {
  std::vector<double> t, h, X;
  std::vector<double> hdot;        // hdot_step[k] (the last level repeats the last step)
  std::vector<double> Xdot;        // centred differences of X
  std::vector<double> hdot_step;   // (h_{k+1} - h_k) / dt, exact per step
  std::vector<int> indicator;      // drift indicator in the cell holding h
  int mollification_n = 0;
  double window = 0.0;             // 1/n
  double V_sup = 0.0;              // max |V| over all cells and steps
  bool under_resolved = false;     // window narrower than a cell
  int events = 0;                  // piece changes in the exact integration
};

// Integrates h' = v_n(h, t), v_n(x) = n int_{-1/2n}^{1/2n} V(u(x + y)) dy, with the
// field frozen on each step. lambda_1 is taken per cell and the indicator
// switch is placed on the linear reconstruction of u, so V is piecewise
// constant, v_n is piecewise linear in h and each piece is solved in closed
// form: the stiff drift term needs no step restriction. The traces come from
// refs.left / refs.right (same time levels as field); X = refs.s - h.
ShiftTrajectory integrate_filippov(const System& sys, const std::vector<FieldSnapshot>& field,
                                   const ContractionWeights& w, const ReferenceSolution& refs, double x0, int n = 0);

int default_mollification(double dx);

// Centered differences on the time grid, one-sided at the ends.
std::vector<double> centered_rate(const std::vector<double>& t, const std::vector<double>& y);

struct DissipationSeries {
  std::vector<double> t, lhs, bound, sdot, hdot;
  std::vector<char> ok;
  double tolerance = 0.0;
  double pass_fraction = 0.0;
  double worst_margin = 0.0;  // min bound - lhs
  double c_fit = 0.0;         // largest c passing every sample (0 if none)
  std::size_t missing = 0;    // samples without traces
};

// Pointwise check of
//   a (q(u+;ub+) - h' eta(u+|ub+)) - q(u-;ub-) + h' eta(u-|ub-) <= -c (s' - h')^2 + tol
// with u+- one cell either side of the cell holding h.
DissipationSeries verify_dissipation(const System& sys, const ShiftTrajectory& run,
                                     const std::vector<FieldSnapshot>& field, const ReferenceSolution& refs,
                                     const ContractionWeights& w, double tolerance);

struct FilippovCheck {
  double lip_ratio = 0.0;            // max |dh/dt| / V_sup
  bool lip_ok = false;
  std::size_t n_samples = 0;
  std::size_t inclusion_hits = 0;    // h' inside the local range of V
  double inclusion_fraction = 0.0;
  std::size_t rh_checked = 0;
  std::size_t rh_violations = 0;
  double rh_worst = 0.0;
};

// Lip[h] <= sup|V|; h' within [min V, max V] over cells within one window of
// h (at the neighbouring time levels); and where u(h-) and u(h+) differ by
// more than noise, the jump condition with speed h' holds to tolerance.
FilippovCheck check_filippov_facts(const System& sys, const ShiftTrajectory& run,
                                   const std::vector<FieldSnapshot>& field, const ReferenceSolution& refs,
                                   const ContractionWeights& w, double tolerance, double noise);

}  // namespace clab
