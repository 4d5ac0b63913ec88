#pragma once

#include "clab/system_model.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace clab {

struct Grid1D {
  double x_min = 0.0, x_max = 1.0;
  int n_cells = 0;

  static Grid1D make(double x_min, double x_max, int n_cells);
  double dx() const { return (x_max - x_min) / n_cells; }
  double center(int j) const { return x_min + (j + 0.5) * dx(); }
  // Cell containing x (may be out of range; callers check).
  int cell_of(double x) const;
};

using Field = std::vector<Vec>;

struct FieldSnapshot {
  Grid1D grid;
  double t = 0.0;
  Field cells;
};

enum class Boundary { Outflow, Periodic };

// G acting on a whole grid field. The convolution kind pads periodically, so
// translation invariance is exact modulo the domain.
class SourceOperator {
public:
  enum class Kind { Zero, Linear, Convolution, Custom };
  using Fn = std::function<Field(const Field&)>;

  static SourceOperator zero();
  static SourceOperator linear(double c);
  // kernel is centred: entry k multiplies u_{j + k - len/2}.
  static SourceOperator convolution(std::vector<double> kernel, double scale);
  // Arbitrary operator with a claimed Lipschitz constant; must pass certify().
  static SourceOperator custom(Fn fn, double lipschitz, std::string label = "custom");

  Kind kind() const { return kind_; }
  double lipschitz() const { return lip_; }
  bool is_zero() const { return kind_ == Kind::Zero; }
  std::string describe() const;
  Field apply(const Field& u) const;
  // Same, writing into out (sized like u).
  void apply_into(const Field& u, Field& out) const;

private:
  Kind kind_ = Kind::Zero;
  double c_ = 0.0;
  std::vector<double> kernel_;
  double scale_ = 0.0;
  Fn fn_;
  double lip_ = 0.0;
  std::string label_;
};

struct SourceCertificate {
  double translation_error = 0.0;  // max |G(roll u) - roll G(u)|
  double l2_ratio = 0.0;           // max |G u - G v|_2 / |u - v|_2
  double linf_ratio = 0.0;         // max |G u|_inf / |u|_inf
  double lipschitz = 0.0;
  std::size_t pairs = 0;
  bool pass = false;
};

SourceCertificate certify(const SourceOperator& g, int dim, int n_cells, std::size_t n_pairs, std::uint64_t seed);

// Rusanov numerical flux with local speed max(|lambda|(uL), |lambda|(uR)).
Vec rusanov_flux(const System& sys, const Vec& uL, const Vec& uR);
// Matching numerical entropy flux.
double rusanov_entropy_flux(const System& sys, const Vec& uL, const Vec& uR);

double stable_dt(const System& sys, const Field& u, double cfl, double dx);

// One forward-Euler conservative update with the given dt.
FieldSnapshot step_with_dt(const System& sys, const FieldSnapshot& snap, const SourceOperator& source, double dt,
                           Boundary bc = Boundary::Outflow);
// dt = cfl dx / max |lambda|.
FieldSnapshot step(const System& sys, const FieldSnapshot& snap, const SourceOperator& source, double cfl,
                   Boundary bc = Boundary::Outflow);

// Steps until t_end (last step clipped). Keeps the initial snapshot, every
// stride-th step, and the final one.
std::vector<FieldSnapshot> simulate(const System& sys, const FieldSnapshot& initial, const SourceOperator& source,
                                    double cfl, double t_end, int stride = 1, Boundary bc = Boundary::Outflow);

// Several fields advanced with one shared dt per step (the smallest stable
// one), every step stored. Used to keep a solution and its reference on the
// same time levels.
std::vector<std::vector<FieldSnapshot>> simulate_lockstep(const System& sys, const std::vector<FieldSnapshot>& initial,
                                                          const SourceOperator& source, double cfl, double t_end,
                                                          Boundary bc = Boundary::Outflow);

struct EntropyResidual {
  std::vector<std::vector<double>> r;  // r[k][j] between snapshots k and k+1
  double max_positive = 0.0;
  double min_value = 0.0;
  int worst_step = -1, worst_cell = -1;
};

// r_j = [eta(u_j^{k+1}) - eta(u_j^k)]/dt + [Q_{j+1/2} - Q_{j-1/2}]/dx - grad eta(u_j^k).G(u^k)_j
// on consecutive snapshots (stride 1).
EntropyResidual entropy_residual(const System& sys, const std::vector<FieldSnapshot>& traj,
                                 const SourceOperator& source, Boundary bc = Boundary::Outflow);

// Initial data helpers.
FieldSnapshot riemann_data(const Grid1D& grid, const Vec& uL, const Vec& uR, double x0);
// Smooth compact bump (1 - z^2)^2 on |z| < 1, z = (x - center)/width, cell averaged.
double bump_average(double a, double b, double center, double width);
void add_bump(FieldSnapshot& snap, const Vec& direction, double amplitude, double center, double width);

struct ReferenceSpec {
  Vec u_L, u_R;  // a first-family shock
  double s0 = 0.0;
  double left_amplitude = 0.0, right_amplitude = 0.0;  // side modulations
  double width = 0.25;
  Grid1D grid;
  double cfl = 0.4;
  double t_end = 0.5;
  SourceOperator source = SourceOperator::zero();
  bool force_simulated = false;
  int trace_offset = 4;     // cells between the steepest gradient and a trace
  double plateau_tol = 1e-3;  // > 0: walk further out until the one-cell change is below tol * |u_R - u_L|
  double min_gap = 0.0;     // rho; the run fails if the gap falls to it
};

// A single tracked discontinuity with traces. For the simulated kind the
// front is found by the steepest jump and located by conservation over a
// window around it; the path itself integrates the traces' jump speed.
struct ReferenceSolution {
  std::vector<FieldSnapshot> trajectory;
  std::vector<double> t, s, sdot;
  std::vector<Vec> left, right;  // traces u(s-), u(s+)
  std::vector<int> front_cell;   // cell of the steepest jump (simulated kind)
  std::vector<int> left_offset, right_offset;  // trace cells are front - left, front + right
  double lipschitz = 0.0;        // away from the front
  double rho = 0.0;              // min |right - left|
  double rh_max = 0.0;           // max RH residual of (left, right, sdot)
  std::vector<double> s_mass;    // conservation-located path (simulated kind)
  double path_drift = 0.0;       // max |s - s_mass|
  bool exact = false;
  int trace_offset = 4;
  Vec u_L, u_R;
  double sigma = 0.0;
};

ReferenceSolution make_reference(const System& sys, const ReferenceSpec& spec);

// Builds the reference record from an already simulated trajectory.
ReferenceSolution extract_reference(const System& sys, std::vector<FieldSnapshot> traj, const Vec& u_L,
                                    const Vec& u_R, int trace_offset, double min_gap, double plateau_tol = 0.0);

int steepest_jump(const Field& u, int lo, int hi);

// Linear interpolation between cell centres (constant beyond the outer
// centres); throws Extension outside [x_min, x_max].
Vec sample_linear(const FieldSnapshot& snap, double x);

}  // namespace clab
