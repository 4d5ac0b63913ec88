#pragma once

#include "clab/contraction_harness.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace clab::tools {

// Everything a subcommand can be told, with the defaults in one place. The
// resolved values are dumped into every report.
struct Config {
  // system
  std::string system = "burgers";
  double gamma = 1.4;
  double kappa = 1.0;

  Grid1D grid = Grid1D{-2.0, 2.0, 400};
  double cfl = 0.4;
  double t0 = 0.5;
  double t_end = 0.5;
  double R = 0.5;
  double rho = 0.5;
  double B = 2.0;
  Vec ball_center;

  // reference shock
  Vec u_L;
  double s_R = 1.0;
  double s0 = 0.0;
  double left_modulation = 0.0, right_modulation = 0.0, modulation_width = 0.25;
  int trace_offset = 4;
  double plateau_tol = 1e-3;

  // perturbation
  double amplitude = 0.01;
  double width = 0.2;
  double center = 0.25;
  std::uint64_t seed = 1;

  // source
  std::string source_kind = "zero";
  double source_c = 0.0;
  std::vector<double> source_kernel;
  double source_scale = 0.0;

  // constants
  WeightOptions weight;
  bool has_fixed = false;
  ContractionWeights fixed;
  double C_star_override = -1.0;
  int mollification_n = 0;
  double tolerance_factor = 10.0;
  bool weight_left = true;

  // hugoniot
  Vec hugoniot_base;
  Family family = Family::First;
  double hugoniot_s_max = 2.0;
  int hugoniot_points = 201;
  double hugoniot_step = 1e-2;

  // check-hypotheses
  std::vector<Vec> bases;
  int random_bases = 20;
  double hyp_s_max = 1.0;
  double hyp_rho = 0.1;
  int hyp_n_s = 100;
  int n_probe = 40;
  int compat_samples = 1000;
  double compat_tol = 1e-6;
  int diperna_grid = 50;

  // simulate
  std::string initial = "riemann";
  int snapshot_stride = 10;

  std::string output;  // empty: --out or "out"

  SourceOperator source() const;
  StateBall ball() const { return StateBall(B, ball_center); }
  // Seeds of the sampled fits, all derived from `seed`.
  void apply_seed(std::uint64_t s);
};

// Strict: unknown keys and wrong types throw Error(Parameter) naming the key.
Config parse_config(const std::string& text, const std::string& origin = "<string>");
Config load_config(const std::string& path);

// Resolved configuration as pretty JSON (for reports).
std::string dump_config(const Config& cfg);

ExperimentSpec to_experiment(const Config& cfg);

}  // namespace clab::tools
