#include "clab_tools/cli.hpp"

#include "clab/contraction_harness.hpp"
#include "clab/parallel.hpp"
#include "clab/relative_entropy.hpp"
#include "clab/shift_filippov.hpp"
#include "clab/shock_curves.hpp"
#include "clab_tools/config.hpp"
#include "clab_tools/io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

namespace clab::tools {

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int grid_levels = 1;
  bool quiet = false;
};

struct Outcome {
  bool pass = true;
  std::string summary;
};

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

std::string vec_str(const Vec& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + "]";
}

std::vector<std::string> component_names(const std::string& prefix, int dim) {
  std::vector<std::string> out;
  for (int i = 0; i < dim; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

void header(Report& rep, const std::string& cmd, const Config& cfg, const System& sys) {
  rep.section("run");
  rep.put("subcommand", cmd);
  rep.put("system", sys.name());
  rep.put("seed", static_cast<long long>(cfg.seed));
  rep.section("config");
  rep.raw(dump_config(cfg) + "\n");
}

void put_weights(Report& rep, const ContractionWeights& w) {
  rep.put("a", w.a);
  rep.put("c1", w.c1);
  rep.put("c4", w.c4);
  rep.put("gamma0", w.gamma0);
  rep.put("L_star", w.L_star);
  rep.put("C_star", w.C_star);
  rep.put("c", w.c);
  rep.put("B", w.B);
  rep.put("center", vec_str(w.center));
  rep.put("rho", w.rho);
  rep.put("theta", w.theta);
  rep.put("C_geom", w.C_geom);
  rep.put("alpha", w.alpha);
}

void put_weight_report(Report& rep, const WeightReport& wr) {
  rep.section("weight search");
  rep.put("halvings", wr.halvings);
  std::string tried;
  for (double a : wr.tried) tried += (tried.empty() ? "" : " ") + fmt(a);
  rep.put("a_tried", tried);
  rep.section("c1 fit");
  rep.put("c1", wr.c1.c1);
  rep.put("min_ratio_shock", wr.c1.min_ratio_shock);
  rep.put("min_boundary", wr.c1.min_boundary);
  rep.put("max_lhs_flat", wr.c1.max_lhs_flat);
  rep.put("n_shock", wr.c1.n_shock);
  rep.put("n_boundary", wr.c1.n_boundary);
  rep.put("n_flat", wr.c1.n_flat);
  rep.put("n_truncated", wr.c1.n_truncated);
  rep.section("c4 / gamma0 fit");
  rep.put("c4", wr.c4.c4);
  rep.put("raw_inf", wr.c4.raw_inf);
  rep.put("gamma0", wr.c4.gamma0);
  rep.put("L_star", wr.c4.L_star);
  rep.put("raw_lip", wr.c4.raw_lip);
  rep.put("n_triples", wr.c4.n_triples);
  rep.put("n_lip", wr.c4.n_lip);
  rep.section("C_star");
  rep.put("C_star", wr.cstar.C_star);
  rep.put("sup_q", wr.cstar.sup_q);
  rep.put("sup_lambda", wr.cstar.sup_lambda);
  rep.put("n_samples", wr.cstar.n_samples);
}

Vec right_state(const System& sys, const Config& cfg) {
  return hugoniot_locus(sys, cfg.u_L, Family::First, cfg.s_R).locus;
}

// ------------------------------------------------------------ hugoniot ---

Outcome cmd_hugoniot(const System& sys, const Config& cfg, const Options&, const std::string& dir, Report& rep) {
  std::vector<double> targets(cfg.hugoniot_points);
  for (int i = 0; i < cfg.hugoniot_points; ++i) targets[i] = cfg.hugoniot_s_max * i / (cfg.hugoniot_points - 1);
  ContinuationOptions co;
  co.step = cfg.hugoniot_step;
  const Vec& base = cfg.hugoniot_base;
  LocusPath p = trace_locus(sys, base, cfg.family, targets, co);

  std::vector<std::string> cols{"s"};
  for (auto& c : component_names("S_", sys.dim())) cols.push_back(c);
  for (const char* c : {"sigma", "rh_residual", "dsigma_ds", "strength_derivative"}) cols.emplace_back(c);
  Csv csv(cols);
  double rh_max = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    // d/ds eta(base|S(s)) = -(base - S)^T hess eta(S) S'(s)
    const double dstrength = -(base - p.S[i]).dot(sys.entropy_hess(p.S[i]) * p.dS[i]);
    std::vector<double> row{p.s[i]};
    for (Eigen::Index c = 0; c < p.S[i].size(); ++c) row.push_back(p.S[i][c]);
    row.push_back(p.sigma[i]);
    row.push_back(p.rh[i]);
    row.push_back(p.dsigma[i]);
    row.push_back(dstrength);
    csv.row(row);
    rh_max = std::max(rh_max, p.rh[i]);
  }
  write_atomic(join_path(dir, "hugoniot.csv"), csv.str());

  rep.section("locus");
  rep.put("base", vec_str(base));
  rep.put("family", cfg.family == Family::First ? "first" : "last");
  rep.put("points", p.size());
  rep.put("step_halvings", p.halvings);
  rep.put("max_rh_residual", rh_max);
  rep.check("rh_residual", rh_max <= 1e-8, "max " + fmt(rh_max) + " <= 1e-8");
  return {rep.all_pass(), "points=" + std::to_string(p.size()) + " max_rh=" + fmt(rh_max)};
}

// ---------------------------------------------------- check-hypotheses ---

Outcome cmd_check_hypotheses(const System& sys, const Config& cfg, const Options&, const std::string& dir,
                             Report& rep) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<Vec> bases = cfg.bases;
  if (bases.empty()) bases = sample_ball(sys, cfg.ball(), static_cast<std::size_t>(cfg.random_bases), rng);
  std::vector<Vec> samples = sample_ball(sys, cfg.ball(), static_cast<std::size_t>(cfg.compat_samples), rng);

  CompatibilityReport cr = check_compatibility(sys, samples, cfg.compat_tol);
  rep.section("compatibility");
  rep.put("samples", cr.n_samples);
  rep.put("max_residual", cr.max_residual);
  rep.put("closed_form_grad_q", cr.closed_form_grad_q);
  rep.check("compatibility", cr.pass, "max " + fmt(cr.max_residual) + " < " + fmt(cfg.compat_tol));

  LiuStrengthReport liu = check_liu_strength(sys, bases, cfg.hyp_s_max, cfg.hyp_rho, cfg.hyp_n_s, Family::First);
  rep.section("liu / strengthening");
  rep.put("bases", bases.size());
  rep.put("s_max", cfg.hyp_s_max);
  rep.put("rho", cfg.hyp_rho);
  rep.put("n_s", cfg.hyp_n_s);
  rep.put("M", liu.M);
  rep.put("P", liu.P);
  rep.put("start_speed_error", liu.start_speed_error);
  rep.put("min_chord_ratio", liu.min_chord_ratio);
  rep.check("speed_decreasing", liu.liu_ok, "M = " + fmt(liu.M) + " < 0");
  rep.check("strength_increasing", liu.strength_ok, "P = " + fmt(liu.P) + " > 0");

  DiscontinuitySweepReport sw = sweep_entropic_discontinuities(sys, bases, cfg.n_probe, cfg.hyp_s_max);
  rep.section("discontinuity sweep");
  rep.put("candidates", sw.candidates);
  rep.put("entropic", sw.entropic);
  rep.put("contacts", sw.contacts);
  rep.put("contacts_excluded", sw.contacts_excluded);
  rep.put("membership_checked", sw.membership_checked);
  rep.put("worst_speed_margin", sw.worst_speed_margin);
  rep.put("worst_membership_distance", sw.worst_membership_distance);
  rep.check("faster_than_right_speed", sw.speed_violations == 0,
            std::to_string(sw.speed_violations) + " violations");
  rep.check("slow_ones_on_first_curve", sw.membership_violations == 0,
            std::to_string(sw.membership_violations) + " violations");

  // The bound B caps both |base| and the arc length.
  double B_dp = cfg.hyp_s_max;
  for (const Vec& b : bases) B_dp = std::max(B_dp, b.norm());
  DipernaFit df = fit_diperna_bounds(sys, bases, B_dp, cfg.hyp_rho, cfg.diperna_grid);
  DipernaCheck dc = verify_diperna_bounds(sys, bases, df, 2 * cfg.diperna_grid);
  rep.section("dissipation bounds");
  rep.put("B", B_dp);
  rep.put("k", df.k);
  rep.put("delta0", df.delta0);
  rep.put("fit_pairs", df.n_pairs);
  rep.put("recheck_grid", 2 * cfg.diperna_grid);
  rep.put("recheck_pairs", dc.n_pairs);
  rep.put("recheck_worst_margin", dc.worst_margin);
  rep.check("dissipation_bounds_fit", df.k > 0.0 && df.delta0 > 0.0);
  rep.check("dissipation_bounds_refined", dc.pass(), std::to_string(dc.violations) + " violations");

  (void)dir;
  return {rep.all_pass(), "M=" + fmt(liu.M) + " P=" + fmt(liu.P) + " sweep_violations=" +
                              std::to_string(sw.speed_violations + sw.membership_violations)};
}

// ------------------------------------------------------------ simulate ---

Outcome cmd_simulate(const System& sys, const Config& cfg, const Options&, const std::string& dir, Report& rep) {
  const Vec u_R = right_state(sys, cfg);
  FieldSnapshot init = riemann_data(cfg.grid, cfg.u_L, u_R, cfg.s0);
  if (cfg.initial == "shock_plus_profile")
    add_bump(init, Vec::Ones(sys.dim()), cfg.amplitude, cfg.center, cfg.width);
  const SourceOperator src = cfg.source();
  std::vector<FieldSnapshot> traj = simulate(sys, init, src, cfg.cfl, cfg.t_end, 1);
  EntropyResidual er = entropy_residual(sys, traj, src);

  std::vector<std::string> cols{"t", "x_center"};
  for (auto& c : component_names("u_", sys.dim())) cols.push_back(c);
  Csv csv(cols);
  std::size_t written = 0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (k % static_cast<std::size_t>(cfg.snapshot_stride) != 0 && k + 1 != traj.size()) continue;
    const FieldSnapshot& s = traj[k];
    for (int j = 0; j < s.grid.n_cells; ++j) {
      std::vector<double> row{s.t, s.grid.center(j)};
      for (Eigen::Index c = 0; c < s.cells[j].size(); ++c) row.push_back(s.cells[j][c]);
      csv.row(row);
    }
    ++written;
  }
  write_atomic(join_path(dir, "snapshots.csv"), csv.str());

  // Shock cells (a neighbour jump above 10 dx, i.e. slopes past 10) get a
  // round-off tolerance scaled by the entropy variation per unit time; smooth
  // cells get dx, which absorbs the O(dt) splitting error of a source step.
  double eta_scale = 0.0;
  for (const Vec& v : init.cells) eta_scale = std::max(eta_scale, std::abs(sys.entropy(v)));
  const double dt0 = traj.size() > 1 ? traj[1].t - traj[0].t : 1.0;
  const double dx = cfg.grid.dx();
  const double tol_shock = 1e-10 * std::max(1.0, eta_scale) / dt0, tol_smooth = dx, jump = 10.0 * dx;
  double pos_shock = 0.0, pos_smooth = 0.0;
  for (std::size_t k = 0; k < er.r.size(); ++k) {
    const Field& u = traj[k].cells;
    const int n = static_cast<int>(u.size());
    for (int j = 0; j < n; ++j) {
      double d = 0.0;
      if (j > 0) d = std::max(d, (u[j] - u[j - 1]).norm());
      if (j + 1 < n) d = std::max(d, (u[j + 1] - u[j]).norm());
      double& m = d > jump ? pos_shock : pos_smooth;
      m = std::max(m, er.r[k][j]);
    }
  }
  rep.section("simulation");
  rep.put("u_R", vec_str(u_R));
  rep.put("steps", traj.size() - 1);
  rep.put("snapshots_written", written);
  rep.put("t_final", traj.back().t);
  rep.put("source", src.describe());
  rep.put("entropy_residual_max_positive", er.max_positive);
  rep.put("entropy_residual_min", er.min_value);
  rep.put("shock_jump_threshold", jump);
  rep.put("entropy_residual_max_positive_shock", pos_shock);
  rep.put("entropy_residual_tolerance_shock", tol_shock);
  rep.put("entropy_residual_max_positive_smooth", pos_smooth);
  rep.put("entropy_residual_tolerance_smooth", tol_smooth);
  rep.check("entropy_inequality_shock", pos_shock <= tol_shock, "max positive residual " + fmt(pos_shock));
  rep.check("entropy_inequality_smooth", pos_smooth <= tol_smooth, "max positive residual " + fmt(pos_smooth));
  return {rep.all_pass(), "steps=" + std::to_string(traj.size() - 1) + " t=" + fmt(traj.back().t)};
}

// ------------------------------------------------------- fit-constants ---

Outcome cmd_fit_constants(const System& sys, const Config& cfg, const Options&, const std::string& dir,
                          Report& rep) {
  const Vec u_R = right_state(sys, cfg);
  WeightReport wr = build_weights(sys, {cfg.u_L}, cfg.ball(), cfg.rho, cfg.weight);
  RaGeometry geo = r_a_geometry(sys, cfg.u_L, u_R, cfg.weight.theta, cfg.weight.geometry_grid, 4000, cfg.seed);

  rep.section("reference shock");
  rep.put("u_L", vec_str(cfg.u_L));
  rep.put("u_R", vec_str(u_R));
  rep.section("weights");
  put_weights(rep, wr.w);
  put_weight_report(rep, wr);
  rep.section("sublevel geometry at (u_L, u_R)");
  rep.put("C", geo.C);
  rep.put("alpha", geo.alpha);
  rep.put("c_lower", geo.c_lower);
  rep.put("growth", geo.growth);
  rep.put("grid_points", geo.grid_points);
  rep.put("members", geo.members);
  rep.put("escapes", geo.escapes);

  const ContractionWeights& w = wr.w;
  rep.check("weight_positive", w.a > 0.0 && w.a < 1.0, "a = " + fmt(w.a));
  rep.check("weight_below_alpha", w.a < w.alpha, "a < alpha = " + fmt(w.alpha));
  rep.check("c1_positive", w.c1 > 0.0);
  rep.check("c4_positive", w.c4 > 0.0);
  rep.check("gamma0_positive", w.gamma0 > 0.0);
  rep.check("sublevel_containment", geo.containment_ok, std::to_string(geo.escapes) + " escapes");

  std::ostringstream s;
  s << "a=" << fmt(w.a) << " c1=" << fmt(w.c1) << " c4=" << fmt(w.c4) << " C*=" << fmt(w.C_star);
  write_atomic(join_path(dir, "constants.txt"), rep.str());
  return {rep.all_pass(), s.str()};
}

// ----------------------------------------------- experiment subcommands ---

Config at_level(Config cfg, int level) {
  cfg.grid.n_cells <<= level;
  return cfg;
}

std::string level_dir(const std::string& dir, int level) {
  return level == 0 ? dir : join_path(dir, "level_" + std::to_string(level));
}

void put_run_common(Report& rep, const RunBundle& b) {
  rep.section("reference shock");
  rep.put("u_L", vec_str(b.spec.u_L));
  rep.put("u_R", vec_str(b.u_R));
  rep.put("sigma", b.sigma);
  rep.put("n_cells", b.spec.grid.n_cells);
  rep.put("dx", b.spec.grid.dx());
  rep.put("time_levels", b.u.size());
  rep.put("reference_cells", b.ref_grid.n_cells);
  rep.put("reference_rh_max", b.ref.rh_max);
  rep.put("reference_gap", b.ref.rho);
  rep.section("weights");
  put_weights(rep, b.w);
  if (b.spec.fixed_a < 0.0) put_weight_report(rep, b.weights);
  rep.section("shift");
  rep.put("mollification_n", b.shift.mollification_n);
  rep.put("window", b.shift.window);
  rep.put("V_sup", b.shift.V_sup);
  rep.put("under_resolved", b.shift.under_resolved);
  rep.put("events", b.shift.events);
}

void put_facts(Report& rep, const RunBundle& b) {
  const FilippovCheck& f = b.facts;
  const DissipationSeries& d = b.dissipation;
  rep.section("filippov");
  rep.put("lip_ratio", f.lip_ratio);
  rep.put("samples", f.n_samples);
  rep.put("inclusion_fraction", f.inclusion_fraction);
  rep.put("rh_checked", f.rh_checked);
  rep.put("rh_violations", f.rh_violations);
  rep.put("rh_worst", f.rh_worst);
  rep.check("shift_lipschitz", f.lip_ok, "max|h'|/sup|V| = " + fmt(f.lip_ratio));
  rep.check("shift_inclusion", f.inclusion_fraction >= 0.99, "fraction " + fmt(f.inclusion_fraction));
  rep.section("pointwise dissipation");
  rep.put("tolerance", d.tolerance);
  rep.put("samples", d.t.size());
  rep.put("missing", d.missing);
  rep.put("worst_margin", d.worst_margin);
  rep.put("c_fit", d.c_fit);
  rep.check("dissipation_fraction", d.pass_fraction >= 0.99, "pass fraction " + fmt(d.pass_fraction));
}

Outcome cmd_shift(const System& sys, const Config& cfg, const Options& opt, const std::string& dir, Report& rep) {
  double first_fraction = 0.0;
  for (int level = 0; level < opt.grid_levels; ++level) {
    Config c = at_level(cfg, level);
    RunBundle b = run_experiment(sys, to_experiment(c));
    Report lr;
    Report& r = level == 0 ? rep : lr;
    if (level > 0) header(r, "shift", c, sys);
    put_run_common(r, b);
    put_facts(r, b);

    Csv csv({"t", "h", "hdot", "X", "Xdot", "indicator_state", "lhs_dissipation", "bound_dissipation"});
    std::size_t d = 0;
    const double nan = std::nan("");
    for (std::size_t k = 0; k < b.shift.t.size(); ++k) {
      double lhs = nan, bound = nan;
      if (d < b.dissipation.t.size() && b.dissipation.t[d] == b.shift.t[k]) {
        lhs = b.dissipation.lhs[d];
        bound = b.dissipation.bound[d];
        ++d;
      }
      csv.row({b.shift.t[k], b.shift.h[k], b.shift.hdot[k], b.shift.X[k], b.shift.Xdot[k],
               static_cast<double>(b.shift.indicator[k]), lhs, bound});
    }
    const std::string ld = level_dir(dir, level);
    write_atomic(join_path(ld, "shift.csv"), csv.str());
    if (level == 0) {
      first_fraction = b.dissipation.pass_fraction;
    } else {
      rep.section("refinement level " + std::to_string(level));
      rep.put("n_cells", c.grid.n_cells);
      rep.put("pass_fraction", b.dissipation.pass_fraction);
      rep.check("level_" + std::to_string(level) + "_facts", r.all_pass());
      rep.check("level_" + std::to_string(level) + "_fraction_kept",
                b.dissipation.pass_fraction >= std::min(first_fraction, 0.99),
                fmt(b.dissipation.pass_fraction) + " vs " + fmt(first_fraction));
      write_atomic(join_path(ld, "report.txt"), r.str());
    }
  }
  return {rep.all_pass(), "dissipation_fraction=" + fmt(first_fraction)};
}

// |q(u;ub)| <= r eta(u|ub) at every sample the cone speed was fitted on.
bool r_certificate(const System& sys, const RunBundle& b, double& worst) {
  worst = 0.0;
  for (std::size_t k = 0; k < b.u.size(); ++k) {
    RefView v{&b.ubar[k], b.offset};
    for (int j = 0; j < b.u[k].grid.n_cells; ++j) {
      const Vec vb = v.at(j, b.shift.X[k]);
      const double e = rel_entropy(sys, b.u[k].cells[j], vb);
      const double q = std::abs(rel_entropy_flux(sys, b.u[k].cells[j], vb));
      if (e > 1e-14) worst = std::max(worst, q / e);
      else if (q > 1e-12) worst = std::max(worst, HUGE_VAL);
    }
  }
  return worst <= b.r.r;
}

bool constant_sides(const Config& c) {
  return c.left_modulation == 0.0 && c.right_modulation == 0.0 && c.source_kind == "zero";
}

struct ContractionLevel {
  double mu1 = 0.0;
  double fraction = 0.0;
  bool pass = false;
};

ContractionLevel contraction_level(const System& sys, const Config& c, const std::string& dir, Report& r) {
  RunBundle b = run_experiment(sys, to_experiment(c));
  const GronwallReport& g = b.gronwall;
  put_run_common(r, b);
  put_facts(r, b);

  r.section("cone");
  r.put("r", b.r.r);
  r.put("r_raw", b.r.raw);
  r.put("r_pairs", b.r.pairs);
  r.put("r_fallback", b.r.fallback);
  r.put("R", b.cone.R);
  r.put("t0", b.cone.t0);
  double worst_ratio = 0.0;
  r.check("cone_speed_certificate", r_certificate(sys, b, worst_ratio),
          "max |q|/eta = " + fmt(worst_ratio) + " <= r");

  // X(0) = 0 and Lip[X] <= Lip[s] + sup|V|.
  double lip_s = 0.0, lip_x = 0.0;
  for (std::size_t k = 0; k < b.shift.hdot_step.size(); ++k) {
    lip_s = std::max(lip_s, std::abs(b.ref_shift.hdot_step[k]));
    lip_x = std::max(lip_x, std::abs(b.ref_shift.hdot_step[k] - b.shift.hdot_step[k]));
  }
  r.check("shift_starts_at_zero", b.shift.X.front() == 0.0, "X(0) = " + fmt(b.shift.X.front()));
  r.check("shift_lipschitz_bound", lip_x <= (lip_s + b.shift.V_sup) * (1 + 1e-12),
          "Lip[X] = " + fmt(lip_x) + ", Lip[s] + sup|V| = " + fmt(lip_s + b.shift.V_sup));

  r.section("gronwall");
  r.put("E0_window", g.E0_window);
  r.put("E_first", b.E.front());
  r.put("E_last", b.E.back());
  r.put("max_E", g.max_E);
  r.put("mu1", g.mu1);
  r.put("mu2", g.mu2);
  r.put("xdot_integral", g.xdot_integral);
  r.put("shift_bound", g.shift_bound);
  r.put("worst_envelope_margin", g.worst_envelope_margin);
  r.put("uniqueness_branch", g.uniqueness_branch);
  if (g.uniqueness_branch) {
    r.put("uniqueness_tol", g.uniqueness_tol);
    r.check("uniqueness_E", g.envelope_ok, "max E = " + fmt(g.max_E) + " <= " + fmt(g.uniqueness_tol));
    r.check("uniqueness_shift", g.shift_control_ok, "int Xdot^2 = " + fmt(g.xdot_integral));
  } else {
    r.check("envelope", g.envelope_ok, "mu1 = " + fmt(g.mu1) + " <= 1e3");
    r.check("shift_control", g.shift_control_ok);
  }

  r.section("l2 equivalence at t0");
  r.put("l2_window", b.l2_t0);
  r.put("E_t0", b.E.back());
  r.put("c_star", b.qb.c_star);
  r.put("c_double_star", b.qb.c_double_star);
  r.put("box_radius", b.qb.radius);
  r.check("l2_equivalence", b.l2_equivalence_ok);

  const double dx = c.grid.dx();
  r.section("monotonicity");
  r.put("defect", b.monotonicity_defect);
  r.put("defect_relative", g.E0_window > 0.0 ? b.monotonicity_defect / g.E0_window : 0.0);
  if (constant_sides(c)) {
    const double lim = c.tolerance_factor * dx;
    r.check("non_increasing", b.monotonicity_defect <= lim, "defect " + fmt(b.monotonicity_defect) + " <= " + fmt(lim));
  } else {
    r.put("non_increasing", "not applicable (modulated sides or nonzero source)");
  }

  Csv csv({"t", "E", "envelope_value", "margin", "X", "Xdot", "h1", "h2", "h"});
  for (std::size_t k = 0; k < b.E.size(); ++k) {
    const double t = g.t[k];
    csv.row({t, b.E[k], g.envelope[k], g.envelope[k] - b.E[k], b.shift.X[k], b.shift.Xdot[k], b.cone.h1(t),
             b.cone.h2(t), b.shift.h[k]});
  }
  write_atomic(join_path(dir, "contraction.csv"), csv.str());
  return {g.mu1, b.dissipation.pass_fraction, r.all_pass()};
}

Outcome cmd_verify_contraction(const System& sys, const Config& cfg, const Options& opt, const std::string& dir,
                               Report& rep) {
  std::vector<ContractionLevel> levels;
  for (int level = 0; level < opt.grid_levels; ++level) {
    Config c = at_level(cfg, level);
    const std::string ld = level_dir(dir, level);
    if (level == 0) {
      levels.push_back(contraction_level(sys, c, ld, rep));
      continue;
    }
    Report lr;
    header(lr, "verify-contraction", c, sys);
    levels.push_back(contraction_level(sys, c, ld, lr));
    write_atomic(join_path(ld, "report.txt"), lr.str());
  }
  if (levels.size() > 1) {
    rep.section("refinement");
    for (std::size_t l = 1; l < levels.size(); ++l) {
      const ContractionLevel& a = levels[l - 1];
      const ContractionLevel& f = levels[l];
      const std::string tag = "level_" + std::to_string(l);
      rep.put(tag + "_n_cells", at_level(cfg, static_cast<int>(l)).grid.n_cells);
      rep.put(tag + "_mu1", f.mu1);
      rep.check(tag + "_checks", f.pass);
      const double change = std::abs(f.mu1 - a.mu1);
      const bool both_zero = a.mu1 < 1e-12 && f.mu1 < 1e-12;
      rep.check(tag + "_mu1_stable", both_zero || change < 0.5 * a.mu1,
                "|" + fmt(f.mu1) + " - " + fmt(a.mu1) + "| < 50%");
      rep.check(tag + "_dissipation_kept", f.fraction >= std::min(a.fraction, 0.99),
                fmt(f.fraction) + " vs " + fmt(a.fraction));
    }
  }
  std::string s = "mu1=" + fmt(levels.front().mu1);
  if (!rep.all_pass()) s += " failed: " + rep.failures().front();
  return {rep.all_pass(), s};
}

Outcome cmd_audit(const System& sys, const Config& cfg, const Options& opt, const std::string& dir, Report& rep) {
  double worst_all = HUGE_VAL;
  for (int level = 0; level < opt.grid_levels; ++level) {
    Config c = at_level(cfg, level);
    RunBundle b = run_experiment(sys, to_experiment(c));
    const double tol = c.tolerance_factor * c.grid.dx();
    AuditReport a = dissipation_audit(sys, b, tol);
    Report lr;
    Report& r = level == 0 ? rep : lr;
    if (level > 0) header(r, "audit-dissipation", c, sys);
    put_run_common(r, b);
    r.section("audit");
    r.put("tolerance", a.tolerance);
    r.put("excluded_cell_steps", a.excluded_cells);
    r.put("worst_cumulative", a.worst_cumulative);
    for (auto [name, side] : {std::pair{"left", &a.left}, std::pair{"right", &a.right}}) {
      r.put(std::string(name) + "_boundary", side->boundary);
      r.put(std::string(name) + "_delta_E", side->delta_E);
      r.put(std::string(name) + "_interior", side->interior);
      r.put(std::string(name) + "_margin", side->margin());
    }
    r.check("balance", a.pass, "worst cumulative margin " + fmt(a.worst_cumulative) + " >= -" + fmt(tol));
    Csv csv({"t", "step_margin", "cumulative_margin"});
    for (std::size_t k = 0; k < a.t.size(); ++k) csv.row({a.t[k], a.step_margin[k], a.cumulative_margin[k]});
    const std::string ld = level_dir(dir, level);
    write_atomic(join_path(ld, "audit.csv"), csv.str());
    worst_all = std::min(worst_all, a.worst_cumulative);
    if (level > 0) {
      rep.section("refinement level " + std::to_string(level));
      rep.put("n_cells", c.grid.n_cells);
      rep.check("level_" + std::to_string(level) + "_balance", a.pass, fmt(a.worst_cumulative));
      write_atomic(join_path(ld, "report.txt"), r.str());
    }
  }
  return {rep.all_pass(), "worst_cumulative=" + fmt(worst_all)};
}

using Handler = std::function<Outcome(const System&, const Config&, const Options&, const std::string&, Report&)>;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Parameter:
      return kExitUsage;
    case ErrorKind::Hypothesis:
    case ErrorKind::Envelope:
    case ErrorKind::WeightTooLarge:
      return kExitCheckFailed;
    default:
      return kExitNumerical;
  }
}

void apply_thread_cap(std::ostream& err) {
  const char* env = std::getenv("CONTRACTION_LAB_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 0) {
    throw Error(ErrorKind::Parameter, "cli.env", std::string("CONTRACTION_LAB_THREADS='") + env +
                                                      "' is not a non-negative integer");
  }
  set_max_threads(static_cast<unsigned>(n));
  (void)err;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Numerical checks of shock stability via weighted relative entropy", "contraction-lab"};
  app.require_subcommand(1);
  Options opt;

  const std::vector<std::pair<std::string, std::pair<std::string, Handler>>> commands{
      {"hugoniot", {"trace a shock curve and write hugoniot.csv", cmd_hugoniot}},
      {"check-hypotheses", {"certify the structural shock-curve conditions", cmd_check_hypotheses}},
      {"simulate", {"run the finite-volume solver and write snapshots.csv", cmd_simulate}},
      {"fit-constants", {"fit the weight and shift constants (constants.txt)", cmd_fit_constants}},
      {"shift", {"integrate the shift and check it pointwise (shift.csv)", cmd_shift}},
      {"verify-contraction", {"fit the Gronwall envelope (contraction.csv)", cmd_verify_contraction}},
      {"audit-dissipation", {"discrete relative-entropy balance (audit.csv)", cmd_audit}},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, info] : commands) {
    CLI::App* s = app.add_subcommand(name, info.first);
    s->add_option("--config", opt.config, "JSON config file")->required();
    s->add_option("--out", opt.out, "output directory (default: config 'output' or ./out)");
    s->add_option("--seed", opt.seed, "overrides perturbation.seed");
    s->add_option("--grid-levels", opt.grid_levels, "refinement levels (grid doubled per level)")
        ->check(CLI::Range(1, 6));
    s->add_flag("--quiet", opt.quiet, "no summary line");
    subs.push_back(s);
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitPass;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    err << "contraction-lab: " << e.what() << "\n";
    return kExitUsage;
  }

  std::size_t which = 0;
  while (which < subs.size() && !subs[which]->parsed()) ++which;
  const std::string name = commands[which].first;

  try {
    apply_thread_cap(err);
    Config cfg = load_config(opt.config);
    if (opt.seed) cfg.apply_seed(*opt.seed);
    const std::string dir = !opt.out.empty() ? opt.out : (!cfg.output.empty() ? cfg.output : "out");
    SystemPtr sys = make_system(cfg.system, cfg.gamma, cfg.kappa);

    Report rep;
    header(rep, name, cfg, *sys);
    Outcome o = commands[which].second.second(*sys, cfg, opt, dir, rep);
    rep.section("verdict");
    rep.put("result", o.pass ? "PASS" : "FAIL");
    rep.put("failed_checks", rep.failed());
    write_atomic(join_path(dir, "report.txt"), rep.str());
    if (!opt.quiet) out << name << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.summary << " -> " << dir << "\n";
    return o.pass ? kExitPass : kExitCheckFailed;
  } catch (const Error& e) {
    err << "contraction-lab " << name << ": " << to_string(e.kind()) << " error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "contraction-lab " << name << ": output error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "contraction-lab " << name << ": numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace clab::tools
