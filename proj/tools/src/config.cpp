#include "clab_tools/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace clab::tools {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw Error(ErrorKind::Parameter, "cli.config", key + ": " + what);
}

// A JSON object whose keys must all be consumed; finish() rejects leftovers.
class Block {
public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& raw(const char* key) const { return j_.at(key); }

  void num(const char* key, double& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) bad(name(key), "expected a number");
    out = v.get<double>();
  }

  template <class I>
  void integer(const char* key, I& out, long long lo = 0) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) bad(name(key), "expected an integer");
    long long x = v.get<long long>();
    if (x < lo) bad(name(key), "must be >= " + std::to_string(lo));
    out = static_cast<I>(x);
  }

  void boolean(const char* key, bool& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_boolean()) bad(name(key), "expected true/false");
    out = v.get<bool>();
  }

  void str(const char* key, std::string& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) bad(name(key), "expected a string");
    out = v.get<std::string>();
  }

  void vec(const char* key, Vec& out) {
    if (!has(key)) return;
    out = to_vec(j_.at(key), name(key));
  }

  void reals(const char* key, std::vector<double>& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) bad(name(key), "expected an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) bad(name(key), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
  }

  static Vec to_vec(const json& v, const std::string& key) {
    if (v.is_number()) return make_state({v.get<double>()});
    if (!v.is_array() || v.empty() || v.size() > static_cast<std::size_t>(kMaxDim))
      bad(key, "expected a state: a number or an array of 1-4 numbers");
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) bad(key, "state components must be numbers");
      out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) bad(path_.empty() ? it.key() : path_ + "." + it.key(), "unknown key");
  }

private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void positive(const std::string& key, double v) {
  if (!(v > 0.0)) bad(key, "must be > 0");
}

}  // namespace

SourceOperator Config::source() const {
  if (source_kind == "zero") return SourceOperator::zero();
  if (source_kind == "linear") return SourceOperator::linear(source_c);
  if (source_kind == "convolution") return SourceOperator::convolution(source_kernel, source_scale);
  bad("source.kind", "unknown kind '" + source_kind + "' (zero | linear | convolution)");
}

void Config::apply_seed(std::uint64_t s) {
  seed = s;
  // seed 1 reproduces the library defaults (11, 13, 17)
  weight.c1.seed = 10 + s;
  weight.c4.seed = 12 + s;
  weight.seed = 16 + s;
}

Config parse_config(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parameter, "cli.config", origin + ": not valid JSON (" + e.what() + ")");
  }

  Config c;
  Block top(root, "");

  if (top.has("system")) {
    Block b(top.raw("system"), "system");
    b.str("name", c.system);
    b.num("gamma", c.gamma);
    b.num("kappa", c.kappa);
    b.finish();
  }
  if (top.has("grid")) {
    Block b(top.raw("grid"), "grid");
    b.num("x_min", c.grid.x_min);
    b.num("x_max", c.grid.x_max);
    b.integer("n_cells", c.grid.n_cells, 2);
    b.finish();
    if (!(c.grid.x_max > c.grid.x_min)) bad("grid", "x_max must exceed x_min");
  }
  top.num("cfl", c.cfl);
  bool t_end_given = top.has("t_end");
  top.num("t0", c.t0);
  top.num("t_end", c.t_end);
  if (!t_end_given) c.t_end = c.t0;
  top.num("R", c.R);
  top.num("rho", c.rho);
  top.num("B", c.B);
  top.vec("ball_center", c.ball_center);
  top.str("output", c.output);

  if (top.has("reference")) {
    Block b(top.raw("reference"), "reference");
    b.vec("u_L", c.u_L);
    b.num("s_R", c.s_R);
    b.num("s0", c.s0);
    b.num("left_modulation", c.left_modulation);
    b.num("right_modulation", c.right_modulation);
    b.num("modulation_width", c.modulation_width);
    b.integer("trace_offset", c.trace_offset, 1);
    b.num("plateau_tol", c.plateau_tol);
    b.finish();
  }
  std::uint64_t seed = c.seed;
  if (top.has("perturbation")) {
    Block b(top.raw("perturbation"), "perturbation");
    b.num("amplitude", c.amplitude);
    b.num("width", c.width);
    b.num("center", c.center);
    b.integer("seed", seed);
    b.finish();
  }
  c.apply_seed(seed);

  if (top.has("source")) {
    Block b(top.raw("source"), "source");
    b.str("kind", c.source_kind);
    b.num("c", c.source_c);
    b.reals("kernel", c.source_kernel);
    b.num("scale", c.source_scale);
    b.finish();
  }
  if (top.has("constants")) {
    Block b(top.raw("constants"), "constants");
    b.num("a0", c.weight.a0);
    b.integer("max_halvings", c.weight.max_halvings);
    b.num("theta", c.weight.theta);
    b.integer("n_cstar", c.weight.n_cstar, 1);
    b.integer("geometry_grid", c.weight.geometry_grid, 4);
    b.integer("c1_n_sR", c.weight.c1.n_sR, 1);
    b.integer("c1_n_s", c.weight.c1.n_s, 1);
    b.integer("c1_dirs", c.weight.c1.n_dirs, 1);
    b.integer("c4_triples", c.weight.c4.n_triples, 1);
    b.integer("c4_lip_pairs", c.weight.c4.n_lip_pairs, 1);
    b.num("C_star_override", c.C_star_override);
    b.integer("mollification_n", c.mollification_n);
    b.num("tolerance_factor", c.tolerance_factor);
    b.boolean("weight_left", c.weight_left);
    if (b.has("fixed")) {
      Block f(b.raw("fixed"), "constants.fixed");
      c.has_fixed = true;
      ContractionWeights& w = c.fixed;
      f.num("a", w.a);
      f.num("c1", w.c1);
      f.num("c4", w.c4);
      f.num("gamma0", w.gamma0);
      f.num("L_star", w.L_star);
      f.num("C_star", w.C_star);
      f.num("c", w.c);
      f.finish();
      positive("constants.fixed.a", w.a);
    }
    b.finish();
  }
  if (top.has("hugoniot")) {
    Block b(top.raw("hugoniot"), "hugoniot");
    b.vec("base", c.hugoniot_base);
    std::string fam = "first";
    b.str("family", fam);
    if (fam == "first") c.family = Family::First;
    else if (fam == "last") c.family = Family::Last;
    else bad("hugoniot.family", "expected first | last");
    b.num("s_max", c.hugoniot_s_max);
    b.integer("n_points", c.hugoniot_points, 2);
    b.num("step", c.hugoniot_step);
    b.finish();
  }
  if (top.has("hypotheses")) {
    Block b(top.raw("hypotheses"), "hypotheses");
    if (b.has("bases")) {
      const json& arr = b.raw("bases");
      if (!arr.is_array()) bad("hypotheses.bases", "expected an array of states");
      for (const auto& e : arr) c.bases.push_back(Block::to_vec(e, "hypotheses.bases"));
    }
    b.integer("random_bases", c.random_bases);
    b.num("s_max", c.hyp_s_max);
    b.num("rho", c.hyp_rho);
    b.integer("n_s", c.hyp_n_s, 4);
    b.integer("n_probe", c.n_probe, 1);
    b.integer("compat_samples", c.compat_samples, 1);
    b.num("compat_tol", c.compat_tol);
    b.integer("diperna_grid", c.diperna_grid, 4);
    b.finish();
  }
  if (top.has("simulate")) {
    Block b(top.raw("simulate"), "simulate");
    b.str("initial", c.initial);
    b.integer("snapshot_stride", c.snapshot_stride, 1);
    b.finish();
    if (c.initial != "riemann" && c.initial != "shock_plus_profile")
      bad("simulate.initial", "expected riemann | shock_plus_profile");
  }
  top.finish();

  positive("cfl", c.cfl);
  positive("t0", c.t0);
  positive("t_end", c.t_end);
  positive("R", c.R);
  positive("B", c.B);
  if (c.rho < 0.0) bad("rho", "must be >= 0");
  if (c.weight.theta <= 0.0) bad("constants.theta", "must be > 0");
  if (c.source_kind == "convolution" && c.source_kernel.empty()) bad("source.kernel", "convolution needs a kernel");
  (void)c.source();  // validates the kind

  // States must fit the system.
  SystemPtr sys = make_system(c.system, c.gamma, c.kappa);
  if (c.u_L.size() == 0) {
    if (sys->dim() != 1) bad("reference.u_L", "required for " + c.system);
    c.u_L = make_state({1.0});
  }
  auto check_dim = [&](const Vec& v, const char* key) {
    if (v.size() != 0 && v.size() != sys->dim())
      bad(key, "has " + std::to_string(v.size()) + " components, " + c.system + " needs " +
                   std::to_string(sys->dim()));
  };
  check_dim(c.u_L, "reference.u_L");
  check_dim(c.ball_center, "ball_center");
  check_dim(c.hugoniot_base, "hugoniot.base");
  for (const Vec& v : c.bases) check_dim(v, "hypotheses.bases");
  if (auto why = sys->violation(c.u_L)) bad("reference.u_L", "inadmissible: " + *why);
  if (c.hugoniot_base.size() == 0) c.hugoniot_base = c.u_L;
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parameter, "cli.config", "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

namespace {
json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
}  // namespace

std::string dump_config(const Config& c) {
  json j;
  j["system"] = {{"name", c.system}, {"gamma", c.gamma}, {"kappa", c.kappa}};
  j["grid"] = {{"x_min", c.grid.x_min}, {"x_max", c.grid.x_max}, {"n_cells", c.grid.n_cells}};
  j["cfl"] = c.cfl;
  j["t0"] = c.t0;
  j["t_end"] = c.t_end;
  j["R"] = c.R;
  j["rho"] = c.rho;
  j["B"] = c.B;
  j["ball_center"] = vec_json(c.ball_center);
  j["reference"] = {{"u_L", vec_json(c.u_L)},
                    {"s_R", c.s_R},
                    {"s0", c.s0},
                    {"left_modulation", c.left_modulation},
                    {"right_modulation", c.right_modulation},
                    {"modulation_width", c.modulation_width},
                    {"trace_offset", c.trace_offset},
                    {"plateau_tol", c.plateau_tol}};
  j["perturbation"] = {{"amplitude", c.amplitude}, {"width", c.width}, {"center", c.center}, {"seed", c.seed}};
  j["source"] = {{"kind", c.source_kind}, {"c", c.source_c}, {"kernel", c.source_kernel}, {"scale", c.source_scale}};
  json k = {{"a0", c.weight.a0},
            {"max_halvings", c.weight.max_halvings},
            {"theta", c.weight.theta},
            {"n_cstar", c.weight.n_cstar},
            {"geometry_grid", c.weight.geometry_grid},
            {"c1_n_sR", c.weight.c1.n_sR},
            {"c1_n_s", c.weight.c1.n_s},
            {"c1_dirs", c.weight.c1.n_dirs},
            {"c4_triples", c.weight.c4.n_triples},
            {"c4_lip_pairs", c.weight.c4.n_lip_pairs},
            {"C_star_override", c.C_star_override},
            {"mollification_n", c.mollification_n},
            {"tolerance_factor", c.tolerance_factor},
            {"weight_left", c.weight_left}};
  if (c.has_fixed)
    k["fixed"] = {{"a", c.fixed.a},           {"c1", c.fixed.c1},         {"c4", c.fixed.c4},
                  {"gamma0", c.fixed.gamma0}, {"L_star", c.fixed.L_star}, {"C_star", c.fixed.C_star},
                  {"c", c.fixed.c}};
  j["constants"] = k;
  j["hugoniot"] = {{"base", vec_json(c.hugoniot_base)},
                   {"family", c.family == Family::First ? "first" : "last"},
                   {"s_max", c.hugoniot_s_max},
                   {"n_points", c.hugoniot_points},
                   {"step", c.hugoniot_step}};
  json bases = json::array();
  for (const Vec& b : c.bases) bases.push_back(vec_json(b));
  j["hypotheses"] = {{"bases", bases},          {"random_bases", c.random_bases},
                     {"s_max", c.hyp_s_max},    {"rho", c.hyp_rho},
                     {"n_s", c.hyp_n_s},        {"n_probe", c.n_probe},
                     {"compat_samples", c.compat_samples}, {"compat_tol", c.compat_tol},
                     {"diperna_grid", c.diperna_grid}};
  j["simulate"] = {{"initial", c.initial}, {"snapshot_stride", c.snapshot_stride}};
  return j.dump(2);
}

ExperimentSpec to_experiment(const Config& c) {
  ExperimentSpec e;
  e.grid = c.grid;
  e.cfl = c.cfl;
  e.t0 = c.t0;
  e.R = c.R;
  e.u_L = c.u_L;
  e.s_R = c.s_R;
  e.s0 = c.s0;
  e.amplitude = c.amplitude;
  e.width = c.width;
  e.center = c.center;
  e.left_modulation = c.left_modulation;
  e.right_modulation = c.right_modulation;
  e.modulation_width = c.modulation_width;
  e.source = c.source();
  e.B = c.B;
  e.ball_center = c.ball_center;
  e.rho = c.rho;
  e.weight_opt = c.weight;
  if (c.has_fixed) {
    e.fixed_a = c.fixed.a;
    e.fixed = c.fixed;
  }
  e.C_star_override = c.C_star_override;
  e.trace_offset = c.trace_offset;
  e.plateau_tol = c.plateau_tol;
  e.tolerance_factor = c.tolerance_factor;
  e.mollification_n = c.mollification_n;
  e.weight_left = c.weight_left;
  e.seed = c.seed;
  return e;
}

}  // namespace clab::tools
