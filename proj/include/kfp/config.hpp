#pragma once

// Run configuration: one JSON document drives every subcommand. Unknown keys are rejected
// with their path; physical conditions are re-checked at load time.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kfp/discrete_operator.hpp"
#include "kfp/error.hpp"
#include "kfp/evolve.hpp"
#include "kfp/kinetic_model.hpp"
#include "kfp/phase_grid.hpp"
#include "kfp/weights.hpp"

namespace kfp {

using json = nlohmann::json;

struct GridConfig {
  double L = 1.0, V = 5.0;
  std::size_t Nx = 32, Nv = 64;
};

struct ModelConfig {
  std::string name = "harmonic";  // harmonic | power
  double gamma = 2.0;
  double b0 = 1.0;
  std::string reaction = "conservative";  // conservative | constant
  double c0 = 0.0;
  std::string form = "flux";  // flux | advective
};

struct BoundaryConfig {
  double iota_s = 0.5, iota_d = 0.5;
  double theta_left = 1.0, theta_right = 1.0;
};

struct WeightConfig {
  std::string kind = "flat";  // flat | poly | exp
  double k = 0.0, zeta = 0.0, s = 2.0;
};

struct SchemeConfig {
  std::string kind = "implicit_euler";
  double dt = 0.0;  // 0: default
  double power_tol = 1e-13;
  double residual_tol = 1e-10;
  std::size_t max_iter = 20000;
  bool strict_positivity = true;
};

struct RunBlock {
  double T = 1.0;
  std::vector<double> snapshots;
  std::string initial = "maxwellian";  // maxwellian | random | delta
  double x0 = 0.5, v0 = 0.0;
};

struct SpectrumBlock {
  double T = 0.5;
};

struct CertificateBlock {
  double eps = 0.125, T0 = 0.1, T1 = 0.25, T = 0.5;
  WeightConfig norm_weight;
  std::size_t samples = 20, periods = 20, soundness_samples = 1000;
};

struct GrowthBlock {
  double T = 2.0;
  std::vector<double> p_list = {1.0, 2.0};  // 0 encodes p = inf
  std::size_t samples = 10, snapshots = 20;
  double kappa_tol = 0.5;
};

struct DualityBlock {
  double T = 0.5;
  std::size_t pairs = 20;
  double tol = 1e-10;
};

struct UltraBlock {
  double T_min = 0.05, T_max = 4.0;
  std::size_t n_T = 24;
  std::vector<std::vector<double>> deltas = {{0.5, 0.0}, {0.35, 0.5}};
  double window_residual = 0.05;
  bool refine = true;
  double stability_tol = 0.2;
};

struct HarnackBlock {
  double T0 = 0.25, T1 = 1.0, eps = 0.25;
  std::size_t samples = 50;
  std::vector<double> eps_list;
  bool refine = true;
  double stability = 2.0;
};

struct MassBlock {
  std::size_t steps = 1000;
  double tol = 1e-11;
};

struct EquilibriumBlock {
  std::size_t levels = 2;
  double T = 0.5;
  double ratio_min = 1.8;
  double lambda_tol = 1e-8;
  double flat_tol = 1e-8;
};

struct RunConfig {
  GridConfig grid;
  ModelConfig model;
  BoundaryConfig boundary;
  WeightConfig weight;
  SchemeConfig scheme;
  RunBlock run;
  SpectrumBlock spectrum;
  CertificateBlock certificate;
  GrowthBlock growth;
  DualityBlock duality;
  UltraBlock ultra;
  HarnackBlock harnack;
  MassBlock mass_balance;
  EquilibriumBlock equilibrium;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
};

namespace detail {

// One description of the schema, walked by a reader and by a writer.
struct JsonReader {
  const json* node;
  std::string path;
  std::set<std::string> seen;

  template <class T>
  void field(const char* key, T& out) {
    seen.insert(key);
    auto it = node->find(key);
    if (it == node->end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path + "." + key + ": wrong type (" + e.what() + ")");
    }
  }
  void object(const char* key, const std::function<void(JsonReader&)>& fn) {
    seen.insert(key);
    auto it = node->find(key);
    if (it == node->end()) return;
    if (!it->is_object()) throw ConfigError(path + "." + key + ": expected an object");
    JsonReader sub{&*it, path + "." + key, {}};
    fn(sub);
    sub.finish();
  }
  void finish() const {
    for (auto it = node->begin(); it != node->end(); ++it)
      if (!seen.count(it.key())) throw ConfigError(path + "." + it.key() + ": unknown key");
  }
};

struct JsonWriter {
  json* node;

  template <class T>
  void field(const char* key, T& v) {
    (*node)[key] = v;
  }
  void object(const char* key, const std::function<void(JsonWriter&)>& fn) {
    json sub = json::object();
    JsonWriter w{&sub};
    fn(w);
    (*node)[key] = sub;
  }
};

template <class IO>
void visit_weight(IO& io, WeightConfig& w) {
  io.field("kind", w.kind);
  io.field("k", w.k);
  io.field("zeta", w.zeta);
  io.field("s", w.s);
}

template <class IO>
void visit(IO& io, RunConfig& c) {
  io.object("grid", [&](IO& o) {
    o.field("L", c.grid.L);
    o.field("V", c.grid.V);
    o.field("Nx", c.grid.Nx);
    o.field("Nv", c.grid.Nv);
  });
  io.object("model", [&](IO& o) {
    o.field("name", c.model.name);
    o.field("gamma", c.model.gamma);
    o.field("b0", c.model.b0);
    o.field("reaction", c.model.reaction);
    o.field("c0", c.model.c0);
    o.field("form", c.model.form);
  });
  io.object("boundary", [&](IO& o) {
    o.field("iota_s", c.boundary.iota_s);
    o.field("iota_d", c.boundary.iota_d);
    o.field("theta_left", c.boundary.theta_left);
    o.field("theta_right", c.boundary.theta_right);
  });
  io.object("weight", [&](IO& o) { visit_weight(o, c.weight); });
  io.object("scheme", [&](IO& o) {
    o.field("kind", c.scheme.kind);
    o.field("dt", c.scheme.dt);
    o.field("power_tol", c.scheme.power_tol);
    o.field("residual_tol", c.scheme.residual_tol);
    o.field("max_iter", c.scheme.max_iter);
    o.field("strict_positivity", c.scheme.strict_positivity);
  });
  io.object("run", [&](IO& o) {
    o.field("T", c.run.T);
    o.field("snapshots", c.run.snapshots);
    o.field("initial", c.run.initial);
    o.field("x0", c.run.x0);
    o.field("v0", c.run.v0);
  });
  io.object("spectrum", [&](IO& o) { o.field("T", c.spectrum.T); });
  io.object("certificate", [&](IO& o) {
    o.field("eps", c.certificate.eps);
    o.field("T0", c.certificate.T0);
    o.field("T1", c.certificate.T1);
    o.field("T", c.certificate.T);
    o.object("norm_weight", [&](IO& w) { visit_weight(w, c.certificate.norm_weight); });
    o.field("samples", c.certificate.samples);
    o.field("periods", c.certificate.periods);
    o.field("soundness_samples", c.certificate.soundness_samples);
  });
  io.object("growth", [&](IO& o) {
    o.field("T", c.growth.T);
    o.field("p_list", c.growth.p_list);
    o.field("samples", c.growth.samples);
    o.field("snapshots", c.growth.snapshots);
    o.field("kappa_tol", c.growth.kappa_tol);
  });
  io.object("duality", [&](IO& o) {
    o.field("T", c.duality.T);
    o.field("pairs", c.duality.pairs);
    o.field("tol", c.duality.tol);
  });
  io.object("ultracontractivity", [&](IO& o) {
    o.field("T_min", c.ultra.T_min);
    o.field("T_max", c.ultra.T_max);
    o.field("n_T", c.ultra.n_T);
    o.field("deltas", c.ultra.deltas);
    o.field("window_residual", c.ultra.window_residual);
    o.field("refine", c.ultra.refine);
    o.field("stability_tol", c.ultra.stability_tol);
  });
  io.object("harnack", [&](IO& o) {
    o.field("T0", c.harnack.T0);
    o.field("T1", c.harnack.T1);
    o.field("eps", c.harnack.eps);
    o.field("samples", c.harnack.samples);
    o.field("eps_list", c.harnack.eps_list);
    o.field("refine", c.harnack.refine);
    o.field("stability", c.harnack.stability);
  });
  io.object("mass_balance", [&](IO& o) {
    o.field("steps", c.mass_balance.steps);
    o.field("tol", c.mass_balance.tol);
  });
  io.object("equilibrium", [&](IO& o) {
    o.field("levels", c.equilibrium.levels);
    o.field("T", c.equilibrium.T);
    o.field("ratio_min", c.equilibrium.ratio_min);
    o.field("lambda_tol", c.equilibrium.lambda_tol);
    o.field("flat_tol", c.equilibrium.flat_tol);
  });
  io.field("output_dir", c.output_dir);
  io.field("seed", c.seed);
}

}  // namespace detail

inline WeightSpec to_weight(const WeightConfig& w) {
  if (w.kind == "flat") return WeightSpec::flat();
  if (w.kind == "poly") return WeightSpec::poly(w.k);
  if (w.kind == "exp") return WeightSpec::exp(w.zeta, w.s);
  throw ConfigError("weight.kind: expected flat, poly or exp (got " + w.kind + ")");
}

inline CoefficientModel to_model(const ModelConfig& m) {
  if (m.name == "harmonic") return harmonic_model(1);
  if (m.name == "power") {
    if (!(m.gamma > 1.0)) throw ConfigError("model.gamma: confinement exponent gamma > 1 required");
    if (!(m.b0 > 0.0)) throw ConfigError("model.b0: b0 > 0 required");
    ReactionMode mode;
    if (m.reaction == "conservative") mode = ReactionMode::Conservative;
    else if (m.reaction == "constant") mode = ReactionMode::Constant;
    else throw ConfigError("model.reaction: expected conservative or constant");
    return power_model(m.gamma, m.b0, mode, m.c0);
  }
  throw ConfigError("model.name: expected harmonic or power (got " + m.name + ")");
}

inline AssemblyForm to_form(const std::string& s) {
  if (s == "flux") return AssemblyForm::Flux;
  if (s == "advective") return AssemblyForm::Advective;
  throw ConfigError("model.form: expected flux or advective");
}

inline BoundaryModel to_boundary(const BoundaryConfig& b) {
  return make_boundary({b.iota_s, b.iota_d, b.theta_left}, {b.iota_s, b.iota_d, b.theta_right});
}

inline PhaseGrid to_grid(const GridConfig& g) { return make_grid(g.L, g.V, g.Nx, g.Nv); }

/// Largest dt <= min(dx, dv^2)/4 of the form 1/(100 m): every horizon that is a multiple
/// of 0.01 is then an exact number of steps.
inline double aligned_dt(const PhaseGrid& g) {
  const double m = std::ceil(1.0 / (100.0 * default_dt(g)) - 1e-9);
  return 1.0 / (100.0 * std::max(1.0, m));
}

inline TimeScheme to_scheme(const SchemeConfig& s, const PhaseGrid& g) {
  TimeScheme ts;
  if (s.kind == "implicit_euler") ts.kind = SchemeKind::ImplicitEuler;
  else if (s.kind == "crank_nicolson") ts.kind = SchemeKind::CrankNicolson;
  else if (s.kind == "explicit_euler") ts.kind = SchemeKind::ExplicitEuler;
  else throw ConfigError("scheme.kind: expected implicit_euler, crank_nicolson or explicit_euler");
  ts.dt = s.dt > 0.0 ? s.dt : aligned_dt(g);
  ts.strict_positivity = s.strict_positivity;
  return ts;
}

/// Physics checks shared by every entry point.
inline void validate(const RunConfig& c) {
  const PhaseGrid g = to_grid(c.grid);
  const CoefficientModel m = to_model(c.model);
  to_form(c.model.form);
  const BoundaryModel bd = to_boundary(c.boundary);
  if (!(g.V > m.R0)) throw ConfigError("grid.V: velocity truncation must exceed the confinement radius R0");
  to_scheme(c.scheme, g);
  if (c.scheme.dt < 0.0) throw ConfigError("scheme.dt: must be positive (or 0 for the default)");
  for (const WeightConfig* wc : {&c.weight, &c.certificate.norm_weight}) {
    const WeightSpec w = to_weight(*wc);
    if (wc->kind == "flat") continue;
    const Admissibility a = check_admissible(w, m, bd.theta_upper);
    if (!a.ok) throw ConfigError("weight: " + a.reason);
  }
  if (!(c.certificate.T0 > 0.0 && c.certificate.T0 < c.certificate.T1 && c.certificate.T1 <= c.certificate.T))
    throw ConfigError("certificate: need 0 < T0 < T1 <= T");
  if (!(c.harnack.T0 > 0.0 && c.harnack.T0 < c.harnack.T1)) throw ConfigError("harnack: need 0 < T0 < T1");
  if (!(c.ultra.T_min > 0.0 && c.ultra.T_min < c.ultra.T_max)) throw ConfigError("ultracontractivity: need 0 < T_min < T_max");
  for (const auto& d : c.ultra.deltas)
    if (d.size() != 2) throw ConfigError("ultracontractivity.deltas: each entry must be [x, v]");
  for (double p : c.growth.p_list)
    if (!(p == 0.0 || p >= 1.0)) throw ConfigError("growth.p_list: p must be >= 1 (0 means infinity)");
}

inline RunConfig parse_config_json(const json& j) {
  if (!j.is_object()) throw ConfigError("$: config must be a JSON object");
  RunConfig c;
  detail::JsonReader r{&j, "$", {}};
  detail::visit(r, c);
  r.finish();
  validate(c);
  return c;
}

inline RunConfig parse_config_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config_json(j);
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str());
}

/// Fully defaulted config as JSON (keys sorted).
inline json to_json(const RunConfig& c) {
  RunConfig copy = c;
  json j = json::object();
  detail::JsonWriter w{&j};
  detail::visit(w, copy);
  return j;
}

/// FNV-1a of the canonical dump, hex.
inline std::string config_hash(const RunConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace kfp
