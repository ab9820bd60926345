#pragma once

// Named experiments: growth envelopes, primal/dual pairing, ultracontractivity from delta
// data, Harnack ratios, mass bookkeeping and the equilibrium eigentriplet.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <string>
#include <vector>

#include "kfp/config.hpp"
#include "kfp/discrete_operator.hpp"
#include "kfp/evolve.hpp"
#include "kfp/norms_measures.hpp"
#include "kfp/random.hpp"
#include "kfp/spectral_krdh.hpp"

namespace kfp {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ExperimentResult {
  std::string name;
  std::string config_hash;
  json config;
  std::map<std::string, double> metrics;
  std::map<std::string, Table> tables;
  std::map<std::string, bool> verdicts;
  std::vector<std::string> notes;

  bool passed() const {
    for (const auto& [k, v] : verdicts)
      if (!v) return false;
    return true;
  }
};

inline ExperimentResult new_result(const std::string& name, const RunConfig& cfg) {
  ExperimentResult r;
  r.name = name;
  r.config_hash = config_hash(cfg);
  r.config = to_json(cfg);
  return r;
}

inline json to_json(const ExperimentResult& r) {
  json j;
  j["name"] = r.name;
  j["config_hash"] = r.config_hash;
  j["config"] = r.config;
  json m = json::object();
  for (const auto& [k, v] : r.metrics) m[k] = std::isfinite(v) ? json(v) : json(std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf"));
  j["metrics"] = m;
  j["verdicts"] = r.verdicts;
  j["verdict"] = r.passed() ? "pass" : "fail";
  j["notes"] = r.notes;
  json t = json::array();
  for (const auto& [k, v] : r.tables) t.push_back(r.name + "_" + k + ".csv");
  j["tables"] = t;
  return j;
}

inline void write_csv(const Table& t, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
  os << "\n" << std::setprecision(17);
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
    os << "\n";
  }
}

/// <dir>/<name>.json plus one CSV per table.
inline void write_result(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [k, t] : r.tables) write_csv(t, dir / (r.name + "_" + k + ".csv"));
  std::ofstream os(dir / (r.name + ".json"));
  os << to_json(r).dump(2) << "\n";
}

struct Setup {
  PhaseGrid g;
  CoefficientModel m;
  BoundaryModel bd;
  GeneratorMatrix G;
  TimeScheme scheme;
};

inline Setup make_setup(const RunConfig& cfg) {
  Setup s{to_grid(cfg.grid), to_model(cfg.model), to_boundary(cfg.boundary), {}, {}};
  s.G = assemble(s.g, s.m, s.bd, to_form(cfg.model.form));
  s.scheme = to_scheme(cfg.scheme, s.g);
  return s;
}

/// Same physics with (dx, dv) halved; an explicit dt is halved too.
inline RunConfig refined(RunConfig cfg) {
  cfg.grid.Nx *= 2;
  cfg.grid.Nv *= 2;
  if (cfg.scheme.dt > 0.0) cfg.scheme.dt /= 2.0;
  return cfg;
}

// ---- initial data described in physical coordinates, so the same sample exists on any grid

struct SampleSpec {
  enum Kind { Delta, Box, Smooth, Uniform } kind = Uniform;
  double x0 = 0, v0 = 0, x1 = 0, v1 = 0;
  std::vector<double> a;  // smooth-field coefficients
  std::uint64_t seed = 0;
};

inline std::size_t nearest_node(const PhaseGrid& g, double x, double v) {
  auto near = [](const std::vector<double>& nodes, double y) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < nodes.size(); ++k)
      if (std::abs(nodes[k] - y) < std::abs(nodes[best] - y)) best = k;
    return best;
  };
  return g.index(near(g.x_nodes, x), near(g.v_nodes, v));
}

inline Vector realize(const SampleSpec& s, const PhaseGrid& g) {
  Vector f = Vector::Zero(static_cast<Eigen::Index>(g.size()));
  switch (s.kind) {
    case SampleSpec::Delta:
      f[static_cast<Eigen::Index>(nearest_node(g, s.x0, s.v0))] = 1.0 / g.cell_volume;
      break;
    case SampleSpec::Box:
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double x = g.x_nodes[g.x_index(k)], v = g.v_nodes[g.v_index(k)];
        if (x >= s.x0 && x <= s.x1 && v >= s.v0 && v <= s.v1) f[static_cast<Eigen::Index>(k)] = 1.0;
      }
      if (f.sum() == 0.0) f[static_cast<Eigen::Index>(nearest_node(g, 0.5 * (s.x0 + s.x1), 0.5 * (s.v0 + s.v1)))] = 1.0;
      break;
    case SampleSpec::Smooth:
      // exp of a few Fourier modes in x and v, times a Gaussian
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double x = g.x_nodes[g.x_index(k)] / g.L, v = g.v_nodes[g.v_index(k)] / g.V;
        double e = 0.0;
        for (std::size_t m = 0; m + 3 < s.a.size(); m += 4) {
          const double kk = static_cast<double>(m / 4 + 1);
          e += s.a[m] * std::sin(std::numbers::pi * kk * x + s.a[m + 1]) + s.a[m + 2] * std::cos(std::numbers::pi * kk * v + s.a[m + 3]);
        }
        const double vv = g.v_nodes[g.v_index(k)];
        f[static_cast<Eigen::Index>(k)] = std::exp(e - 0.25 * vv * vv);
      }
      break;
    case SampleSpec::Uniform: {
      Rng rng(s.seed);
      for (Eigen::Index k = 0; k < f.size(); ++k) f[k] = rng.uniform();
      break;
    }
  }
  return f;
}

inline SampleSpec smooth_spec(Rng& rng, int modes = 3) {
  SampleSpec s;
  s.kind = SampleSpec::Smooth;
  for (int m = 0; m < modes; ++m) {
    s.a.push_back(rng.uniform(-1.0, 1.0) / (m + 1));
    s.a.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
    s.a.push_back(rng.uniform(-1.0, 1.0) / (m + 1));
    s.a.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
  }
  return s;
}

/// Random nonnegative field on the grid (i.i.d. uniform).
inline Vector random_nonnegative(std::size_t N, Rng& rng) {
  Vector f(static_cast<Eigen::Index>(N));
  for (Eigen::Index k = 0; k < f.size(); ++k) f[k] = rng.uniform();
  return f;
}

inline Vector random_signed(std::size_t N, Rng& rng) {
  Vector f(static_cast<Eigen::Index>(N));
  for (Eigen::Index k = 0; k < f.size(); ++k) f[k] = rng.uniform(-1.0, 1.0);
  return f;
}

inline std::string p_label(double p) {
  if (p == 0.0 || std::isinf(p)) return "inf";
  std::ostringstream os;
  os << p;
  return os.str();
}

// ---- growth

struct GrowthFit {
  double kappa = 0.0;
  double C = 1.0;
  double kappa_half = 0.0;
  std::vector<double> t, y;  // y = max over samples of log(|f_t| / |f_0|)
};

/// kappa = least-squares slope of y(t); log C = max(y - kappa t) so the envelope holds on
/// every recorded point; kappa_half repeats the slope fit on t <= T/2.
inline GrowthFit fit_growth(const std::vector<double>& t, const std::vector<double>& y) {
  GrowthFit gf;
  gf.t = t;
  gf.y = y;
  auto slope = [&](double tmax) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t[k] > tmax * (1.0 + 1e-12)) continue;
      sx += t[k], sy += y[k], sxx += t[k] * t[k], sxy += t[k] * y[k];
      ++n;
    }
    const double den = n * sxx - sx * sx;
    return den > 0.0 ? (n * sxy - sx * sy) / den : 0.0;
  };
  const double T = t.empty() ? 0.0 : t.back();
  gf.kappa = slope(T);
  gf.kappa_half = slope(0.5 * T);
  double logC = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) logC = std::max(logC, y[k] - gf.kappa * t[k]);
  gf.C = std::exp(logC);
  return gf;
}

/// Max-over-samples log growth of the weighted L^p norm along a primal run (dual = false)
/// or a backward dual run with weight 1/w (dual = true).
inline GrowthFit growth_series(const Setup& s, const std::vector<double>& w, double p, bool dual, double T,
                               std::size_t nsnap, const Matrix& X0) {
  const std::size_t n = steps_for(T, s.scheme.dt);
  const std::size_t every = std::max<std::size_t>(1, n / std::max<std::size_t>(1, nsnap));
  const Stepper st(s.G, s.scheme);
  std::vector<double> wt = w;
  if (dual)
    for (double& x : wt) x = 1.0 / x;
  const double pp = p == 0.0 ? kInf : p;
  std::vector<double> base(static_cast<std::size_t>(X0.cols()));
  for (Eigen::Index c = 0; c < X0.cols(); ++c) base[c] = weighted_norm(X0.col(c), wt, pp, s.g.cell_volume);
  Matrix X = X0;
  std::vector<double> ts{0.0}, ys{0.0};
  for (std::size_t k = 1; k <= n; ++k) {
    if (dual) st.backward(X);
    else st.forward(X);
    if (k % every == 0 || k == n) {
      double y = -kInf;
      for (Eigen::Index c = 0; c < X.cols(); ++c)
        y = std::max(y, std::log(weighted_norm(X.col(c), wt, pp, s.g.cell_volume) / base[c]));
      ts.push_back(static_cast<double>(k) * s.scheme.dt);
      ys.push_back(y);
    }
  }
  return fit_growth(ts, ys);
}

inline Vector grid_maxwellian(const PhaseGrid& g);

/// The grid Maxwellian followed by alternating smooth positive and random signed fields.
inline Matrix growth_samples(const PhaseGrid& g, std::size_t count, Rng& rng) {
  Matrix X(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(std::max<std::size_t>(1, count)));
  X.col(0) = grid_maxwellian(g);
  for (std::size_t c = 1; c < count; ++c) {
    if (c % 2 == 1) X.col(c) = realize(smooth_spec(rng), g);
    else X.col(c) = random_signed(g.size(), rng);
  }
  return X;
}

inline ExperimentResult run_growth(const RunConfig& cfg) {
  ExperimentResult r = new_result("growth", cfg);
  const Setup s = make_setup(cfg);
  const std::vector<double> w = weight_values(to_weight(cfg.weight), s.g);
  Rng rng(cfg.seed);
  const Matrix X0 = growth_samples(s.g, cfg.growth.samples, rng);
  for (double p : cfg.growth.p_list) {
    for (bool dual : {false, true}) {
      // the dual side is measured in the conjugate exponent with weight 1/w
      const double pe = p == 0.0 ? 1.0 : (p == 1.0 ? 0.0 : p / (p - 1.0));
      const double e = dual ? pe : p;
      const GrowthFit gf = growth_series(s, w, e, dual, cfg.growth.T, cfg.growth.snapshots, X0);
      const std::string tag = dual ? "dual_q" + p_label(e) : "p" + p_label(p);
      r.metrics["kappa_" + tag] = gf.kappa;
      r.metrics["C_" + tag] = gf.C;
      r.metrics["kappa_half_" + tag] = gf.kappa_half;
      Table t{{"t", "max_log_ratio", "envelope"}, {}};
      bool env = true;
      for (std::size_t k = 0; k < gf.t.size(); ++k) {
        const double bound = std::log(gf.C) + gf.kappa * gf.t[k];
        t.rows.push_back({gf.t[k], gf.y[k], bound});
        if (gf.y[k] > bound + 1e-12) env = false;
      }
      r.tables[tag] = t;
      r.verdicts["envelope_" + tag] = env && std::isfinite(gf.kappa) && std::isfinite(gf.C);
      r.verdicts["bounded_" + tag] = gf.kappa <= gf.kappa_half + cfg.growth.kappa_tol;
    }
  }
  return r;
}

// ---- duality

inline ExperimentResult run_duality(const RunConfig& cfg) {
  ExperimentResult r = new_result("duality", cfg);
  const Setup s = make_setup(cfg);
  const Stepper st(s.G, s.scheme);
  const std::size_t n = steps_for(cfg.duality.T, s.scheme.dt);
  const std::size_t N = s.g.size();
  const double cv = s.g.cell_volume;
  Rng rng(cfg.seed);
  const std::size_t P = cfg.duality.pairs;
  Matrix F0(N, P), GT(N, P);
  for (std::size_t c = 0; c < P; ++c) {
    F0.col(c) = random_nonnegative(N, rng);
    GT.col(c) = random_nonnegative(N, rng);
  }
  // per-step trace for the first pair
  std::vector<Vector> fpath{F0.col(0)};
  Matrix F = F0;
  for (std::size_t k = 0; k < n; ++k) {
    st.forward(F);
    fpath.push_back(F.col(0));
  }
  Matrix G = GT;
  Table trace{{"step", "t", "pairing", "relative_deviation"}, {}};
  const double ref = inner(fpath[n], GT.col(0), cv);
  double trace_dev = 0.0;
  Vector g0 = GT.col(0);
  trace.rows.push_back({static_cast<double>(n), n * s.scheme.dt, ref, 0.0});
  for (std::size_t k = n; k-- > 0;) {
    st.backward(g0);
    const double pr = inner(fpath[k], g0, cv);
    const double dev = std::abs(pr - ref) / std::abs(ref);
    trace_dev = std::max(trace_dev, dev);
    trace.rows.push_back({static_cast<double>(k), k * s.scheme.dt, pr, dev});
  }
  std::reverse(trace.rows.begin(), trace.rows.end());
  for (std::size_t k = 0; k < n; ++k) st.backward(G);

  Table pairs{{"pair", "lhs", "rhs", "defect"}, {}};
  double worst = 0.0;
  for (std::size_t c = 0; c < P; ++c) {
    const double lhs = inner(F.col(c), GT.col(c), cv);
    const double rhs = inner(F0.col(c), G.col(c), cv);
    const double d = std::abs(lhs - rhs) / std::abs(rhs);
    worst = std::max(worst, d);
    pairs.rows.push_back({static_cast<double>(c), lhs, rhs, d});
  }
  r.tables["pairs"] = pairs;
  r.tables["trace"] = trace;
  r.metrics["max_defect"] = worst;
  r.metrics["trace_max_deviation"] = trace_dev;
  r.metrics["pairs"] = static_cast<double>(P);
  r.verdicts["defect"] = worst <= cfg.duality.tol;
  r.verdicts["trace"] = trace_dev <= cfg.duality.tol;
  return r;
}

// ---- ultracontractivity

struct UltraFit {
  std::vector<double> T, rho;
  double theta = 0.0;      // -slope of log rho vs log T on the window
  double prefactor = 0.0;  // rho ~ prefactor T^-theta
  double residual = 0.0;   // 1 - R^2 of the log-log fit on the window
  std::size_t lo = 0, hi = 0;  // window [lo, hi] (inclusive indices)
  std::size_t knee = 0;
  bool ok = false;
};

/// Knee: first index after the steepest local log-log slope where the local slope falls
/// below half the steepest. Window: longest run of >= 4 points up to the knee whose linear
/// fit leaves a residual fraction 1 - R^2 below tol; ties go to smaller T.
inline UltraFit fit_ultra(const std::vector<double>& T, const std::vector<double>& rho, double tol) {
  UltraFit u;
  u.T = T;
  u.rho = rho;
  const std::size_t n = T.size();
  if (n < 4) return u;
  std::vector<double> x(n), y(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = std::log(T[k]), y[k] = std::log(rho[k]);
  std::vector<double> local(n - 1);
  std::size_t steep = 0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    local[k] = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
    if (local[k] < local[steep]) steep = k;
  }
  u.knee = n - 1;
  for (std::size_t k = steep; k + 1 < n; ++k)
    if (local[k] > 0.5 * local[steep]) {
      u.knee = k;
      break;
    }
  std::size_t best_len = 0;
  for (std::size_t a = 0; a <= u.knee; ++a) {
    for (std::size_t b = a + 3; b <= u.knee; ++b) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      const double m = static_cast<double>(b - a + 1);
      for (std::size_t k = a; k <= b; ++k) sx += x[k], sy += y[k], sxx += x[k] * x[k], sxy += x[k] * y[k];
      const double sl = (m * sxy - sx * sy) / (m * sxx - sx * sx);
      const double ic = (sy - sl * sx) / m;
      double ss_res = 0.0, ss_tot = 0.0;
      for (std::size_t k = a; k <= b; ++k) {
        const double e = y[k] - ic - sl * x[k], d = y[k] - sy / m;
        ss_res += e * e;
        ss_tot += d * d;
      }
      const double res = ss_tot > 0.0 ? ss_res / ss_tot : 1.0;
      if (res < tol && b - a + 1 > best_len) {
        best_len = b - a + 1;
        u.lo = a;
        u.hi = b;
        u.theta = -sl;
        u.prefactor = std::exp(ic);
        u.residual = res;
      }
    }
  }
  u.ok = best_len >= 4 && u.theta > 0.0;
  return u;
}

/// Log-spaced horizons rounded to whole steps (duplicates dropped).
inline std::vector<std::size_t> log_steps(double Tmin, double Tmax, std::size_t count, double dt) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = Tmin * std::pow(Tmax / Tmin, count > 1 ? static_cast<double>(k) / (count - 1) : 0.0);
    const std::size_t s = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(t / dt)));
    if (out.empty() || s > out.back()) out.push_back(s);
  }
  return out;
}

/// rho(T) = |f(T)|_{L^inf_w} / |f0|_{L^1_w} from a discrete delta at physical (x, v).
inline UltraFit ultra_curve(const Setup& s, const std::vector<double>& w, double x, double v, const UltraBlock& ub) {
  const std::size_t z = nearest_node(s.g, x, v);
  const std::vector<std::size_t> steps = log_steps(ub.T_min, ub.T_max, ub.n_T, s.scheme.dt);
  const Stepper st(s.G, s.scheme);
  Vector f = discrete_delta(s.g.size(), z, s.g.cell_volume).values;
  const double n0 = weighted_norm(f, w, 1.0, s.g.cell_volume);
  std::vector<double> T, rho;
  std::size_t done = 0;
  for (std::size_t target : steps) {
    for (; done < target; ++done) st.forward(f);
    T.push_back(static_cast<double>(target) * s.scheme.dt);
    rho.push_back(weighted_norm(f, w, kInf, s.g.cell_volume) / n0);
  }
  return fit_ultra(T, rho, ub.window_residual);
}

struct UltraResult {
  ExperimentResult result;
  std::vector<UltraFit> fits;  // per delta on the base grid, then the refined first delta
};

inline UltraResult run_ultracontractivity(const RunConfig& cfg) {
  UltraResult ur{new_result("ultracontractivity", cfg), {}};
  ExperimentResult& r = ur.result;
  const WeightSpec ws = to_weight(cfg.weight);
  const Setup s = make_setup(cfg);
  if (!(ws.varsigma(s.m.gamma) > 0.0))
    throw ConfigError("ultracontractivity: the weight must be strongly confining (varsigma > 0)");
  if (cfg.ultra.deltas.empty()) throw ConfigError("ultracontractivity.deltas: at least one delta position required");
  const std::vector<double> w = weight_values(ws, s.g);

  auto record = [&](const UltraFit& u, const std::string& tag) {
    Table t{{"T", "rho", "in_window"}, {}};
    for (std::size_t k = 0; k < u.T.size(); ++k)
      t.rows.push_back({u.T[k], u.rho[k], (k >= u.lo && k <= u.hi && u.ok) ? 1.0 : 0.0});
    r.tables[tag] = t;
    r.metrics["theta_" + tag] = u.theta;
    r.metrics["prefactor_" + tag] = u.prefactor;
    r.metrics["fit_residual_" + tag] = u.residual;
    r.metrics["window_lo_" + tag] = u.ok ? u.T[u.lo] : 0.0;
    r.metrics["window_hi_" + tag] = u.ok ? u.T[u.hi] : 0.0;
    r.verdicts["positive_slope_" + tag] = u.ok;
  };

  for (std::size_t d = 0; d < cfg.ultra.deltas.size(); ++d) {
    const auto& z = cfg.ultra.deltas[d];
    ur.fits.push_back(ultra_curve(s, w, z[0], z[1], cfg.ultra));
    record(ur.fits.back(), "delta" + std::to_string(d));
  }
  const UltraFit& u0 = ur.fits.front();
  r.metrics["theta_ultra"] = u0.theta;

  if (ur.fits.size() > 1) {
    double lo = kInf, hi = 0.0;
    for (const auto& u : ur.fits) lo = std::min(lo, u.theta), hi = std::max(hi, u.theta);
    r.metrics["theta_spread"] = (hi - lo) / hi;
    r.verdicts["delta_agreement"] = (hi - lo) / hi <= cfg.ultra.stability_tol;
  }

  // large T: rho(T) <= C e^{kappa (T - T_knee)} rho(T_knee) with the L^inf_w growth fit
  {
    Rng rng(cfg.seed);
    const Matrix X0 = growth_samples(s.g, cfg.growth.samples, rng);
    const GrowthFit gf = growth_series(s, w, 0.0, false, cfg.ultra.T_max, cfg.growth.snapshots, X0);
    r.metrics["kappa_inf"] = gf.kappa;
    r.metrics["C_inf"] = gf.C;
    const std::size_t k0 = u0.ok ? u0.hi : u0.knee;
    bool env = true;
    double worst = 0.0;
    for (std::size_t k = k0 + 1; k < u0.T.size(); ++k) {
      const double bound = gf.C * std::exp(gf.kappa * (u0.T[k] - u0.T[k0])) * u0.rho[k0];
      worst = std::max(worst, u0.rho[k] / bound);
      if (u0.rho[k] > bound * (1.0 + 1e-9)) env = false;
    }
    r.metrics["large_T_worst_ratio"] = worst;
    r.verdicts["large_T_envelope"] = env;
  }

  if (cfg.ultra.refine) {
    const RunConfig fine = refined(cfg);
    const Setup sf = make_setup(fine);
    const auto& z = cfg.ultra.deltas.front();
    ur.fits.push_back(ultra_curve(sf, weight_values(ws, sf.g), z[0], z[1], cfg.ultra));
    record(ur.fits.back(), "refined");
    const double rel = std::abs(ur.fits.back().theta - u0.theta) / u0.theta;
    r.metrics["theta_refined"] = ur.fits.back().theta;
    r.metrics["theta_refinement_change"] = rel;
    r.verdicts["refinement_stability"] = rel <= cfg.ultra.stability_tol;
  }
  return ur;
}

// ---- Harnack

/// Deterministic sample family in physical coordinates: deltas on a lattice, boxes,
/// smooth positive fields.
inline std::vector<SampleSpec> harnack_samples(const PhaseGrid& g, std::size_t count, std::uint64_t seed) {
  std::vector<SampleSpec> out;
  const double xs[] = {0.1, 0.3, 0.5, 0.7, 0.9};
  const double vs[] = {-0.7, -0.3, 0.3, 0.7};
  for (double x : xs)
    for (double v : vs) {
      SampleSpec s;
      s.kind = SampleSpec::Delta;
      s.x0 = x * g.L;
      s.v0 = v * g.V;
      out.push_back(s);
    }
  Rng rng(seed);
  const std::size_t boxes = count > out.size() ? (count - out.size()) / 2 : 0;
  for (std::size_t b = 0; b < boxes; ++b) {
    SampleSpec s;
    s.kind = SampleSpec::Box;
    const double xa = rng.uniform(0.0, 0.8), va = rng.uniform(-0.9, 0.5);
    s.x0 = xa * g.L;
    s.x1 = (xa + rng.uniform(0.1, 0.2)) * g.L;
    s.v0 = va * g.V;
    s.v1 = (va + rng.uniform(0.2, 0.4)) * g.V;
    out.push_back(s);
  }
  while (out.size() < count) out.push_back(smooth_spec(rng));
  return out;
}

struct HarnackRatios {
  std::vector<double> ratio;  // per sample
  double max_ratio = 0.0;
  bool connected = true;
};

inline HarnackRatios harnack_ratios(const Setup& s, const std::vector<SampleSpec>& specs, double T0, double T1,
                                    const std::vector<double>& eps_list, std::vector<double>* per_eps = nullptr) {
  const std::size_t n0 = steps_for(T0, s.scheme.dt), n1 = steps_for(T1, s.scheme.dt);
  const Stepper st(s.G, s.scheme);
  Matrix X(static_cast<Eigen::Index>(s.g.size()), static_cast<Eigen::Index>(specs.size()));
  for (std::size_t c = 0; c < specs.size(); ++c) X.col(c) = realize(specs[c], s.g);
  for (std::size_t k = 0; k < n0; ++k) st.forward(X);
  const Matrix X0 = X;
  for (std::size_t k = n0; k < n1; ++k) st.forward(X);
  HarnackRatios hr;
  if (per_eps) per_eps->clear();
  for (std::size_t e = 0; e < eps_list.size(); ++e) {
    const CoreRegion core = core_region(s.g, eps_list[e]);
    if (core.empty()) throw ConfigError("harnack: core region empty for eps = " + std::to_string(eps_list[e]));
    double mx = 0.0;
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      double sup = 0.0, inf = kInf;
      for (std::size_t i : core.nodes) {
        sup = std::max(sup, X0(static_cast<Eigen::Index>(i), c));
        inf = std::min(inf, X(static_cast<Eigen::Index>(i), c));
      }
      const double ratio = inf > 0.0 ? sup / inf : kInf;
      if (!(inf > 0.0) && e == 0) hr.connected = false;
      if (e == 0) hr.ratio.push_back(ratio);
      mx = std::max(mx, ratio);
    }
    if (e == 0) hr.max_ratio = mx;
    if (per_eps) per_eps->push_back(mx);
  }
  return hr;
}

inline ExperimentResult run_harnack(const RunConfig& cfg) {
  ExperimentResult r = new_result("harnack", cfg);
  const HarnackBlock& hb = cfg.harnack;
  const Setup s = make_setup(cfg);
  const std::vector<SampleSpec> specs = harnack_samples(s.g, hb.samples, cfg.seed);
  std::vector<double> eps{hb.eps};
  for (double e : hb.eps_list) eps.push_back(e);
  std::vector<double> per_eps;
  const HarnackRatios hr = harnack_ratios(s, specs, hb.T0, hb.T1, eps, &per_eps);
  r.metrics["max_ratio"] = hr.max_ratio;
  r.metrics["samples"] = static_cast<double>(specs.size());
  r.verdicts["finite"] = hr.connected && std::isfinite(hr.max_ratio);
  Table t{{"sample", "kind", "ratio"}, {}};
  for (std::size_t c = 0; c < specs.size(); ++c)
    t.rows.push_back({static_cast<double>(c), static_cast<double>(specs[c].kind), hr.ratio[c]});
  r.tables["samples"] = t;
  if (eps.size() > 1) {
    Table te{{"eps", "max_ratio"}, {}};
    std::vector<std::pair<double, double>> sorted;
    for (std::size_t e = 0; e < eps.size(); ++e) sorted.push_back({eps[e], per_eps[e]});
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    bool mono = true;
    for (std::size_t e = 0; e < sorted.size(); ++e) {
      te.rows.push_back({sorted[e].first, sorted[e].second});
      if (e > 0 && sorted[e].second < sorted[e - 1].second * (1.0 - 1e-12)) mono = false;
    }
    r.tables["eps_sweep"] = te;
    r.metrics["eps_monotone"] = mono ? 1.0 : 0.0;
    r.verdicts["eps_monotone"] = mono;
  }
  if (hb.refine) {
    const Setup sf = make_setup(refined(cfg));
    const HarnackRatios hf = harnack_ratios(sf, specs, hb.T0, hb.T1, {hb.eps});
    const double factor = std::max(hf.max_ratio / hr.max_ratio, hr.max_ratio / hf.max_ratio);
    r.metrics["max_ratio_refined"] = hf.max_ratio;
    r.metrics["refinement_factor"] = factor;
    r.verdicts["refinement_stability"] = hf.connected && factor <= hb.stability;
  }
  return r;
}

// ---- mass balance

inline ExperimentResult run_mass_balance(const RunConfig& cfg) {
  ExperimentResult r = new_result("mass_balance", cfg);
  const Setup s = make_setup(cfg);
  if (!s.G.reaction) throw ConfigError("mass_balance: requires the flux form (model.form = flux)");
  const Stepper st(s.G, s.scheme);
  const double cv = s.g.cell_volume, dt = s.scheme.dt;
  const Vector& reac = *s.G.reaction;
  const Vector& outL = *s.G.outflux[0];
  const Vector& outR = *s.G.outflux[1];
  const double lossL = 1.0 - s.G.iota[0], lossR = 1.0 - s.G.iota[1];

  // per-unit outgoing flux loss read off the assembled columns
  const Vector colsum = s.G.L.transpose() * Vector::Ones(s.G.L.rows());
  double lfL = 0.0, lfR = 0.0;
  for (Eigen::Index k = 0; k < colsum.size(); ++k) {
    const double net = cv * (reac[k] - colsum[k]);
    if (outL[k] > 0.0) lfL = std::max(lfL, net / outL[k]);
    if (outR[k] > 0.0) lfR = std::max(lfR, net / outR[k]);
  }
  r.metrics["loss_factor_left"] = lfL;
  r.metrics["loss_factor_right"] = lfR;
  r.metrics["expected_loss_left"] = lossL;
  r.metrics["expected_loss_right"] = lossR;
  r.verdicts["loss_factor"] = std::abs(lfL - lossL) <= 1e-12 && std::abs(lfR - lossR) <= 1e-12;

  Rng rng(cfg.seed);
  Vector f = random_nonnegative(s.g.size(), rng);
  const double M0 = f.sum() * cv;
  double M = M0, worst = 0.0, drift = 0.0;
  bool decreasing = true;
  Table t{{"step", "t", "mass", "boundary_loss", "defect"}, {}};
  t.rows.push_back({0.0, 0.0, M0, 0.0, 0.0});
  for (std::size_t n = 1; n <= cfg.mass_balance.steps; ++n) {
    st.forward(f);
    const double Mn = f.sum() * cv;
    const double loss = lossL * outL.dot(f) + lossR * outR.dot(f);
    const double rhs = cv * reac.dot(f) - loss;
    const double defect = std::abs((Mn - M) - dt * rhs) / M;
    worst = std::max(worst, defect);
    drift = std::max(drift, std::abs(Mn - M0) / M0);
    if (!(Mn < M)) decreasing = false;
    M = Mn;
    t.rows.push_back({static_cast<double>(n), n * dt, Mn, loss, defect});
  }
  r.tables["mass"] = t;
  r.metrics["max_defect"] = worst;
  r.metrics["mass_drift"] = drift;
  r.metrics["strictly_decreasing"] = decreasing ? 1.0 : 0.0;
  r.verdicts["identity"] = worst <= cfg.mass_balance.tol;
  const bool conservative_walls = lossL == 0.0 && lossR == 0.0;
  const bool conservative_bulk = reac.cwiseAbs().maxCoeff() == 0.0;
  if (conservative_walls && conservative_bulk) r.verdicts["conservation"] = drift <= 1e-12;
  if (lossL > 0.0 && lossR > 0.0 && reac.maxCoeff() <= 0.0) r.verdicts["strict_loss"] = decreasing;
  return r;
}

// ---- equilibrium

struct EquilibriumLevel {
  std::size_t Nx = 0, Nv = 0;
  double lambda1 = 0.0, flatness = 0.0, pairing_error = 0.0, phi_norm_error = 0.0;
  double error_L1 = 0.0;  // |f1 - M_h|_1 / |M_h|_1
  double generator_residual = 0.0;
  double reflection_residual = 0.0;
  double residual_primal = 0.0, residual_dual = 0.0;
  EigenTriplet triplet;
};

/// Grid Maxwellian M_h(x, v) = M(v) (Theta = 1, wall renormalization), x-independent.
inline Vector grid_maxwellian(const PhaseGrid& g) {
  const WallMaxwellian M = wall_maxwellian(1.0, g);
  Vector out(static_cast<Eigen::Index>(g.size()));
  for (std::size_t k = 0; k < g.size(); ++k) out[static_cast<Eigen::Index>(k)] = M.values[g.v_index(k)];
  return out;
}

inline EquilibriumLevel equilibrium_level(const RunConfig& cfg) {
  EquilibriumLevel lv;
  const Setup s = make_setup(cfg);
  lv.Nx = s.g.Nx;
  lv.Nv = s.g.Nv;
  const Vector Mh = grid_maxwellian(s.g);
  lv.generator_residual = (s.G.L * Mh).cwiseAbs().maxCoeff() / Mh.cwiseAbs().maxCoeff();

  const ReflectionOperator R = make_reflection(s.g, s.bd);
  for (Wall w : kWalls) {
    const std::size_t i = s.g.wall_cell(w);
    std::vector<double> trace(s.g.Nv, 0.0);
    for (std::size_t j : R.at(w).outgoing) trace[j] = Mh[static_cast<Eigen::Index>(s.g.index(i, j))];
    const std::vector<double> in = apply_reflection(R, w, trace);
    for (std::size_t j : R.at(w).incoming) {
      const double ref = Mh[static_cast<Eigen::Index>(s.g.index(i, j))];
      lv.reflection_residual = std::max(lv.reflection_residual, std::abs(in[j] - ref) / ref);
    }
  }

  // eigenvectors of implicit Euler do not depend on dt; a large step converges fast
  TimeScheme sch = s.scheme;
  sch.dt = cfg.equilibrium.T / 10.0;
  PowerOptions po{cfg.scheme.power_tol, cfg.scheme.max_iter};
  lv.triplet = principal_triplet(s.G, cfg.equilibrium.T, sch, po);
  const EigenTriplet& et = lv.triplet;
  lv.lambda1 = et.lambda1;
  const double mean = et.phi1.mean();
  lv.flatness = (et.phi1.array() - mean).abs().maxCoeff() / mean;
  lv.pairing_error = std::abs(et.pairing - 1.0);
  lv.phi_norm_error = std::abs(et.phi_norm - 1.0);
  lv.residual_primal = et.residual_primal;
  lv.residual_dual = et.residual_dual;
  const Vector Ms = Mh / inner(et.phi1, Mh, s.g.cell_volume);
  lv.error_L1 = (et.f1 - Ms).cwiseAbs().sum() / Ms.cwiseAbs().sum();
  return lv;
}

/// Harmonic model, iota = 1, Theta = 1, flux form, regardless of the config's physics.
inline RunConfig equilibrium_config(RunConfig cfg) {
  cfg.model = ModelConfig{};
  cfg.model.name = "harmonic";
  cfg.model.form = "flux";
  if (std::abs(cfg.boundary.iota_s + cfg.boundary.iota_d - 1.0) > 0.0) {
    cfg.boundary.iota_s = 0.5;
    cfg.boundary.iota_d = 0.5;
  }
  cfg.boundary.theta_left = cfg.boundary.theta_right = 1.0;
  return cfg;
}

inline ExperimentResult run_equilibrium(const RunConfig& cfg_in) {
  const RunConfig cfg = equilibrium_config(cfg_in);
  ExperimentResult r = new_result("equilibrium", cfg);
  const EquilibriumBlock& eb = cfg.equilibrium;
  Table t{{"Nx", "Nv", "lambda1", "error_L1", "generator_residual", "flatness", "pairing_error"}, {}};
  std::vector<EquilibriumLevel> levels;
  RunConfig c = cfg;
  for (std::size_t l = 0; l < std::max<std::size_t>(1, eb.levels); ++l) {
    levels.push_back(equilibrium_level(c));
    const auto& lv = levels.back();
    t.rows.push_back({double(lv.Nx), double(lv.Nv), lv.lambda1, lv.error_L1, lv.generator_residual, lv.flatness,
                      lv.pairing_error});
    c = refined(c);
  }
  r.tables["refinement"] = t;
  const EquilibriumLevel& b = levels.front();
  double max_lambda = 0.0, max_flat = 0.0, max_pair = 0.0, max_refl = 0.0, max_res = 0.0;
  for (const auto& lv : levels) {
    max_lambda = std::max(max_lambda, std::abs(lv.lambda1));
    max_flat = std::max(max_flat, lv.flatness);
    max_pair = std::max(max_pair, std::max(lv.pairing_error, lv.phi_norm_error));
    max_refl = std::max(max_refl, lv.reflection_residual);
    max_res = std::max(max_res, std::max(lv.residual_primal, lv.residual_dual));
  }
  r.metrics["lambda1"] = b.lambda1;
  r.metrics["max_abs_lambda1"] = max_lambda;
  r.metrics["max_flatness"] = max_flat;
  r.metrics["max_normalization_error"] = max_pair;
  r.metrics["reflection_residual"] = max_refl;
  r.metrics["max_eigen_residual"] = max_res;
  r.metrics["generator_residual"] = b.generator_residual;
  r.verdicts["lambda1"] = max_lambda <= eb.lambda_tol;
  r.verdicts["flatness"] = max_flat <= eb.flat_tol;
  r.verdicts["normalization"] = max_pair <= 1e-12;
  r.verdicts["reflection_fixed_point"] = max_refl <= 1e-13;
  r.verdicts["eigen_residual"] = max_res <= cfg.scheme.residual_tol;
  double worst_ratio = kInf;
  for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
    const double ratio = levels[l].error_L1 / levels[l + 1].error_L1;
    r.metrics["error_ratio_" + std::to_string(l)] = ratio;
    worst_ratio = std::min(worst_ratio, ratio);
  }
  if (levels.size() > 1) {
    r.metrics["min_error_ratio"] = worst_ratio;
    r.verdicts["refinement"] = worst_ratio >= eb.ratio_min;
  }
  return r;
}

}  // namespace kfp
