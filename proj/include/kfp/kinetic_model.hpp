#pragma once

// Coefficient fields (drift b, reaction c) with their confinement constants, and the
// Maxwell boundary model (accommodation coefficients, wall temperatures, wall Maxwellians).

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "kfp/error.hpp"
#include "kfp/phase_grid.hpp"

namespace kfp {

inline double japanese(double v) { return std::sqrt(1.0 + v * v); }

using Field = std::function<double(double x, double v)>;

/// Drift/reaction pair of the collision operator  C f = f'' + b f' + c f  (velocity derivatives).
struct CoefficientModel {
  std::string name;
  Field b;
  Field c;
  Field div_b;  // analytic d/dv b
  double gamma = 2.0;
  double b0 = 1.0;  // lower confinement constant: b0 |v|^gamma <= b.v
  double b1 = 1.0;  // upper confinement constant
  double R0 = 0.0;  // confinement onset radius
  std::map<double, double> k_star;  // p -> k*_p, p = +inf allowed
  int dim = 1;

  /// k*_p; falls back to the nearest registered exponent from above.
  double k_star_p(double p) const {
    auto it = k_star.lower_bound(p);
    if (it == k_star.end()) throw ConfigError("model " + name + ": no k*_p registered for p >= " + std::to_string(p));
    return it->second;
  }
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// b = v, c = d: the harmonic Fokker-Planck operator  f'' + (v f)'.
inline CoefficientModel harmonic_model(int d = 1) {
  CoefficientModel m;
  m.name = "harmonic";
  m.dim = d;
  const double dd = d;
  m.b = [](double, double v) { return v; };
  m.c = [dd](double, double) { return dd; };
  m.div_b = [dd](double, double) { return dd; };
  m.gamma = 2.0;
  m.b0 = m.b1 = 1.0;
  m.R0 = 0.0;
  // c - div_b / p = d (1 - 1/p) and b.v/|v|^2 = 1
  m.k_star = {{1.0, 0.0}, {2.0, 0.5 * dd}, {kInf, dd}};
  return m;
}

enum class ReactionMode { Conservative, Constant };

/// Power family b = amp v <v>^(gamma-2), with c = div_b (conservative) or a constant c0.
inline CoefficientModel power_model(double gamma, double amp, ReactionMode mode = ReactionMode::Conservative,
                                    double c0 = 0.0) {
  if (!(gamma > 1.0)) throw ConfigError("power model: gamma must exceed 1");
  if (!(amp > 0.0)) throw ConfigError("power model: b0 must be positive");
  CoefficientModel m;
  m.name = "power";
  m.gamma = gamma;
  m.R0 = 1.0;
  m.b = [=](double, double v) { return amp * v * std::pow(japanese(v), gamma - 2.0); };
  m.div_b = [=](double, double v) {
    const double jv = japanese(v);
    return amp * (std::pow(jv, gamma - 2.0) + (gamma - 2.0) * v * v * std::pow(jv, gamma - 4.0));
  };
  // b.v / |v|^gamma = amp (|v|/<v>)^(2-gamma), monotone in |v|, ranging over [R0, inf)
  const double edge = std::pow(1.0 / std::sqrt(2.0), 2.0 - gamma);
  m.b0 = amp * std::min(1.0, edge);
  m.b1 = amp * std::max(1.0, edge);

  // div_b / (b.v/|v|^2) = 1 + (gamma-2) v^2/<v>^2; its sup over |v| >= 1:
  const double ratio_sup = gamma >= 2.0 ? gamma - 1.0 : gamma / 2.0;
  if (mode == ReactionMode::Conservative) {
    m.c = m.div_b;
    for (double p : {1.0, 2.0, kInf}) m.k_star[p] = (1.0 - 1.0 / p) * ratio_sup;
  } else {
    if (c0 > 0.0 && gamma < 2.0)
      throw ConfigError("power model: constant c > 0 is not O(b.v/|v|^2) when gamma < 2");
    m.c = [c0](double, double) { return c0; };
    // (c0 - div_b/p) / (amp <v>^(gamma-2)) <= c0/amp  (gamma >= 2, |v| >= 1),
    // and div_b >= 0 only helps.
    const double base = std::max(0.0, c0 / amp);
    for (double p : {1.0, 2.0, kInf}) m.k_star[p] = base;
  }
  return m;
}

struct ConfinementReport {
  bool ok = true;
  double lower_slack = kInf;     // min of b.v - b0 |v|^gamma
  double upper_slack = kInf;     // min of b1 |v|^gamma - b.v
  double reaction_slack = kInf;  // min of k*_p b.v/|v|^2 - (c - div_b/p)
  std::size_t worst_node = 0;
  std::string message;
};

/// Checks both confinement inequalities at every node with |v| > R0.
inline ConfinementReport check_confinement(const CoefficientModel& m, const PhaseGrid& g, double p) {
  ConfinementReport r;
  const double kp = m.k_star_p(p);
  double worst = kInf;
  for (std::size_t i = 0; i < g.Nx; ++i) {
    for (std::size_t j = 0; j < g.Nv; ++j) {
      const double x = g.x_nodes[i], v = g.v_nodes[j];
      const double av = std::abs(v);
      if (!(av > m.R0)) continue;
      const double bv = m.b(x, v) * v;
      const double pw = std::pow(av, m.gamma);
      const double scale = std::max({1.0, std::abs(bv), m.b1 * pw});
      const double lo = (bv - m.b0 * pw) / scale;
      const double hi = (m.b1 * pw - bv) / scale;
      const double lhs = m.c(x, v) - m.div_b(x, v) / p;
      const double rhs = kp * bv / (v * v);
      const double re = (rhs - lhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
      r.lower_slack = std::min(r.lower_slack, lo);
      r.upper_slack = std::min(r.upper_slack, hi);
      r.reaction_slack = std::min(r.reaction_slack, re);
      const double w = std::min({lo, hi, re});
      if (w < worst) {
        worst = w;
        r.worst_node = g.index(i, j);
      }
    }
  }
  constexpr double tol = 1e-12;
  r.ok = worst >= -tol;
  if (!r.ok) {
    std::ostringstream os;
    os << "confinement violated at node " << r.worst_node << " (x=" << g.x_nodes[g.x_index(r.worst_node)]
       << ", v=" << g.v_nodes[g.v_index(r.worst_node)] << "), relative slack " << worst;
    r.message = os.str();
  }
  return r;
}

struct WallCoefficients {
  double iota_s = 0.0;
  double iota_d = 1.0;
  double theta = 1.0;
  double iota() const { return iota_s + iota_d; }
};

struct BoundaryModel {
  WallCoefficients wall[2];
  double theta_lower = 0.0;  // Theta_*
  double theta_upper = 0.0;  // Theta^*

  const WallCoefficients& at(Wall w) const { return wall[static_cast<int>(w)]; }

  /// Linear interpolation of the wall temperature into the slab.
  double theta_at(double x, double L) const {
    const double s = x / L;
    return (1.0 - s) * wall[0].theta + s * wall[1].theta;
  }
};

inline BoundaryModel make_boundary(WallCoefficients left, WallCoefficients right) {
  for (const auto* w : {&left, &right}) {
    if (w->iota_s < 0.0 || w->iota_s > 1.0 || w->iota_d < 0.0 || w->iota_d > 1.0)
      throw ConfigError("boundary: accommodation coefficients must lie in [0,1]");
    if (w->iota() > 1.0 + 1e-15)
      throw ConfigError("boundary: iota_S + iota_D <= 1 violated (mass would be added at the wall)");
    if (!(w->theta > 0.0) || !std::isfinite(w->theta))
      throw ConfigError("boundary: 0 < Theta_* <= Theta <= Theta^* < inf violated");
  }
  BoundaryModel b;
  b.wall[0] = left;
  b.wall[1] = right;
  b.theta_lower = std::min(left.theta, right.theta);
  b.theta_upper = std::max(left.theta, right.theta);
  return b;
}

inline BoundaryModel uniform_boundary(double iota_s, double iota_d, double theta = 1.0) {
  return make_boundary({iota_s, iota_d, theta}, {iota_s, iota_d, theta});
}

/// Raw wall Maxwellian (2 pi Theta)^(-(d-1)/2) exp(-|v|^2 / (2 Theta)).
inline double maxwellian_raw(double theta, double v, int d = 1) {
  return std::pow(2.0 * std::numbers::pi * theta, -0.5 * (d - 1)) * std::exp(-v * v / (2.0 * theta));
}

struct WallMaxwellian {
  double theta = 1.0;
  double renormalization = 1.0;  // raw half-flux; values = raw / renormalization
  std::vector<double> values;    // on v_nodes
};

/// Wall Maxwellian rescaled so its discrete outgoing half-flux sum_{v>0} M v dv is 1.
inline WallMaxwellian wall_maxwellian(double theta, const PhaseGrid& g, int d = 1) {
  if (!(theta > 0.0)) throw ConfigError("wall_maxwellian: temperature must be positive");
  WallMaxwellian m;
  m.theta = theta;
  m.values.resize(g.Nv);
  double flux = 0.0;
  for (std::size_t j = 0; j < g.Nv; ++j) {
    m.values[j] = maxwellian_raw(theta, g.v_nodes[j], d);
    if (g.v_nodes[j] > 0.0) flux += m.values[j] * g.v_nodes[j] * g.dv;
  }
  m.renormalization = flux;
  for (double& x : m.values) x /= flux;
  return m;
}

}  // namespace kfp
