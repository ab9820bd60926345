#pragma once

// Weighted quadrature norms, the [f]_psi bracket, the wall budget K0/K1/K2 with the
// choice of the matching radius A, and the interpolation constants (xi_eps, Xi_eps).

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "kfp/discrete_operator.hpp"
#include "kfp/error.hpp"
#include "kfp/phase_grid.hpp"
#include "kfp/weights.hpp"

namespace kfp {

/// (sum |f w|^p cell_volume)^(1/p); p = inf gives max |f w|. Empty weight means w = 1.
inline double weighted_norm(const Vector& f, const std::vector<double>& w, double p, double cell_volume) {
  if (!(p >= 1.0)) throw ConfigError("weighted_norm: exponent p must be >= 1");
  const bool flat = w.empty();
  if (std::isinf(p)) {
    double m = 0.0;
    for (Eigen::Index k = 0; k < f.size(); ++k) m = std::max(m, std::abs(f[k]) * (flat ? 1.0 : w[k]));
    return m;
  }
  double s = 0.0;
  for (Eigen::Index k = 0; k < f.size(); ++k) {
    const double a = std::abs(f[k]) * (flat ? 1.0 : w[k]);
    s += p == 1.0 ? a : std::pow(a, p);
  }
  s *= cell_volume;
  return p == 1.0 ? s : std::pow(s, 1.0 / p);
}

/// Weight values on every node of the grid.
inline std::vector<double> weight_values(const WeightSpec& w, const PhaseGrid& g) {
  std::vector<double> out(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) out[k] = eval_weight(w, g.v_nodes[g.v_index(k)]);
  return out;
}

inline double weighted_norm(const Vector& f, const WeightSpec& w, double p, const PhaseGrid& g) {
  return weighted_norm(f, weight_values(w, g), p, g.cell_volume);
}

/// [f]_psi = <psi, |f|>_h.
inline double bracket(const Vector& f, const Vector& psi, double cell_volume) {
  if (psi.size() != f.size()) throw ConfigError("bracket: size mismatch");
  if (psi.minCoeff() < 0.0) throw ConfigError("bracket: psi must be nonnegative");
  return psi.dot(f.cwiseAbs()) * cell_volume;
}

inline Vector indicator(const CoreRegion& core) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(core.mask.size()));
  for (std::size_t k : core.nodes) v[static_cast<Eigen::Index>(k)] = 1.0;
  return v;
}

enum class TraceMeasure { Plain, Xi1, Xi2 };

/// Wall trace norm with measure dv, dxi1 = |n.v| dv or dxi2 = (n.v^)^2 dv over the given
/// velocity indices of the wall cell.
inline double trace_norm(const Vector& f, const PhaseGrid& g, Wall w, const std::vector<std::size_t>& idx, double p,
                         TraceMeasure mu) {
  const std::size_t i = g.wall_cell(w);
  double s = 0.0;
  for (std::size_t j : idx) {
    const double v = g.v_nodes[j];
    double dm = g.dv;
    if (mu == TraceMeasure::Xi1) dm *= std::abs(v);
    if (mu == TraceMeasure::Xi2) dm *= (v / japanese(v)) * (v / japanese(v));
    s += std::pow(std::abs(f[static_cast<Eigen::Index>(g.index(i, j))]), p) * dm;
  }
  return std::pow(s, 1.0 / p);
}

struct WallBudget {
  Wall wall = Wall::Left;
  double K0 = 0.0, K1 = 0.0, K2 = 0.0;
  double margin() const { return K1 - K2 - K0; }
};

struct BoundaryBudget {
  double p = 1.0;
  double A = 1.0;
  WallBudget walls[2];
  bool saturated = false;  // chi_A == 1 on the whole velocity grid
  std::vector<double> ladder_A;
  std::vector<double> ladder_margin;  // max over walls, per rung

  double max_margin() const { return std::max(walls[0].margin(), walls[1].margin()); }
};

/// K1 = sum M^p w_A^p (n.v)_-,  K2 = 1 (p = 1) or 1/sum w_A^-2 (n.v)_+ (p = 2),
/// K0 = 1/2 sum M (n.v^)_+^2 w_A (p = 1) or 1/(2 sum_{out} <v>^2 w_A^-2) (p = 2).
inline BoundaryBudget boundary_budget(const WeightSpec& spec, double p, const BoundaryModel& bd, const PhaseGrid& g,
                                      double A, int d = 1) {
  if (p != 1.0 && p != 2.0) throw ConfigError("boundary_budget: p must be 1 or 2");
  BoundaryBudget bb;
  bb.p = p;
  bb.A = A;
  bb.saturated = chi_R(g.v_nodes.back(), A) == 1.0;
  for (Wall w : kWalls) {
    const auto& wc = bd.at(w);
    const WallMaxwellian M = wall_maxwellian(wc.theta, g, d);
    const double n = outward_normal(w);
    WallBudget& wb = bb.walls[static_cast<int>(w)];
    wb.wall = w;
    double k1 = 0.0, k2inv = 0.0, k0 = 0.0;
    for (std::size_t j = 0; j < g.Nv; ++j) {
      const double v = g.v_nodes[j];
      const double nv = n * v;
      const double ch = chi_R(v, A);
      const double wv = eval_weight(spec, v);
      const double wap = std::pow(M.values[j], 1.0 - p) * ch + std::pow(wv, p) * (1.0 - ch);  // w_A^p
      const double vhat = nv / japanese(v);
      if (nv < 0.0) k1 += std::pow(M.values[j], p) * wap * (-nv) * g.dv;
      if (nv > 0.0) {
        if (p == 1.0) {
          k0 += 0.5 * M.values[j] * vhat * vhat * wap * g.dv;
        } else {
          k2inv += nv / wap * g.dv;
          k0 += 2.0 * (1.0 + v * v) / wap * g.dv;  // K0^-1
        }
      }
    }
    wb.K1 = k1;
    if (p == 1.0) {
      wb.K2 = 1.0;
      wb.K0 = k0;
    } else {
      wb.K2 = 1.0 / k2inv;
      wb.K0 = 1.0 / k0;
    }
  }
  return bb;
}

/// Doubles A from 1 until K1 - K2 - K0 <= 0 at both walls.
inline BoundaryBudget find_A(const WeightSpec& spec, double p, const BoundaryModel& bd, const PhaseGrid& g, int d = 1) {
  std::vector<double> As, margins;
  for (double A = 1.0; A <= 2.0 * g.V; A *= 2.0) {
    BoundaryBudget bb = boundary_budget(spec, p, bd, g, A, d);
    As.push_back(A);
    margins.push_back(bb.max_margin());
    if (bb.max_margin() <= 0.0) {
      bb.ladder_A = As;
      bb.ladder_margin = margins;
      return bb;
    }
  }
  std::ostringstream os;
  os << "find_A: no A <= 2V = " << 2.0 * g.V << " gives K1 - K2 - K0 <= 0 for " << spec.describe() << ", p = " << p
     << "; enlarge the velocity truncation V";
  throw NumericalError(os.str());
}

struct InterpolationConstants {
  double eps = 0.0;
  double q = 1.0, p = 2.0;
  double theta = 0.0;  // 1/q = theta/p + 1 - theta
  double xi = 0.0;
  double Xi = 0.0;
  double tail = 0.0;  // || (w_q / w_p) 1_{O_eps^c} ||_{L^{r'q}}
  double core_sup_weight = 0.0;
};

/// xi_eps = eps^(1/theta) + ||(w_q/w_p) 1_{O^c}||_{L^{r'q}},  Xi_eps = eps^(1/(theta-1)) sup_{O_eps} w_q,
/// so that ||f||_{L^q_{w_q}} <= xi ||f||_{L^p_{w_p}} + Xi [f]_{1_{O_eps}}.
inline InterpolationConstants interpolation_constants(double eps, double q, double p, const WeightSpec& wq,
                                                      const WeightSpec& wp, const PhaseGrid& g) {
  if (!(p > q) || !(q >= 1.0)) throw ConfigError("interpolation_constants: need p > q >= 1");
  const CoreRegion core = core_region(g, eps);
  if (core.empty()) throw ConfigError("interpolation_constants: core region O_eps is empty, Xi_eps undefined");
  InterpolationConstants ic;
  ic.eps = eps;
  ic.q = q;
  ic.p = p;
  ic.theta = (1.0 - 1.0 / q) / (1.0 - 1.0 / p);
  const double r = p / q;
  const double rp = r / (r - 1.0);
  const double e = rp * q;
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double v = g.v_nodes[g.v_index(k)];
    const double ratio = eval_weight(wq, v) / eval_weight(wp, v);
    if (ratio > 1.0 + 1e-12) throw ConfigError("interpolation_constants: need w_p >= w_q");
    if (!core.contains(k)) s += std::pow(ratio, e) * g.cell_volume;
    else ic.core_sup_weight = std::max(ic.core_sup_weight, eval_weight(wq, v));
  }
  if (!std::isfinite(s)) throw NumericalError("interpolation_constants: w_q/w_p not integrable");
  ic.tail = std::pow(s, 1.0 / e);
  ic.xi = std::pow(eps, 1.0 / ic.theta) + ic.tail;
  ic.Xi = std::pow(eps, 1.0 / (ic.theta - 1.0)) * ic.core_sup_weight;
  return ic;
}

}  // namespace kfp
