#pragma once

// Admissible velocity weights, the confinement quantity varpi and its envelope,
// and the boundary-corrected (twisted) weights used in the boundary budget.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kfp/error.hpp"
#include "kfp/kinetic_model.hpp"
#include "kfp/phase_grid.hpp"

namespace kfp {

enum class WeightKind { Poly, Exp };

struct WeightSpec {
  WeightKind kind = WeightKind::Poly;
  double k = 0.0;     // Poly exponent
  double zeta = 0.0;  // Exp rate
  double s = 0.0;     // Exp power (0 for Poly)

  static WeightSpec poly(double k) { return {WeightKind::Poly, k, 0.0, 0.0}; }
  static WeightSpec exp(double zeta, double s) { return {WeightKind::Exp, 0.0, zeta, s}; }
  static WeightSpec flat() { return poly(0.0); }

  double power() const { return kind == WeightKind::Poly ? 0.0 : s; }
  /// varsigma = gamma + s - 2
  double varsigma(double gamma) const { return gamma + power() - 2.0; }

  std::string describe() const {
    std::ostringstream os;
    if (kind == WeightKind::Poly)
      os << "<v>^" << k;
    else
      os << "exp(" << zeta << " <v>^" << s << ")";
    return os.str();
  }
};

/// Value, first and second velocity derivatives of a weight at one velocity.
struct WeightJet {
  double value = 1.0;
  double grad = 0.0;
  double lap = 0.0;
};

inline WeightJet eval_jet(const WeightSpec& w, double v) {
  const double j2 = 1.0 + v * v;
  const double jv = std::sqrt(j2);
  if (w.kind == WeightKind::Poly) {
    const double k = w.k;
    const double val = std::pow(jv, k);
    // d/dv <v>^k = k v <v>^(k-2);  d2 = k <v>^(k-2) + k (k-2) v^2 <v>^(k-4)
    return {val, k * v * val / j2, (k + k * (k - 2.0) * v * v / j2) * val / j2};
  }
  const double s = w.s, z = w.zeta;
  const double val = std::exp(z * std::pow(jv, s));
  const double u1 = z * s * v * std::pow(jv, s - 2.0);
  const double u2 = z * s * (std::pow(jv, s - 2.0) + (s - 2.0) * v * v * std::pow(jv, s - 4.0));
  return {val, u1 * val, (u2 + u1 * u1) * val};
}

inline double eval_weight(const WeightSpec& w, double v) { return eval_jet(w, v).value; }
inline double eval_grad(const WeightSpec& w, double v) { return eval_jet(w, v).grad; }
inline double eval_laplacian(const WeightSpec& w, double v) { return eval_jet(w, v).lap; }

/// k_* of the polynomial family: max(k'_1, k*_inf), k'_1 = k_1 + d/2 + max(1, gamma/2 - 1),
/// k_1 = max(k*_1, d + 2).
inline double poly_threshold(const CoefficientModel& m) {
  const double d = m.dim;
  const double k1 = std::max(m.k_star_p(1.0), d + 2.0);
  const double k1p = k1 + d / 2.0 + std::max(1.0, m.gamma / 2.0 - 1.0);
  return std::max(k1p, m.k_star_p(kInf));
}

struct Admissibility {
  bool ok = true;
  std::string reason;  // names the violated condition
};

/// Parameter constraints on admissible weights for the active model and wall temperatures.
inline Admissibility check_admissible(const WeightSpec& w, const CoefficientModel& m, double theta_upper) {
  const double g = m.gamma;
  if (w.kind == WeightKind::Poly) {
    const double ks = poly_threshold(m);
    if (!(w.k > ks)) {
      std::ostringstream os;
      os << "polynomial weight requires k > k_* = max(k'_1, k*_inf) = " << ks << " (got k = " << w.k << ")";
      return {false, os.str()};
    }
    return {};
  }
  const double s = w.s, z = w.zeta;
  if (!(z > 0.0) || !(s > 0.0)) return {false, "exponential weight requires zeta > 0 and s > 0"};
  if (s < std::min(g, 2.0)) return {};
  if (s == g && g < 2.0) {
    if (z < m.b0 / 2.0) return {};
    return {false, "exponential weight with s = gamma < 2 requires zeta in (0, b0/2)"};
  }
  if (s == 2.0 && g == 2.0) {
    if (z < std::min(1.0 / theta_upper, m.b0) / 2.0) return {};
    return {false, "exponential weight with s = gamma = 2 requires zeta in (0, min(1/Theta^*, b0)/2)"};
  }
  if (s == 2.0 && g > 2.0) {
    if (z < 1.0 / (2.0 * theta_upper)) return {};
    return {false, "exponential weight with s = 2 < gamma requires zeta in (0, 1/(2 Theta^*))"};
  }
  return {false, "exponential weight requires s < min(gamma, 2), s = gamma < 2, or s = 2 <= gamma"};
}

/// Compatibility with the boundary: sup M w <v> in L1 n Linf and w^-1 <v> in L1 n L2.
/// The truncated grid cannot see tail divergence, so the check is analytic plus a grid
/// quadrature of the same integrands.
inline Admissibility check_boundary_compatibility(const WeightSpec& w, const PhaseGrid& g, double theta_upper) {
  if (w.kind == WeightKind::Poly) {
    // <v>^(1-k) in L1 n L2 (d = 1) needs k > 2
    if (!(w.k > 2.0)) return {false, "w^-1 <v> not integrable: polynomial weight needs k > d + 1"};
  } else {
    if (w.s > 2.0 || (w.s == 2.0 && !(w.zeta < 1.0 / (2.0 * theta_upper))))
      return {false, "M w <v> not integrable: need s < 2 or s = 2 with zeta < 1/(2 Theta^*)"};
  }
  double a = 0.0, b = 0.0;
  for (double v : g.v_nodes) {
    const double wv = eval_weight(w, v);
    a += maxwellian_raw(theta_upper, v) * wv * japanese(v) * g.dv;
    b += japanese(v) / wv * g.dv;
  }
  if (!std::isfinite(a) || !std::isfinite(b)) return {false, "boundary compatibility quadrature diverged"};
  return {};
}

/// varpi^C_{phi,p} = 2(1-1/p)|phi'|^2/phi^2 + (2/p-1) phi''/phi - b phi'/phi + c - div_b/p.
inline double varpi_jet(const WeightJet& jet, double p, double b, double c, double div_b) {
  const double a = jet.grad / jet.value;
  const double r = jet.lap / jet.value;
  const double ip = 1.0 / p;
  return 2.0 * (1.0 - ip) * a * a + (2.0 * ip - 1.0) * r - b * a + c - ip * div_b;
}

inline double varpi(const WeightSpec& w, double p, const CoefficientModel& m, double x, double v) {
  return varpi_jet(eval_jet(w, v), p, m.b(x, v), m.c(x, v), m.div_b(x, v));
}

/// Dual quantity varpi^{C*}_{m,q} for m = 1/w: C* g = g'' - b g' + (c - div_b) g.
/// Equals varpi^C_{w,p} when 1/p + 1/q = 1.
inline double varpi_dual(const WeightSpec& w, double q, const CoefficientModel& m, double x, double v) {
  const WeightJet jw = eval_jet(w, v);
  const double a = jw.grad / jw.value;
  const double r = jw.lap / jw.value;
  // m'/m = -a,  m''/m = 2a^2 - r
  const WeightJet jm{1.0, -a, 2.0 * a * a - r};
  const double bb = m.b(x, v), db = m.div_b(x, v);
  return varpi_jet(jm, q, -bb, m.c(x, v) - db, -db);
}

/// C^2 cutoff: 1 on [0,1], 0 on [2,inf), quintic smoothstep in between (t = r - 1).
inline double chi(double r) {
  if (r <= 1.0) return 1.0;
  if (r >= 2.0) return 0.0;
  const double t = r - 1.0;
  return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

inline double chi_R(double v, double R) { return chi(std::abs(v) / R); }

/// b0^sharp per weight family: (k - k*_p) b0, b0 s zeta, or b0 s zeta - (s zeta)^2 when s = gamma.
inline double b0_sharp(const WeightSpec& w, double p, const CoefficientModel& m) {
  if (w.kind == WeightKind::Poly) return (w.k - m.k_star_p(p)) * m.b0;
  const double sz = w.s * w.zeta;
  if (w.s == m.gamma) return m.b0 * sz - sz * sz;
  return m.b0 * sz;
}

struct ConfinementClass {
  double p = 1.0;
  double varsigma = 0.0;
  bool strongly_confining = false;
  double b0_sharp = 0.0;
  double theta_env = 0.5;  // vartheta
  double kappa_prime = 0.0;
  double R_prime = 0.0;
  std::vector<double> varpi_sup;    // sup over x, per velocity node
  std::vector<double> varpi_sharp;  // -b0^sharp <v>^varsigma
  double varpi_plus_max = 0.0;
  bool tail_decreasing = false;  // strongly confining tail check
};

/// Computes varpi on the grid, the asymptotic envelope and fitted (kappa', R') with
/// vartheta = 1/2 such that  sup_x varpi <= kappa' chi_R' + (1 - chi_R') vartheta varpi^sharp.
inline ConfinementClass classify(const WeightSpec& w, double p, const CoefficientModel& m, const PhaseGrid& g) {
  ConfinementClass cc;
  cc.p = p;
  cc.varsigma = w.varsigma(m.gamma);
  cc.strongly_confining = cc.varsigma > 0.0;
  cc.b0_sharp = b0_sharp(w, p, m);
  if (!(cc.b0_sharp > 0.0))
    throw ConfigError("classify: b0^sharp <= 0 for " + w.describe() + " (inadmissible parameters)");

  const std::size_t nv = g.Nv;
  cc.varpi_sup.assign(nv, -kInf);
  cc.varpi_sharp.resize(nv);
  for (std::size_t j = 0; j < nv; ++j) {
    const double v = g.v_nodes[j];
    for (std::size_t i = 0; i < g.Nx; ++i) cc.varpi_sup[j] = std::max(cc.varpi_sup[j], varpi(w, p, m, g.x_nodes[i], v));
    cc.varpi_sharp[j] = -cc.b0_sharp * std::pow(japanese(v), cc.varsigma);
    cc.varpi_plus_max = std::max(cc.varpi_plus_max, cc.varpi_sup[j]);
  }

  // Smallest R' on a dv/2 ladder whose saturated tail |v| >= 2R' is nonempty and obeys
  // varpi <= vartheta varpi^sharp; then the minimal kappa' for the transition region.
  const double vmax = g.v_nodes.back();
  const double step = 0.5 * g.dv;
  std::size_t worst = 0;
  double worst_gap = -kInf;
  for (double R = step; 2.0 * R < vmax; R += step) {
    bool ok = true;
    double kappa = 0.0;
    for (std::size_t j = 0; j < nv; ++j) {
      const double cr = chi_R(g.v_nodes[j], R);
      const double target = (1.0 - cr) * cc.theta_env * cc.varpi_sharp[j];
      if (cr == 0.0) {
        if (cc.varpi_sup[j] > target) {
          ok = false;
          if (cc.varpi_sup[j] - target > worst_gap) {
            worst_gap = cc.varpi_sup[j] - target;
            worst = j;
          }
          break;
        }
      } else {
        kappa = std::max(kappa, (cc.varpi_sup[j] - target) / cr);
      }
    }
    if (ok) {
      cc.R_prime = R;
      cc.kappa_prime = kappa;
      break;
    }
  }
  if (cc.R_prime == 0.0) {
    std::ostringstream os;
    os << "classify: envelope inequality unsatisfiable on the grid for " << w.describe() << ", worst node v = "
       << g.v_nodes[worst] << " (increase V or check weight parameters)";
    throw NumericalError(os.str());
  }

  // Outer quarter of the positive half: varpi negative and decreasing in |v|.
  const std::size_t half = nv / 2;
  const std::size_t start = nv - std::max<std::size_t>(2, half / 4);
  cc.tail_decreasing = cc.varpi_sup.back() < 0.0;
  for (std::size_t j = start + 1; j < nv; ++j)
    if (!(cc.varpi_sup[j] < cc.varpi_sup[j - 1])) cc.tail_decreasing = false;
  return cc;
}

/// Boundary-corrected weights at every node.
struct TwistedWeight {
  double p = 1.0;
  double A = 1.0;
  std::vector<double> chi;       // chi_A(v_j), per velocity node
  std::vector<double> omega;     // w, per node
  std::vector<double> omega_A;   // (omega_A^p)^(1/p), per node
  std::vector<double> omega_Ap;  // omega_A^p, per node
  std::vector<double> tilde_p;   // tilde omega^p, per node
  double c_A = 1.0;              // equivalence constant
  double factor_min = 1.0, factor_max = 1.0;
};

/// Renormalized Maxwellian at the local temperature Theta_x, per node.
inline std::vector<double> local_maxwellian(const PhaseGrid& g, const BoundaryModel& bd, int d = 1) {
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.Nx; ++i) {
    const WallMaxwellian M = wall_maxwellian(bd.theta_at(g.x_nodes[i], g.L), g, d);
    for (std::size_t j = 0; j < g.Nv; ++j) out[g.index(i, j)] = M.values[j];
  }
  return out;
}

/// omega_A^p = M^(1-p) chi_A + w^p (1 - chi_A);  tilde omega^p = (1 + n.v/(2<v>^4)) omega_A^p.
inline TwistedWeight twist(const WeightSpec& w, double p, double A, const BoundaryModel& bd, const PhaseGrid& g,
                           int d = 1) {
  if (!(A >= 1.0)) throw ConfigError("twist: A must be >= 1");
  TwistedWeight t;
  t.p = p;
  t.A = A;
  const auto M = local_maxwellian(g, bd, d);
  const std::size_t n = g.size();
  t.chi.resize(g.Nv);
  for (std::size_t j = 0; j < g.Nv; ++j) t.chi[j] = chi_R(g.v_nodes[j], A);
  t.omega.resize(n);
  t.omega_A.resize(n);
  t.omega_Ap.resize(n);
  t.tilde_p.resize(n);
  t.factor_min = kInf;
  t.factor_max = 0.0;
  double cA = 0.0;
  for (std::size_t i = 0; i < g.Nx; ++i) {
    const double nx = g.normal_extension(i);
    for (std::size_t j = 0; j < g.Nv; ++j) {
      const std::size_t k = g.index(i, j);
      const double v = g.v_nodes[j];
      const double wv = eval_weight(w, v);
      const double ch = t.chi[j];
      const double wap = std::pow(M[k], 1.0 - p) * ch + std::pow(wv, p) * (1.0 - ch);
      const double fac = 1.0 + 0.5 * nx * v / std::pow(japanese(v), 4);
      t.omega[k] = wv;
      t.omega_Ap[k] = wap;
      t.omega_A[k] = std::pow(wap, 1.0 / p);
      t.tilde_p[k] = fac * wap;
      t.factor_min = std::min(t.factor_min, fac);
      t.factor_max = std::max(t.factor_max, fac);
      cA = std::max({cA, 2.0 * wv / t.omega_A[k], 1.5 * t.omega_A[k] / wv});
    }
  }
  t.c_A = cA;
  return t;
}

struct DualTwistedWeight {
  double q = 1.0;
  double A = 1.0;
  double rescale = 1.0;      // m = rescale / w, chosen so that m >= M and m^q >= M
  std::vector<double> m;     // per node
  std::vector<double> m_A;   // (m_A^q)^(1/q)
  std::vector<double> m_Aq;  // m_A^q
  std::vector<double> tilde_q;
  double c_A = 1.0;
};

/// m_A^q = chi_A M + (1 - chi_A) m^q;  tilde m^q = (1 - n.v/(2<v>^4)) m_A^q, with m = c / w.
inline DualTwistedWeight dual_twist(const WeightSpec& w, double q, double A, const BoundaryModel& bd,
                                    const PhaseGrid& g, int d = 1) {
  if (!(A >= 1.0)) throw ConfigError("dual_twist: A must be >= 1");
  DualTwistedWeight t;
  t.q = q;
  t.A = A;
  const auto M = local_maxwellian(g, bd, d);
  const std::size_t n = g.size();
  double c = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double wv = eval_weight(w, g.v_nodes[g.v_index(k)]);
    c = std::max({c, M[k] * wv, std::pow(M[k], 1.0 / q) * wv});
  }
  t.rescale = c;
  t.m.resize(n);
  t.m_A.resize(n);
  t.m_Aq.resize(n);
  t.tilde_q.resize(n);
  double cA = 0.0;
  for (std::size_t i = 0; i < g.Nx; ++i) {
    const double nx = g.normal_extension(i);
    for (std::size_t j = 0; j < g.Nv; ++j) {
      const std::size_t k = g.index(i, j);
      const double v = g.v_nodes[j];
      const double mv = c / eval_weight(w, v);
      const double ch = chi_R(v, A);
      const double maq = ch * M[k] + (1.0 - ch) * std::pow(mv, q);
      t.m[k] = mv;
      t.m_Aq[k] = maq;
      t.m_A[k] = std::pow(maq, 1.0 / q);
      t.tilde_q[k] = (1.0 - 0.5 * nx * v / std::pow(japanese(v), 4)) * maq;
      cA = std::max(cA, 2.0 * mv / t.m_A[k]);
    }
  }
  t.c_A = cA;
  return t;
}

}  // namespace kfp
