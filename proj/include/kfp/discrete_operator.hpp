#pragma once

// Discrete generator L_h = transport + velocity diffusion + drift + reaction, with the
// Maxwell reflection folded into the wall numerical fluxes, and its quadrature adjoint.

#include <Eigen/SparseCore>

#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kfp/error.hpp"
#include "kfp/kinetic_model.hpp"
#include "kfp/phase_grid.hpp"

namespace kfp {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

enum class AssemblyForm { Advective, Flux };

inline std::string to_string(AssemblyForm f) { return f == AssemblyForm::Flux ? "flux" : "advective"; }

struct WallReflection {
  double iota_s = 0.0;
  double iota_d = 0.0;
  std::vector<double> maxwellian;  // renormalized wall Maxwellian on v_nodes
  std::vector<std::size_t> incoming;
  std::vector<std::size_t> outgoing;
};

/// gamma_- f = iota_S S gamma_+ f + iota_D M (tilde gamma_+ f), one entry per wall.
struct ReflectionOperator {
  PhaseGrid grid;
  WallReflection wall[2];

  const WallReflection& at(Wall w) const { return wall[static_cast<int>(w)]; }
};

inline ReflectionOperator make_reflection(const PhaseGrid& g, const BoundaryModel& bd, int d = 1) {
  ReflectionOperator R;
  R.grid = g;
  for (Wall w : kWalls) {
    auto& r = R.wall[static_cast<int>(w)];
    const auto& wc = bd.at(w);
    r.iota_s = wc.iota_s;
    r.iota_d = wc.iota_d;
    r.maxwellian = wall_maxwellian(wc.theta, g, d).values;
    r.incoming = g.incoming(w);
    r.outgoing = g.outgoing(w);
  }
  return R;
}

/// Outgoing flux moment  sum_{out} g(v) |n.v| dv.
inline double outgoing_moment(const ReflectionOperator& R, Wall w, const std::vector<double>& trace) {
  const auto& g = R.grid;
  double s = 0.0;
  for (std::size_t j : R.at(w).outgoing) s += trace[j] * std::abs(g.v_nodes[j]) * g.dv;
  return s;
}

/// Maps an outgoing trace (values on v_nodes, zero on incoming indices) to the incoming trace.
inline std::vector<double> apply_reflection(const ReflectionOperator& R, Wall w, const std::vector<double>& outgoing) {
  const auto& g = R.grid;
  const auto& r = R.at(w);
  if (outgoing.size() != g.Nv) throw ConfigError("apply_reflection: trace size must equal Nv");
  for (std::size_t j : r.incoming)
    if (outgoing[j] != 0.0) throw ConfigError("apply_reflection: outgoing trace has support on incoming velocities");
  const double moment = outgoing_moment(R, w, outgoing);
  std::vector<double> in(g.Nv, 0.0);
  for (std::size_t j : r.incoming) in[j] = r.iota_s * outgoing[g.mirror[j]] + r.iota_d * r.maxwellian[j] * moment;
  return in;
}

/// One wall-closure coupling: incoming node `row` receives `value * f[col]` in L_h.
struct ClosureEntry {
  Wall wall;
  std::size_t row;
  std::size_t col;
  double value;
  bool specular;
};

struct GeneratorMatrix {
  SparseMatrix L;
  double cell_volume = 1.0;
  AssemblyForm form = AssemblyForm::Flux;
  bool dual = false;
  std::optional<PhaseGrid> grid;
  std::vector<ClosureEntry> closure;
  // Per wall: row vector r with r.f = outgoing mass flux sum |n.v| gamma_+ f dv.
  std::optional<Vector> outflux[2];
  double iota[2] = {1.0, 1.0};
  std::optional<Vector> reaction;  // c - div_b per node (flux form)
  double explicit_dt_bound = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(L.rows()); }

  /// Wraps an arbitrary generator (e.g. a toy matrix) for the spectral routines.
  static GeneratorMatrix from_matrix(SparseMatrix m, double cell_volume) {
    GeneratorMatrix G;
    G.L = std::move(m);
    G.L.makeCompressed();
    G.cell_volume = cell_volume;
    G.explicit_dt_bound = compute_dt_bound(G.L);
    return G;
  }

  static double compute_dt_bound(const SparseMatrix& L) {
    double dmax = 0.0;
    for (int k = 0; k < L.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(L, k); it; ++it)
        if (it.row() == it.col()) dmax = std::max(dmax, std::abs(it.value()));
    return dmax > 0.0 ? 1.0 / dmax : kInf;
  }
};

/// Minimum off-diagonal entry (>= 0 for a Metzler matrix) and where it occurs.
struct MetzlerReport {
  double min_offdiag = 0.0;
  std::size_t row = 0, col = 0;
  bool ok() const { return min_offdiag >= 0.0; }
};

inline MetzlerReport metzler_check(const SparseMatrix& L) {
  MetzlerReport r;
  for (int k = 0; k < L.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(L, k); it; ++it)
      if (it.row() != it.col() && it.value() < r.min_offdiag) {
        r.min_offdiag = it.value();
        r.row = static_cast<std::size_t>(it.row());
        r.col = static_cast<std::size_t>(it.col());
      }
  return r;
}

/// First-order upwind transport in x, centered diffusion and upwind drift in v, zero-flux at
/// |v| = V, reflection entering through the incoming wall fluxes.
inline GeneratorMatrix assemble(const PhaseGrid& g, const CoefficientModel& m, const BoundaryModel& bd,
                                AssemblyForm form = AssemblyForm::Flux) {
  if (!(g.V > m.R0)) throw ConfigError("assemble: velocity truncation V must exceed the confinement radius R0");
  const std::size_t Nx = g.Nx, Nv = g.Nv, N = g.size();
  const double dx = g.dx, dv = g.dv;
  const ReflectionOperator R = make_reflection(g, bd, m.dim);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(N * 8 + 4 * Nv * Nv);
  GeneratorMatrix G;
  G.cell_volume = g.cell_volume;
  G.form = form;
  G.grid = g;
  Vector reaction = Vector::Zero(static_cast<Eigen::Index>(N));

  auto add = [&](std::size_t r, std::size_t c, double v) {
    if (v != 0.0) trip.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
  };

  // transport -v d_x f
  for (std::size_t i = 0; i < Nx; ++i) {
    for (std::size_t j = 0; j < Nv; ++j) {
      const double v = g.v_nodes[j];
      const std::size_t k = g.index(i, j);
      const double a = std::abs(v) / dx;
      add(k, k, -a);
      if (v > 0.0 && i > 0) add(k, g.index(i - 1, j), a);
      if (v < 0.0 && i + 1 < Nx) add(k, g.index(i + 1, j), a);
    }
  }
  // wall closure: incoming flux |v_j| f_in(j) with f_in = R(outgoing trace)
  for (Wall w : kWalls) {
    const auto& r = R.at(w);
    const std::size_t i = g.wall_cell(w);
    Vector out = Vector::Zero(static_cast<Eigen::Index>(N));
    for (std::size_t jo : r.outgoing) out[static_cast<Eigen::Index>(g.index(i, jo))] = std::abs(g.v_nodes[jo]) * dv;
    G.outflux[static_cast<int>(w)] = out;
    G.iota[static_cast<int>(w)] = r.iota_s + r.iota_d;
    for (std::size_t j : r.incoming) {
      const std::size_t row = g.index(i, j);
      const double a = std::abs(g.v_nodes[j]) / dx;
      if (r.iota_s != 0.0) {
        const std::size_t col = g.index(i, g.mirror[j]);
        add(row, col, a * r.iota_s);
        G.closure.push_back({w, row, col, a * r.iota_s, true});
      }
      if (r.iota_d != 0.0) {
        for (std::size_t jo : r.outgoing) {
          const std::size_t col = g.index(i, jo);
          const double val = a * r.iota_d * r.maxwellian[j] * std::abs(g.v_nodes[jo]) * dv;
          add(row, col, val);
          G.closure.push_back({w, row, col, val, false});
        }
      }
    }
  }

  // collision operator in v
  const double idv2 = 1.0 / (dv * dv);
  for (std::size_t i = 0; i < Nx; ++i) {
    const double x = g.x_nodes[i];
    for (std::size_t j = 0; j < Nv; ++j) {
      const std::size_t k = g.index(i, j);
      const double v = g.v_nodes[j];
      if (form == AssemblyForm::Flux) {
        // (F_{j+1/2} - F_{j-1/2}) / dv,  F = f' + b f  with upwind b f, F = 0 at |v| = V
        if (j + 1 < Nv) {
          const double bf = m.b(x, 0.5 * (v + g.v_nodes[j + 1]));
          const double bp = std::max(bf, 0.0), bm = std::min(bf, 0.0);
          add(k, g.index(i, j + 1), idv2 + bp / dv);
          add(k, k, -idv2 + bm / dv);
        }
        if (j > 0) {
          const double bf = m.b(x, 0.5 * (v + g.v_nodes[j - 1]));
          const double bp = std::max(bf, 0.0), bm = std::min(bf, 0.0);
          add(k, k, -idv2 - bp / dv);
          add(k, g.index(i, j - 1), idv2 - bm / dv);
        }
        const double r = m.c(x, v) - m.div_b(x, v);
        reaction[static_cast<Eigen::Index>(k)] = r;
        add(k, k, r);
      } else {
        // f'' with Neumann ghosts, b f' upwind, + c f
        if (j + 1 < Nv) {
          add(k, g.index(i, j + 1), idv2);
          add(k, k, -idv2);
        }
        if (j > 0) {
          add(k, g.index(i, j - 1), idv2);
          add(k, k, -idv2);
        }
        const double b = m.b(x, v);
        if (b > 0.0 && j + 1 < Nv) {
          add(k, g.index(i, j + 1), b / dv);
          add(k, k, -b / dv);
        } else if (b < 0.0 && j > 0) {
          add(k, k, b / dv);
          add(k, g.index(i, j - 1), -b / dv);
        }
        add(k, k, m.c(x, v));
      }
    }
  }

  G.L.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  G.L.setFromTriplets(trip.begin(), trip.end());
  G.L.makeCompressed();
  if (form == AssemblyForm::Flux) G.reaction = reaction;
  G.explicit_dt_bound = GeneratorMatrix::compute_dt_bound(G.L);

  const MetzlerReport mr = metzler_check(G.L);
  if (!mr.ok()) {
    std::ostringstream os;
    os << "assemble: negative off-diagonal entry " << mr.min_offdiag << " at node " << mr.row << " (x="
       << g.x_nodes[g.x_index(mr.row)] << ", v=" << g.v_nodes[g.v_index(mr.row)]
       << "); refine dv or switch to the flux form";
    throw NumericalError(os.str());
  }
  return G;
}

/// D^-1 L^T D with D = cell_volume I: the adjoint for <f,g>_h = sum f g cell_volume.
inline GeneratorMatrix dual_generator(const GeneratorMatrix& G) {
  GeneratorMatrix D = G;
  D.L = SparseMatrix(G.L.transpose());
  D.L.makeCompressed();
  D.dual = !G.dual;
  D.closure.clear();
  for (const auto& c : G.closure) D.closure.push_back({c.wall, c.col, c.row, c.value, c.specular});
  D.explicit_dt_bound = GeneratorMatrix::compute_dt_bound(D.L);
  return D;
}

/// <f, g>_h
inline double inner(const Vector& f, const Vector& g, double cell_volume) { return f.dot(g) * cell_volume; }

/// Coordinate-format text dump: one "row col value" line per stored entry.
inline void write_matrix_coo(std::ostream& os, const SparseMatrix& L) {
  os.precision(17);
  os << "% " << L.rows() << " " << L.cols() << " " << L.nonZeros() << "\n";
  for (int k = 0; k < L.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(L, k); it; ++it) os << it.row() << " " << it.col() << " " << it.value() << "\n";
}

}  // namespace kfp
