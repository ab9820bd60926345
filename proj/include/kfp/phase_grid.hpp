#pragma once

// Phase space discretization of the slab (0, L) x (-V, V): uniform cell-centered
// nodes, the velocity mirror map and the wall geometry.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "kfp/error.hpp"

namespace kfp {

enum class Wall { Left = 0, Right = 1 };

inline constexpr Wall kWalls[2] = {Wall::Left, Wall::Right};

/// Outward normal of a wall of the slab.
inline constexpr double outward_normal(Wall w) { return w == Wall::Left ? -1.0 : 1.0; }

struct PhaseGrid {
  double L = 1.0;
  double V = 1.0;
  std::size_t Nx = 0;
  std::size_t Nv = 0;
  double dx = 0.0;
  double dv = 0.0;
  double cell_volume = 0.0;
  std::vector<double> x_nodes;
  std::vector<double> v_nodes;
  std::vector<std::size_t> mirror;  // v[mirror[j]] == -v[j], bit-exact

  std::size_t size() const { return Nx * Nv; }
  /// Flat index, x-major / v-minor.
  std::size_t index(std::size_t i, std::size_t j) const { return i * Nv + j; }
  std::size_t x_index(std::size_t k) const { return k / Nv; }
  std::size_t v_index(std::size_t k) const { return k % Nv; }

  /// delta(x) = dist(x, boundary).
  double distance(std::size_t i) const { return std::min(x_nodes[i], L - x_nodes[i]); }

  /// Interior extension n(x) = -delta'(x) of the outward normal; jumps at L/2.
  double normal_extension(std::size_t i) const {
    const double x = x_nodes[i];
    if (x < 0.5 * L) return -1.0;
    if (x > 0.5 * L) return 1.0;
    return 0.0;
  }

  /// Cell column adjacent to a wall.
  std::size_t wall_cell(Wall w) const { return w == Wall::Left ? 0 : Nx - 1; }

  /// Velocity indices entering the domain through wall w (v * n_w < 0).
  std::vector<std::size_t> incoming(Wall w) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < Nv; ++j)
      if (v_nodes[j] * outward_normal(w) < 0.0) out.push_back(j);
    return out;
  }

  /// Velocity indices leaving the domain through wall w (v * n_w > 0).
  std::vector<std::size_t> outgoing(Wall w) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < Nv; ++j)
      if (v_nodes[j] * outward_normal(w) > 0.0) out.push_back(j);
    return out;
  }
};

inline PhaseGrid make_grid(double L, double V, std::size_t Nx, std::size_t Nv) {
  if (!(L > 0.0) || !(V > 0.0)) throw ConfigError("grid: L and V must be positive");
  if (Nx < 2 || Nv < 2) throw ConfigError("grid: Nx and Nv must be at least 2");
  if (Nv % 2 != 0) throw ConfigError("grid: Nv must be even (no node at v = 0)");

  PhaseGrid g;
  g.L = L;
  g.V = V;
  g.Nx = Nx;
  g.Nv = Nv;
  g.dx = L / static_cast<double>(Nx);
  g.dv = 2.0 * V / static_cast<double>(Nv);
  g.cell_volume = g.dx * g.dv;

  g.x_nodes.resize(Nx);
  for (std::size_t i = 0; i < Nx; ++i) g.x_nodes[i] = (static_cast<double>(i) + 0.5) * g.dx;

  // Build the positive half and negate it, so the mirror pairs are exact.
  const std::size_t half = Nv / 2;
  g.v_nodes.resize(Nv);
  g.mirror.resize(Nv);
  for (std::size_t m = 0; m < half; ++m) {
    const double v = (static_cast<double>(m) + 0.5) * g.dv;
    g.v_nodes[half + m] = v;
    g.v_nodes[half - 1 - m] = -v;
  }
  for (std::size_t j = 0; j < Nv; ++j) g.mirror[j] = Nv - 1 - j;
  return g;
}

/// Core region O_eps: delta(x) > eps and |v| < 1/eps.
struct CoreRegion {
  double eps = 0.0;
  std::vector<std::size_t> nodes;  // ascending flat indices
  std::vector<char> mask;          // per flat index

  bool empty() const { return nodes.empty(); }
  bool contains(std::size_t k) const { return mask[k] != 0; }
};

inline CoreRegion core_region(const PhaseGrid& g, double eps) {
  if (!(eps > 0.0)) throw ConfigError("core_region: eps must be positive");
  CoreRegion r;
  r.eps = eps;
  r.mask.assign(g.size(), 0);
  const double vmax = 1.0 / eps;
  for (std::size_t i = 0; i < g.Nx; ++i) {
    if (!(g.distance(i) > eps)) continue;
    for (std::size_t j = 0; j < g.Nv; ++j) {
      if (std::abs(g.v_nodes[j]) < vmax) {
        const std::size_t k = g.index(i, j);
        r.mask[k] = 1;
        r.nodes.push_back(k);
      }
    }
  }
  return r;
}

}  // namespace kfp
