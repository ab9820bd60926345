#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "kfp/phase_grid.hpp"

using namespace kfp;

TEST(PhaseGrid, TwoByTwo) {
  const PhaseGrid g = make_grid(1.0, 1.0, 2, 2);
  EXPECT_EQ(g.v_nodes[0], -0.5);
  EXPECT_EQ(g.v_nodes[1], 0.5);
  EXPECT_EQ(g.mirror[0], 1u);
  EXPECT_EQ(g.mirror[1], 0u);
  EXPECT_DOUBLE_EQ(g.x_nodes[0], 0.25);
  EXPECT_DOUBLE_EQ(g.x_nodes[1], 0.75);
}

TEST(PhaseGrid, Spacing) {
  const PhaseGrid g = make_grid(2.0, 6.0, 32, 64);
  EXPECT_DOUBLE_EQ(g.dx, 0.0625);
  EXPECT_DOUBLE_EQ(g.dv, 0.1875);
  EXPECT_DOUBLE_EQ(g.cell_volume, 0.0625 * 0.1875);
  EXPECT_EQ(g.size(), 32u * 64u);
}

TEST(PhaseGrid, MirrorIsExactInvolution) {
  for (std::size_t nv : {2u, 6u, 64u, 130u}) {
    const PhaseGrid g = make_grid(1.0, 3.7, 5, nv);
    for (std::size_t j = 0; j < nv; ++j) {
      EXPECT_EQ(g.mirror[g.mirror[j]], j);
      EXPECT_EQ(g.v_nodes[j] + g.v_nodes[g.mirror[j]], 0.0);
    }
  }
}

TEST(PhaseGrid, IndexRoundTrip) {
  const PhaseGrid g = make_grid(1.0, 2.0, 7, 10);
  for (std::size_t i = 0; i < g.Nx; ++i)
    for (std::size_t j = 0; j < g.Nv; ++j) {
      const std::size_t k = g.index(i, j);
      EXPECT_EQ(g.x_index(k), i);
      EXPECT_EQ(g.v_index(k), j);
    }
}

TEST(PhaseGrid, DistanceToWalls) {
  const PhaseGrid g = make_grid(1.5, 2.0, 9, 4);
  for (std::size_t i = 0; i < g.Nx; ++i)
    EXPECT_DOUBLE_EQ(g.distance(i), std::min(std::abs(g.x_nodes[i] - 0.0), std::abs(g.x_nodes[i] - g.L)));
}

TEST(PhaseGrid, IncomingOutgoing) {
  const PhaseGrid g = make_grid(1.0, 1.0, 4, 4);
  for (std::size_t j : g.incoming(Wall::Left)) EXPECT_GT(g.v_nodes[j], 0.0);
  for (std::size_t j : g.outgoing(Wall::Left)) EXPECT_LT(g.v_nodes[j], 0.0);
  for (std::size_t j : g.incoming(Wall::Right)) EXPECT_LT(g.v_nodes[j], 0.0);
  EXPECT_EQ(g.incoming(Wall::Right).size(), 2u);
}

TEST(PhaseGrid, RejectsBadShapes) {
  EXPECT_THROW(make_grid(1.0, 1.0, 4, 3), ConfigError);
  EXPECT_THROW(make_grid(0.0, 1.0, 4, 4), ConfigError);
  EXPECT_THROW(make_grid(1.0, 1.0, 1, 4), ConfigError);
}

TEST(CoreRegion, EmptyWhenEpsExceedsHalfWidth) {
  const PhaseGrid g = make_grid(1.0, 1.0, 16, 8);
  EXPECT_TRUE(core_region(g, 0.6).empty());
}

TEST(CoreRegion, VelocityConstraintInactive) {
  const PhaseGrid g = make_grid(1.0, 1.0, 16, 8);
  const CoreRegion r = core_region(g, 0.25);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double x = g.x_nodes[g.x_index(k)];
    EXPECT_EQ(r.contains(k), x > 0.25 && x < 0.75) << k;
  }
  EXPECT_EQ(r.nodes.size(), 8u * 8u);
}

TEST(CoreRegion, Nesting) {
  const PhaseGrid g = make_grid(1.0, 12.0, 20, 48);
  const double ladder[] = {0.45, 0.3, 0.25, 0.2, 0.1, 0.05};
  for (std::size_t a = 0; a + 1 < std::size(ladder); ++a) {
    const CoreRegion big = core_region(g, ladder[a + 1]);
    const CoreRegion small = core_region(g, ladder[a]);
    for (std::size_t k : small.nodes) EXPECT_TRUE(big.contains(k));
    EXPECT_LE(small.nodes.size(), big.nodes.size());
  }
  // the velocity bound bites once 1/eps < V
  const CoreRegion r = core_region(g, 0.1);
  for (std::size_t k : r.nodes) EXPECT_LT(std::abs(g.v_nodes[g.v_index(k)]), 10.0);
}
