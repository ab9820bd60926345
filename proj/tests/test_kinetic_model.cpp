#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kfp/kinetic_model.hpp"

using namespace kfp;

TEST(Model, Harmonic) {
  const CoefficientModel m = harmonic_model();
  for (double v : {-3.0, -0.2, 0.7, 4.0}) {
    EXPECT_EQ(m.b(0.3, v), v);
    EXPECT_EQ(m.c(0.3, v), 1.0);
    EXPECT_EQ(m.div_b(0.3, v), 1.0);
    EXPECT_EQ(m.c(0.3, v) - m.div_b(0.3, v), 0.0);
  }
  EXPECT_EQ(m.gamma, 2.0);
  EXPECT_EQ(m.b0, 1.0);
  EXPECT_EQ(m.b1, 1.0);
  EXPECT_EQ(m.R0, 0.0);
}

TEST(Model, HarmonicConfinementTight) {
  const PhaseGrid g = make_grid(1.0, 5.0, 4, 20);
  const ConfinementReport r = check_confinement(harmonic_model(), g, 1.0);
  EXPECT_TRUE(r.ok);
  EXPECT_NEAR(r.lower_slack, 0.0, 1e-15);
  EXPECT_NEAR(r.upper_slack, 0.0, 1e-15);
}

TEST(Model, PowerGammaThree) {
  const CoefficientModel m = power_model(3.0, 1.0);
  EXPECT_DOUBLE_EQ(m.b1, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(m.b0, 1.0);
  // b.v = |v|^2 <v> sits between b0 |v|^3 and b1 |v|^3 for |v| >= 1
  for (double v = 1.0; v < 6.0; v += 0.25) {
    const double bv = m.b(0.0, v) * v;
    EXPECT_NEAR(bv, v * v * std::sqrt(1.0 + v * v), 1e-12 * bv);
    EXPECT_GE(bv, m.b0 * std::pow(v, 3) * (1 - 1e-14));
    EXPECT_LE(bv, m.b1 * std::pow(v, 3) * (1 + 1e-14));
  }
  const PhaseGrid g = make_grid(1.0, 6.0, 4, 48);
  for (double p : {1.0, 2.0, kInf}) EXPECT_TRUE(check_confinement(m, g, p).ok);
}

TEST(Model, PowerDivergenceMatchesDifference) {
  const CoefficientModel m = power_model(2.5, 1.3);
  const double h = 1e-5;
  for (double v : {-2.0, 0.1, 1.7}) {
    const double fd = (m.b(0, v + h) - m.b(0, v - h)) / (2 * h);
    EXPECT_NEAR(m.div_b(0, v), fd, 1e-8);
  }
}

TEST(Model, GrowingReactionViolatesConfinement) {
  CoefficientModel m = harmonic_model();
  m.c = [](double, double v) { return std::abs(v); };
  m.div_b = [](double, double) { return 0.0; };
  m.k_star = {{1.0, 0.0}, {2.0, 0.0}, {kInf, 0.0}};
  const PhaseGrid g = make_grid(1.0, 6.0, 4, 24);
  const ConfinementReport r = check_confinement(m, g, 1.0);
  EXPECT_FALSE(r.ok);
  EXPECT_FALSE(r.message.empty());
  EXPECT_GT(std::abs(g.v_nodes[g.v_index(r.worst_node)]), 1.0);
}

TEST(Model, PowerRejectsConstantReactionBelowTwo) {
  EXPECT_THROW(power_model(1.5, 1.0, ReactionMode::Constant, 0.5), ConfigError);
  EXPECT_THROW(power_model(1.0, 1.0), ConfigError);
}

TEST(Boundary, AccommodationSum) {
  EXPECT_THROW(uniform_boundary(0.7, 0.5), ConfigError);
  EXPECT_THROW(uniform_boundary(-0.1, 0.5), ConfigError);
  EXPECT_THROW(uniform_boundary(0.5, 0.5, 0.0), ConfigError);
  const BoundaryModel b = make_boundary({0.2, 0.3, 0.5}, {0.0, 1.0, 2.0});
  EXPECT_EQ(b.theta_lower, 0.5);
  EXPECT_EQ(b.theta_upper, 2.0);
  EXPECT_DOUBLE_EQ(b.theta_at(0.5, 1.0), 1.25);
}

TEST(Maxwellian, RawValues) {
  EXPECT_EQ(maxwellian_raw(1.0, 0.0), 1.0);
  EXPECT_NEAR(maxwellian_raw(0.5, 1.0), std::exp(-1.0), 1e-16);
  EXPECT_NEAR(maxwellian_raw(1.0, 1.0, 3), std::exp(-0.5) / (2 * std::numbers::pi), 1e-16);
  EXPECT_THROW(wall_maxwellian(0.0, make_grid(1, 1, 2, 2)), ConfigError);
}

TEST(Maxwellian, DiscreteHalfFluxIsOne) {
  for (double theta : {0.5, 1.0, 2.0}) {
    const PhaseGrid g = make_grid(1.0, 6.0, 2, 40);
    const WallMaxwellian M = wall_maxwellian(theta, g);
    for (Wall w : kWalls) {
      double s = 0.0;
      for (std::size_t j : g.outgoing(w)) s += M.values[j] * std::abs(g.v_nodes[j]) * g.dv;
      EXPECT_NEAR(s, 1.0, 1e-14);
    }
  }
}

TEST(Maxwellian, RenormalizationTendsToOne) {
  // raw half-flux int_0^inf e^{-v^2/2} v dv = 1
  double prev = kInf;
  for (std::size_t nv : {16u, 32u, 64u, 128u}) {
    const double err = std::abs(wall_maxwellian(1.0, make_grid(1.0, 8.0, 2, nv)).renormalization - 1.0);
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-3);
}
