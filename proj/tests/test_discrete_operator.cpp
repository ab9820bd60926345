#include <gtest/gtest.h>

#include <cmath>

#include "kfp/discrete_operator.hpp"
#include "kfp/random.hpp"

using namespace kfp;

namespace {

Vector random_vector(Eigen::Index n, Rng& rng) {
  Vector f(n);
  for (Eigen::Index k = 0; k < n; ++k) f[k] = rng.normal();
  return f;
}

Vector gaussian(const PhaseGrid& g) {
  Vector f(static_cast<Eigen::Index>(g.size()));
  for (std::size_t k = 0; k < g.size(); ++k) f[k] = maxwellian_raw(1.0, g.v_nodes[g.v_index(k)]);
  return f;
}

}  // namespace

TEST(Assemble, ZeroField) {
  const PhaseGrid g = make_grid(1.0, 4.0, 8, 16);
  const GeneratorMatrix G = assemble(g, harmonic_model(), uniform_boundary(0.3, 0.4));
  const Vector z = G.L * Vector::Zero(g.size());
  EXPECT_EQ(z.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Assemble, MetzlerBothForms) {
  const PhaseGrid g = make_grid(1.0, 5.0, 12, 40);
  for (AssemblyForm form : {AssemblyForm::Flux, AssemblyForm::Advective}) {
    const GeneratorMatrix G = assemble(g, harmonic_model(), uniform_boundary(0.5, 0.5), form);
    EXPECT_TRUE(metzler_check(G.L).ok());
  }
  const GeneratorMatrix P = assemble(make_grid(1.0, 6.0, 8, 48), power_model(3.0, 1.0), uniform_boundary(0.2, 0.3));
  EXPECT_TRUE(metzler_check(P.L).ok());
}

TEST(Assemble, ConservativeColumnSums) {
  for (auto [nx, nv] : {std::pair<std::size_t, std::size_t>{8, 16}, {32, 64}}) {
    const PhaseGrid g = make_grid(1.0, 5.0, nx, nv);
    for (auto [s, d] : {std::pair{1.0, 0.0}, {0.0, 1.0}, {0.4, 0.6}}) {
      const GeneratorMatrix G = assemble(g, harmonic_model(), uniform_boundary(s, d));
      const Vector col = (Vector::Ones(g.size()).transpose() * G.L).transpose() * g.cell_volume;
      EXPECT_LE(col.cwiseAbs().maxCoeff(), 1e-13) << nx << "x" << nv << " iota_s=" << s;
    }
  }
}

TEST(Assemble, MassBookkeeping) {
  const PhaseGrid g = make_grid(1.0, 6.0, 10, 24);
  const BoundaryModel bd = make_boundary({0.5, 0.3, 0.7}, {0.1, 0.2, 1.3});
  const GeneratorMatrix G = assemble(g, power_model(3.0, 1.0, ReactionMode::Constant, 0.5), bd);
  Rng rng(3);
  for (int s = 0; s < 5; ++s) {
    const Vector f = random_vector(g.size(), rng);
    const double lhs = g.cell_volume * (G.L * f).sum();
    double rhs = g.cell_volume * G.reaction->dot(f);
    for (int w = 0; w < 2; ++w) rhs -= (1.0 - G.iota[w]) * G.outflux[w]->dot(f);
    EXPECT_NEAR(lhs, rhs, 1e-12 * (G.L * f).cwiseAbs().sum() * g.cell_volume);
  }
}

TEST(Assemble, SubMarkovFluxPerOutgoingNode) {
  const PhaseGrid g = make_grid(1.0, 5.0, 6, 20);
  const BoundaryModel bd = make_boundary({0.5, 0.3, 1.0}, {0.0, 0.6, 2.0});
  const GeneratorMatrix G = assemble(g, harmonic_model(), bd);
  for (Wall w : kWalls) {
    const double iota = bd.at(w).iota();
    for (std::size_t jo : g.outgoing(w)) {
      const std::size_t col = g.index(g.wall_cell(w), jo);
      double produced = 0.0;
      for (const auto& c : G.closure)
        if (c.wall == w && c.col == col) produced += c.value;
      const double out = std::abs(g.v_nodes[jo]) / g.dx;
      EXPECT_NEAR(produced, iota * out, 1e-14 * out);
    }
  }
}

TEST(Assemble, EquilibriumResidualShrinks) {
  double prev = 0.0;
  for (std::size_t r = 0; r < 3; ++r) {
    const std::size_t nx = 16u << r, nv = 32u << r;
    const PhaseGrid g = make_grid(1.0, 6.0, nx, nv);
    const GeneratorMatrix G = assemble(g, harmonic_model(), uniform_boundary(0.3, 0.7));
    const Vector M = gaussian(g);
    const double res = (G.L * M).cwiseAbs().maxCoeff() / M.cwiseAbs().maxCoeff();
    if (r > 0) EXPECT_GE(prev / res, 1.8) << nx << "x" << nv;
    prev = res;
  }
}

TEST(Reflection, PureSpecularInvolution) {
  const PhaseGrid g = make_grid(1.0, 3.0, 4, 12);
  const ReflectionOperator R = make_reflection(g, uniform_boundary(1.0, 0.0));
  Rng rng(5);
  for (Wall w : kWalls) {
    std::vector<double> out(g.Nv, 0.0);
    for (std::size_t j : g.outgoing(w)) out[j] = rng.uniform();
    const auto in = apply_reflection(R, w, out);
    // mirrored back onto the outgoing half it reproduces the trace
    std::vector<double> back(g.Nv, 0.0);
    for (std::size_t j : g.incoming(w)) back[g.mirror[j]] = in[j];
    for (std::size_t j = 0; j < g.Nv; ++j) EXPECT_EQ(back[j], out[j]);
  }
}

TEST(Reflection, PureDiffusiveMaxwellian) {
  const PhaseGrid g = make_grid(1.0, 5.0, 4, 30);
  const ReflectionOperator R = make_reflection(g, make_boundary({0, 1, 0.7}, {0, 1, 1.4}));
  for (Wall w : kWalls) {
    const auto& M = R.at(w).maxwellian;
    std::vector<double> out(g.Nv, 0.0);
    for (std::size_t j : g.outgoing(w)) out[j] = M[j];
    EXPECT_NEAR(outgoing_moment(R, w, out), 1.0, 1e-14);
    const auto in = apply_reflection(R, w, out);
    for (std::size_t j : g.incoming(w)) EXPECT_NEAR(in[j], M[j], 1e-14 * M[j] + 1e-300);
  }
}

TEST(Reflection, AbsorbingAndSupportCheck) {
  const PhaseGrid g = make_grid(1.0, 2.0, 4, 8);
  const ReflectionOperator R = make_reflection(g, uniform_boundary(0.0, 0.0));
  std::vector<double> out(g.Nv, 0.0);
  for (std::size_t j : g.outgoing(Wall::Right)) out[j] = 1.0;
  for (double x : apply_reflection(R, Wall::Right, out)) EXPECT_EQ(x, 0.0);
  out[g.incoming(Wall::Right).front()] = 1.0;
  EXPECT_THROW(apply_reflection(R, Wall::Right, out), ConfigError);
}

TEST(Dual, AdjointIdentity) {
  const PhaseGrid g = make_grid(1.0, 5.0, 12, 24);
  const GeneratorMatrix G = assemble(g, harmonic_model(), uniform_boundary(0.2, 0.5));
  const GeneratorMatrix D = dual_generator(G);
  Rng rng(11);
  for (int s = 0; s < 10; ++s) {
    const Vector f = random_vector(g.size(), rng), h = random_vector(g.size(), rng);
    const double a = inner(G.L * f, h, g.cell_volume), b = inner(f, D.L * h, g.cell_volume);
    EXPECT_NEAR(a, b, 1e-13 * std::max(std::abs(a), (G.L * f).norm() * h.norm() * g.cell_volume));
  }
  EXPECT_TRUE(D.dual);
}

TEST(Dual, DualOfDualIsPrimal) {
  const PhaseGrid g = make_grid(1.0, 5.0, 6, 12);
  const GeneratorMatrix G = assemble(g, harmonic_model(), uniform_boundary(0.5, 0.5));
  const GeneratorMatrix DD = dual_generator(dual_generator(G));
  EXPECT_EQ(SparseMatrix(DD.L - G.L).norm(), 0.0);
  EXPECT_FALSE(DD.dual);
  ASSERT_EQ(DD.closure.size(), G.closure.size());
  for (std::size_t k = 0; k < G.closure.size(); ++k) {
    EXPECT_EQ(DD.closure[k].row, G.closure[k].row);
    EXPECT_EQ(DD.closure[k].col, G.closure[k].col);
  }
}

TEST(Dual, ConstantIsDualNullVector) {
  const PhaseGrid g = make_grid(1.0, 5.0, 16, 32);
  const GeneratorMatrix D = dual_generator(assemble(g, harmonic_model(), uniform_boundary(0.25, 0.75)));
  const Vector r = D.L * Vector::Ones(g.size());
  EXPECT_LE(r.cwiseAbs().maxCoeff() * g.cell_volume, 1e-13);
}

TEST(Assemble, RejectsSmallTruncation) {
  EXPECT_THROW(assemble(make_grid(1.0, 1.0, 4, 8), power_model(3.0, 1.0), uniform_boundary(0, 1)), ConfigError);
}
