#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "kfp/spectral_krdh.hpp"

using namespace kfp;

namespace {

CoreRegion full_core(std::size_t n) {
  CoreRegion r;
  r.eps = 1.0;
  r.mask.assign(n, 1);
  for (std::size_t k = 0; k < n; ++k) r.nodes.push_back(k);
  return r;
}

// sorted moduli of the eigenvalues of a dense matrix, largest first
std::vector<double> moduli(const Matrix& A) {
  Eigen::EigenSolver<Matrix> es(A, false);
  std::vector<double> m;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) m.push_back(std::abs(es.eigenvalues()[k]));
  std::sort(m.rbegin(), m.rend());
  return m;
}

struct Small {
  PhaseGrid g;
  GeneratorMatrix G;
  TimeScheme scheme;
};

Small small_setup(double V, double is, double id, std::size_t nx = 16, std::size_t nv = 16) {
  Small s{make_grid(1.0, V, nx, nv), {}, {}};
  s.G = assemble(s.g, harmonic_model(), uniform_boundary(is, id));
  s.scheme.dt = 0.01;
  return s;
}

}  // namespace

TEST(Minorization, TwoByTwo) {
  Matrix ST(2, 2), I = Matrix::Identity(2, 2);
  ST << 0.6, 0.2, 0.4, 0.8;
  const Minorization m = minorization_eta(ST, I, {0, 1}, 1.0);
  EXPECT_DOUBLE_EQ(m.eta, 0.2);
  EXPECT_EQ(m.column, 1);
  EXPECT_EQ(m.node, 0);
}

TEST(Minorization, SampledSoundness) {
  Rng rng(3);
  Matrix S(4, 4);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) S(i, j) = 0.05 + rng.uniform();
  for (Eigen::Index j = 0; j < 4; ++j) S.col(j) /= S.col(j).sum();
  const double eta = minorization_eta(S, S, {0, 1, 2, 3}, 1.0).eta;
  double expected = kInf;
  for (Eigen::Index j = 0; j < 4; ++j) expected = std::min(expected, S.col(j).minCoeff() / S.col(j).sum());
  EXPECT_DOUBLE_EQ(eta, expected);
  for (int s = 0; s < 10000; ++s) {
    Vector f(4);
    for (Eigen::Index k = 0; k < 4; ++k) f[k] = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    const Vector a = S * f;
    const double mass = (S * f).sum();
    EXPECT_GE(a.minCoeff() - eta * mass, -1e-15 * a.cwiseAbs().maxCoeff());
  }
}

TEST(Minorization, DiagonalCase) {
  const Matrix I = Matrix::Identity(1, 1);
  EXPECT_DOUBLE_EQ(minorization_eta(I, I, {0}, 0.5).eta, 2.0);
}

TEST(Minorization, Errors) {
  Matrix S = Matrix::Identity(2, 2);
  EXPECT_THROW(minorization_eta(S, S, {}, 1.0), ConfigError);
  EXPECT_THROW(minorization_eta(S, S, {0}, 1.0), NumericalError);  // column 1 never reaches node 0
  EXPECT_THROW(minorization_eta(S, S, {0, 1}, 1.0), NumericalError);  // eta = 0
}

TEST(Triplet, SymmetricToyGenerator) {
  SparseMatrix L(2, 2);
  L.insert(0, 0) = -1;
  L.insert(0, 1) = 1;
  L.insert(1, 0) = 1;
  L.insert(1, 1) = -1;
  const GeneratorMatrix G = GeneratorMatrix::from_matrix(L, 1.0);
  TimeScheme sc;
  sc.dt = 0.1;
  const EigenTriplet et = principal_triplet(G, 1.0, sc);
  EXPECT_NEAR(et.lambda1, 0.0, 1e-13);
  EXPECT_NEAR(et.generator_eigenvalue, 0.0, 1e-12);
  EXPECT_NEAR(et.f1[0], 0.5, 1e-13);
  EXPECT_NEAR(et.f1[1], 0.5, 1e-13);
  EXPECT_NEAR(et.phi1[0], 1.0, 1e-13);
  EXPECT_NEAR(et.phi1[1], 1.0, 1e-13);
  EXPECT_NEAR(et.pairing, 1.0, 1e-14);
}

TEST(Triplet, AbsorbingWallsAgainstDenseSpectrum) {
  const Small s = small_setup(3.0, 0.0, 0.0);
  const EigenTriplet et = principal_triplet(s.G, 0.5, s.scheme);
  EXPECT_LT(et.lambda1, 0.0);
  Eigen::EigenSolver<Matrix> es(Matrix(s.G.L), false);
  double top = -kInf;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) top = std::max(top, es.eigenvalues()[k].real());
  EXPECT_NEAR(et.generator_eigenvalue, top, 1e-8 * std::abs(top));
  EXPECT_LT(et.residual_primal, 1e-8);
  EXPECT_LT(et.residual_dual, 1e-8);
  EXPECT_GT(et.f1.minCoeff(), 0.0);
  EXPECT_GT(et.phi1.minCoeff(), 0.0);
}

TEST(Triplet, ConservativeNullVector) {
  const Small s = small_setup(4.0, 0.5, 0.5);
  const EigenTriplet et = principal_triplet(s.G, 0.5, s.scheme);
  EXPECT_NEAR(et.lambda1, 0.0, 1e-10);
  EXPECT_LE((et.phi1.array() - 1.0).abs().maxCoeff(), 1e-10);
  EXPECT_NEAR(et.f1.sum() * s.g.cell_volume, 1.0, 1e-12);
}

TEST(Triplet, NonConvergenceIsReported) {
  Matrix R(2, 2);
  R << 0, 2, 1, 0;  // periodic: the power iteration oscillates
  PowerOptions opt;
  opt.max_iter = 50;
  EXPECT_THROW(principal_triplet_dense(R, 1.0, 1.0, opt), NumericalError);
}

TEST(Certificate, DoublyStochasticToy) {
  Matrix ST(2, 2);
  ST << 0.75, 0.25, 0.25, 0.75;
  CertificateOptions opt;
  opt.T0 = 0.5;
  opt.T1 = 0.75;
  opt.T = 1.0;
  const CertificateData cd = certify_from(Matrix::Identity(2, 2), ST, full_core(2), {}, 1.0, 0.1, opt);
  EXPECT_NEAR(cd.cert.lambda1, 0.0, 1e-14);
  EXPECT_NEAR(cd.cert.c, 0.25, 1e-14);
  EXPECT_NEAR(cd.cert.core_phi, 2.0, 1e-14);
  EXPECT_NEAR(cd.cert.gamma_H, 0.5, 1e-14);
  EXPECT_GT(cd.cert.gamma, 0.0);
  EXPECT_LT(cd.cert.gamma, 1.0);
  EXPECT_LT(cd.cert.lambda2, cd.cert.lambda1);
  // the true subdominant factor here is 0.5
  EXPECT_GE(cd.cert.gamma, 0.5);
  const SoundnessReport r = check_soundness(cd, 500, 1);
  EXPECT_EQ(r.coupling_violations + r.contraction_violations + r.lyapunov_violations + r.minorization_violations, 0u);
}

TEST(Certificate, RejectsBadHorizons) {
  const Small s = small_setup(4.0, 0.5, 0.5, 4, 4);
  CertificateOptions opt;
  opt.T0 = 0.3;
  opt.T1 = 0.2;
  EXPECT_THROW(certificate(s.G, s.scheme, opt), ConfigError);
  opt.T0 = 0.1;
  opt.T1 = 0.2;
  opt.eps = 0.6;  // empty core
  EXPECT_THROW(certificate(s.G, s.scheme, opt), ConfigError);
}

class SmallCertificate : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    s_ = new Small(small_setup(4.0, 0.5, 0.5));
    CertificateOptions opt;
    opt.eps = 0.125;
    opt.T0 = 0.1;
    opt.T1 = 0.25;
    opt.T = 0.5;
    cd_ = new CertificateData(certificate(s_->G, s_->scheme, opt));
  }
  static void TearDownTestSuite() {
    delete cd_;
    delete s_;
  }
  static Small* s_;
  static CertificateData* cd_;
};
Small* SmallCertificate::s_ = nullptr;
CertificateData* SmallCertificate::cd_ = nullptr;

TEST_F(SmallCertificate, Valid) {
  const HarrisCertificate& h = cd_->cert;
  EXPECT_GT(h.eta, 0.0);
  EXPECT_GT(h.gamma, 0.0);
  EXPECT_LT(h.gamma, 1.0);
  EXPECT_NEAR(h.lambda1, 0.0, 1e-10);
  EXPECT_LT(h.lambda2, 0.0);
  EXPECT_GE(h.C, 1.0);
}

TEST_F(SmallCertificate, Conservative) {
  const auto m = moduli(cd_->ST);
  ASSERT_GE(m.size(), 2u);
  EXPECT_GE(cd_->cert.gamma, m[1] / m[0]);
}

TEST_F(SmallCertificate, Soundness) {
  const SoundnessReport r = check_soundness(*cd_, 300, 7);
  EXPECT_EQ(r.minorization_violations, 0u);
  EXPECT_EQ(r.coupling_violations, 0u);
  EXPECT_EQ(r.contraction_violations, 0u);
  EXPECT_EQ(r.lyapunov_violations, 0u);
}

TEST_F(SmallCertificate, DecayOfEigenfieldIsFlat) {
  const Matrix& ST = cd_->ST;
  LinearMap prop = [&](Vector& f) { f = ST * f; };
  const DecayReport rep = verify_decay(*cd_, {cd_->triplet.f1}, 10, prop);
  EXPECT_EQ(rep.violations, 0u);
  for (double d : rep.traces[0].d) EXPECT_LE(d, 1e-10 * cd_->norm1(cd_->triplet.f1));
}

TEST_F(SmallCertificate, DecayOrthogonalSamples) {
  const Matrix& ST = cd_->ST;
  LinearMap prop = [&](Vector& f) { f = ST * f; };
  Rng rng(11);
  std::vector<Vector> init;
  for (int k = 0; k < 20; ++k) init.push_back(orthogonal_sample(cd_->triplet, rng));
  const DecayReport rep = verify_decay(*cd_, init, 20, prop);
  EXPECT_EQ(rep.violations, 0u) << rep.message;
  EXPECT_LE(rep.empirical_rate, 0.0);
  EXPECT_GE(rep.gap_ratio, 1.0);
}

TEST_F(SmallCertificate, PerturbedMaxwellianDecaysFasterThanCertified) {
  const Matrix& ST = cd_->ST;
  LinearMap prop = [&](Vector& f) { f = ST * f; };
  Rng rng(2);
  const Vector f0 = cd_->triplet.f1 + 0.3 * orthogonal_sample(cd_->triplet, rng);
  const DecayReport rep = verify_decay(*cd_, {f0}, 20, prop);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_LE(rep.empirical_rate, cd_->cert.lambda2);
}

TEST(Threads, StepPowerMatchesSerial) {
  const Small s = small_setup(3.0, 0.5, 0.5, 6, 8);
  const Stepper st(s.G, s.scheme);
  const Matrix a = step_power(st, 7, Matrix::Identity(48, 48));
  const Matrix b = st.power(7);
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-14 * b.cwiseAbs().maxCoeff());
}

TEST(Split, Diagnostic) {
  const PhaseGrid g = make_grid(1.0, 6.0, 4, 48);
  const SplitDiagnostic d = split_diagnostic(WeightSpec::poly(6), 1.0, harmonic_model(), g, 20.0, 3.0, 0.0);
  EXPECT_TRUE(d.ok);
  EXPECT_FALSE(split_diagnostic(WeightSpec::poly(6), 1.0, harmonic_model(), g, 0.0, 3.0, 0.0).ok);
}
