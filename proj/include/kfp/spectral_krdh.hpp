#pragma once

// Principal eigentriplet of the step operator and the constructive Doblin-Harris
// certificate: minorization, Lyapunov pair, coupling, triple-norm contraction, decay rate.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kfp/evolve.hpp"
#include "kfp/norms_measures.hpp"
#include "kfp/phase_grid.hpp"
#include "kfp/random.hpp"
#include "kfp/weights.hpp"

namespace kfp {

/// Thread count from KFP_NUM_THREADS (default 1).
inline unsigned thread_count() {
  if (const char* s = std::getenv("KFP_NUM_THREADS")) {
    const int n = std::atoi(s);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return 1;
}

/// Dense S_dt^n computed column block by column block; blocks are independent, so the
/// result does not depend on the thread count.
inline Matrix step_power(const Stepper& st, std::size_t n, const Matrix& start) {
  const Eigen::Index N = start.cols();
  const unsigned nt = std::min<unsigned>(thread_count(), static_cast<unsigned>(std::max<Eigen::Index>(1, N)));
  Matrix X = start;
  if (nt <= 1) {
    for (std::size_t s = 0; s < n; ++s) st.forward(X);
    return X;
  }
  std::vector<std::thread> pool;
  const Eigen::Index chunk = (N + nt - 1) / nt;
  for (unsigned t = 0; t < nt; ++t) {
    const Eigen::Index c0 = t * chunk, c1 = std::min(N, c0 + chunk);
    if (c0 >= c1) break;
    pool.emplace_back([&, c0, c1] {
      Matrix B = X.middleCols(c0, c1 - c0);
      for (std::size_t s = 0; s < n; ++s) st.forward(B);
      X.middleCols(c0, c1 - c0) = B;
    });
  }
  for (auto& th : pool) th.join();
  return X;
}

struct EigenTriplet {
  double lambda1 = 0.0;               // log(mu)/T, mu = spectral radius of S_T
  double generator_eigenvalue = 0.0;  // matching eigenvalue of L_h for the scheme
  double mu = 1.0;
  double T = 1.0;
  Vector f1;
  Vector phi1;
  double cell_volume = 1.0;
  double residual_primal = 0.0;  // |L f1 - lambda f1|_inf / |f1|_inf (generator available)
  double residual_dual = 0.0;
  double step_residual_primal = 0.0;  // |S f1 - mu f1|_inf / |f1|_inf
  double step_residual_dual = 0.0;
  std::size_t iterations_dual = 0, iterations_primal = 0;
  double phi_norm = 1.0;  // ||phi1||_0 = max |phi1|
  double pairing = 1.0;   // <phi1, f1>_h
};

using LinearMap = std::function<void(Vector&)>;

struct PowerOptions {
  double tol = 1e-13;
  std::size_t max_iter = 20000;
};

namespace detail {

inline NumericalError no_convergence(const char* what, const std::vector<double>& diffs) {
  std::ostringstream os;
  os << "principal_triplet: " << what << " power iteration did not converge";
  if (diffs.size() >= 3) {
    const std::size_t n = diffs.size();
    os << "; last contraction ratios " << diffs[n - 1] / diffs[n - 2] << ", " << diffs[n - 2] / diffs[n - 3]
       << " (near-degenerate subdominant eigenvalue?)";
  }
  return NumericalError(os.str());
}

}  // namespace detail

/// Dual power iteration phi <- S^T phi / |.|_inf, then primal iteration f <- S f / mu with
/// <phi1, f>_h = 1. S is the propagator over horizon T.
inline EigenTriplet power_triplet(const LinearMap& S, const LinearMap& ST, Eigen::Index N, double cell_volume,
                                  double T, const PowerOptions& opt = {}) {
  EigenTriplet et;
  et.T = T;
  et.cell_volume = cell_volume;

  Vector phi = Vector::Ones(N);
  std::vector<double> diffs;
  double mu = 0.0;
  bool done = false;
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    Vector next = phi;
    ST(next);
    mu = next.cwiseAbs().maxCoeff();
    if (!(mu > 0.0)) throw NumericalError("principal_triplet: dual iterate vanished");
    next /= mu;
    const double d = (next - phi).cwiseAbs().maxCoeff();
    phi = next;
    diffs.push_back(d);
    et.iterations_dual = it;
    if (d <= opt.tol) {
      done = true;
      break;
    }
  }
  if (!done) throw detail::no_convergence("dual", diffs);

  Vector f = Vector::Ones(N);
  f /= inner(phi, f, cell_volume);
  diffs.clear();
  done = false;
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    Vector next = f;
    S(next);
    next /= inner(phi, next, cell_volume);
    const double d = (next - f).cwiseAbs().maxCoeff() / next.cwiseAbs().maxCoeff();
    f = next;
    diffs.push_back(d);
    et.iterations_primal = it;
    if (d <= opt.tol) {
      done = true;
      break;
    }
  }
  if (!done) throw detail::no_convergence("primal", diffs);

  // Rayleigh growth <S^T phi, f> / <phi, f>
  Vector sphi = phi;
  ST(sphi);
  et.mu = inner(sphi, f, cell_volume) / inner(phi, f, cell_volume);
  et.lambda1 = std::log(et.mu) / T;
  et.phi1 = phi;
  et.f1 = f;
  et.phi_norm = phi.cwiseAbs().maxCoeff();
  et.pairing = inner(phi, f, cell_volume);
  Vector sf = f;
  S(sf);
  et.step_residual_primal = (sf - et.mu * f).cwiseAbs().maxCoeff() / f.cwiseAbs().maxCoeff();
  et.step_residual_dual = (sphi - et.mu * phi).cwiseAbs().maxCoeff() / phi.cwiseAbs().maxCoeff();
  return et;
}

/// Eigenvalue of L_h matching a per-step growth factor of the scheme.
inline double generator_rate(SchemeKind kind, double mu_dt, double dt) {
  switch (kind) {
    case SchemeKind::ImplicitEuler: return (1.0 - 1.0 / mu_dt) / dt;
    case SchemeKind::CrankNicolson: return 2.0 * (mu_dt - 1.0) / (dt * (mu_dt + 1.0));
    case SchemeKind::ExplicitEuler: return (mu_dt - 1.0) / dt;
  }
  return 0.0;
}

inline void fill_generator_residuals(EigenTriplet& et, const GeneratorMatrix& G, const TimeScheme& scheme) {
  const std::size_t n = steps_for(et.T, scheme.dt);
  const double mu_dt = std::pow(et.mu, 1.0 / static_cast<double>(n));
  et.generator_eigenvalue = generator_rate(scheme.kind, mu_dt, scheme.dt);
  const Vector lf = G.L * et.f1;
  const Vector lp = G.L.transpose() * et.phi1;
  et.residual_primal = (lf - et.generator_eigenvalue * et.f1).cwiseAbs().maxCoeff() / et.f1.cwiseAbs().maxCoeff();
  et.residual_dual = (lp - et.generator_eigenvalue * et.phi1).cwiseAbs().maxCoeff() / et.phi1.cwiseAbs().maxCoeff();
}

/// Eigentriplet from the positivity-preserving stepper over horizon T.
inline EigenTriplet principal_triplet(const GeneratorMatrix& G, double T, const TimeScheme& scheme,
                                      const PowerOptions& opt = {}) {
  const Stepper st(G, scheme);
  const std::size_t n = steps_for(T, scheme.dt);
  LinearMap S = [&](Vector& f) {
    for (std::size_t s = 0; s < n; ++s) st.forward(f);
  };
  LinearMap ST = [&](Vector& g) {
    for (std::size_t s = 0; s < n; ++s) st.backward(g);
  };
  EigenTriplet et = power_triplet(S, ST, G.L.rows(), G.cell_volume, T, opt);
  fill_generator_residuals(et, G, scheme);
  return et;
}

/// Eigentriplet of an explicitly given propagator matrix over horizon T.
inline EigenTriplet principal_triplet_dense(const Matrix& ST_mat, double cell_volume, double T,
                                            const PowerOptions& opt = {}) {
  LinearMap S = [&](Vector& f) { f = ST_mat * f; };
  LinearMap ST = [&](Vector& g) { g = ST_mat.transpose() * g; };
  return power_triplet(S, ST, ST_mat.rows(), cell_volume, T, opt);
}

struct Minorization {
  double eta = 0.0;
  Eigen::Index column = 0;  // minimizing column
  Eigen::Index node = 0;    // minimizing core node
};

/// Largest eta with  S_T f >= eta 1_core [S_T0 f]_{1_core}  for all f >= 0, columnwise.
inline Minorization minorization_eta(const Matrix& ST, const Matrix& ST0, const std::vector<std::size_t>& core,
                                     double cell_volume) {
  if (core.empty()) throw ConfigError("minorization_eta: core region is empty");
  Minorization m;
  m.eta = kInf;
  for (Eigen::Index j = 0; j < ST.cols(); ++j) {
    double mass = 0.0;
    for (std::size_t i : core) mass += ST0(static_cast<Eigen::Index>(i), j);
    mass *= cell_volume;
    if (!(mass > 0.0)) {
      std::ostringstream os;
      os << "minorization_eta: column " << j << " never reaches the core at T0 (enlarge T0 or check connectivity)";
      throw NumericalError(os.str());
    }
    for (std::size_t i : core) {
      const double r = ST(static_cast<Eigen::Index>(i), j) / mass;
      if (r < m.eta) {
        m.eta = r;
        m.column = j;
        m.node = static_cast<Eigen::Index>(i);
      }
    }
  }
  if (!(m.eta > 0.0)) {
    std::ostringstream os;
    os << "minorization_eta: eta = 0, column " << m.column << " does not reach core node " << m.node
       << " by time T (enlarge T)";
    throw NumericalError(os.str());
  }
  return m;
}

struct CertificateOptions {
  double eps = 0.125;
  double T0 = 0.1;
  double T1 = 0.2;
  double T = 0.5;
  WeightSpec norm_weight = WeightSpec::flat();  // weight of the node-additive norm ||.||_1
  std::vector<double> gammaL_grid;              // empty: default ladder
  std::vector<double> beta_fractions = {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99};
  std::vector<double> delta_fractions = {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99};
  std::vector<double> A_factors = {1.01, 1.1, 1.5, 2.0, 4.0, 8.0, 16.0, 64.0, 256.0, 1024.0};
  PowerOptions power;
};

struct HarrisCertificate {
  // parameters
  double eps = 0.0, T0 = 0.0, T1 = 0.0, T = 0.0, dt = 0.0;
  std::string norm_weight;
  std::size_t core_size = 0;
  // constants
  double lambda1 = 0.0;
  double eta = 0.0;
  double c = 0.0;        // S~_T f >= c 1_core [f]_phi1, f >= 0
  double core_phi = 0.0;  // [1_core]_phi1
  double gamma_H = 0.0;
  double gamma_L = 0.0;
  double K = 0.0;
  double beta = 0.0;
  double delta0 = 0.0;
  double A_cond = 0.0;
  double gamma1 = 0.0, gamma2 = 0.0, gamma = 0.0;
  double lambda2 = 0.0;
  double C = 0.0;                // (1 + beta)/beta
  double equiv_lower = 0.0;      // (1+beta)^-1 |||f||| <= ||f||_1
  double equiv_upper = 0.0;      // ||f||_1 <= beta^-1 |||f|||
  // search record
  std::vector<double> gammaL_grid, beta_fractions, delta_fractions, A_factors;
};

/// Everything the certificate is computed from, kept for soundness checks and decay runs.
struct CertificateData {
  Matrix ST0, ST;  // S_{T0}, S_T
  EigenTriplet triplet;
  CoreRegion core;
  std::vector<double> norm_w;  // node weights of ||.||_1
  double cell_volume = 1.0;
  HarrisCertificate cert;

  double norm1(const Vector& f) const { return weighted_norm(f, norm_w, 1.0, cell_volume); }
  double bracket_phi(const Vector& f) const { return bracket(f, triplet.phi1, cell_volume); }
  double triple(const Vector& f) const { return bracket_phi(f) + cert.beta * norm1(f); }
  Matrix tilde_ST() const { return std::exp(-triplet.lambda1 * cert.T) * ST; }
};

/// Lyapunov constant for a given gamma_L: K = max_j (||S~ e_j||_1 - gamma_L ||e_j||_1)_+ / [e_j]_phi1.
inline double lyapunov_K(const std::vector<double>& col_norm, const std::vector<double>& unit_norm,
                         const std::vector<double>& unit_bracket, double gamma_L) {
  double K = 0.0;
  for (std::size_t j = 0; j < col_norm.size(); ++j) {
    const double excess = col_norm[j] - gamma_L * unit_norm[j];
    if (excess <= 0.0) continue;
    if (!(unit_bracket[j] > 0.0)) return kInf;
    K = std::max(K, excess / unit_bracket[j]);
  }
  return K;
}

/// Builds the certificate from propagators already computed (S_T0, S_T), the core node set
/// and the node weights of ||.||_1.
inline CertificateData certify_from(Matrix ST0, Matrix ST, CoreRegion core, std::vector<double> norm_w,
                                    double cell_volume, double dt, const CertificateOptions& opt) {
  CertificateData cd;
  cd.ST0 = std::move(ST0);
  cd.ST = std::move(ST);
  cd.cell_volume = cell_volume;
  cd.core = std::move(core);
  if (cd.core.empty()) throw ConfigError("certificate: core region O_eps is empty for eps = " + std::to_string(opt.eps));
  cd.norm_w = std::move(norm_w);
  if (cd.norm_w.empty()) cd.norm_w.assign(static_cast<std::size_t>(cd.ST.cols()), 1.0);
  for (double w : cd.norm_w)
    if (w < 1.0 - 1e-15) throw ConfigError("certificate: norm weight must be >= 1 (so [f]_phi1 <= ||f||_1)");

  cd.triplet = principal_triplet_dense(cd.ST, cell_volume, opt.T, opt.power);
  const EigenTriplet& et = cd.triplet;
  HarrisCertificate& h = cd.cert;
  h.eps = opt.eps;
  h.T0 = opt.T0;
  h.T1 = opt.T1;
  h.T = opt.T;
  h.dt = dt;
  h.norm_weight = opt.norm_weight.describe();
  h.core_size = cd.core.nodes.size();
  h.lambda1 = et.lambda1;
  h.eta = minorization_eta(cd.ST, cd.ST0, cd.core.nodes, cell_volume).eta;

  const double cv = cell_volume;
  const double scale = std::exp(-et.lambda1 * opt.T);
  const Eigen::Index N = cd.ST.cols();

  // unconditional Doblin-Harris constant
  double c = kInf;
  for (Eigen::Index j = 0; j < N; ++j) {
    const double bj = et.phi1[j] * cv;
    if (!(bj > 0.0)) continue;
    for (std::size_t i : cd.core.nodes) c = std::min(c, scale * cd.ST(static_cast<Eigen::Index>(i), j) / bj);
  }
  double core_phi = 0.0;
  for (std::size_t i : cd.core.nodes) core_phi += et.phi1[static_cast<Eigen::Index>(i)] * cv;
  h.c = c;
  h.core_phi = core_phi;
  h.gamma_H = 1.0 - c * core_phi;

  std::vector<double> col_norm(N), unit_norm(N), unit_bracket(N);
  for (Eigen::Index j = 0; j < N; ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) s += cd.norm_w[i] * std::abs(cd.ST(i, j));
    col_norm[j] = scale * s * cv;
    unit_norm[j] = cd.norm_w[j] * cv;
    unit_bracket[j] = et.phi1[j] * cv;
  }

  std::vector<double> gl = opt.gammaL_grid;
  if (gl.empty())
    for (int k = 1; k < 100; ++k) gl.push_back(k / 100.0);
  h.gammaL_grid = gl;
  h.beta_fractions = opt.beta_fractions;
  h.delta_fractions = opt.delta_fractions;
  h.A_factors = opt.A_factors;

  h.gamma = kInf;
  std::string binding = "gamma_H >= 1 (no Doblin-Harris coupling: enlarge T or the core)";
  if (h.gamma_H < 1.0) {
    binding = "no Lyapunov pair with gamma_L < 1";
    for (double gL : gl) {
      const double K = lyapunov_K(col_norm, unit_norm, unit_bracket, gL);
      if (!std::isfinite(K)) continue;
      binding = "no (beta, delta0) with gamma < 1";
      for (double af : opt.A_factors) {
        const double A = K > 0.0 ? af * K / (1.0 - gL) : af;
        const double room = 1.0 - gL - K / A;
        if (!(room > 0.0)) continue;
        for (double bf : opt.beta_fractions) {
          const double beta = K > 0.0 ? bf * (1.0 - h.gamma_H) / K : bf;
          const double g1 = std::max(h.gamma_H + beta * K, gL);
          for (double df : opt.delta_fractions) {
            const double d0 = df * room;
            const double g2 = std::max(1.0 - beta * d0, gL + K / A + d0);
            const double gmax = std::max(g1, g2);
            if (gmax < h.gamma) {
              h.gamma = gmax;
              h.gamma1 = g1;
              h.gamma2 = g2;
              h.gamma_L = gL;
              h.K = K;
              h.beta = beta;
              h.delta0 = d0;
              h.A_cond = A;
            }
          }
        }
      }
    }
  }
  if (!(h.gamma < 1.0) || !(h.gamma > 0.0)) throw NumericalError("certificate: " + binding);
  h.lambda2 = h.lambda1 + std::log(h.gamma) / opt.T;
  h.C = (1.0 + h.beta) / h.beta;
  h.equiv_lower = 1.0 / (1.0 + h.beta);
  h.equiv_upper = 1.0 / h.beta;
  return cd;
}

/// Computes S_T0 and S_T with the stepper and certifies.
inline CertificateData certificate(const GeneratorMatrix& G, const TimeScheme& scheme, const CertificateOptions& opt) {
  if (!G.grid) throw ConfigError("certificate: generator carries no grid");
  if (!(opt.T0 > 0.0 && opt.T0 < opt.T1 && opt.T1 <= opt.T))
    throw ConfigError("certificate: need 0 < T0 < T1 <= T");
  const Stepper st(G, scheme);
  const std::size_t n0 = steps_for(opt.T0, scheme.dt);
  const std::size_t n = steps_for(opt.T, scheme.dt);
  Matrix ST0 = step_power(st, n0, Matrix::Identity(G.L.rows(), G.L.cols()));
  Matrix ST = step_power(st, n - n0, ST0);
  return certify_from(std::move(ST0), std::move(ST), core_region(*G.grid, opt.eps),
                      weight_values(opt.norm_weight, *G.grid), G.cell_volume, scheme.dt, opt);
}

/// Random field with <phi1, f>_h = 0.
inline Vector orthogonal_sample(const EigenTriplet& et, Rng& rng) {
  Vector f(et.f1.size());
  for (Eigen::Index k = 0; k < f.size(); ++k) f[k] = rng.normal();
  return f - inner(et.phi1, f, et.cell_volume) * et.f1;
}

struct SoundnessReport {
  std::size_t samples = 0;
  std::size_t minorization_violations = 0;
  std::size_t coupling_violations = 0;
  std::size_t lyapunov_violations = 0;
  std::size_t contraction_violations = 0;
  double worst_minorization = 0.0;  // min of (S_T f - eta 1 [S_T0 f]) / scale over core
  double worst_coupling = 0.0;      // max of [S~ f] / (gamma_H [f])
  double worst_contraction = 0.0;   // max of |||S~ f||| / (gamma |||f|||)
  double worst_lyapunov = 0.0;      // max of ||S~ f|| / (gamma_L ||f|| + K [f])
};

/// Sampled checks of the literal inequalities the certificate rests on.
inline SoundnessReport check_soundness(const CertificateData& cd, std::size_t samples, std::uint64_t seed) {
  SoundnessReport r;
  r.samples = samples;
  Rng rng(seed);
  const double cv = cd.cell_volume;
  const Matrix St = cd.tilde_ST();
  const Vector ind = indicator(cd.core);
  const HarrisCertificate& h = cd.cert;
  r.worst_minorization = kInf;
  for (std::size_t s = 0; s < samples; ++s) {
    // nonnegative fields: sparse-ish mixtures so that extreme columns are exercised
    Vector f(cd.ST.cols());
    for (Eigen::Index k = 0; k < f.size(); ++k) {
      const double u = rng.uniform();
      f[k] = u < 0.1 ? rng.uniform() * 10.0 : u * u * u;
    }
    const Vector a = cd.ST * f;
    const double mass = ind.dot(cd.ST0 * f) * cv;
    const double sc = a.cwiseAbs().maxCoeff();
    double worst = kInf;
    for (std::size_t i : cd.core.nodes) worst = std::min(worst, a[static_cast<Eigen::Index>(i)] - h.eta * mass);
    r.worst_minorization = std::min(r.worst_minorization, worst / sc);
    if (worst < -1e-13 * sc) ++r.minorization_violations;

    const Vector o = orthogonal_sample(cd.triplet, rng);
    const Vector so = St * o;
    const double cpl = cd.bracket_phi(so) / (h.gamma_H * cd.bracket_phi(o));
    r.worst_coupling = std::max(r.worst_coupling, cpl);
    if (cpl > 1.0 + 1e-10) ++r.coupling_violations;
    const double ctr = cd.triple(so) / (h.gamma * cd.triple(o));
    r.worst_contraction = std::max(r.worst_contraction, ctr);
    if (ctr > 1.0 + 1e-10) ++r.contraction_violations;
    const double ly = cd.norm1(so) / (h.gamma_L * cd.norm1(o) + h.K * cd.bracket_phi(o));
    r.worst_lyapunov = std::max(r.worst_lyapunov, ly);
    if (ly > 1.0 + 1e-10) ++r.lyapunov_violations;
  }
  return r;
}

struct DecaySample {
  std::vector<double> t;
  std::vector<double> d;         // ||e^{-lambda1 t} f(t) - <f0,phi1> f1||_1
  std::vector<double> envelope;  // C gamma^n d(0)
};

struct DecayReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;     // max d(nT) / envelope
  double empirical_rate = 0.0;  // slowest fitted rate over samples (<= 0)
  double certified_rate = 0.0;  // log(gamma)/T
  double gap_ratio = 0.0;       // empirical / certified
  std::vector<DecaySample> traces;
  std::string message;
};

/// Evolves each f0 with `propagate` (one horizon T per call) and checks the envelope
/// d(nT) <= C gamma^n d(0) (1 + tol) (plus an absolute floor from the eigenvector accuracy).
inline DecayReport verify_decay(const CertificateData& cd, const std::vector<Vector>& initial, std::size_t periods,
                                const LinearMap& propagate, double tol = 1e-10) {
  DecayReport rep;
  const HarrisCertificate& h = cd.cert;
  const EigenTriplet& et = cd.triplet;
  rep.samples = initial.size();
  rep.certified_rate = std::log(h.gamma) / h.T;
  rep.empirical_rate = -kInf;
  const double f1n = cd.norm1(et.f1);
  for (std::size_t s = 0; s < initial.size(); ++s) {
    const Vector& f0 = initial[s];
    const double a = inner(f0, et.phi1, cd.cell_volume);
    const double floor = 1e-11 * (std::abs(a) * f1n + cd.norm1(f0));
    DecaySample tr;
    Vector f = f0;
    const double d0 = cd.norm1(f0 - a * et.f1);
    for (std::size_t n = 0; n <= periods; ++n) {
      if (n > 0) propagate(f);
      const double t = static_cast<double>(n) * h.T;
      const double d = cd.norm1(std::exp(-et.lambda1 * t) * f - a * et.f1);
      const double env = h.C * std::pow(h.gamma, static_cast<double>(n)) * d0;
      tr.t.push_back(t);
      tr.d.push_back(d);
      tr.envelope.push_back(env);
      if (env > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, d / env);
      if (d > env * (1.0 + tol) + floor) {
        ++rep.violations;
        if (rep.message.empty()) {
          std::ostringstream os;
          os << "envelope violated: sample " << s << ", t = " << t << ", d = " << d << " > " << env;
          rep.message = os.str();
        }
      }
    }
    // least-squares slope of log d on the part above the floor
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t n = 0; n < tr.t.size(); ++n) {
      if (!(tr.d[n] > 1e3 * floor) || tr.d[n] <= 0.0) break;
      const double x = tr.t[n], y = std::log(tr.d[n]);
      sx += x, sy += y, sxx += x * x, sxy += x * y;
      ++m;
    }
    if (m >= 2) {
      const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
      rep.empirical_rate = std::max(rep.empirical_rate, slope);
    }
    rep.traces.push_back(std::move(tr));
  }
  if (!std::isfinite(rep.empirical_rate)) rep.empirical_rate = rep.certified_rate;
  rep.gap_ratio = rep.empirical_rate / rep.certified_rate;
  return rep;
}

/// Diagnostic for the split B = L - M chi_R: max over nodes of varpi - M chi_R(v).
struct SplitDiagnostic {
  double max_varpi_B = 0.0;
  bool ok = false;
};

inline SplitDiagnostic split_diagnostic(const WeightSpec& w, double p, const CoefficientModel& m, const PhaseGrid& g,
                                        double M, double R, double a_star) {
  SplitDiagnostic d;
  d.max_varpi_B = -kInf;
  for (double x : g.x_nodes)
    for (double v : g.v_nodes) d.max_varpi_B = std::max(d.max_varpi_B, varpi(w, p, m, x, v) - M * chi_R(v, R));
  d.ok = d.max_varpi_B <= a_star;
  return d;
}

}  // namespace kfp
