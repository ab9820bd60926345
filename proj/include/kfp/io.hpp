#pragma once

// JSON records for triplets, certificates and decay reports, and certificate replay.

#include <cmath>
#include <string>

#include "kfp/config.hpp"
#include "kfp/spectral_krdh.hpp"

namespace kfp {

inline json to_json(const EigenTriplet& et) {
  return json{{"lambda1", et.lambda1},
              {"generator_eigenvalue", et.generator_eigenvalue},
              {"mu", et.mu},
              {"T", et.T},
              {"residual_primal", et.residual_primal},
              {"residual_dual", et.residual_dual},
              {"step_residual_primal", et.step_residual_primal},
              {"step_residual_dual", et.step_residual_dual},
              {"iterations_dual", et.iterations_dual},
              {"iterations_primal", et.iterations_primal},
              {"phi_norm", et.phi_norm},
              {"pairing", et.pairing},
              {"f1_min", et.f1.minCoeff()},
              {"phi1_min", et.phi1.minCoeff()}};
}

inline json to_json(const HarrisCertificate& h) {
  return json{{"eps", h.eps},
              {"T0", h.T0},
              {"T1", h.T1},
              {"T", h.T},
              {"dt", h.dt},
              {"norm_weight", h.norm_weight},
              {"core_size", h.core_size},
              {"lambda1", h.lambda1},
              {"eta", h.eta},
              {"c", h.c},
              {"core_phi", h.core_phi},
              {"gamma_H", h.gamma_H},
              {"gamma_L", h.gamma_L},
              {"K", h.K},
              {"beta", h.beta},
              {"delta0", h.delta0},
              {"A_cond", h.A_cond},
              {"gamma1", h.gamma1},
              {"gamma2", h.gamma2},
              {"gamma", h.gamma},
              {"lambda2", h.lambda2},
              {"C", h.C},
              {"equiv_lower", h.equiv_lower},
              {"equiv_upper", h.equiv_upper},
              {"gammaL_grid", h.gammaL_grid},
              {"beta_fractions", h.beta_fractions},
              {"delta_fractions", h.delta_fractions},
              {"A_factors", h.A_factors}};
}

inline HarrisCertificate certificate_from_json(const json& j) {
  HarrisCertificate h;
  try {
    h.eps = j.at("eps");
    h.T0 = j.at("T0");
    h.T1 = j.at("T1");
    h.T = j.at("T");
    h.dt = j.at("dt");
    h.norm_weight = j.at("norm_weight");
    h.core_size = j.at("core_size");
    h.lambda1 = j.at("lambda1");
    h.eta = j.at("eta");
    h.c = j.at("c");
    h.core_phi = j.at("core_phi");
    h.gamma_H = j.at("gamma_H");
    h.gamma_L = j.at("gamma_L");
    h.K = j.at("K");
    h.beta = j.at("beta");
    h.delta0 = j.at("delta0");
    h.A_cond = j.at("A_cond");
    h.gamma1 = j.at("gamma1");
    h.gamma2 = j.at("gamma2");
    h.gamma = j.at("gamma");
    h.lambda2 = j.at("lambda2");
    h.C = j.at("C");
    h.equiv_lower = j.at("equiv_lower");
    h.equiv_upper = j.at("equiv_upper");
    h.gammaL_grid = j.at("gammaL_grid").get<std::vector<double>>();
    h.beta_fractions = j.at("beta_fractions").get<std::vector<double>>();
    h.delta_fractions = j.at("delta_fractions").get<std::vector<double>>();
    h.A_factors = j.at("A_factors").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("certificate JSON: ") + e.what());
  }
  return h;
}

inline json to_json(const SoundnessReport& s) {
  return json{{"samples", s.samples},
              {"minorization_violations", s.minorization_violations},
              {"coupling_violations", s.coupling_violations},
              {"lyapunov_violations", s.lyapunov_violations},
              {"contraction_violations", s.contraction_violations},
              {"worst_minorization", s.worst_minorization},
              {"worst_coupling", s.worst_coupling},
              {"worst_contraction", s.worst_contraction},
              {"worst_lyapunov", s.worst_lyapunov}};
}

inline json to_json(const DecayReport& d) {
  return json{{"samples", d.samples},
              {"violations", d.violations},
              {"worst_ratio", d.worst_ratio},
              {"empirical_rate", d.empirical_rate},
              {"certified_rate", d.certified_rate},
              {"gap_ratio", d.gap_ratio},
              {"message", d.message}};
}

inline CertificateOptions certificate_options(const RunConfig& cfg) {
  CertificateOptions o;
  o.eps = cfg.certificate.eps;
  o.T0 = cfg.certificate.T0;
  o.T1 = cfg.certificate.T1;
  o.T = cfg.certificate.T;
  o.norm_weight = to_weight(cfg.certificate.norm_weight);
  o.power = PowerOptions{cfg.scheme.power_tol, cfg.scheme.max_iter};
  return o;
}

/// Decay samples: f1 itself, then fields with <phi1, f> = 0, then a perturbation of f1.
inline std::vector<Vector> decay_samples(const CertificateData& cd, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> out{cd.triplet.f1};
  for (std::size_t k = 0; k < count; ++k) out.push_back(orthogonal_sample(cd.triplet, rng));
  out.push_back(cd.triplet.f1 + 0.5 * orthogonal_sample(cd.triplet, rng));
  return out;
}

}  // namespace kfp
