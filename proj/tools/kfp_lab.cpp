// kfp_lab: config-driven front end. Exit codes: 0 pass, 1 verdict failure,
// 2 configuration error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kfp/config.hpp"
#include "kfp/experiments.hpp"
#include "kfp/io.hpp"

namespace fs = std::filesystem;
using namespace kfp;

namespace {

void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p);
  os << j.dump(2) << "\n";
}

void write_field(const fs::path& p, const PhaseGrid& g, const PhaseField& f) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  write_snapshot(os, g.Nx, g.Nv, f);
}

int cmd_run(const RunConfig& cfg, const fs::path& out) {
  const Setup s = make_setup(cfg);
  PhaseField f0;
  if (cfg.run.initial == "maxwellian") {
    f0.values = grid_maxwellian(s.g);
  } else if (cfg.run.initial == "random") {
    Rng rng(cfg.seed);
    f0.values = random_nonnegative(s.g.size(), rng);
  } else if (cfg.run.initial == "delta") {
    f0 = discrete_delta(s.g.size(), nearest_node(s.g, cfg.run.x0, cfg.run.v0), s.g.cell_volume);
  } else {
    throw ConfigError("run.initial: expected maxwellian, random or delta");
  }
  const Stepper st(s.G, s.scheme);
  Table t{{"t", "mass", "min", "max"}, {}};
  const double cv = s.g.cell_volume;
  const Trajectory tr = evolve_forward(f0, st, cfg.run.T, cfg.run.snapshots, [&](std::size_t, double time, const Vector& f) {
    t.rows.push_back({time, f.sum() * cv, f.minCoeff(), f.maxCoeff()});
  });
  write_csv(t, out / "run_trajectory.csv");
  for (std::size_t k = 0; k < tr.snapshots.size(); ++k)
    write_field(out / ("run_snapshot_" + std::to_string(k) + ".kfpf"), s.g, tr.snapshots[k]);
  write_json(out / "run.json", json{{"name", "run"},
                                    {"config_hash", config_hash(cfg)},
                                    {"config", to_json(cfg)},
                                    {"steps", tr.steps},
                                    {"min_relative", tr.min_relative},
                                    {"snapshots", tr.snapshots.size()}});
  std::cout << "run: " << tr.steps << " steps, " << tr.snapshots.size() << " snapshots -> " << out << "\n";
  return 0;
}

int cmd_spectrum(const RunConfig& cfg, const fs::path& out) {
  const Setup s = make_setup(cfg);
  const EigenTriplet et =
      principal_triplet(s.G, cfg.spectrum.T, s.scheme, PowerOptions{cfg.scheme.power_tol, cfg.scheme.max_iter});
  json j = to_json(et);
  const bool ok = et.residual_primal <= cfg.scheme.residual_tol && et.residual_dual <= cfg.scheme.residual_tol;
  j["verdict"] = ok ? "pass" : "fail";
  write_json(out / "spectrum.json", json{{"name", "spectrum"}, {"config_hash", config_hash(cfg)}, {"config", to_json(cfg)}, {"triplet", j}});
  write_field(out / "f1.kfpf", s.g, PhaseField{et.f1, 0.0, Problem::Primal, ""});
  write_field(out / "phi1.kfpf", s.g, PhaseField{et.phi1, 0.0, Problem::Dual, ""});
  std::cout << "lambda1 = " << et.lambda1 << ", residuals " << et.residual_primal << " / " << et.residual_dual << "\n";
  return ok ? 0 : 1;
}

// Evolves by one certificate horizon with the stepper.
LinearMap horizon_map(const Stepper& st, double T, double dt) {
  const std::size_t n = steps_for(T, dt);
  return [&st, n](Vector& f) {
    for (std::size_t k = 0; k < n; ++k) st.forward(f);
  };
}

int certify_and_verify(const RunConfig& cfg, const fs::path& out, const HarrisCertificate* replay) {
  const Setup s = make_setup(cfg);
  const CertificateData cd = certificate(s.G, s.scheme, certificate_options(cfg));
  CertificateData used = cd;
  json check = json::object();
  bool ok = true;
  if (replay) {
    const double dl = std::abs(replay->lambda1 - cd.cert.lambda1);
    const double dg = std::abs(replay->gamma - cd.cert.gamma);
    check = json{{"lambda1_difference", dl}, {"gamma_difference", dg}};
    ok = dl <= 1e-9 * std::max(1.0, std::abs(cd.cert.lambda1)) && dg <= 1e-9;
    used.cert = *replay;
  }
  const Stepper st(s.G, s.scheme);
  const DecayReport rep = verify_decay(used, decay_samples(used, cfg.certificate.samples, cfg.seed),
                                       cfg.certificate.periods, horizon_map(st, used.cert.T, s.scheme.dt));
  const SoundnessReport snd = check_soundness(used, cfg.certificate.soundness_samples, cfg.seed + 1);
  ok = ok && rep.violations == 0 && snd.minorization_violations == 0 && snd.coupling_violations == 0 &&
       snd.contraction_violations == 0 && snd.lyapunov_violations == 0 && used.cert.gamma < 1.0;

  Table t{{"sample", "n", "t", "d", "envelope"}, {}};
  for (std::size_t k = 0; k < rep.traces.size(); ++k)
    for (std::size_t n = 0; n < rep.traces[k].t.size(); ++n)
      t.rows.push_back({double(k), double(n), rep.traces[k].t[n], rep.traces[k].d[n], rep.traces[k].envelope[n]});
  const std::string stem = replay ? "replay" : "certificate";
  write_csv(t, out / (stem + "_decay.csv"));
  json j{{"name", stem},
         {"config_hash", config_hash(cfg)},
         {"config", to_json(cfg)},
         {"certificate", to_json(used.cert)},
         {"triplet", to_json(cd.triplet)},
         {"decay", to_json(rep)},
         {"soundness", to_json(snd)},
         {"verdict", ok ? "pass" : "fail"}};
  if (replay) j["replay_check"] = check;
  write_json(out / (stem + ".json"), j);
  std::cout << "gamma = " << used.cert.gamma << ", lambda1 = " << used.cert.lambda1 << ", lambda2 = " << used.cert.lambda2
            << ", decay violations " << rep.violations << " -> " << (ok ? "pass" : "fail") << "\n";
  return ok ? 0 : 1;
}

int cmd_replay(const std::string& path, const fs::path* out_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read certificate " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("certificate file is not valid JSON: ") + e.what());
  }
  if (!j.contains("config") || !j.contains("certificate")) throw ConfigError("certificate file lacks config or certificate");
  const RunConfig cfg = parse_config_json(j["config"]);
  const HarrisCertificate h = certificate_from_json(j["certificate"]);
  const fs::path out = out_override ? *out_override : fs::path(cfg.output_dir);
  fs::create_directories(out);
  return certify_and_verify(cfg, out, &h);
}

int cmd_experiment(const RunConfig& cfg, const std::string& name, const fs::path& out) {
  auto emit = [&](const ExperimentResult& r) {
    write_result(r, out);
    std::cout << r.name << ": " << (r.passed() ? "pass" : "fail") << "\n";
    for (const auto& [k, v] : r.verdicts)
      if (!v) std::cout << "  failed: " << k << "\n";
    return r.passed();
  };
  bool ok = true;
  const bool all = name == "all";
  bool known = false;
  if (all || name == "growth") known = true, ok &= emit(run_growth(cfg));
  if (all || name == "duality") known = true, ok &= emit(run_duality(cfg));
  if (all || name == "mass_balance") known = true, ok &= emit(run_mass_balance(cfg));
  if (all || name == "equilibrium") known = true, ok &= emit(run_equilibrium(cfg));
  if (all || name == "harnack") known = true, ok &= emit(run_harnack(cfg));
  if (name == "ultracontractivity") known = true, ok &= emit(run_ultracontractivity(cfg).result);
  // the batch run only includes it when the weight can confine strongly
  if (all) {
    if (cfg.weight.kind == "exp") ok &= emit(run_ultracontractivity(cfg).result);
    else std::cout << "ultracontractivity: skipped (needs an exp weight)\n";
  }
  if (!known) throw ConfigError("unknown experiment '" + name + "'");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinetic Fokker-Planck slab lab"};
  app.require_subcommand(1);
  std::string config_path, out_dir, experiment_name, replay_path;

  auto add_common = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("-c,--config", config_path, "JSON run configuration");
    if (required) opt->required();
    sub->add_option("-o,--out", out_dir, "output directory (overrides output_dir)");
  };
  auto* run = app.add_subcommand("run", "evolve the configured initial datum, write snapshots");
  auto* spectrum = app.add_subcommand("spectrum", "principal eigentriplet");
  auto* certify = app.add_subcommand("certify", "Doeblin-Harris certificate and decay verification");
  auto* experiment = app.add_subcommand("experiment", "named experiment (growth, duality, ultracontractivity, harnack, mass_balance, equilibrium, all)");
  auto* report = app.add_subcommand("report-data", "spectrum, certificate and every experiment into one directory");
  add_common(run, true);
  add_common(spectrum, true);
  add_common(certify, false);
  add_common(experiment, true);
  add_common(report, true);
  certify->add_option("--replay", replay_path, "re-verify a certificate JSON written by certify");
  experiment->add_option("name", experiment_name, "experiment name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const fs::path override_out = out_dir;
    if (certify->parsed() && !replay_path.empty()) return cmd_replay(replay_path, out_dir.empty() ? nullptr : &override_out);
    if (config_path.empty()) throw ConfigError("--config is required");
    const RunConfig cfg = parse_config(config_path);
    const fs::path out = out_dir.empty() ? fs::path(cfg.output_dir) : override_out;
    fs::create_directories(out);
    if (run->parsed()) return cmd_run(cfg, out);
    if (spectrum->parsed()) return cmd_spectrum(cfg, out);
    if (certify->parsed()) return certify_and_verify(cfg, out, nullptr);
    if (experiment->parsed()) return cmd_experiment(cfg, experiment_name, out);
    if (report->parsed()) {
      int rc = cmd_spectrum(cfg, out);
      rc = std::max(rc, certify_and_verify(cfg, out, nullptr));
      rc = std::max(rc, cmd_experiment(cfg, "all", out));
      return rc;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
