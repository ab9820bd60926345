#pragma once

// Time integration of the primal (forward) and dual (backward) problems.

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "kfp/discrete_operator.hpp"
#include "kfp/error.hpp"

namespace kfp {

using Matrix = Eigen::MatrixXd;

enum class Problem { Primal, Dual };

struct PhaseField {
  Vector values;
  double time = 0.0;
  Problem problem = Problem::Primal;
  std::string weight_context;
};

enum class SchemeKind { ImplicitEuler, CrankNicolson, ExplicitEuler };

inline std::string to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::ImplicitEuler: return "implicit_euler";
    case SchemeKind::CrankNicolson: return "crank_nicolson";
    case SchemeKind::ExplicitEuler: return "explicit_euler";
  }
  return "?";
}

struct TimeScheme {
  SchemeKind kind = SchemeKind::ImplicitEuler;
  double dt = 1e-2;
  bool strict_positivity = true;
};

/// Default step min(dx, dv^2)/4.
inline double default_dt(const PhaseGrid& g) { return std::min(g.dx, g.dv * g.dv) / 4.0; }

/// Number of steps n with n dt = t, or an error if dt does not divide t.
inline std::size_t steps_for(double t, double dt) {
  const double r = t / dt;
  const double n = std::round(r);
  if (n < 0.0 || std::abs(r - n) > 1e-9 * std::max(1.0, n))
    throw ConfigError("time step " + std::to_string(dt) + " does not divide t = " + std::to_string(t));
  return static_cast<std::size_t>(n);
}

/// One-step propagator S_dt with a reusable factorization; backward() applies S_dt^T.
class Stepper {
 public:
  Stepper(const GeneratorMatrix& G, const TimeScheme& scheme) : scheme_(scheme), n_(G.L.rows()) {
    if (!(scheme.dt > 0.0)) throw ConfigError("time step must be positive");
    SparseMatrix I(n_, n_);
    I.setIdentity();
    switch (scheme.kind) {
      case SchemeKind::ImplicitEuler: {
        if (!metzler_check(G.L).ok())
          throw NumericalError("implicit Euler requires a Metzler generator (positivity of the step)");
        factor(I - scheme.dt * G.L);
        break;
      }
      case SchemeKind::CrankNicolson:
        factor(I - 0.5 * scheme.dt * G.L);
        rhs_ = I + 0.5 * scheme.dt * G.L;
        break;
      case SchemeKind::ExplicitEuler:
        if (scheme.dt > G.explicit_dt_bound * (1.0 + 1e-12))
          throw ConfigError("explicit Euler: dt exceeds the stability bound " + std::to_string(G.explicit_dt_bound));
        rhs_ = I + scheme.dt * G.L;
        break;
    }
  }

  const TimeScheme& scheme() const { return scheme_; }
  Eigen::Index size() const { return n_; }

  /// f <- S_dt f (columnwise for matrices).
  template <typename Derived>
  void forward(Eigen::MatrixBase<Derived>& f) const {
    switch (scheme_.kind) {
      case SchemeKind::ImplicitEuler: f = lu_->solve(f.eval()); break;
      case SchemeKind::CrankNicolson: f = lu_->solve((rhs_ * f).eval()); break;
      case SchemeKind::ExplicitEuler: f = (rhs_ * f).eval(); break;
    }
  }

  /// g <- S_dt^T g.
  template <typename Derived>
  void backward(Eigen::MatrixBase<Derived>& g) const {
    switch (scheme_.kind) {
      case SchemeKind::ImplicitEuler: g = lu_->transpose().solve(g.eval()); break;
      case SchemeKind::CrankNicolson: {
        Matrix tmp = lu_->transpose().solve(g.eval());
        g = rhs_.transpose() * tmp;
        break;
      }
      case SchemeKind::ExplicitEuler: g = (rhs_.transpose() * g).eval(); break;
    }
  }

  /// Dense S_dt^n, built column block by column block.
  Matrix power(std::size_t n) const {
    Matrix X = Matrix::Identity(n_, n_);
    for (std::size_t s = 0; s < n; ++s) forward(X);
    return X;
  }

 private:
  void factor(const SparseMatrix& A) {
    lu_ = std::make_shared<Eigen::SparseLU<SparseMatrix>>();
    lu_->analyzePattern(A);
    lu_->factorize(A);
    if (lu_->info() != Eigen::Success) throw NumericalError("step matrix factorization failed (singular step operator)");
  }

  TimeScheme scheme_;
  Eigen::Index n_;
  std::shared_ptr<Eigen::SparseLU<SparseMatrix>> lu_;
  SparseMatrix rhs_;
};

struct Trajectory {
  std::vector<PhaseField> snapshots;
  std::size_t steps = 0;
  double min_relative = 0.0;  // min over steps of min(f)/max|f|
};

using StepObserver = std::function<void(std::size_t step, double t, const Vector& f)>;

inline void check_positivity(const Vector& f, bool strict, double& min_rel, double t) {
  const double scale = f.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  const double rel = f.minCoeff() / scale;
  min_rel = std::min(min_rel, rel);
  if (strict && rel < -1e-13)
    throw NumericalError("positivity violated at t = " + std::to_string(t) + ": min/max = " + std::to_string(rel));
}

/// Forward evolution; snapshot times must be multiples of dt and not exceed T.
inline Trajectory evolve_forward(const PhaseField& f0, const Stepper& stepper, double T,
                                 std::vector<double> snapshot_times = {}, const StepObserver& observer = {}) {
  if (!(T > 0.0)) throw ConfigError("evolve_forward: horizon T must be positive");
  const double dt = stepper.scheme().dt;
  const std::size_t n = steps_for(T, dt);
  if (snapshot_times.empty()) snapshot_times = {T};
  std::vector<std::size_t> snap_steps;
  for (double t : snapshot_times) snap_steps.push_back(steps_for(t, dt));
  std::sort(snap_steps.begin(), snap_steps.end());

  Trajectory tr;
  tr.steps = n;
  const bool check = f0.values.minCoeff() >= 0.0 && stepper.scheme().kind == SchemeKind::ImplicitEuler;
  double min_rel = 1.0;
  Vector f = f0.values;
  std::size_t next = 0;
  auto snap = [&](std::size_t s) {
    while (next < snap_steps.size() && snap_steps[next] == s) {
      tr.snapshots.push_back({f, static_cast<double>(s) * dt, Problem::Primal, f0.weight_context});
      ++next;
    }
  };
  if (observer) observer(0, 0.0, f);
  snap(0);
  for (std::size_t s = 1; s <= n; ++s) {
    stepper.forward(f);
    if (check) check_positivity(f, stepper.scheme().strict_positivity, min_rel, s * dt);
    if (observer) observer(s, static_cast<double>(s) * dt, f);
    snap(s);
  }
  tr.min_relative = check ? min_rel : f.minCoeff() / std::max(1e-300, f.cwiseAbs().maxCoeff());
  return tr;
}

/// Backward dual evolution g_n = S_dt^T g_{n+1} from g(T) = gT; snapshots are listed
/// at decreasing times, the last one being g(0).
inline Trajectory evolve_dual_backward(const PhaseField& gT, const Stepper& stepper, double T,
                                       std::vector<double> snapshot_times = {}, const StepObserver& observer = {}) {
  if (!(T > 0.0)) throw ConfigError("evolve_dual_backward: horizon T must be positive");
  const double dt = stepper.scheme().dt;
  const std::size_t n = steps_for(T, dt);
  if (snapshot_times.empty()) snapshot_times = {0.0};
  std::vector<std::size_t> snap_steps;
  for (double t : snapshot_times) snap_steps.push_back(steps_for(t, dt));
  std::sort(snap_steps.rbegin(), snap_steps.rend());

  Trajectory tr;
  tr.steps = n;
  Vector g = gT.values;
  std::size_t next = 0;
  auto snap = [&](std::size_t s) {
    while (next < snap_steps.size() && snap_steps[next] == s) {
      tr.snapshots.push_back({g, static_cast<double>(s) * dt, Problem::Dual, gT.weight_context});
      ++next;
    }
  };
  if (observer) observer(n, T, g);
  snap(n);
  for (std::size_t s = n; s-- > 0;) {
    stepper.backward(g);
    if (observer) observer(s, static_cast<double>(s) * dt, g);
    snap(s);
  }
  tr.min_relative = g.minCoeff() / std::max(1e-300, g.cwiseAbs().maxCoeff());
  return tr;
}

/// Discrete delta: 1/cell_volume at node z0.
inline PhaseField discrete_delta(std::size_t N, std::size_t z0, double cell_volume) {
  if (z0 >= N) throw ConfigError("discrete_delta: node index out of range");
  PhaseField f;
  f.values = Vector::Zero(static_cast<Eigen::Index>(N));
  f.values[static_cast<Eigen::Index>(z0)] = 1.0 / cell_volume;
  return f;
}

struct FundamentalSolution {
  PhaseField field;
  double mass = 0.0;
  double min_value = 0.0;
  double weighted_sup = 0.0;  // max |f| w, w = 1 unless weights supplied
};

inline FundamentalSolution fundamental_solution(std::size_t z0, const GeneratorMatrix& G, const Stepper& stepper,
                                                double T, const std::vector<double>& weight = {}) {
  const PhaseField f0 = discrete_delta(G.size(), z0, G.cell_volume);
  Trajectory tr = evolve_forward(f0, stepper, T);
  FundamentalSolution fs;
  fs.field = tr.snapshots.back();
  const Vector& f = fs.field.values;
  fs.mass = f.sum() * G.cell_volume;
  fs.min_value = f.minCoeff();
  for (Eigen::Index k = 0; k < f.size(); ++k)
    fs.weighted_sup = std::max(fs.weighted_sup, std::abs(f[k]) * (weight.empty() ? 1.0 : weight[k]));
  return fs;
}

// Snapshot file: "KFPF", u32 version, u32 Nx, u32 Nv, f64 time, Nx*Nv f64 (x-major), little-endian.

inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace detail {
template <typename T>
void put_le(std::ostream& os, T value) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}
template <typename T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw ConfigError("snapshot: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}
}  // namespace detail

inline void write_snapshot(std::ostream& os, std::size_t Nx, std::size_t Nv, const PhaseField& f) {
  if (static_cast<std::size_t>(f.values.size()) != Nx * Nv) throw ConfigError("snapshot: field size mismatch");
  os.write("KFPF", 4);
  detail::put_le<std::uint32_t>(os, kSnapshotVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(Nx));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(Nv));
  detail::put_le<double>(os, f.time);
  for (Eigen::Index k = 0; k < f.values.size(); ++k) detail::put_le<double>(os, f.values[k]);
}

struct Snapshot {
  std::size_t Nx = 0, Nv = 0;
  PhaseField field;
};

inline Snapshot read_snapshot(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "KFPF", 4) != 0) throw ConfigError("snapshot: bad magic");
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != kSnapshotVersion) throw ConfigError("snapshot: unsupported version " + std::to_string(version));
  Snapshot s;
  s.Nx = detail::get_le<std::uint32_t>(is);
  s.Nv = detail::get_le<std::uint32_t>(is);
  s.field.time = detail::get_le<double>(is);
  s.field.values.resize(static_cast<Eigen::Index>(s.Nx * s.Nv));
  for (Eigen::Index k = 0; k < s.field.values.size(); ++k) s.field.values[k] = detail::get_le<double>(is);
  return s;
}

}  // namespace kfp
