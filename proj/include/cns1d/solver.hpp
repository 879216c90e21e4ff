#pragma once

// Time stepping for the forced system
//   rho_t + (rho u)_x = 0
//   du + (u u_x + A^2 (log rho)_x) dt = (u_xx / rho) dt + dW
// on the staggered grid, plus trajectory integration with per-step
// functional bookkeeping.
//
// One step, at fixed dt:
//  1. conservative first-order upwind transport of the density; the wall
//     fluxes vanish with the velocity, so the mass quadrature is conserved
//     to round-off and positive densities stay positive under the CFL bound;
//  2. explicit advection and pressure forces, additive noise, and a
//     backward-Euler viscous solve (tridiagonal, Thomas algorithm).
//
// Two stencil choices exist to make the unforced semi-discrete entropy
// balance d/dt H = -||u_x||^2 close without a spatial remainder, so the
// fully discrete residual is O(dt) per unit time:
//  * the advective force pairs cell-averaged upwind mass fluxes with
//    velocity differences, which cancels the transport contribution to the
//    kinetic energy exactly;
//  * the pressure force carries the ratio of upwinded to averaged face
//    density, which cancels the internal-energy production of the upwind
//    mass flux exactly.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "field.hpp"
#include "functionals.hpp"
#include "noise.hpp"

namespace cns1d {

// ============================================================================
// Step
// ============================================================================

struct StepSpec {
  double dt = 0.0;
  double cfl_max = 0.5;  // in (0,1]
};

inline double cfl_check(const State& s, const StepSpec& spec) {
  double umax = 0.0;
  for (double v : s.u) umax = std::max(umax, std::abs(v));
  return umax * spec.dt / s.grid.dx;
}

inline State step(const State& s, const ModelParams& mp, const StepSpec& spec,
                  const NoiseIncrement& dW) {
  const int n = s.grid.n_cells;
  const double dx = s.grid.dx;
  const double dt = spec.dt;
  if (!(dt > 0.0)) throw StepError("step: dt must be positive");
  if (static_cast<int>(dW.dw.size()) != s.grid.n_faces()) {
    throw StepError("step: noise increment size does not match grid");
  }
  if (dW.dt != dt) {
    throw StepError("step: noise increment was sampled for dt " +
                    std::to_string(dW.dt) + ", step uses " +
                    std::to_string(dt));
  }

  const double cfl = cfl_check(s, spec);
  if (cfl > spec.cfl_max) {
    throw StepError("step: CFL number " + std::to_string(cfl) +
                    " exceeds limit " + std::to_string(spec.cfl_max));
  }

  // Upwind mass fluxes at faces; walls carry u = 0.
  std::vector<double> F(n + 1, 0.0);
  for (int i = 1; i < n; ++i) {
    F[i] = s.u[i] >= 0.0 ? s.u[i] * s.rho[i - 1] : s.u[i] * s.rho[i];
  }

  std::vector<double> rho_star(n);
  const double lam = dt / dx;
  for (int j = 0; j < n; ++j) {
    rho_star[j] = s.rho[j] - lam * (F[j + 1] - F[j]);
    if (!(rho_star[j] > 0.0)) {
      throw StepError("step: transported density non-positive (" +
                      std::to_string(rho_star[j]) + ") in cell " +
                      std::to_string(j),
                      -1, j);
    }
  }

  // Face densities (arithmetic means) and log densities after transport.
  std::vector<double> m(n + 1, 0.0);
  for (int i = 1; i < n; ++i) m[i] = 0.5 * (rho_star[i - 1] + rho_star[i]);
  std::vector<double> logr(n);
  for (int j = 0; j < n; ++j) logr[j] = std::log(rho_star[j]);

  // Explicit forces at interior faces.
  std::vector<double> rhs(n + 1, 0.0);
  const double A2 = mp.A * mp.A;
  for (int i = 1; i < n; ++i) {
    const double c_right = 0.5 * (F[i] + F[i + 1]);
    const double c_left = 0.5 * (F[i - 1] + F[i]);
    const double adv = -(c_right * (s.u[i + 1] - s.u[i]) +
                         c_left * (s.u[i] - s.u[i - 1])) /
                       (2.0 * dx * m[i]);
    const double rho_up = s.u[i] >= 0.0 ? rho_star[i - 1] : rho_star[i];
    const double pre = -A2 * (rho_up / m[i]) * (logr[i] - logr[i - 1]) / dx;
    rhs[i] = m[i] * (s.u[i] + dt * (adv + pre) + dW.dw[i]);
  }

  // (m_i + 2 eta) u_i - eta (u_{i-1} + u_{i+1}) = m_i b_i,  eta = dt/dx^2.
  // Strictly diagonally dominant, so the Thomas sweep cannot break down for
  // valid inputs; the pivot check below is defensive.
  const double eta = dt / (dx * dx);
  std::vector<double> u_new(n + 1, 0.0);
  std::vector<double> cp(n, 0.0);  // scratch for modified upper diagonal
  {
    const int nu = n - 1;  // unknowns at faces 1..n-1
    double den = m[1] + 2.0 * eta;
    if (!(std::abs(den) > 1e-300)) {
      throw StepError("step: viscous solve pivot vanished at face 1");
    }
    cp[1] = -eta / den;
    u_new[1] = rhs[1] / den;
    for (int i = 2; i <= nu; ++i) {
      den = (m[i] + 2.0 * eta) + eta * cp[i - 1];
      if (!(std::abs(den) > 1e-300)) {
        throw StepError("step: viscous solve pivot vanished at face " +
                        std::to_string(i));
      }
      cp[i] = -eta / den;
      u_new[i] = (rhs[i] + eta * u_new[i - 1]) / den;
    }
    for (int i = nu - 1; i >= 1; --i) {
      u_new[i] -= cp[i] * u_new[i + 1];
    }
  }

  State out;
  out.grid = s.grid;
  out.rho = std::move(rho_star);
  out.u = std::move(u_new);
  out.time = s.time + dt;
  return out;
}

// ============================================================================
// Trajectory records
// ============================================================================

struct Sample {
  double t = 0.0;
  FunctionalReport f;
  double mass = 0.0;
  double rhox_sq = 0.0;       // int rho_x^2
  double l2_rho_dev = 0.0;    // || rho - 1 ||
  double l2_u = 0.0;          // || u ||
  double diss_u_cum = 0.0;    // int_0^t ||u_x||^2, left-endpoint sum
  double diss_logrho_cum = 0.0;
  double psi = 0.0;           // E + (1/4) diss_u + (A^2/4) diss_logrho
  double psi_sup = 0.0;       // running sup of psi
};

struct Snapshot {
  long long step = 0;
  State state;
};

struct TrajectoryRecord {
  int trajectory_id = 0;
  std::uint64_t seed = 0;
  double dt = 0.0;
  double sample_stride = 0.0;
  long long n_steps = 0;
  double sigma_sup_sq = 0.0;
  double H0 = 0.0;
  double E0 = 0.0;
  std::vector<Sample> samples;
  std::vector<Snapshot> snapshots;
  State final_state;
  // Running totals carried every step (not just at samples).
  double diss_u_cum = 0.0;
  double diss_logrho_cum = 0.0;
  double psi_sup = 0.0;
  // sup over steps of psi(t) - (1/2)||sigma||_sup^2 t - E(0); the statistic
  // fed to the exponential tail estimate.
  double mart_sup = 0.0;
  double max_mass_dev = 0.0;
  double min_rho_seen = std::numeric_limits<double>::infinity();
};

struct PathOptions {
  long long sample_stride_steps = 0;    // 0: samples only at t=0 and t=T
  long long snapshot_stride_steps = 0;  // 0: no snapshots
  // Streaming hook, fired at every sample point with the sample, the state
  // it was taken from, and the record as accumulated so far.
  std::function<void(const Sample&, const State&, const TrajectoryRecord&)>
      on_sample;
  // Resume support: carried totals from a previous leg of the same
  // trajectory. Times are derived from init.time.
  double diss_u0 = 0.0;
  double diss_logrho0 = 0.0;
  double psi_sup0 = -std::numeric_limits<double>::infinity();
  double mart_sup0 = -std::numeric_limits<double>::infinity();
  double max_mass_dev0 = 0.0;
  double min_rho0 = std::numeric_limits<double>::infinity();
  double H00 = std::numeric_limits<double>::quiet_NaN();
  double E00 = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// Per-step bookkeeping shared by single and paired integration.
class PathTracker {
 public:
  PathTracker(const ModelParams& mp, const StepSpec& spec, double sigma_sup_sq,
              const PathOptions& opts, int trajectory_id, std::uint64_t seed,
              long long n_steps_total)
      : mp_(mp), spec_(spec), opts_(opts) {
    rec_.trajectory_id = trajectory_id;
    rec_.seed = seed;
    rec_.dt = spec.dt;
    rec_.sample_stride =
        opts.sample_stride_steps > 0 ? opts.sample_stride_steps * spec.dt : 0.0;
    rec_.n_steps = n_steps_total;
    rec_.sigma_sup_sq = sigma_sup_sq;
    rec_.diss_u_cum = opts.diss_u0;
    rec_.diss_logrho_cum = opts.diss_logrho0;
    rec_.psi_sup = opts.psi_sup0;
    rec_.mart_sup = opts.mart_sup0;
    rec_.max_mass_dev = opts.max_mass_dev0;
    rec_.min_rho_seen = opts.min_rho0;
  }

  // Observe the state at step k (time k*dt); returns the functional report
  // so callers can reuse it.
  const FunctionalReport& observe(long long k, const State& s) {
    rep_ = functional_report(s, mp_);
    const double t = static_cast<double>(k) * spec_.dt;
    if (first_) {
      first_ = false;
      if (std::isnan(opts_.H00)) {
        rec_.H0 = rep_.H;
        rec_.E0 = rep_.E;
      } else {
        rec_.H0 = opts_.H00;
        rec_.E0 = opts_.E00;
      }
    }
    const double A2 = mp_.A * mp_.A;
    const double psi = psi_value(
        rep_.E, 0.25 * rec_.diss_u_cum + 0.25 * A2 * rec_.diss_logrho_cum);
    rec_.psi_sup = std::max(rec_.psi_sup, psi);
    rec_.mart_sup = std::max(
        rec_.mart_sup, psi - 0.5 * rec_.sigma_sup_sq * t - rec_.E0);
    const double m = integrate_centers(s.grid, s.rho);
    rec_.max_mass_dev = std::max(rec_.max_mass_dev, std::abs(m - 1.0));
    rec_.min_rho_seen = std::min(rec_.min_rho_seen, rep_.min_rho);

    const bool at_sample =
        opts_.sample_stride_steps > 0
            ? (k % opts_.sample_stride_steps == 0 || k == rec_.n_steps)
            : (k == 0 || k == rec_.n_steps);
    if (at_sample) {
      Sample smp;
      smp.t = t;
      smp.f = rep_;
      smp.mass = m;
      smp.rhox_sq = grad_rho_sq(s);
      smp.l2_rho_dev = std::sqrt(l2_rho_dev_sq(s));
      smp.l2_u = std::sqrt(l2_u_norm_sq(s));
      smp.diss_u_cum = rec_.diss_u_cum;
      smp.diss_logrho_cum = rec_.diss_logrho_cum;
      smp.psi = psi;
      smp.psi_sup = rec_.psi_sup;
      rec_.samples.push_back(smp);
      if (opts_.on_sample) opts_.on_sample(smp, s, rec_);
    }
    if (opts_.snapshot_stride_steps > 0 &&
        (k % opts_.snapshot_stride_steps == 0 || k == rec_.n_steps)) {
      rec_.snapshots.push_back(Snapshot{k, s});
    }
    return rep_;
  }

  // Left-endpoint contribution of [t_k, t_k + dt] using the report from the
  // preceding observe call.
  void accumulate() {
    rec_.diss_u_cum += spec_.dt * rep_.grad_u_sq;
    rec_.diss_logrho_cum += spec_.dt * rep_.grad_logrho_sq;
  }

  TrajectoryRecord take(State final_state) {
    rec_.final_state = std::move(final_state);
    return std::move(rec_);
  }

 private:
  ModelParams mp_;
  StepSpec spec_;
  PathOptions opts_;
  TrajectoryRecord rec_;
  FunctionalReport rep_;
  bool first_ = true;
};

inline long long steps_for(double T, double dt) {
  if (!(T > 0.0) || !(dt > 0.0)) {
    throw ValidationError("integration horizon and dt must be positive");
  }
  const long long n = std::llround(T / dt);
  if (n < 1 || std::abs(n * dt - T) > 1e-9 * std::max(1.0, T)) {
    throw ValidationError("integration horizon must be a multiple of dt");
  }
  return n;
}

}  // namespace detail

// ============================================================================
// Single-path integration
// ============================================================================

// Integrates from init.time to T with the noise stream keyed on
// (seed, trajectory_id, absolute step index). Starting from a resumed state
// at init.time > 0 replays the identical stream, so a resumed run is
// bitwise identical to an uninterrupted one.
inline TrajectoryRecord integrate_path(const State& init,
                                       const ModelParams& mp,
                                       const StepSpec& spec,
                                       const NoiseBasis& basis,
                                       std::uint64_t seed, int trajectory_id,
                                       double T, const PathOptions& opts = {}) {
  validate_state(init);
  if (!(basis.grid == init.grid)) {
    throw ValidationError("integrate_path: noise basis grid mismatch");
  }
  const long long n_total = detail::steps_for(T, spec.dt);
  const long long k0 = std::llround(init.time / spec.dt);
  if (std::abs(k0 * spec.dt - init.time) > 1e-9 * std::max(1.0, T)) {
    throw ValidationError(
        "integrate_path: initial time is not aligned with the step size");
  }
  if (k0 > n_total) {
    throw ValidationError("integrate_path: initial time beyond horizon");
  }

  detail::PathTracker tracker(mp, spec, basis.sup_sq, opts, trajectory_id,
                              seed, n_total);
  State s = init;
  for (long long k = k0;; ++k) {
    tracker.observe(k, s);
    if (k == n_total) break;
    tracker.accumulate();
    const NoiseIncrement dW = sample_increment(
        basis, RngKey{seed, static_cast<std::uint64_t>(trajectory_id),
                      static_cast<std::uint64_t>(k)},
        spec.dt);
    try {
      s = step(s, mp, spec, dW);
    } catch (const StepError& e) {
      throw StepError(std::string(e.what()) + " [trajectory " +
                          std::to_string(trajectory_id) + ", step " +
                          std::to_string(k) + "]",
                      k, e.cell);
    }
  }
  return tracker.take(std::move(s));
}

// ============================================================================
// Paired paths under one noise realization
// ============================================================================

struct RelEntPoint {
  double t = 0.0;
  double h_r = 0.0;       // relative entropy of state a given state b
  double envelope = 0.0;  // H_r(0) * exp(int_0^t c(s) ds), left-endpoint sum
};

struct PairedResult {
  TrajectoryRecord a;
  TrajectoryRecord b;
  std::vector<RelEntPoint> series;
};

// Both states see the identical increment sequence (same seed, trajectory
// id 0). The envelope uses the growth coefficient of the reference state b.
inline PairedResult paired_paths(const State& init_a, const State& init_b,
                                 const ModelParams& mp, const StepSpec& spec,
                                 const NoiseBasis& basis, std::uint64_t seed,
                                 double T, const PathOptions& opts = {}) {
  validate_state(init_a);
  validate_state(init_b);
  if (!(init_a.grid == init_b.grid)) {
    throw ValidationError("paired_paths: states live on different grids");
  }
  if (!(basis.grid == init_a.grid)) {
    throw ValidationError("paired_paths: noise basis grid mismatch");
  }
  if (init_a.time != 0.0 || init_b.time != 0.0) {
    throw ValidationError("paired_paths: both states must start at time 0");
  }
  const long long n_total = detail::steps_for(T, spec.dt);
  const long long stride =
      opts.sample_stride_steps > 0 ? opts.sample_stride_steps : n_total;

  detail::PathTracker ta(mp, spec, basis.sup_sq, opts, 0, seed, n_total);
  detail::PathTracker tb(mp, spec, basis.sup_sq, opts, 0, seed, n_total);

  PairedResult out;
  State sa = init_a;
  State sb = init_b;
  const double hr0 = relative_entropy(init_a, init_b, mp);
  double c_int = 0.0;
  for (long long k = 0;; ++k) {
    ta.observe(k, sa);
    tb.observe(k, sb);
    if (k % stride == 0 || k == n_total) {
      out.series.push_back(RelEntPoint{k * spec.dt,
                                       relative_entropy(sa, sb, mp),
                                       hr0 * std::exp(c_int)});
    }
    if (k == n_total) break;
    ta.accumulate();
    tb.accumulate();
    c_int += spec.dt * gronwall_coefficient(sb, mp, sup_inv_density(sa));
    const NoiseIncrement dW =
        sample_increment(basis, RngKey{seed, 0, static_cast<std::uint64_t>(k)},
                         spec.dt);
    sa = step(sa, mp, spec, dW);
    sb = step(sb, mp, spec, dW);
  }
  out.a = ta.take(std::move(sa));
  out.b = tb.take(std::move(sb));
  return out;
}

}  // namespace cns1d
