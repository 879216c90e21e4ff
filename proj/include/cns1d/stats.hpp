#pragma once

// Ensemble Monte Carlo over independent trajectories, time-averaged
// empirical measures, and the statistical verdicts built on them:
// entropy/energy dissipation inequalities in the mean, exponential tail of
// the drift-compensated Psi supremum, tightness of the time-averaged
// measure, stationary dissipation budget, a two-window stationarity
// diagnostic, and the low-Mach forcing scan.
//
// Trajectories are distributed over a worker pool but reduced in trajectory
// id order, so summaries do not depend on the pool size or completion order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "field.hpp"
#include "functionals.hpp"
#include "noise.hpp"
#include "solver.hpp"

namespace cns1d {

// ============================================================================
// Initial data
// ============================================================================

struct InitSpec {
  enum class Kind { Uniform, Sine };
  Kind kind = Kind::Uniform;
  double rho_amp = 0.0;  // rho = 1 + rho_amp sin(2 pi rho_waves x)
  int rho_waves = 1;
  double u_amp = 0.0;    // u = u_amp sin(pi u_waves x), walls exactly zero
  int u_waves = 1;
};

inline State make_init_state(const GridSpec& g, const InitSpec& init) {
  const double pi = 3.14159265358979323846;
  std::vector<double> rho(g.n_cells, 1.0);
  std::vector<double> u(g.n_faces(), 0.0);
  if (init.kind == InitSpec::Kind::Sine) {
    if (std::abs(init.rho_amp) >= 1.0) {
      throw ConfigError("init: |rho_amp| must be below 1 to keep density positive");
    }
    for (int j = 0; j < g.n_cells; ++j) {
      rho[j] = 1.0 + init.rho_amp * std::sin(2.0 * pi * init.rho_waves *
                                             g.x_center(j));
    }
    for (int i = 1; i < g.n_cells; ++i) {
      u[i] = init.u_amp * std::sin(pi * init.u_waves * g.x_face(i));
    }
  }
  return new_state(g, rho, u).state;
}

// ============================================================================
// Ensemble configuration and execution
// ============================================================================

struct NoiseParams {
  int K = 4;
  double sigma0 = 0.0;
  double p = 3.0;
};

struct EnsembleConfig {
  GridSpec grid;
  ModelParams params;
  StepSpec step;
  NoiseParams noise;
  InitSpec init;
  int M = 1;             // trajectories
  double T = 1.0;        // horizon
  double T0 = 0.0;       // burn-in for time averages
  double stride = 0.0;   // observable sampling interval (0: T/100 snapped)
  std::uint64_t seed = 0;
  int workers = 0;       // 0: hardware concurrency
  long long snapshot_stride_steps = 0;
};

inline long long stride_steps_for(double stride, double T, double dt) {
  double want = stride > 0.0 ? stride : T / 100.0;
  long long k = std::llround(want / dt);
  if (k < 1) k = 1;
  return k;
}

template <typename Fn>
inline void parallel_for_ids(int count, int workers, Fn&& body) {
  int nw = workers > 0 ? workers
                       : static_cast<int>(std::thread::hardware_concurrency());
  if (nw < 1) nw = 1;
  nw = std::min(nw, count);
  if (nw <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (int w = 0; w < nw; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (int i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
}

inline std::vector<TrajectoryRecord> run_ensemble(const EnsembleConfig& cfg) {
  if (cfg.M < 1) throw ConfigError("ensemble: M must be at least 1");
  const NoiseBasis basis =
      build_noise(cfg.grid, cfg.noise.K, cfg.noise.sigma0, cfg.noise.p);
  const State init = make_init_state(cfg.grid, cfg.init);
  const long long stride =
      stride_steps_for(cfg.stride, cfg.T, cfg.step.dt);
  std::vector<TrajectoryRecord> records(cfg.M);
  parallel_for_ids(cfg.M, cfg.workers, [&](int id) {
    PathOptions opts;
    opts.sample_stride_steps = stride;
    opts.snapshot_stride_steps = cfg.snapshot_stride_steps;
    records[id] =
        integrate_path(init, cfg.params, cfg.step, basis, cfg.seed, id, cfg.T,
                       opts);
  });
  return records;
}

// ============================================================================
// Ensemble summary: mean dissipation inequalities and Psi moments
// ============================================================================

struct MeanBoundRow {
  double t = 0.0;
  double lhs_mean = 0.0;   // mean of the trajectory-wise left-hand side
  double lhs_se = 0.0;     // standard error of that mean
  double rhs = 0.0;        // initial value + (1/2)||sigma||_sup^2 t
  bool holds = false;      // lhs_mean <= rhs + slack_sigmas * lhs_se
};

struct EnsembleSummary {
  int M = 0;
  double H0 = 0.0;
  double E0 = 0.0;
  double sigma_sup_sq = 0.0;
  double slack_sigmas = 3.0;
  std::vector<MeanBoundRow> entropy;  // mean H(t) + mean int ||u_x||^2
  std::vector<MeanBoundRow> energy;   // mean E(t) + (1/2) int ||u_x||^2
                                      //   + (A^2/2) int ||(log rho)_x||^2
  bool entropy_holds = true;
  bool energy_holds = true;
  double psi_sup_moment1 = 0.0;
  double psi_sup_moment2 = 0.0;
  double psi_sup_moment4 = 0.0;
  std::vector<double> mart_stats;  // per trajectory, for the tail estimate
};

inline void mean_and_se(const std::vector<double>& xs, double& mean,
                        double& se) {
  const size_t n = xs.size();
  double s = 0.0;
  for (double x : xs) s += x;
  mean = s / static_cast<double>(n);
  if (n < 2) {
    se = 0.0;
    return;
  }
  double v = 0.0;
  for (double x : xs) v += (x - mean) * (x - mean);
  v /= static_cast<double>(n - 1);
  se = std::sqrt(v / static_cast<double>(n));
}

inline EnsembleSummary summarize_ensemble(
    const std::vector<TrajectoryRecord>& records, const ModelParams& mp,
    double slack_sigmas = 3.0) {
  if (records.empty()) throw ValidationError("summarize: no trajectories");
  const size_t n_samples = records[0].samples.size();
  for (const auto& r : records) {
    if (r.samples.size() != n_samples) {
      throw ValidationError("summarize: trajectories sampled differently");
    }
  }
  EnsembleSummary sum;
  sum.M = static_cast<int>(records.size());
  sum.H0 = records[0].H0;
  sum.E0 = records[0].E0;
  sum.sigma_sup_sq = records[0].sigma_sup_sq;
  sum.slack_sigmas = slack_sigmas;
  const double A2 = mp.A * mp.A;

  std::vector<double> ent(records.size()), ene(records.size());
  for (size_t s = 0; s < n_samples; ++s) {
    const double t = records[0].samples[s].t;
    for (size_t m = 0; m < records.size(); ++m) {
      const Sample& smp = records[m].samples[s];
      ent[m] = smp.f.H + smp.diss_u_cum;
      ene[m] = smp.f.E + 0.5 * smp.diss_u_cum +
               0.5 * A2 * smp.diss_logrho_cum;
    }
    MeanBoundRow re, rn;
    re.t = rn.t = t;
    mean_and_se(ent, re.lhs_mean, re.lhs_se);
    mean_and_se(ene, rn.lhs_mean, rn.lhs_se);
    re.rhs = sum.H0 + 0.5 * sum.sigma_sup_sq * t;
    rn.rhs = sum.E0 + 0.5 * sum.sigma_sup_sq * t;
    re.holds = re.lhs_mean <= re.rhs + slack_sigmas * re.lhs_se;
    rn.holds = rn.lhs_mean <= rn.rhs + slack_sigmas * rn.lhs_se;
    sum.entropy.push_back(re);
    sum.energy.push_back(rn);
    sum.entropy_holds = sum.entropy_holds && re.holds;
    sum.energy_holds = sum.energy_holds && rn.holds;
  }

  double m1 = 0.0, m2 = 0.0, m4 = 0.0;
  for (const auto& r : records) {
    const double x = r.psi_sup;
    m1 += x;
    m2 += x * x;
    m4 += x * x * x * x;
    sum.mart_stats.push_back(r.mart_sup);
  }
  const double inv = 1.0 / static_cast<double>(records.size());
  sum.psi_sup_moment1 = m1 * inv;
  sum.psi_sup_moment2 = m2 * inv;
  sum.psi_sup_moment4 = m4 * inv;
  return sum;
}

// ============================================================================
// Time-averaged empirical measure
// ============================================================================

struct Observables {
  double grad_u_sq = 0.0;
  double grad_logrho_sq = 0.0;
  double rhox_sq = 0.0;
  double max_rho = 0.0;
  double max_inv_rho = 0.0;
  double H = 0.0;
  double E = 0.0;
};

enum class ObservableId {
  GradUSq,
  GradLogRhoSq,
  RhoxSq,
  MaxRho,
  MaxInvRho,
  EntropyH,
  EnergyE,
};

inline double observable_of(const Observables& o, ObservableId id) {
  switch (id) {
    case ObservableId::GradUSq: return o.grad_u_sq;
    case ObservableId::GradLogRhoSq: return o.grad_logrho_sq;
    case ObservableId::RhoxSq: return o.rhox_sq;
    case ObservableId::MaxRho: return o.max_rho;
    case ObservableId::MaxInvRho: return o.max_inv_rho;
    case ObservableId::EntropyH: return o.H;
    case ObservableId::EnergyE: return o.E;
  }
  throw ValidationError("unknown observable id");
}

struct EmpiricalMeasure {
  double T0 = 0.0;
  double T = 0.0;
  double stride = 0.0;
  std::vector<Observables> samples;
};

inline Observables observables_from_sample(const Sample& s) {
  Observables o;
  o.grad_u_sq = s.f.grad_u_sq;
  o.grad_logrho_sq = s.f.grad_logrho_sq;
  o.rhox_sq = s.rhox_sq;
  o.max_rho = s.f.max_rho;
  o.max_inv_rho = 1.0 / s.f.min_rho;
  o.H = s.f.H;
  o.E = s.f.E;
  return o;
}

// Uniform-weight samples over (T0, T] at the record's stride.
inline EmpiricalMeasure time_averaged_measure(const TrajectoryRecord& rec,
                                              double T0, double T) {
  if (!(rec.sample_stride > 0.0)) {
    throw ValidationError("measure: record carries no stride sampling");
  }
  if (!(T > T0) || T0 < 0.0) {
    throw ValidationError("measure: need 0 <= T0 < T");
  }
  const double stride = rec.sample_stride;
  const double eps = 0.5 * rec.dt;
  if (rec.samples.empty() || rec.samples.back().t < T - eps) {
    throw ValidationError("measure: record does not span the requested window");
  }
  const double q0 = T0 / stride;
  if (std::abs(q0 - std::llround(q0)) > 1e-9) {
    throw ValidationError("measure: T0 must be a multiple of the stride");
  }
  EmpiricalMeasure m;
  m.T0 = T0;
  m.T = T;
  m.stride = stride;
  for (const Sample& s : rec.samples) {
    if (s.t <= T0 + eps || s.t > T + eps) continue;
    // skip the off-stride trailing sample if the horizon was not aligned
    const double q = s.t / stride;
    if (std::abs(q - std::llround(q)) > 1e-9) continue;
    m.samples.push_back(observables_from_sample(s));
  }
  const long long expected = static_cast<long long>(
      std::floor((T - T0) / stride + 1e-9));
  if (static_cast<long long>(m.samples.size()) != expected) {
    throw ValidationError(
        "measure: sample count " + std::to_string(m.samples.size()) +
        " does not match floor((T-T0)/stride) = " + std::to_string(expected));
  }
  return m;
}

inline double measure_mean(const EmpiricalMeasure& m, ObservableId id) {
  if (m.samples.empty()) throw ValidationError("measure: empty");
  double s = 0.0;
  for (const auto& o : m.samples) s += observable_of(o, id);
  return s / static_cast<double>(m.samples.size());
}

// ============================================================================
// Tightness of the time-averaged measure
// ============================================================================

struct TightnessRow {
  double R = 0.0;
  double S_R = 0.0;       // 4 R^2 e^{2R}
  double mu_K = 0.0;      // fraction with int u_x^2 + int (log rho)_x^2 <= R^2
  double mu_C = 0.0;      // fraction inside the compact set at level S_R
  double lower_bound = 0.0;  // 1 - ||sigma||_sup^2 / (min{1,A^2} R^2)
};

struct TightnessReport {
  double sigma_sup_sq = 0.0;
  double A = 0.0;
  long long n_samples = 0;
  std::vector<TightnessRow> rows;
};

inline TightnessReport tightness_report(const EmpiricalMeasure& m,
                                        const ModelParams& mp,
                                        double sigma_sup_sq,
                                        const std::vector<double>& R_grid) {
  if (m.samples.empty()) throw ValidationError("tightness: empty measure");
  TightnessReport rep;
  rep.sigma_sup_sq = sigma_sup_sq;
  rep.A = mp.A;
  rep.n_samples = static_cast<long long>(m.samples.size());
  const double minA2 = std::min(1.0, mp.A * mp.A);
  for (double R : R_grid) {
    if (!(R > 0.0)) throw ValidationError("tightness: R must be positive");
    TightnessRow row;
    row.R = R;
    row.S_R = 4.0 * R * R * std::exp(2.0 * R);
    long long in_k = 0, in_c = 0;
    for (const auto& o : m.samples) {
      if (o.grad_u_sq + o.grad_logrho_sq <= R * R) ++in_k;
      if (o.grad_u_sq + o.rhox_sq + o.max_rho + o.max_inv_rho <= row.S_R) {
        ++in_c;
      }
    }
    row.mu_K = static_cast<double>(in_k) / static_cast<double>(rep.n_samples);
    row.mu_C = static_cast<double>(in_c) / static_cast<double>(rep.n_samples);
    row.lower_bound = 1.0 - sigma_sup_sq / (minA2 * R * R);
    rep.rows.push_back(row);
  }
  return rep;
}

// ============================================================================
// Exponential tail of the compensated Psi supremum
// ============================================================================

struct MartingaleRow {
  double R = 0.0;
  double freq = 0.0;    // fraction of trajectories with statistic >= R
  double se = 0.0;      // binomial standard error
  double bound = 0.0;   // e^{-gamma0 R}
};

struct MartingaleReport {
  double gamma0 = 0.0;  // min{1, 4A^2} / (2 ||sigma||_sup^2)
  int M = 0;
  std::vector<MartingaleRow> rows;
};

inline MartingaleReport martingale_tail(const std::vector<double>& stats,
                                        const ModelParams& mp,
                                        double sigma_sup_sq,
                                        const std::vector<double>& R_grid) {
  if (!(sigma_sup_sq > 0.0)) {
    throw ValidationError(
        "martingale_tail: the tail rate is undefined without forcing "
        "(||sigma||_sup^2 = 0); run with a nonzero basis");
  }
  if (stats.empty()) throw ValidationError("martingale_tail: no statistics");
  MartingaleReport rep;
  rep.gamma0 = std::min(1.0, 4.0 * mp.A * mp.A) / (2.0 * sigma_sup_sq);
  rep.M = static_cast<int>(stats.size());
  for (double R : R_grid) {
    MartingaleRow row;
    row.R = R;
    long long k = 0;
    for (double x : stats) {
      if (x >= R) ++k;
    }
    row.freq = static_cast<double>(k) / static_cast<double>(rep.M);
    row.se = std::sqrt(row.freq * (1.0 - row.freq) /
                       static_cast<double>(rep.M));
    row.bound = std::exp(-rep.gamma0 * R);
    rep.rows.push_back(row);
  }
  return rep;
}

// ============================================================================
// Stationary dissipation budget
// ============================================================================

struct BudgetVerdict {
  double mean = 0.0;   // mean of A^2 ||(log rho)_x||^2 + ||u_x||^2
  double se = 0.0;     // naive iid standard error (samples are correlated)
  double bound = 0.0;  // ||sigma||_sup^2 * (1 + tolerance)
  bool holds = false;
};

inline BudgetVerdict dissipation_budget(const EmpiricalMeasure& m,
                                        const ModelParams& mp,
                                        double sigma_sup_sq,
                                        double tolerance = 0.1) {
  if (m.samples.empty()) throw ValidationError("budget: empty measure");
  const double A2 = mp.A * mp.A;
  std::vector<double> xs;
  xs.reserve(m.samples.size());
  for (const auto& o : m.samples) {
    xs.push_back(A2 * o.grad_logrho_sq + o.grad_u_sq);
  }
  BudgetVerdict v;
  mean_and_se(xs, v.mean, v.se);
  v.bound = sigma_sup_sq * (1.0 + tolerance);
  v.holds = v.mean <= v.bound;
  return v;
}

// ============================================================================
// Two-window stationarity diagnostic
// ============================================================================

inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) {
    throw ValidationError("ks_distance: empty sample set");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  return d;
}

// KS distance between the observable's empirical laws on (T0, T0+T] and
// (T0+s, T0+s+T]. Small values are consistent with an already-stationary
// window; the distance should shrink as T grows.
inline double stationarity_diagnostic(const TrajectoryRecord& rec,
                                      ObservableId id, double T0, double T,
                                      double s) {
  if (!(T > 0.0) || !(s > 0.0)) {
    throw ValidationError("stationarity: window and shift must be positive");
  }
  const double eps = 0.5 * rec.dt;
  if (rec.samples.empty() || rec.samples.back().t < T0 + s + T - eps) {
    throw ValidationError("stationarity: record does not span T0 + s + T");
  }
  std::vector<double> wa, wb;
  for (const Sample& smp : rec.samples) {
    const Observables o = observables_from_sample(smp);
    if (smp.t > T0 + eps && smp.t <= T0 + T + eps) {
      wa.push_back(observable_of(o, id));
    }
    if (smp.t > T0 + s + eps && smp.t <= T0 + s + T + eps) {
      wb.push_back(observable_of(o, id));
    }
  }
  return ks_distance(std::move(wa), std::move(wb));
}

// ============================================================================
// Low-Mach forcing scan
// ============================================================================

struct LowMachRow {
  double A = 0.0;
  double sigma0 = 0.0;       // base sigma0 * A^-eta
  double sigma_sup_sq = 0.0;
  double rho_dev_mean = 0.0;  // time average of ||rho - 1||
  double rho_dev_se = 0.0;    // between-trajectory standard error
  double u_mean = 0.0;        // time average of ||u||
  double u_se = 0.0;
};

struct LowMachReport {
  double eta = 0.0;
  std::vector<LowMachRow> rows;
};

inline LowMachReport low_mach_scan(const std::vector<double>& A_list,
                                   double eta, const EnsembleConfig& base) {
  if (A_list.empty()) throw ConfigError("low_mach_scan: empty A list");
  LowMachReport rep;
  rep.eta = eta;
  for (double A : A_list) {
    if (!(A > 0.0)) throw ConfigError("low_mach_scan: A must be positive");
    EnsembleConfig cfg = base;
    cfg.params.A = A;
    cfg.noise.sigma0 = base.noise.sigma0 * std::pow(A, -eta);
    const auto records = run_ensemble(cfg);
    std::vector<double> dev_means, u_means;
    for (const auto& rec : records) {
      double sd = 0.0, su = 0.0;
      long long cnt = 0;
      for (const Sample& smp : rec.samples) {
        if (smp.t <= cfg.T0) continue;
        sd += smp.l2_rho_dev;
        su += smp.l2_u;
        ++cnt;
      }
      if (cnt == 0) throw ConfigError("low_mach_scan: no samples after T0");
      dev_means.push_back(sd / static_cast<double>(cnt));
      u_means.push_back(su / static_cast<double>(cnt));
    }
    LowMachRow row;
    row.A = A;
    row.sigma0 = cfg.noise.sigma0;
    row.sigma_sup_sq = records[0].sigma_sup_sq;
    mean_and_se(dev_means, row.rho_dev_mean, row.rho_dev_se);
    mean_and_se(u_means, row.u_mean, row.u_se);
    rep.rows.push_back(row);
  }
  return rep;
}

// Nonincreasing within the stated number of combined standard errors.
inline bool low_mach_monotone(const LowMachReport& rep, double sigmas = 2.0) {
  for (size_t i = 1; i < rep.rows.size(); ++i) {
    const auto& a = rep.rows[i - 1];
    const auto& b = rep.rows[i];
    const double slack =
        sigmas * std::sqrt(a.rho_dev_se * a.rho_dev_se +
                           b.rho_dev_se * b.rho_dev_se);
    if (b.rho_dev_mean > a.rho_dev_mean + slack) return false;
  }
  return true;
}

}  // namespace cns1d
