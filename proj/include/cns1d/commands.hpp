#pragma once

// Subcommand implementations. Each one resolves its experiment from the
// configuration, writes artifacts (config echo, machine-readable JSON,
// human-readable text) under the output directory, and returns a process
// exit status: 0 when every enabled verdict passes, 1 on a verdict failure.
// Configuration errors and runtime failures propagate as exceptions; the
// CLI entry point maps them to statuses 2 and 3.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "field.hpp"
#include "functionals.hpp"
#include "io.hpp"
#include "noise.hpp"
#include "solver.hpp"
#include "stats.hpp"

namespace cns1d {

struct CommandOptions {
  std::string out_dir;      // overrides config out_dir when nonempty
  std::string resume_path;  // checkpoint to continue from (simulate only)
  int workers = 0;          // 0: hardware concurrency
};

namespace detail {

inline std::filesystem::path prepare_out_dir(const RunConfig& c,
                                             const CommandOptions& opts) {
  const std::filesystem::path dir =
      opts.out_dir.empty() ? std::filesystem::path(c.out_dir)
                           : std::filesystem::path(opts.out_dir);
  std::filesystem::create_directories(dir);
  write_config_artifact(dir, c);
  return dir;
}

inline void write_report_pair(const std::filesystem::path& dir,
                              const std::string& stem, const json& meta,
                              json body, const std::string& text) {
  body["meta"] = meta;
  write_text_file(dir / (stem + ".json"), body.dump(2) + "\n");
  write_text_file(dir / (stem + ".txt"), meta_preamble(meta) + text);
}

// Split an existing trajectory CSV into (preamble+header, data rows).
inline void split_csv(const std::string& text,
                      std::vector<std::string>* head,
                      std::vector<std::string>* rows) {
  std::string line;
  std::istringstream in(text);
  bool in_head = true;
  while (std::getline(in, line)) {
    if (in_head) {
      head->push_back(line);
      if (!line.empty() && line[0] != '#') in_head = false;  // header row
    } else {
      rows->push_back(line);
    }
  }
}

}  // namespace detail

// ============================================================================
// simulate: one trajectory -> CSV + snapshots + resumable checkpoint
// ============================================================================

inline int cmd_simulate(const RunConfig& c, const CommandOptions& opts = {}) {
  const std::filesystem::path dir = detail::prepare_out_dir(c, opts);
  const GridSpec grid = make_grid(c.n_cells);
  const ModelParams mp{c.A};
  const StepSpec spec{c.dt, c.cfl_max};
  const NoiseBasis basis = build_noise(grid, c.K, c.sigma0, c.p);
  const std::filesystem::path csv_path = dir / "trajectory.csv";
  const std::filesystem::path ckpt_path = dir / "checkpoint.json";

  State init = make_init_state(grid, c.init);
  PathOptions popts;
  popts.sample_stride_steps = std::llround(c.stride / c.dt);
  popts.snapshot_stride_steps =
      c.snapshot_stride > 0.0 ? std::llround(c.snapshot_stride / c.dt) : 0;

  std::ofstream csv;
  long long rows_written = 0;
  double resume_time = -1.0;

  if (!opts.resume_path.empty()) {
    const Checkpoint ck = read_checkpoint(opts.resume_path);
    if (ck.config_hash != c.config_hash) {
      throw ConfigError("resume: checkpoint config hash " + ck.config_hash +
                        " does not match current config " + c.config_hash);
    }
    if (ck.seed != c.seed || ck.trajectory_id != 0) {
      throw ConfigError("resume: checkpoint identity does not match config");
    }
    // Rebuild the CSV prefix: keep the preamble and the first csv_rows data
    // rows, drop anything written past the checkpoint.
    std::vector<std::string> head, rows;
    detail::split_csv(read_text_file(csv_path), &head, &rows);
    bool hash_ok = false;
    for (const auto& line : head) {
      if (line == "# config_hash: " + c.config_hash) hash_ok = true;
    }
    if (!hash_ok) {
      throw ConfigError("resume: trajectory CSV does not carry this config");
    }
    if (static_cast<long long>(rows.size()) < ck.csv_rows) {
      throw ConfigError("resume: trajectory CSV has fewer rows than the "
                        "checkpoint recorded");
    }
    std::string prefix;
    for (const auto& line : head) prefix += line + "\n";
    for (long long i = 0; i < ck.csv_rows; ++i) prefix += rows[i] + "\n";
    write_text_file(csv_path, prefix);
    csv.open(csv_path, std::ios::binary | std::ios::app);
    rows_written = ck.csv_rows;
    resume_time = ck.state.time;
    init = ck.state;
    popts.diss_u0 = ck.diss_u_cum;
    popts.diss_logrho0 = ck.diss_logrho_cum;
    popts.psi_sup0 = ck.psi_sup;
    popts.mart_sup0 = ck.mart_sup;
    popts.max_mass_dev0 = ck.max_mass_dev;
    popts.min_rho0 = ck.min_rho_seen;
    popts.H00 = ck.H0;
    popts.E00 = ck.E0;
  } else {
    csv.open(csv_path, std::ios::binary | std::ios::trunc);
    csv << csv_preamble(c, 0);
  }
  if (!csv) throw Error("cannot open \"" + csv_path.string() + "\"");

  popts.on_sample = [&](const Sample& smp, const State& st,
                        const TrajectoryRecord& rec) {
    if (smp.t <= resume_time + 0.5 * c.dt) return;  // row already on disk
    csv << csv_row(smp);
    csv.flush();
    ++rows_written;
    Checkpoint ck;
    ck.config_hash = c.config_hash;
    ck.trajectory_id = 0;
    ck.seed = c.seed;
    ck.step_index = std::llround(smp.t / c.dt);
    ck.state = st;
    ck.diss_u_cum = rec.diss_u_cum;
    ck.diss_logrho_cum = rec.diss_logrho_cum;
    ck.psi_sup = rec.psi_sup;
    ck.mart_sup = rec.mart_sup;
    ck.max_mass_dev = rec.max_mass_dev;
    ck.min_rho_seen = rec.min_rho_seen;
    ck.H0 = rec.H0;
    ck.E0 = rec.E0;
    ck.csv_rows = rows_written;
    write_checkpoint(ckpt_path, ck);
  };

  const TrajectoryRecord rec =
      integrate_path(init, mp, spec, basis, c.seed, 0, c.T, popts);

  write_snapshot(dir / "final_state.json", rec.final_state, c.config_hash);
  for (const Snapshot& snap : rec.snapshots) {
    char name[40];
    std::snprintf(name, sizeof(name), "snapshot_%010lld.json", snap.step);
    write_snapshot(dir / name, snap.state, c.config_hash);
  }
  return 0;
}

// ============================================================================
// ensemble: M trajectories -> mean dissipation inequalities + Psi moments
// ============================================================================

inline int cmd_ensemble(const RunConfig& c, const CommandOptions& opts = {}) {
  const std::filesystem::path dir = detail::prepare_out_dir(c, opts);
  const EnsembleConfig ec = make_ensemble_config(c, opts.workers);
  const auto records = run_ensemble(ec);
  const EnsembleSummary sum = summarize_ensemble(records, ec.params);
  detail::write_report_pair(dir, "ensemble", make_meta(c),
                            ensemble_summary_to_json(sum),
                            ensemble_summary_to_text(sum));
  return (sum.entropy_holds && sum.energy_holds) ? 0 : 1;
}

// ============================================================================
// verify: deterministic inequality verdict table
// ============================================================================

namespace detail {

// Summed |dH + dt ||u_x||^2| over a zero-noise run; the dissipation uses the
// end-of-step velocity, matching the implicit viscous solve.
inline double balance_residual(const GridSpec& g, const ModelParams& mp,
                               double dt, double cfl_max, double T,
                               const InitSpec& init) {
  const StepSpec spec{dt, cfl_max};
  State s = make_init_state(g, init);
  const long long n = steps_for(T, dt);
  NoiseIncrement dW;
  dW.dt = dt;
  dW.dw.assign(g.n_faces(), 0.0);
  double H = entropy_H(s, mp);
  double total = 0.0;
  for (long long k = 0; k < n; ++k) {
    State s2 = step(s, mp, spec, dW);
    const double H2 = entropy_H(s2, mp);
    total += std::abs(H2 - H + dt * grad_u_sq(s2));
    s = std::move(s2);
    H = H2;
  }
  return total;
}

}  // namespace detail

inline std::vector<VerdictRow> verify_verdicts(const RunConfig& c) {
  std::vector<VerdictRow> rows;
  const GridSpec grid = make_grid(c.n_cells);
  const ModelParams mp{c.A};
  const StepSpec spec{c.dt, c.cfl_max};
  const NoiseBasis basis = build_noise(grid, c.K, c.sigma0, c.p);

  // -- unforced entropy balance closes at first order in dt ------------------
  {
    InitSpec sine;
    sine.kind = InitSpec::Kind::Sine;
    sine.rho_amp = 0.2;
    sine.rho_waves = 1;
    sine.u_amp = 0.1;
    sine.u_waves = 1;
    const double T_bal = std::min(c.T, 0.1);
    const double r1 =
        detail::balance_residual(grid, mp, c.dt, c.cfl_max, T_bal, sine);
    const double r2 =
        detail::balance_residual(grid, mp, 0.5 * c.dt, c.cfl_max, T_bal, sine);
    const double ratio = r1 / r2;
    VerdictRow row;
    row.name = "unforced entropy balance residual halves with dt";
    row.anchor = "entropy-balance/dt-ratio";
    row.lhs = ratio;
    row.rhs = 2.0;
    row.slack = std::abs(ratio - 2.0) - 0.4;
    row.pass = ratio >= 1.6 && ratio <= 2.4;
    rows.push_back(row);
  }

  // -- forced run: conservation, positivity, pointwise gates -----------------
  {
    PathOptions popts;
    popts.sample_stride_steps = std::llround(c.stride / c.dt);
    double worst_sandwich = -std::numeric_limits<double>::infinity();
    double worst_poincare = -std::numeric_limits<double>::infinity();
    popts.on_sample = [&](const Sample&, const State& st,
                          const TrajectoryRecord&) {
      const EnboundsReport eb = enbounds_check(st, mp);
      worst_sandwich = std::max(worst_sandwich, eb.worst_slack);
      double ps = 0.0;
      weighted_poincare_check(st, 1e-6, &ps);
      worst_poincare = std::max(worst_poincare, ps);
    };
    const State init = make_init_state(grid, c.init);
    const TrajectoryRecord rec =
        integrate_path(init, mp, spec, basis, c.seed, 0, c.T, popts);

    VerdictRow mass;
    mass.name = "total mass stays within 1e-11 of one";
    mass.anchor = "transport/mass-conservation";
    mass.lhs = rec.max_mass_dev;
    mass.rhs = 1e-11;
    mass.slack = rec.max_mass_dev - 1e-11;
    mass.pass = rec.max_mass_dev <= 1e-11;
    rows.push_back(mass);

    VerdictRow pos;
    pos.name = "density stays positive";
    pos.anchor = "transport/positivity";
    pos.lhs = rec.min_rho_seen;
    pos.rhs = 0.0;
    pos.slack = -rec.min_rho_seen;
    pos.pass = rec.min_rho_seen > 0.0;
    rows.push_back(pos);

    VerdictRow sand;
    sand.name = "energy-derived density/velocity envelope at samples";
    sand.anchor = "energy/sandwich-gate";
    sand.lhs = worst_sandwich;
    sand.rhs = 1e-6;
    sand.slack = worst_sandwich - 1e-6;
    sand.pass = worst_sandwich <= 1e-6;
    rows.push_back(sand);

    VerdictRow poin;
    poin.name = "density-weighted Poincare bound at samples";
    poin.anchor = "energy/weighted-poincare";
    poin.lhs = worst_poincare;
    poin.rhs = 1e-6;
    poin.slack = worst_poincare - 1e-6;
    poin.pass = worst_poincare <= 1e-6;
    rows.push_back(poin);
  }

  // -- paired paths under one noise realization -------------------------------
  {
    const double T_pair = std::min(c.T, 0.05);
    const State a = make_init_state(grid, c.init);

    // identical inputs reproduce bitwise
    const TrajectoryRecord r1 =
        integrate_path(a, mp, spec, basis, c.seed, 0, T_pair, {});
    const TrajectoryRecord r2 =
        integrate_path(a, mp, spec, basis, c.seed, 0, T_pair, {});
    double max_diff = 0.0;
    for (size_t i = 0; i < r1.final_state.rho.size(); ++i) {
      if (r1.final_state.rho[i] != r2.final_state.rho[i]) max_diff = 1.0;
    }
    for (size_t i = 0; i < r1.final_state.u.size(); ++i) {
      if (r1.final_state.u[i] != r2.final_state.u[i]) max_diff = 1.0;
    }
    VerdictRow bitw;
    bitw.name = "identical config and seed reproduce bitwise";
    bitw.anchor = "paired/bitwise-determinism";
    bitw.lhs = max_diff;
    bitw.rhs = 0.0;
    bitw.slack = max_diff;
    bitw.pass = max_diff == 0.0;
    rows.push_back(bitw);

    // small density perturbation stays inside the doubled growth envelope
    const double pi = 3.14159265358979323846;
    std::vector<double> rho_b = a.rho;
    const double amp = 1e-6 * std::sqrt(2.0);
    for (int j = 0; j < grid.n_cells; ++j) {
      rho_b[j] += amp * std::sin(2.0 * pi * grid.x_center(j));
    }
    const State b = new_state(grid, rho_b, a.u).state;
    PathOptions popts;
    popts.sample_stride_steps =
        std::max<long long>(1, std::llround(c.stride / c.dt));
    const PairedResult pr =
        paired_paths(b, a, mp, spec, basis, c.seed, T_pair, popts);
    double worst_ratio = 0.0;
    for (const RelEntPoint& pt : pr.series) {
      if (pt.envelope > 0.0) {
        worst_ratio = std::max(worst_ratio, pt.h_r / pt.envelope);
      }
    }
    VerdictRow env;
    env.name = "perturbed-path relative entropy under 2x growth envelope";
    env.anchor = "paired/growth-envelope";
    env.lhs = worst_ratio;
    env.rhs = 2.0;
    env.slack = worst_ratio - 2.0;
    env.pass = worst_ratio <= 2.0;
    rows.push_back(env);

    VerdictRow dec;
    dec.name = "perturbed-path relative entropy small at horizon";
    dec.anchor = "paired/terminal-size";
    dec.lhs = pr.series.back().h_r;
    dec.rhs = 1e-9;
    dec.slack = pr.series.back().h_r - 1e-9;
    dec.pass = pr.series.back().h_r < 1e-9;
    rows.push_back(dec);
  }

  return rows;
}

inline int cmd_verify(const RunConfig& c, const CommandOptions& opts = {}) {
  const std::filesystem::path dir = detail::prepare_out_dir(c, opts);
  const std::vector<VerdictRow> rows = verify_verdicts(c);
  json body;
  body["verdicts"] = verdicts_to_json(rows);
  detail::write_report_pair(dir, "verify", make_meta(c), std::move(body),
                            verdicts_to_text(rows));
  for (const auto& r : rows) {
    if (!r.pass) return 1;
  }
  return 0;
}

// ============================================================================
// tightness: long single trajectory -> measure concentration + budget
// ============================================================================

inline int cmd_tightness(const RunConfig& c, const CommandOptions& opts = {}) {
  const std::filesystem::path dir = detail::prepare_out_dir(c, opts);
  const GridSpec grid = make_grid(c.n_cells);
  const ModelParams mp{c.A};
  const StepSpec spec{c.dt, c.cfl_max};
  const NoiseBasis basis = build_noise(grid, c.K, c.sigma0, c.p);
  PathOptions popts;
  popts.sample_stride_steps = std::llround(c.stride / c.dt);
  const State init = make_init_state(grid, c.init);
  const TrajectoryRecord rec =
      integrate_path(init, mp, spec, basis, c.seed, 0, c.T, popts);

  const EmpiricalMeasure mu = time_averaged_measure(rec, c.T0, c.T);
  const std::vector<double> R_grid =
      c.R_list.empty() ? std::vector<double>{1.0, 2.0} : c.R_list;
  const TightnessReport rep = tightness_report(mu, mp, basis.sup_sq, R_grid);
  const BudgetVerdict budget = dissipation_budget(mu, mp, basis.sup_sq);

  // Heuristic stationarity diagnostic: distance between two overlapping
  // windows of the velocity-gradient observable (no pass/fail attached).
  double ks = std::numeric_limits<double>::quiet_NaN();
  const double w = 0.5 * (c.T - c.T0);
  if (w > 0.0) {
    ks = stationarity_diagnostic(rec, ObservableId::GradUSq, c.T0, w, 0.5 * w);
  }

  bool pass = budget.holds;
  for (const auto& row : rep.rows) {
    if (row.mu_C < row.lower_bound - 0.05) pass = false;
    if (row.mu_C < row.mu_K) pass = false;
  }

  json body = tightness_to_json(rep);
  body["budget"] = {{"mean", budget.mean},
                    {"se", budget.se},
                    {"bound", budget.bound},
                    {"pass", budget.holds}};
  body["stationarity_ks"] = std::isnan(ks) ? json(nullptr) : json(ks);
  body["pass"] = pass;
  std::string text = tightness_to_text(rep);
  text += "dissipation budget: mean " + fmt10(budget.mean) + " (se " +
          fmt10(budget.se) + ") vs bound " + fmt10(budget.bound) +
          (budget.holds ? "  PASS" : "  FAIL") + "\n";
  if (!std::isnan(ks)) {
    text += "stationarity KS diagnostic (heuristic, no verdict): " +
            fmt10(ks) + "\n";
  }
  detail::write_report_pair(dir, "tightness", make_meta(c), std::move(body),
                            text);
  return pass ? 0 : 1;
}

// ============================================================================
// martingale: M trajectories -> exponential tail of compensated Psi sup
// ============================================================================

inline int cmd_martingale(const RunConfig& c,
                          const CommandOptions& opts = {}) {
  const std::filesystem::path dir = detail::prepare_out_dir(c, opts);
  const EnsembleConfig ec = make_ensemble_config(c, opts.workers);
  const auto records = run_ensemble(ec);
  std::vector<double> stats;
  stats.reserve(records.size());
  for (const auto& r : records) stats.push_back(r.mart_sup);
  const NoiseBasis basis = build_noise(ec.grid, c.K, c.sigma0, c.p);
  const std::vector<double> R_grid =
      c.R_list.empty() ? std::vector<double>{1.0, 2.0, 3.0} : c.R_list;
  const MartingaleReport rep =
      martingale_tail(stats, ec.params, basis.sup_sq, R_grid);

  bool pass = true;
  for (const auto& row : rep.rows) {
    if (row.freq > row.bound + 2.0 * row.se) pass = false;
  }

  json body = martingale_to_json(rep);
  body["pass"] = pass;
  std::string text = martingale_to_text(rep);
  text += std::string("verdict: ") + (pass ? "PASS" : "FAIL") +
          " (exceedance within e^{-gamma0 R} + 2 stderr at every R)\n";
  detail::write_report_pair(dir, "martingale", make_meta(c), std::move(body),
                            text);
  return pass ? 0 : 1;
}

// ============================================================================
// lowmach: pressure-stiffness scan with noise scaled as A^-eta
// ============================================================================

inline int cmd_lowmach(const RunConfig& c, const CommandOptions& opts = {}) {
  const std::filesystem::path dir = detail::prepare_out_dir(c, opts);
  EnsembleConfig base = make_ensemble_config(c, opts.workers);
  const LowMachReport rep = low_mach_scan(c.A_list, c.eta, base);
  const bool pass = low_mach_monotone(rep);

  json body = lowmach_to_json(rep);
  body["pass"] = pass;
  std::string text = lowmach_to_text(rep);
  text += std::string("verdict: ") + (pass ? "PASS" : "FAIL") +
          " (||rho-1|| column nonincreasing within 2 stderr)\n";
  detail::write_report_pair(dir, "lowmach", make_meta(c), std::move(body),
                            text);
  return pass ? 0 : 1;
}

}  // namespace cns1d
