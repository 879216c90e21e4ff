// Ensembles, empirical time-averaged measures, tightness and tail reports,
// the dissipation budget, stationarity diagnostics, and the forcing scan.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "cns1d/stats.hpp"

using namespace cns1d;

namespace {

EnsembleConfig small_forced_config() {
  EnsembleConfig cfg;
  cfg.grid = make_grid(64);
  cfg.params = ModelParams{1.0};
  cfg.step = StepSpec{1e-3, 0.5};
  cfg.noise = NoiseParams{4, tune_sigma0(cfg.grid, 4, 3.0, 0.1), 3.0};
  cfg.init.kind = InitSpec::Kind::Sine;
  cfg.init.rho_amp = 0.2;
  cfg.init.u_amp = 0.1;
  cfg.M = 4;
  cfg.T = 0.5;
  cfg.stride = 0.05;
  cfg.seed = 1234;
  cfg.workers = 1;
  return cfg;
}

EnsembleConfig equilibrium_config() {
  EnsembleConfig cfg;
  cfg.grid = make_grid(32);
  cfg.params = ModelParams{1.0};
  cfg.step = StepSpec{1e-3, 0.5};
  cfg.noise = NoiseParams{1, 0.0, 3.0};
  cfg.init.kind = InitSpec::Kind::Uniform;
  cfg.M = 2;
  cfg.T = 0.2;
  cfg.stride = 0.02;
  cfg.seed = 9;
  cfg.workers = 1;
  return cfg;
}

}  // namespace

TEST_CASE("initial states pin the walls and the default is flat") {
  const GridSpec g = make_grid(64);
  InitSpec flat;
  const State s0 = make_init_state(g, flat);
  for (double r : s0.rho) CHECK(r == 1.0);
  for (double v : s0.u) CHECK(v == 0.0);

  InitSpec wavy;
  wavy.kind = InitSpec::Kind::Sine;
  wavy.rho_amp = 0.2;
  wavy.u_amp = 0.1;
  const State s1 = make_init_state(g, wavy);
  CHECK(s1.u.front() == 0.0);
  CHECK(s1.u.back() == 0.0);
  CHECK(std::abs(mass(s1) - 1.0) < 1e-13);
  CHECK(max_density(s1) > 1.1);

  InitSpec bad = wavy;
  bad.rho_amp = 1.0;
  CHECK_THROWS_AS(make_init_state(g, bad), ConfigError);
}

TEST_CASE("sampling stride in steps") {
  CHECK(stride_steps_for(0.05, 1.0, 1e-3) == 50);
  CHECK(stride_steps_for(0.0, 1.0, 1e-3) == 10);   // defaults to T/100
  CHECK(stride_steps_for(1e-4, 1.0, 1e-3) == 1);   // clamps to one step
}

TEST_CASE("ensembles are invariant under the worker count") {
  EnsembleConfig cfg = small_forced_config();
  cfg.workers = 1;
  const auto serial = run_ensemble(cfg);
  cfg.workers = 4;
  const auto parallel = run_ensemble(cfg);

  REQUIRE(serial.size() == parallel.size());
  for (std::size_t m = 0; m < serial.size(); ++m) {
    INFO("trajectory " << m);
    CHECK(serial[m].trajectory_id == static_cast<int>(m));
    REQUIRE(serial[m].samples.size() == parallel[m].samples.size());
    for (std::size_t q = 0; q < serial[m].samples.size(); ++q) {
      CHECK(serial[m].samples[q].f.H == parallel[m].samples[q].f.H);
      CHECK(serial[m].samples[q].diss_u_cum ==
            parallel[m].samples[q].diss_u_cum);
    }
    for (int j = 0; j < cfg.grid.n_cells; ++j) {
      CHECK(serial[m].final_state.rho[j] == parallel[m].final_state.rho[j]);
    }
  }

  const EnsembleSummary s1 = summarize_ensemble(serial, cfg.params);
  const EnsembleSummary s2 = summarize_ensemble(parallel, cfg.params);
  REQUIRE(s1.entropy.size() == s2.entropy.size());
  for (std::size_t q = 0; q < s1.entropy.size(); ++q) {
    CHECK(s1.entropy[q].lhs_mean == s2.entropy[q].lhs_mean);
    CHECK(s1.energy[q].lhs_mean == s2.energy[q].lhs_mean);
  }
}

TEST_CASE("trajectories differ across ids under forcing") {
  EnsembleConfig cfg = small_forced_config();
  cfg.M = 2;
  const auto recs = run_ensemble(cfg);
  double diff = 0.0;
  for (int j = 0; j < cfg.grid.n_cells; ++j) {
    diff = std::max(diff, std::abs(recs[0].final_state.rho[j] -
                                   recs[1].final_state.rho[j]));
  }
  CHECK(diff > 0.0);
}

TEST_CASE("unforced equilibrium ensemble summarizes to exact zeros") {
  const EnsembleConfig cfg = equilibrium_config();
  const auto recs = run_ensemble(cfg);
  const EnsembleSummary sum = summarize_ensemble(recs, cfg.params);
  CHECK(sum.M == 2);
  CHECK(sum.H0 == 0.0);
  CHECK(sum.E0 == 0.0);
  CHECK(sum.sigma_sup_sq == 0.0);
  CHECK(sum.entropy_holds);
  CHECK(sum.energy_holds);
  for (const MeanBoundRow& r : sum.entropy) {
    CHECK(r.lhs_mean == 0.0);
    CHECK(r.rhs == 0.0);
  }
  CHECK(sum.psi_sup_moment1 == 0.0);
  CHECK(sum.psi_sup_moment2 == 0.0);
  for (double x : sum.mart_stats) CHECK(x == 0.0);
}

TEST_CASE("summaries reject ragged ensembles") {
  EnsembleConfig cfg = equilibrium_config();
  auto recs = run_ensemble(cfg);
  recs[1].samples.pop_back();
  CHECK_THROWS_AS(summarize_ensemble(recs, cfg.params), ValidationError);
}

TEST_CASE("entropy and energy rows use the stated bound structure") {
  EnsembleConfig cfg = small_forced_config();
  cfg.M = 3;
  const auto recs = run_ensemble(cfg);
  const EnsembleSummary sum = summarize_ensemble(recs, cfg.params);
  REQUIRE(!sum.entropy.empty());
  const std::size_t last = sum.entropy.size() - 1;
  CHECK(sum.entropy[last].rhs ==
        Catch::Approx(sum.H0 + 0.5 * sum.sigma_sup_sq * cfg.T).epsilon(1e-12));
  CHECK(sum.energy[last].rhs ==
        Catch::Approx(sum.E0 + 0.5 * sum.sigma_sup_sq * cfg.T).epsilon(1e-12));

  // Recompute one lhs mean by hand.
  double acc = 0.0;
  for (const auto& r : recs) {
    acc += r.samples[last].f.H + r.samples[last].diss_u_cum;
  }
  CHECK(sum.entropy[last].lhs_mean ==
        Catch::Approx(acc / 3.0).epsilon(1e-15));
}

TEST_CASE("time-averaged measure counts and windows") {
  EnsembleConfig cfg = small_forced_config();
  cfg.M = 1;
  const auto recs = run_ensemble(cfg);
  const TrajectoryRecord& rec = recs[0];

  const EmpiricalMeasure m = time_averaged_measure(rec, 0.0, 0.5);
  CHECK(m.samples.size() == 10);  // (0, 0.5] at stride 0.05
  const EmpiricalMeasure tail = time_averaged_measure(rec, 0.25, 0.5);
  CHECK(tail.samples.size() == 5);

  // The tail mean equals the mean of the last five sampled values.
  double acc = 0.0;
  for (std::size_t q = rec.samples.size() - 5; q < rec.samples.size(); ++q) {
    acc += rec.samples[q].f.grad_u_sq;
  }
  CHECK(measure_mean(tail, ObservableId::GradUSq) ==
        Catch::Approx(acc / 5.0).epsilon(1e-15));

  SECTION("window validation") {
    CHECK_THROWS_AS(time_averaged_measure(rec, 0.5, 0.5), ValidationError);
    CHECK_THROWS_AS(time_averaged_measure(rec, 0.0, 1.0), ValidationError);
    CHECK_THROWS_AS(time_averaged_measure(rec, 0.013, 0.5), ValidationError);
  }

  SECTION("records without stride sampling are rejected") {
    const NoiseBasis basis =
        build_noise(cfg.grid, cfg.noise.K, cfg.noise.sigma0, cfg.noise.p);
    const TrajectoryRecord bare =
        integrate_path(make_init_state(cfg.grid, cfg.init), cfg.params,
                       cfg.step, basis, cfg.seed, 0, 0.1);
    CHECK_THROWS_AS(time_averaged_measure(bare, 0.0, 0.1), ValidationError);
  }
}

TEST_CASE("tightness report structure and equilibrium values") {
  const EnsembleConfig cfg = equilibrium_config();
  const auto recs = run_ensemble(cfg);
  const EmpiricalMeasure m = time_averaged_measure(recs[0], 0.0, cfg.T);
  const TightnessReport rep =
      tightness_report(m, cfg.params, 0.0, {1.0, 2.0});

  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].S_R ==
        Catch::Approx(4.0 * std::exp(2.0)).epsilon(1e-15));
  CHECK(rep.rows[1].S_R ==
        Catch::Approx(16.0 * std::exp(4.0)).epsilon(1e-15));
  for (const TightnessRow& row : rep.rows) {
    CHECK(row.mu_K == 1.0);   // equilibrium: zero dissipation observables
    CHECK(row.mu_C == 1.0);   // 0 + 0 + 1 + 1 = 2 <= S_R
    CHECK(row.lower_bound == 1.0);
    CHECK(row.mu_C >= row.mu_K - 1e-15);
  }
  CHECK_THROWS_AS(tightness_report(m, cfg.params, 0.0, {0.0}),
                  ValidationError);
}

TEST_CASE("tightness fractions are nondecreasing in the level") {
  EnsembleConfig cfg = small_forced_config();
  cfg.M = 1;
  cfg.T = 1.0;
  const auto recs = run_ensemble(cfg);
  const EmpiricalMeasure m = time_averaged_measure(recs[0], 0.0, cfg.T);
  const TightnessReport rep =
      tightness_report(m, cfg.params, 0.1, {0.25, 0.5, 1.0, 2.0});
  for (std::size_t q = 1; q < rep.rows.size(); ++q) {
    CHECK(rep.rows[q].mu_K >= rep.rows[q - 1].mu_K);
    CHECK(rep.rows[q].mu_C >= rep.rows[q - 1].mu_C);
  }
}

TEST_CASE("tail report rate constant and monotonicity") {
  const ModelParams unit{1.0};
  const std::vector<double> stats = {0.1, 0.4, 0.7, 1.5, 2.2, 0.05};

  const MartingaleReport rep =
      martingale_tail(stats, unit, 0.5, {0.5, 1.0, 2.0});
  CHECK(rep.gamma0 == Catch::Approx(1.0).epsilon(1e-15));
  CHECK(rep.M == 6);
  for (std::size_t q = 0; q < rep.rows.size(); ++q) {
    const MartingaleRow& row = rep.rows[q];
    CHECK(row.bound == Catch::Approx(std::exp(-row.R)).epsilon(1e-14));
    if (q > 0) CHECK(row.freq <= rep.rows[q - 1].freq);
  }
  CHECK(rep.rows[0].freq == Catch::Approx(3.0 / 6.0).epsilon(1e-15));
  CHECK(rep.rows[1].freq == Catch::Approx(2.0 / 6.0).epsilon(1e-15));

  // Small pressure constant weakens the rate through min{1, 4A^2}.
  const MartingaleReport weak =
      martingale_tail(stats, ModelParams{0.25}, 0.5, {1.0});
  CHECK(weak.gamma0 == Catch::Approx(0.25).epsilon(1e-15));

  CHECK_THROWS_AS(martingale_tail(stats, unit, 0.0, {1.0}), ValidationError);
  CHECK_THROWS_AS(martingale_tail({}, unit, 0.5, {1.0}), ValidationError);
}

TEST_CASE("dissipation budget on the equilibrium measure is exactly met") {
  const EnsembleConfig cfg = equilibrium_config();
  const auto recs = run_ensemble(cfg);
  const EmpiricalMeasure m = time_averaged_measure(recs[0], 0.0, cfg.T);
  const BudgetVerdict v = dissipation_budget(m, cfg.params, 0.0);
  CHECK(v.mean == 0.0);
  CHECK(v.bound == 0.0);
  CHECK(v.holds);
}

TEST_CASE("KS distance basics") {
  CHECK(ks_distance({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
  CHECK(ks_distance({0.0, 0.1}, {5.0, 6.0}) == 1.0);
  CHECK(ks_distance({1.0, 2.0}, {1.5, 2.5}) == Catch::Approx(0.5));
  CHECK_THROWS_AS(ks_distance({}, {1.0}), ValidationError);
}

TEST_CASE("stationarity diagnostic windows") {
  EnsembleConfig cfg = small_forced_config();
  cfg.M = 1;
  cfg.T = 1.0;
  const auto recs = run_ensemble(cfg);

  // Shift zero compares a window with itself.
  const double same =
      stationarity_diagnostic(recs[0], ObservableId::GradUSq, 0.0, 0.5, 1e-12);
  CHECK(same == 0.0);

  const double shifted =
      stationarity_diagnostic(recs[0], ObservableId::GradUSq, 0.0, 0.4, 0.2);
  CHECK(shifted >= 0.0);
  CHECK(shifted <= 1.0);

  CHECK_THROWS_AS(stationarity_diagnostic(recs[0], ObservableId::GradUSq, 0.0,
                                          0.8, 0.4),
                  ValidationError);
}

TEST_CASE("equilibrium stationarity distance vanishes") {
  const EnsembleConfig cfg = equilibrium_config();
  const auto recs = run_ensemble(cfg);
  const double d =
      stationarity_diagnostic(recs[0], ObservableId::EntropyH, 0.0, 0.08, 0.04);
  CHECK(d == 0.0);
}

TEST_CASE("forcing scan: unforced rows are exactly flat") {
  EnsembleConfig base = equilibrium_config();
  const LowMachReport rep = low_mach_scan({1.0, 2.0, 4.0}, 1.0, base);
  REQUIRE(rep.rows.size() == 3);
  for (const LowMachRow& row : rep.rows) {
    CHECK(row.sigma0 == 0.0);
    CHECK(row.sigma_sup_sq == 0.0);
    CHECK(row.rho_dev_mean == 0.0);
    CHECK(row.u_mean == 0.0);
  }
  CHECK(low_mach_monotone(rep));
}

TEST_CASE("forcing scan matches a hand-built ensemble at a single level") {
  EnsembleConfig base = small_forced_config();
  base.M = 2;
  base.T = 0.2;
  base.stride = 0.02;
  base.T0 = 0.1;
  const double eta = 1.0;
  const double A = 2.0;

  const LowMachReport rep = low_mach_scan({A}, eta, base);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].sigma0 ==
        Catch::Approx(base.noise.sigma0 * 0.5).epsilon(1e-15));

  EnsembleConfig manual = base;
  manual.params.A = A;
  manual.noise.sigma0 = base.noise.sigma0 * 0.5;
  const auto recs = run_ensemble(manual);
  std::vector<double> dev_means;
  for (const auto& rec : recs) {
    double acc = 0.0;
    long long cnt = 0;
    for (const Sample& smp : rec.samples) {
      if (smp.t <= base.T0) continue;
      acc += smp.l2_rho_dev;
      ++cnt;
    }
    dev_means.push_back(acc / static_cast<double>(cnt));
  }
  double mean = 0.0, se = 0.0;
  mean_and_se(dev_means, mean, se);
  CHECK(rep.rows[0].rho_dev_mean == Catch::Approx(mean).epsilon(1e-15));
  CHECK(rep.rows[0].rho_dev_se == Catch::Approx(se).epsilon(1e-15));
}

TEST_CASE("monotonicity gate tolerates noise within the stated sigmas") {
  LowMachReport rep;
  rep.eta = 1.0;
  rep.rows.push_back(LowMachRow{1.0, 0.1, 0.01, 0.50, 0.01, 0.0, 0.0});
  rep.rows.push_back(LowMachRow{2.0, 0.05, 0.0025, 0.51, 0.01, 0.0, 0.0});
  CHECK(low_mach_monotone(rep, 2.0));  // rise of 0.01 within 2 * combined se
  rep.rows[1].rho_dev_mean = 0.60;
  CHECK_FALSE(low_mach_monotone(rep, 2.0));
}
