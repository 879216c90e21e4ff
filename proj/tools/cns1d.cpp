// cns1d: simulator and statistical verification harness for a stochastically
// forced one-dimensional compressible flow with linear pressure.
//
// Exit status: 0 all verdicts pass, 1 a verdict failed, 2 configuration
// error, 3 runtime failure.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cns1d/commands.hpp"
#include "cns1d/config.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string seed_override;
  std::string out_dir;
  std::string resume_path;
  int workers = 0;
};

void add_common(CLI::App* sub, CliArgs* args) {
  sub->add_option("--config", args->config_path, "JSON configuration file")
      ->required();
  sub->add_option("--set", args->overrides,
                  "Override a config key (key=value, repeatable)");
  sub->add_option("--seed", args->seed_override,
                  "Override the config seed (shorthand for --set seed=N)");
  sub->add_option("--out", args->out_dir,
                  "Output directory (default: config out_dir, or the "
                  "CNS1D_OUT environment variable when set)");
  sub->add_option("--workers", args->workers,
                  "Worker threads for ensembles (default: hardware "
                  "concurrency)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Stochastic 1D compressible flow: simulation, ensembles, and "
      "inequality verification"};
  app.require_subcommand(1);

  CliArgs args;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Integrate one trajectory to CSV");
  CLI::App* ensemble =
      app.add_subcommand("ensemble", "Monte Carlo dissipation inequalities");
  CLI::App* verify =
      app.add_subcommand("verify", "Deterministic inequality verdict table");
  CLI::App* tightness = app.add_subcommand(
      "tightness", "Time-averaged measure concentration and budget");
  CLI::App* martingale = app.add_subcommand(
      "martingale", "Exponential tail of the compensated energy supremum");
  CLI::App* lowmach = app.add_subcommand(
      "lowmach", "Pressure-stiffness scan with noise scaled as A^-eta");
  for (CLI::App* sub :
       {simulate, ensemble, verify, tightness, martingale, lowmach}) {
    add_common(sub, &args);
  }
  simulate->add_option("--resume", args.resume_path,
                       "Continue from a checkpoint file");

  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<std::string> overrides = args.overrides;
    if (!args.seed_override.empty()) {
      overrides.push_back("seed=" + args.seed_override);
    }
    cns1d::RunConfig cfg;
    try {
      cfg = cns1d::load_config(args.config_path, overrides);
    } catch (const cns1d::Error& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }

    cns1d::CommandOptions opts;
    opts.workers = args.workers;
    opts.resume_path = args.resume_path;
    if (!args.out_dir.empty()) {
      opts.out_dir = args.out_dir;
    } else if (const char* env = std::getenv("CNS1D_OUT")) {
      if (*env) opts.out_dir = env;
    }

    int status = 3;
    try {
      if (*simulate) status = cns1d::cmd_simulate(cfg, opts);
      if (*ensemble) status = cns1d::cmd_ensemble(cfg, opts);
      if (*verify) status = cns1d::cmd_verify(cfg, opts);
      if (*tightness) status = cns1d::cmd_tightness(cfg, opts);
      if (*martingale) status = cns1d::cmd_martingale(cfg, opts);
      if (*lowmach) status = cns1d::cmd_lowmach(cfg, opts);
    } catch (const cns1d::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }
    if (status == 1) {
      std::cerr << "verdict failure (see report in output directory)\n";
    }
    return status;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
