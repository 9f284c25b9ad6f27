#include "choquard/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

using namespace choquard;
using namespace choquard::cli;

int main(int argc, char** argv) {
  CLI::App app{"choquard: simulator and variational toolkit for the inhomogeneous generalized Hartree equation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir, run_dir, criteria;
  std::vector<std::string> sets;
  int workers = 1;
  unsigned long long seed = 0;
  bool linear_only = false, reference = false, fault = false;

  app.add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides output.dir)");
  app.add_option("--workers", workers, "sweep worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides seed)");
  app.add_flag("--linear-only", linear_only, "drop the nonlinearity");
  app.add_option("--set", sets, "extra key=value overrides, applied after the config file");

  auto* params = app.add_subcommand("params", "validate parameters and print derived exponents");
  auto* ground = app.add_subcommand("ground", "compute the ground state");
  auto* evolve = app.add_subcommand("evolve", "run one trajectory with diagnostics and a verdict");
  auto* sweep = app.add_subcommand("sweep", "amplitude sweep over sweep.c");
  auto* check = app.add_subcommand("check", "run the property suite (16^3 grids unless --reference)");
  check->add_flag("--reference", reference, "use the reference grids and run lengths");
  check->add_flag("--inject-fault", fault, "corrupt one kernel multiplier before the oracle comparison");
  check->add_option("--criteria", criteria, "comma-separated criterion keys");
  auto* plots = app.add_subcommand("plots-data", "re-emit derived tables from a run directory");
  plots->add_option("run_dir", run_dir, "evolve output directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  Context ctx;
  try {
    std::string text = config_path.empty() ? std::string() : read_file(config_path);
    for (const auto& s : sets) text += "\n" + s;
    ctx.cfg = load_config(parse_kv(text));
    if (*seed_opt) ctx.cfg.seed = seed;
    if (linear_only) ctx.cfg.evolve.linear_only = true;
    if (!out_dir.empty()) ctx.cfg.out_dir = out_dir;
    ctx.out = ctx.cfg.out_dir;
    ctx.workers = workers;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return invalid_config;
  }

  try {
    if (*params) return run_params(ctx);
    if (*ground) return run_ground(ctx);
    if (*evolve) return run_evolve(ctx);
    if (*sweep) return run_sweep(ctx);
    if (*check) {
      CheckOptions co;
      co.reference = reference;
      co.inject_fault = fault;
      if (out_dir.empty()) ctx.out.clear();
      std::stringstream ss(criteria);
      for (std::string k; std::getline(ss, k, ',');)
        if (!trim(k).empty()) co.only.insert(trim(k));
      return run_check(ctx, co);
    }
    if (*plots) return run_plots_data(ctx, run_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return invalid_config;
  } catch (const GroundStateError& e) {
    std::cerr << "ground state failed: " << e.what() << "\n";
    return ground_failed;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return run_failed;
  }
  return ok;
}
