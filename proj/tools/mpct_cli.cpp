#include <iostream>

#include <CLI11.hpp>

#include "mpct/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Model predictive control for setpoint tracking"};
  app.require_subcommand(1);
  app.fallthrough();

  mpct::CliOptions opts;
  unsigned seed = 0;
  app.add_option("--config", opts.config_path, "Run config (JSON)")->required();
  app.add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
  app.add_flag("--strict", opts.strict, "Exit 1 if any enabled monitor fails");
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed for sampling");
  app.add_option("--tol-override", opts.tol_overrides, "Tolerance override KEY=VAL")->take_all();
  app.add_option("--ingredients", opts.ingredients_path, "Terminal ingredients written by `sets`");

  app.add_subcommand("analyze", "Steady-state map, reachable outputs and rank checks");
  app.add_subcommand("sets", "Terminal ingredients and the invariant set for tracking");
  app.add_subcommand("simulate", "Closed-loop simulation with monitors");
  app.add_subcommand("sweep-gamma", "Exact-penalty sweep of the 1-norm offset weight");
  app.add_subcommand("compare", "Feasible-set membership on a grid or random sample");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mpct::kExitConfigError;
  }
  if (*seed_opt) opts.seed = seed;
  opts.command = app.get_subcommands().front()->get_name();
  return mpct::run_command(opts, std::cout, std::cerr);
}
