#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "starme/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "starme: Bayesian distributional regression with replicate "
      "measurement-error correction and kNN spatial downscaling"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  starme::SimulateArgs sim;
  CLI::App* simulate =
      app.add_subcommand("simulate",
                         "run a scenario preset and write its comparison "
                         "table (or the synthetic application bundle)");
  simulate
      ->add_option("--preset", sim.preset,
                   "gaussian_s1 | gaussian_s2 | beta_s1 | beta_s2 | "
                   "app_synthetic")
      ->required();
  simulate->add_option("--replications", sim.replications,
                       "override the preset replication count");
  simulate->add_option("--seed", sim.seed, "base seed (default 1)");
  simulate->add_option("--output-dir", sim.output_dir,
                       "directory for the emitted files (default .)");
  simulate->add_option("--iterations", sim.iterations,
                       "override the preset chain length");
  simulate->add_option("--burnin", sim.burnin, "override the preset burn-in");
  simulate->add_option("--thinning", sim.thinning,
                       "override the preset thinning");

  starme::DownscaleArgs down;
  CLI::App* downscale = app.add_subcommand(
      "downscale",
      "aggregate a point cloud onto a lattice via k nearest neighbors");
  downscale->add_option("--input", down.input, "points file: x, y, value[, layer] or x, y, <layer columns>")
      ->required();
  downscale->add_option("--cells", down.cells, "target lattice cell count")
      ->required();
  downscale->add_option("--k0", down.k0, "neighbors per cell")->required();
  downscale->add_flag("--se-scale", down.se_scale,
                      "divide covariances by k (standard-error scaling)");
  downscale->add_option("--output", down.output,
                        "output file (default downscaled.csv)");
  downscale->add_option("--stem", down.stem,
                        "prefix of the emitted replicate columns (default x)");

  std::string fit_config;
  CLI::App* fit = app.add_subcommand("fit", "run an MCMC fit from a config");
  fit->add_option("--config", fit_config, "model config file")->required();

  std::string eval_config;
  int folds = 10;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "cross-validated predictive scores for a model config");
  evaluate->add_option("--config", eval_config, "model config file")
      ->required();
  evaluate->add_option("--folds", folds, "number of folds (default 10)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) starme::cmd_simulate(sim);
    if (downscale->parsed()) starme::cmd_downscale(down);
    if (fit->parsed()) starme::cmd_fit(fit_config);
    if (evaluate->parsed()) starme::cmd_evaluate(eval_config, folds);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
