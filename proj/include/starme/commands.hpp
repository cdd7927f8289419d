#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace starme {

// Workflow drivers behind the CLI subcommands. Each returns the list of
// files it wrote (so callers and tests can verify the artifact set) and
// throws with a one-line reason on failure.

struct SimulateArgs {
  std::string preset;  // gaussian_s1 | gaussian_s2 | beta_s1 | beta_s2 |
                       // app_synthetic
  std::string output_dir = ".";
  int replications = 0;  // 0: preset default
  std::uint64_t seed = 1;
  // optional chain overrides (0 keeps the preset value)
  long iterations = 0;
  long burnin = 0;
  int thinning = 0;
};
std::vector<std::string> cmd_simulate(const SimulateArgs& args);

struct DownscaleArgs {
  std::string input;
  std::string output = "downscaled.csv";
  long cells = 0;
  int k0 = 1;
  bool se_scale = false;  // divide covariances by k (mean standard error)
  std::string stem = "x";  // prefix of the emitted replicate columns
};
std::vector<std::string> cmd_downscale(const DownscaleArgs& args);

std::vector<std::string> cmd_fit(const std::string& config_path);

std::vector<std::string> cmd_evaluate(const std::string& config_path,
                                      int folds);

}  // namespace starme
