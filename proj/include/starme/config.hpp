#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace starme {

enum class TermKind { Intercept, Linear, Pspline, Tensor, MePspline };

struct TermSpec {
  TermKind kind = TermKind::Intercept;
  std::string var;    // covariate name; replicate prefix for me_pspline
  std::string var2;   // second coordinate for tensor terms
  int knots = 20;     // interior knot count (first axis)
  int knots2 = 8;
  int degree = 3;
  int order = 2;      // difference order

  std::string label() const;
};

struct ChainSettings {
  long iterations = -1;  // -1: resolved from the family default
  long burnin = -1;
  int thinning = -1;
  double mh_scale = 0.1;    // random-walk fallback scale
  int latent_thin = 10;     // extra thinning for stored latent draws
  double proposal_f = 1.0;  // ME proposal scaling
  int bins = 1000;
  double tau2_a = 0.001, tau2_b = 0.001;
};

struct MeSettings {
  std::string covariance = "columns";  // "columns" | "global"
  double sigma2 = 0.0;                 // global pattern only
  double c_u = 0.0;
};

struct RunConfig {
  std::string command = "fit";
  std::string family = "gaussian";
  std::string input;
  std::string output_dir = ".";
  std::uint64_t seed = 1;
  ChainSettings chain;
  std::vector<TermSpec> location;
  std::vector<TermSpec> scale;
  MeSettings me;

  // replicate prefix of the (single) me_pspline term, empty when absent
  std::string me_prefix() const;
};

struct ParseResult {
  RunConfig config;
  std::vector<std::string> errors;    // all problems, each with a line number
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

// fills unset (-1) chain fields with the family defaults: beta runs
// 50000/35000 with thinning 15, everything else 10000/5000 with thinning 5
ChainSettings resolve_chain_defaults(ChainSettings chain,
                                     const std::string& family);

// sectioned key-value text; collects every error instead of stopping at the
// first, and fills family-dependent chain defaults when the keys are absent
ParseResult parse_config(const std::string& text);

// canonical form: parse(serialize(c)) reproduces c, and serialize is a fixed
// point on its own output
std::string serialize_config(const RunConfig& config);

}  // namespace starme
