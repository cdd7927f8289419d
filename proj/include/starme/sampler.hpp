#pragma once

#include <string>
#include <vector>

#include "starme/model.hpp"
#include "starme/rng.hpp"

namespace starme {

struct ChainConfig {
  long iterations = 10000;
  long burnin = 5000;
  int thinning = 5;
  std::uint64_t seed = 1;
  double mh_scale = 0.1;  // random-walk fallback step
  int latent_thin = 10;   // extra thinning applied to stored latent draws
  double tau2_a = 0.001, tau2_b = 0.001;
};

ChainConfig chain_config_from(const RunConfig& config);

struct BlockStats {
  std::string name;
  long accepted = 0, attempted = 0, fallbacks = 0, nonfinite = 0;
  double rate() const { return attempted ? double(accepted) / attempted : 0.0; }
};

struct PosteriorSamples {
  std::vector<std::string> term_names;  // flat order: location terms, scale terms
  std::vector<int> term_param;
  std::vector<std::vector<Eigen::VectorXd>> beta;  // [term][draw]
  std::vector<std::vector<double>> tau2;           // empty for flat-prior terms
  std::vector<std::vector<double>> omega;          // empty for non-tensor terms
  std::vector<double> mu_x, tau2_x;                // empty without an ME block
  std::vector<Eigen::VectorXd> latent;             // extra-thinned latent draws
  std::vector<long> latent_at;                     // stored-draw index of each
  Eigen::MatrixXd loglik;                          // draws x n
  Eigen::MatrixXd theta0, theta1;                  // draws x n parameter draws
  Eigen::MatrixXd theta_bar;                       // n x 2 posterior parameter means
  std::vector<BlockStats> stats;
  long draws = 0;
};

// mean and precision factor of the Gaussian-location full conditional,
// exposed so tests can compare against dense conjugate formulas
struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::LLT<Eigen::MatrixXd> llt;  // of the precision matrix
};
GaussianConditional gaussian_location_conditional(const Model& m, int term_idx);

void gibbs_update_gaussian_location(Model& m, int term_idx, Rng& rng);

// one IWLS proposal step with the standard MH correction; falls back to a
// random walk when score or curvature is not finite at the current state;
// returns whether the move was accepted
bool mh_update_coefficients(Model& m, int param, int term_idx, Rng& rng,
                            double fallback_scale, BlockStats& stats);

void update_smoothing_variance(Term& t, double a, double b, Rng& rng);

// discrete full conditional over the anisotropy grid (normalized)
Eigen::VectorXd anisotropy_weights(const Term& t);
void update_anisotropy(Term& t, Rng& rng, long& underflow_count);

// latent-covariate sweep in ascending site order, leaving the prior
// hyperparameters (mu_x, tau2_x) untouched
void me_sweep_sites(Model& m, Rng& rng, BlockStats& stats);

// full latent update: site sweep followed by the conjugate hyperparameter
// updates
void me_sweep(Model& m, Rng& rng, BlockStats& stats);

PosteriorSamples run_chain(Model& m, const ChainConfig& cc);

}  // namespace starme
