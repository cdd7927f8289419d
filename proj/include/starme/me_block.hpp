#pragma once

#include <Eigen/Dense>
#include <vector>

#include "starme/rng.hpp"

namespace starme {

// latent-covariate state for replicated measurements with known per-site
// error covariance: x̃_i | x_i ~ N_M(x_i 1, Σ_i), x_i ~ N(μ_x, τ²_x)
struct MeBlock {
  Eigen::MatrixXd xtilde;                // n x M replicates
  std::vector<Eigen::MatrixXd> sigma;    // per-site M x M, fixed
  std::vector<Eigen::MatrixXd> sigma_inv;
  Eigen::VectorXd quad_a;                // 1'Σ⁻¹1 per site
  Eigen::VectorXd quad_b;                // 1'Σ⁻¹x̃ per site
  Eigen::VectorXd prop_sd;               // sqrt(f·tr(Σ)/M²)
  Eigen::VectorXd x;                     // current latent values

  double mu_x = 0.0;
  double tau2_x = 1.0;
  double tau_mu2 = 1000.0 * 1000.0;      // prior variance of μ_x
  double a_x = 0.001, b_x = 0.001;       // IG prior on τ²_x
  double f = 1.0;                        // proposal scaling

  long accepted = 0, attempted = 0, nonfinite = 0;

  int n() const { return static_cast<int>(xtilde.rows()); }
  int m() const { return static_cast<int>(xtilde.cols()); }
};

// validates every Σ_i (Cholesky must succeed) and precomputes the inverse
// quadratic forms and proposal standard deviations
MeBlock make_me_block(const Eigen::MatrixXd& xtilde,
                      const std::vector<Eigen::MatrixXd>& sigmas,
                      double f = 1.0);

// x_i ← replicate mean, μ_x ← grand mean, τ²_x ← variance of site means
// (floored at 1e-6)
void initialize_latent(MeBlock& block);

// random-walk step with variance f·tr(Σ_i)/M²
double propose(const MeBlock& block, int site, Rng& rng);

// log acceptance ratio: response-likelihood delta (supplied by the sampler)
// plus latent-prior and ME-likelihood ratios; non-finite deltas reject and
// are counted
double log_acceptance(MeBlock& block, int site, double x_prop, double x_cur,
                      double loglik_delta);

void update_mu_x(MeBlock& block, Rng& rng);
void update_tau2_x(MeBlock& block, Rng& rng);

// σ²[(1-c)I + c 11'], the equicorrelated replicate-error structure
Eigen::MatrixXd equicorrelation_cov(int m, double sigma2, double c);

}  // namespace starme
