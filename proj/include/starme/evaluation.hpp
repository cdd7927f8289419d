#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "starme/config.hpp"
#include "starme/dataset.hpp"
#include "starme/families.hpp"
#include "starme/sampler.hpp"

namespace starme {

struct DicResult {
  double dic = 0, p_d = 0, mean_deviance = 0, deviance_at_mean = 0;
};
// deviance_at_mean must be evaluated at the posterior mean of the
// distribution parameters (not of the coefficients)
DicResult dic(const Eigen::VectorXd& deviance_draws, double deviance_at_mean);

struct WaicResult {
  double waic = 0, lppd = 0, p_waic = 0;
};
// loglik is draws x observations; rejects non-finite entries by index
WaicResult waic(const Eigen::MatrixXd& loglik);

// per-observation logarithmic, quadratic and spherical scores of the
// draw-mixture predictive density (larger is better); the L2 norm is
// computed with a 2048-point midpoint rule
struct ProperScores {
  Eigen::VectorXd log_score, quadratic, spherical;
  double mean_log = 0, mean_quadratic = 0, mean_spherical = 0;
  long floored = 0;  // observations whose log predictive hit the -700 floor
};
ProperScores proper_scores(const ResponseFamily& family,
                           const Eigen::VectorXd& y,
                           const Eigen::MatrixXd& theta0,   // draws x n
                           const Eigen::MatrixXd& theta1);  // draws x n

// randomized-free quantile residuals at plug-in parameters: cdf values are
// clamped to [1e-12, 1-1e-12] before the probit transform
Eigen::VectorXd quantile_residuals(const ResponseFamily& family,
                                   const Eigen::VectorXd& y,
                                   const Eigen::MatrixXd& theta_bar);

// two-sided Kolmogorov-Smirnov distance to the standard normal
double ks_statistic(const Eigen::VectorXd& z);
// 5% critical value of the one-sample test (Stephens' approximation)
double ks_critical_5pct(int n);

// type-7 (linearly interpolated) quantile of an ascending-sorted sample
double quantile_sorted(const std::vector<double>& sorted, double p);

Eigen::VectorXd deviance_draws(const Eigen::MatrixXd& loglik);
double deviance_at(const ResponseFamily& family, const Eigen::VectorXd& y,
                   const Eigen::MatrixXd& theta);  // n x 2

// root mean squared difference after removing each curve's own mean, so the
// comparison ignores the level absorbed by the intercept
double rmse_vs_truth(const Eigen::VectorXd& estimate,
                     const Eigen::VectorXd& truth);

struct CvResult {
  Eigen::VectorXd fold_log, fold_quadratic, fold_spherical;
  double mean_log = 0, mean_quadratic = 0, mean_spherical = 0;
  long floored = 0;
  std::vector<int> fold_of;  // fold assignment per row
};
// R-fold cross validation: rows are shuffled with the given seed and dealt
// round-robin; each fold refits the model on the remainder and scores the
// held-out rows under the draw-mixture predictive. Held-out latent
// covariates enter through their per-draw conditional mean given the
// replicates and the drawn (mu_x, tau2_x); fold chains use consecutive seeds
CvResult cross_validate(const RunConfig& cfg, const DataTable& data,
                        int folds, std::uint64_t seed);

// conditional mean of a latent covariate given its replicate summary
// (a = 1'S^-1 1, b = 1'S^-1 xtilde) and the latent-level prior draw
double latent_plugin_mean(double a, double b, double mu_x, double tau2_x);

}  // namespace starme
