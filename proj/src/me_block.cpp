#include "starme/me_block.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace starme {

MeBlock make_me_block(const Eigen::MatrixXd& xtilde,
                      const std::vector<Eigen::MatrixXd>& sigmas,
                      double f) {
  const int n = static_cast<int>(xtilde.rows());
  const int m = static_cast<int>(xtilde.cols());
  if (n == 0 || m == 0)
    throw std::invalid_argument("me block: empty replicate matrix");
  if (static_cast<int>(sigmas.size()) != n)
    throw std::invalid_argument("me block: need one covariance per site");
  if (f < 0.0) throw std::invalid_argument("me block: negative scaling f");

  MeBlock b;
  b.xtilde = xtilde;
  b.sigma = sigmas;
  b.sigma_inv.resize(n);
  b.quad_a.resize(n);
  b.quad_b.resize(n);
  b.prop_sd.resize(n);
  b.x = Eigen::VectorXd::Zero(n);
  b.f = f;

  Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd& s = sigmas[i];
    if (s.rows() != m || s.cols() != m)
      throw std::invalid_argument("me block: covariance " + std::to_string(i) +
                                  " has wrong dimensions");
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + s.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("me block: covariance " + std::to_string(i) +
                                  " not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("me block: covariance " + std::to_string(i) +
                                  " not positive definite");
    b.sigma_inv[i] = llt.solve(Eigen::MatrixXd::Identity(m, m));
    b.quad_a[i] = ones.dot(b.sigma_inv[i] * ones);
    b.quad_b[i] = ones.dot(b.sigma_inv[i] * xtilde.row(i).transpose());
    b.prop_sd[i] = std::sqrt(f * s.trace() / (double(m) * double(m)));
  }
  return b;
}

void initialize_latent(MeBlock& block) {
  const int n = block.n();
  block.x = block.xtilde.rowwise().mean();
  block.mu_x = block.x.mean();
  double ss = (block.x.array() - block.mu_x).square().sum();
  block.tau2_x = std::max(ss / std::max(n - 1, 1), 1e-6);
}

double propose(const MeBlock& block, int site, Rng& rng) {
  if (block.prop_sd[site] == 0.0) return block.x[site];
  return block.x[site] + rng.normal(0.0, block.prop_sd[site]);
}

double log_acceptance(MeBlock& block, int site, double x_prop, double x_cur,
                      double loglik_delta) {
  if (!std::isfinite(loglik_delta) || !std::isfinite(x_prop)) {
    ++block.nonfinite;
    return -std::numeric_limits<double>::infinity();
  }
  double dp = x_prop - block.mu_x;
  double dc = x_cur - block.mu_x;
  double prior = -(dp * dp - dc * dc) / (2.0 * block.tau2_x);
  // (x̃-x1)'Σ⁻¹(x̃-x1) expands to const - 2xb + x²a; the constant cancels
  double me = -0.5 * ((x_prop * x_prop - x_cur * x_cur) * block.quad_a[site] -
                      2.0 * (x_prop - x_cur) * block.quad_b[site]);
  return loglik_delta + prior + me;
}

void update_mu_x(MeBlock& block, Rng& rng) {
  const double n = block.n();
  double xbar = block.x.mean();
  double denom = n * block.tau_mu2 + block.tau2_x;
  double mean = n * xbar * block.tau_mu2 / denom;
  double var = block.tau2_x * block.tau_mu2 / denom;
  block.mu_x = mean + std::sqrt(var) * rng.normal();
}

void update_tau2_x(MeBlock& block, Rng& rng) {
  const int n = block.n();
  double ss = (block.x.array() - block.mu_x).square().sum();
  block.tau2_x = rng.inverse_gamma(block.a_x + 0.5 * n, block.b_x + 0.5 * ss);
}

Eigen::MatrixXd equicorrelation_cov(int m, double sigma2, double c) {
  if (sigma2 <= 0.0)
    throw std::invalid_argument("equicorrelation: sigma2 must be positive");
  if (!(1.0 - c > 0.0) || !(1.0 + (m - 1) * c > 0.0))
    throw std::invalid_argument(
        "equicorrelation: c outside the positive-definite range");
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(m, m, sigma2 * c);
  s.diagonal().setConstant(sigma2);
  return s;
}

}  // namespace starme
