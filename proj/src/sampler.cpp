#include "starme/sampler.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace starme {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// log N(x; mean, P^{-1}) given the Cholesky factor of the precision P
double log_mvn_precision(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                         const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const Eigen::MatrixXd& L = llt.matrixLLT();
  double half_logdet = 0.0;
  for (int j = 0; j < L.rows(); ++j) half_logdet += std::log(L(j, j));
  Eigen::VectorXd d = x - mean;
  double quad = (llt.matrixU() * d).squaredNorm();  // d' L L' d = d' P d
  return half_logdet - 0.5 * x.size() * kLog2Pi - 0.5 * quad;
}

Eigen::VectorXd standard_normal(int p, Rng& rng) {
  Eigen::VectorXd z(p);
  for (int j = 0; j < p; ++j) z[j] = rng.normal();
  return z;
}

// draw from N(mean, P^{-1}) via back-substitution on the upper factor
Eigen::VectorXd sample_mvn_precision(const Eigen::VectorXd& mean,
                                     const Eigen::LLT<Eigen::MatrixXd>& llt,
                                     Rng& rng) {
  Eigen::VectorXd z = standard_normal(mean.size(), rng);
  return mean + llt.matrixU().solve(z);
}

double penalty_log_prior(const Term& t) {
  if (!t.penalized) return 0.0;
  return -0.5 * t.beta.dot(t.K * t.beta) / t.tau2;
}

double total_loglik(const Model& m) {
  double s = 0.0;
  for (int i = 0; i < m.n(); ++i) s += m.loglik_at(i);
  return s;
}

// score and expected curvature of the likelihood in eta_k at every
// observation; returns false on a non-finite or non-positive weight
bool score_curvature_all(const Model& m, int param, Eigen::VectorXd& s,
                         Eigen::VectorXd& w) {
  const int n = m.n();
  s.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    auto theta = m.theta_at(i);
    double si, wi;
    m.family.score_curvature(m.y[i], theta, param, si, wi);
    if (!std::isfinite(si) || !std::isfinite(wi) || wi <= 0.0) return false;
    s[i] = si;
    w[i] = wi;
  }
  return true;
}

struct IwlsProposal {
  GaussianConditional g;
  bool ok = false;
};

// quadratic approximation to the full conditional of t.beta centered at the
// current value: precision X'WX + K/tau2, mean solving against X'(s + W X b)
IwlsProposal iwls_proposal(const Term& t, const Eigen::VectorXd& s,
                           const Eigen::VectorXd& w) {
  IwlsProposal out;
  Eigen::MatrixXd WX = w.asDiagonal() * t.X;
  Eigen::MatrixXd P = t.X.transpose() * WX;
  if (t.penalized) P += t.K / t.tau2;
  out.g.llt.compute(P);
  if (out.g.llt.info() != Eigen::Success) return out;
  Eigen::VectorXd rhs = t.X.transpose() * (s + WX * t.beta);
  out.g.mean = out.g.llt.solve(rhs);
  out.ok = out.g.mean.allFinite();
  return out;
}

}  // namespace

ChainConfig chain_config_from(const RunConfig& config) {
  ChainConfig cc;
  cc.iterations = config.chain.iterations;
  cc.burnin = config.chain.burnin;
  cc.thinning = config.chain.thinning;
  cc.seed = config.seed;
  cc.mh_scale = config.chain.mh_scale;
  cc.latent_thin = config.chain.latent_thin;
  cc.tau2_a = config.chain.tau2_a;
  cc.tau2_b = config.chain.tau2_b;
  return cc;
}

GaussianConditional gaussian_location_conditional(const Model& m, int term_idx) {
  if (m.family.kind() != FamilyKind::Gaussian)
    throw std::logic_error("exact location update requires the gaussian family");
  const Term& t = m.pred[0].terms[term_idx];
  const int n = m.n();
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 1.0 / link_apply(m.family.link(1), m.pred[1].eta[i]);
  Eigen::VectorXd r = m.y - (m.pred[0].eta - t.X * t.beta);
  Eigen::MatrixXd WX = w.asDiagonal() * t.X;
  Eigen::MatrixXd P = t.X.transpose() * WX;
  if (t.penalized) P += t.K / t.tau2;
  GaussianConditional g;
  g.llt.compute(P);
  if (g.llt.info() != Eigen::Success)
    throw std::runtime_error("conjugate update failed: precision of term " +
                             t.name + " is not positive definite");
  g.mean = g.llt.solve(WX.transpose() * r);
  return g;
}

void gibbs_update_gaussian_location(Model& m, int term_idx, Rng& rng) {
  GaussianConditional g = gaussian_location_conditional(m, term_idx);
  Term& t = m.pred[0].terms[term_idx];
  Eigen::VectorXd beta_new = sample_mvn_precision(g.mean, g.llt, rng);
  m.pred[0].eta += t.X * (beta_new - t.beta);
  t.beta = beta_new;
}

bool mh_update_coefficients(Model& m, int param, int term_idx, Rng& rng,
                            double fallback_scale, BlockStats& stats) {
  Term& t = m.pred[param].terms[term_idx];
  ++stats.attempted;

  const double ll_cur = total_loglik(m);
  const double prior_cur = penalty_log_prior(t);
  const Eigen::VectorXd beta_cur = t.beta;
  const Eigen::VectorXd eta_cur = m.pred[param].eta;

  Eigen::VectorXd s, w;
  bool have_curvature = score_curvature_all(m, param, s, w);
  IwlsProposal fwd;
  if (have_curvature) fwd = iwls_proposal(t, s, w);

  Eigen::VectorXd beta_prop;
  double log_q_fwd = 0.0;  // symmetric-kernel terms cancel in the fallback
  bool used_iwls = have_curvature && fwd.ok;
  if (used_iwls) {
    beta_prop = sample_mvn_precision(fwd.g.mean, fwd.g.llt, rng);
    log_q_fwd = log_mvn_precision(beta_prop, fwd.g.mean, fwd.g.llt);
  } else {
    ++stats.fallbacks;
    beta_prop = beta_cur + fallback_scale * standard_normal(t.size(), rng);
  }

  // evaluate the proposed state in place, restoring on rejection
  m.pred[param].eta = eta_cur + t.X * (beta_prop - beta_cur);
  t.beta = beta_prop;
  const double ll_prop = total_loglik(m);
  const double prior_prop = penalty_log_prior(t);

  double log_alpha = (ll_prop + prior_prop) - (ll_cur + prior_cur);
  if (used_iwls) {
    Eigen::VectorXd s2, w2;
    bool rev_ok = score_curvature_all(m, param, s2, w2);
    IwlsProposal rev;
    if (rev_ok) rev = iwls_proposal(t, s2, w2);
    if (!rev_ok || !rev.ok) {
      // reverse kernel cannot be evaluated; treat the move as invalid
      ++stats.nonfinite;
      t.beta = beta_cur;
      m.pred[param].eta = eta_cur;
      return false;
    }
    log_alpha += log_mvn_precision(beta_cur, rev.g.mean, rev.g.llt) - log_q_fwd;
  }

  if (!std::isfinite(log_alpha)) {
    if (std::isnan(log_alpha)) ++stats.nonfinite;
    log_alpha = -std::numeric_limits<double>::infinity();
  }
  if (std::log(rng.uniform()) < log_alpha) {
    ++stats.accepted;
    return true;
  }
  t.beta = beta_cur;
  m.pred[param].eta = eta_cur;
  return false;
}

void update_smoothing_variance(Term& t, double a, double b, Rng& rng) {
  if (!t.penalized)
    throw std::logic_error("term " + t.name + " carries no smoothing variance");
  double quad = t.beta.dot(t.K * t.beta);
  t.tau2 = rng.inverse_gamma(a + 0.5 * t.k_rank, b + 0.5 * quad);
}

Eigen::VectorXd anisotropy_weights(const Term& t) {
  if (!t.has_omega)
    throw std::logic_error("term " + t.name + " has no anisotropy parameter");
  const int G = static_cast<int>(t.omega_grid.size());
  Eigen::VectorXd logw(G);
  const double log_tau2 = std::log(t.tau2);
  for (int g = 0; g < G; ++g) {
    double quad = t.beta.dot(t.K_omega[g] * t.beta);
    logw[g] = 0.5 * (t.logpdet_omega[g] - t.rank_omega[g] * log_tau2) -
              0.5 * quad / t.tau2;
  }
  double mx = logw.maxCoeff();
  if (!std::isfinite(mx)) return Eigen::VectorXd::Constant(G, std::nan(""));
  Eigen::VectorXd p = (logw.array() - mx).exp();
  return p / p.sum();
}

void update_anisotropy(Term& t, Rng& rng, long& underflow_count) {
  Eigen::VectorXd p = anisotropy_weights(t);
  if (!p.allFinite()) {
    ++underflow_count;  // keep the current grid point
    return;
  }
  std::vector<double> probs(p.data(), p.data() + p.size());
  int g = rng.categorical(probs);
  t.omega_idx = g;
  t.K = t.K_omega[g];
  t.k_rank = t.rank_omega[g];
}

void me_sweep_sites(Model& m, Rng& rng, BlockStats& stats) {
  Term& t = m.me_term_ref();
  MeBlock& me = m.me;
  const int k = m.me_param;
  for (int i = 0; i < m.n(); ++i) {
    const double x_cur = me.x[i];
    const double x_prop = propose(me, i, rng);
    if (x_prop == x_cur) continue;  // degenerate proposal (f = 0)
    ++stats.attempted;
    ++me.attempted;
    const int bin_prop = t.grid.index(x_prop);
    const double delta_eta =
        (t.binned_X.row(bin_prop) - t.X.row(i)).dot(t.beta);
    std::array<double, 2> eta{m.pred[0].eta[i], m.pred[1].eta[i]};
    const double ll_cur = m.family.log_density(m.y[i], m.family.apply_links(eta));
    eta[k] += delta_eta;
    const double ll_prop = m.family.log_density(m.y[i], m.family.apply_links(eta));
    const double la = log_acceptance(me, i, x_prop, x_cur, ll_prop - ll_cur);
    if (std::log(rng.uniform()) < la) {
      me.x[i] = x_prop;
      t.bin_idx[i] = bin_prop;
      t.X.row(i) = t.binned_X.row(bin_prop);
      m.pred[k].eta[i] += delta_eta;
      ++stats.accepted;
      ++me.accepted;
    }
  }
}

void me_sweep(Model& m, Rng& rng, BlockStats& stats) {
  me_sweep_sites(m, rng, stats);
  update_mu_x(m.me, rng);
  update_tau2_x(m.me, rng);
}

PosteriorSamples run_chain(Model& m, const ChainConfig& cc) {
  if (cc.iterations <= 0 || cc.burnin < 0 || cc.burnin >= cc.iterations)
    throw std::invalid_argument("chain: burn-in must lie in [0, iterations)");
  if (cc.thinning < 1 || cc.latent_thin < 1)
    throw std::invalid_argument("chain: thinning values must be >= 1");

  Rng rng(cc.seed);
  const int n = m.n();
  const long n_draws = (cc.iterations - cc.burnin) / cc.thinning;

  PosteriorSamples out;
  for (int k = 0; k < 2; ++k)
    for (const Term& t : m.pred[k].terms) {
      out.term_names.push_back(t.name);
      out.term_param.push_back(k);
    }
  const int n_terms = static_cast<int>(out.term_names.size());
  out.beta.resize(n_terms);
  out.tau2.resize(n_terms);
  out.omega.resize(n_terms);
  out.loglik.resize(n_draws, n);
  out.theta0.resize(n_draws, n);
  out.theta1.resize(n_draws, n);
  out.theta_bar = Eigen::MatrixXd::Zero(n, 2);

  std::vector<BlockStats> stats;
  for (int k = 0; k < 2; ++k)
    for (const Term& t : m.pred[k].terms) stats.push_back({t.name});
  long omega_underflow = 0;
  BlockStats latent_stats{"latent.x"};

  long stored = 0;
  for (long it = 1; it <= cc.iterations; ++it) {
    int block = 0;
    for (int k = 0; k < 2; ++k) {
      for (int j = 0; j < static_cast<int>(m.pred[k].terms.size()); ++j, ++block) {
        if (k == 0 && m.family.kind() == FamilyKind::Gaussian) {
          gibbs_update_gaussian_location(m, j, rng);
          ++stats[block].attempted;
          ++stats[block].accepted;
        } else {
          mh_update_coefficients(m, k, j, rng, cc.mh_scale, stats[block]);
        }
      }
    }
    for (int k = 0; k < 2; ++k)
      for (Term& t : m.pred[k].terms)
        if (t.penalized) {
          update_smoothing_variance(t, cc.tau2_a, cc.tau2_b, rng);
          if (t.has_omega) update_anisotropy(t, rng, omega_underflow);
        }
    if (m.has_me) me_sweep(m, rng, latent_stats);

    if (it > cc.burnin && (it - cc.burnin) % cc.thinning == 0) {
      int ti = 0;
      for (int k = 0; k < 2; ++k)
        for (const Term& t : m.pred[k].terms) {
          out.beta[ti].push_back(t.beta);
          if (t.penalized) out.tau2[ti].push_back(t.tau2);
          if (t.has_omega) out.omega[ti].push_back(t.omega());
          ++ti;
        }
      if (m.has_me) {
        out.mu_x.push_back(m.me.mu_x);
        out.tau2_x.push_back(m.me.tau2_x);
        if (stored % cc.latent_thin == 0) {
          out.latent.push_back(m.me.x);
          out.latent_at.push_back(stored);
        }
      }
      for (int i = 0; i < n; ++i) {
        auto theta = m.theta_at(i);
        out.theta0(stored, i) = theta[0];
        out.theta1(stored, i) = theta[1];
        out.theta_bar(i, 0) += theta[0];
        out.theta_bar(i, 1) += theta[1];
        out.loglik(stored, i) = m.family.log_density(m.y[i], theta);
      }
      ++stored;
    }
  }
  if (stored != n_draws)
    throw std::logic_error("chain stored an unexpected number of draws");
  if (n_draws > 0) out.theta_bar /= double(n_draws);
  out.draws = n_draws;

  if (m.has_me) {
    latent_stats.nonfinite = m.me.nonfinite;
    stats.push_back(latent_stats);
  }
  BlockStats omega_stats{"anisotropy"};
  omega_stats.nonfinite = omega_underflow;
  bool any_omega = false;
  for (int k = 0; k < 2; ++k)
    for (const Term& t : m.pred[k].terms) any_omega |= t.has_omega;
  if (any_omega) stats.push_back(omega_stats);
  out.stats = std::move(stats);
  return out;
}

}  // namespace starme
