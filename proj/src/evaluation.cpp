#include "starme/evaluation.hpp"

#include <boost/math/distributions/normal.hpp>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "starme/model.hpp"

namespace starme {

namespace {

constexpr int kQuadPoints = 2048;
constexpr double kLogFloor = -700.0;

double log_sum_exp_col(const Eigen::MatrixXd& m, int col) {
  double mx = m.col(col).maxCoeff();
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (int s = 0; s < m.rows(); ++s) acc += std::exp(m(s, col) - mx);
  return mx + std::log(acc);
}

// densities of a single parameter draw on the quadrature grid, accumulated
// into acc; the beta normalizing constant is hoisted out of the grid loop
void accumulate_density(FamilyKind kind, double t0, double t1,
                        const Eigen::ArrayXd& grid, const Eigen::ArrayXd& log_g,
                        const Eigen::ArrayXd& log_1mg, Eigen::ArrayXd& acc) {
  if (kind == FamilyKind::Gaussian) {
    double inv2 = 0.5 / t1;
    double c = -0.5 * std::log(2.0 * M_PI * t1);
    acc += (c - (grid - t0).square() * inv2).exp();
  } else {
    BetaShape sh = BetaShape::from_mean_scale(t0, t1);
    double c = std::lgamma(sh.p + sh.q) - std::lgamma(sh.p) - std::lgamma(sh.q);
    acc += (c + (sh.p - 1.0) * log_g + (sh.q - 1.0) * log_1mg).exp();
  }
}

}  // namespace

DicResult dic(const Eigen::VectorXd& deviance_draws, double deviance_at_mean) {
  if (deviance_draws.size() == 0)
    throw std::invalid_argument("dic: no deviance draws");
  if (!deviance_draws.allFinite() || !std::isfinite(deviance_at_mean))
    throw std::invalid_argument("dic: non-finite deviance");
  DicResult r;
  r.mean_deviance = deviance_draws.mean();
  r.deviance_at_mean = deviance_at_mean;
  r.p_d = r.mean_deviance - deviance_at_mean;
  r.dic = deviance_at_mean + 2.0 * r.p_d;
  return r;
}

WaicResult waic(const Eigen::MatrixXd& loglik) {
  const int S = static_cast<int>(loglik.rows());
  const int n = static_cast<int>(loglik.cols());
  if (S < 2) throw std::invalid_argument("waic: need at least two draws");
  for (int s = 0; s < S; ++s)
    for (int i = 0; i < n; ++i)
      if (!std::isfinite(loglik(s, i)))
        throw std::invalid_argument(
            "waic: non-finite log-likelihood at draw " + std::to_string(s) +
            ", observation " + std::to_string(i));
  WaicResult r;
  const double log_s = std::log(double(S));
  for (int i = 0; i < n; ++i) {
    r.lppd += log_sum_exp_col(loglik, i) - log_s;
    double mean = loglik.col(i).mean();
    r.p_waic += (loglik.col(i).array() - mean).square().sum() / (S - 1);
  }
  r.waic = -2.0 * (r.lppd - r.p_waic);
  return r;
}

ProperScores proper_scores(const ResponseFamily& family,
                           const Eigen::VectorXd& y,
                           const Eigen::MatrixXd& theta0,
                           const Eigen::MatrixXd& theta1) {
  const int S = static_cast<int>(theta0.rows());
  const int n = static_cast<int>(y.size());
  if (theta1.rows() != S || theta0.cols() != n || theta1.cols() != n)
    throw std::invalid_argument("proper_scores: dimension mismatch");
  if (S < 1) throw std::invalid_argument("proper_scores: no draws");

  ProperScores out;
  out.log_score.resize(n);
  out.quadratic.resize(n);
  out.spherical.resize(n);

  const bool beta = family.kind() == FamilyKind::Beta;
  Eigen::ArrayXd grid(kQuadPoints), log_g, log_1mg;
  if (beta) {
    for (int j = 0; j < kQuadPoints; ++j)
      grid[j] = (j + 0.5) / double(kQuadPoints);
    log_g = grid.log();
    log_1mg = (1.0 - grid).log();
  }

  Eigen::VectorXd ll(S);
  Eigen::ArrayXd dens(kQuadPoints);
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < S; ++s)
      ll[s] = family.log_density(y[i], {theta0(s, i), theta1(s, i)});
    double mx = ll.maxCoeff();
    double log_pred;
    if (!std::isfinite(mx)) {
      log_pred = kLogFloor;
      ++out.floored;
    } else {
      double acc = 0.0;
      for (int s = 0; s < S; ++s) acc += std::exp(ll[s] - mx);
      log_pred = mx + std::log(acc / S);
      if (log_pred < kLogFloor) {
        log_pred = kLogFloor;
        ++out.floored;
      }
    }
    out.log_score[i] = log_pred;
    double p_y = std::exp(log_pred);

    double step;
    if (beta) {
      step = 1.0 / kQuadPoints;
    } else {
      // cover the mixture to ten predictive standard deviations
      double m_mu = theta0.col(i).mean();
      double v_mu = S > 1 ? (theta0.col(i).array() - m_mu).square().sum() / (S - 1)
                          : 0.0;
      double sd = std::sqrt(theta1.col(i).mean() + v_mu);
      double lo = m_mu - 10.0 * sd, hi = m_mu + 10.0 * sd;
      step = (hi - lo) / kQuadPoints;
      for (int j = 0; j < kQuadPoints; ++j) grid[j] = lo + (j + 0.5) * step;
    }
    dens.setZero();
    for (int s = 0; s < S; ++s)
      accumulate_density(family.kind(), theta0(s, i), theta1(s, i), grid,
                         log_g, log_1mg, dens);
    dens /= double(S);
    double norm2 = dens.square().sum() * step;
    out.quadratic[i] = 2.0 * p_y - norm2;
    out.spherical[i] = p_y / std::sqrt(norm2);
  }
  out.mean_log = out.log_score.mean();
  out.mean_quadratic = out.quadratic.mean();
  out.mean_spherical = out.spherical.mean();
  return out;
}

Eigen::VectorXd quantile_residuals(const ResponseFamily& family,
                                   const Eigen::VectorXd& y,
                                   const Eigen::MatrixXd& theta_bar) {
  const int n = static_cast<int>(y.size());
  if (theta_bar.rows() != n || theta_bar.cols() != 2)
    throw std::invalid_argument("quantile_residuals: theta must be n x 2");
  boost::math::normal_distribution<double> std_normal;
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) {
    double u = family.cdf(y[i], {theta_bar(i, 0), theta_bar(i, 1)});
    u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
    r[i] = boost::math::quantile(std_normal, u);
  }
  return r;
}

double ks_statistic(const Eigen::VectorXd& z) {
  const int n = static_cast<int>(z.size());
  if (n == 0) throw std::invalid_argument("ks_statistic: empty sample");
  std::vector<double> s(z.data(), z.data() + n);
  std::sort(s.begin(), s.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    double f = 0.5 * std::erfc(-s[i] / std::sqrt(2.0));
    d = std::max(d, std::max(f - double(i) / n, double(i + 1) / n - f));
  }
  return d;
}

double ks_critical_5pct(int n) {
  if (n < 1) throw std::invalid_argument("ks_critical_5pct: n must be positive");
  double rn = std::sqrt(double(n));
  return 1.358 / (rn + 0.12 + 0.11 / rn);
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty())
    throw std::invalid_argument("quantile_sorted: empty sample");
  const double j = (static_cast<double>(sorted.size()) - 1.0) * p;
  const size_t lo = static_cast<size_t>(j);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (j - lo) * (sorted[lo + 1] - sorted[lo]);
}

Eigen::VectorXd deviance_draws(const Eigen::MatrixXd& loglik) {
  return -2.0 * loglik.rowwise().sum();
}

double deviance_at(const ResponseFamily& family, const Eigen::VectorXd& y,
                   const Eigen::MatrixXd& theta) {
  if (theta.rows() != y.size() || theta.cols() != 2)
    throw std::invalid_argument("deviance_at: theta must be n x 2");
  double ll = 0.0;
  for (int i = 0; i < y.size(); ++i)
    ll += family.log_density(y[i], {theta(i, 0), theta(i, 1)});
  return -2.0 * ll;
}

double rmse_vs_truth(const Eigen::VectorXd& estimate,
                     const Eigen::VectorXd& truth) {
  if (estimate.size() != truth.size() || estimate.size() == 0)
    throw std::invalid_argument("rmse_vs_truth: length mismatch");
  Eigen::ArrayXd d = (estimate.array() - estimate.mean()) -
                     (truth.array() - truth.mean());
  return std::sqrt(d.square().mean());
}

double latent_plugin_mean(double a, double b, double mu_x, double tau2_x) {
  return (b + mu_x / tau2_x) / (a + 1.0 / tau2_x);
}

namespace {

// design rows of one fitted term at held-out covariate values
Eigen::MatrixXd heldout_rows(const Term& t, const DataTable& data,
                             const std::vector<int>& rows) {
  const int m = static_cast<int>(rows.size());
  switch (t.spec.kind) {
    case TermKind::Intercept:
      return Eigen::MatrixXd::Ones(m, 1);
    case TermKind::Linear: {
      const std::vector<double>& v = data.col(t.spec.var);
      Eigen::MatrixXd h(m, 1);
      for (int j = 0; j < m; ++j) h(j, 0) = v[rows[j]];
      return h;
    }
    case TermKind::Pspline: {
      const std::vector<double>& v = data.col(t.spec.var);
      std::vector<double> x(m);
      for (int j = 0; j < m; ++j) x[j] = v[rows[j]];
      return smooth_rows(t, x);
    }
    case TermKind::Tensor: {
      const std::vector<double>& v1 = data.col(t.spec.var);
      const std::vector<double>& v2 = data.col(t.spec.var2);
      std::vector<double> x(m), y(m);
      for (int j = 0; j < m; ++j) {
        x[j] = v1[rows[j]];
        y[j] = v2[rows[j]];
      }
      return smooth_rows_2d(t, x, y);
    }
    default:
      throw std::logic_error("heldout_rows: latent terms handled separately");
  }
}

}  // namespace

CvResult cross_validate(const RunConfig& cfg, const DataTable& data,
                        int folds, std::uint64_t seed) {
  const int n = static_cast<int>(data.n_rows());
  if (folds < 2) throw std::invalid_argument("cross_validate: need >= 2 folds");
  if (folds > n)
    throw std::invalid_argument("cross_validate: more folds than rows");

  // shuffled round-robin assignment gives near-equal fold sizes
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(i + 1)]);
  std::vector<int> fold_of(n);
  for (int j = 0; j < n; ++j) fold_of[order[j]] = j % folds;

  Model full = build_model(cfg, data);  // validates rows, holds ME quadratics

  CvResult out;
  out.fold_of = fold_of;
  out.fold_log.resize(folds);
  out.fold_quadratic.resize(folds);
  out.fold_spherical.resize(folds);

  for (int r = 0; r < folds; ++r) {
    std::vector<int> train, test;
    for (int j = 0; j < n; ++j) (fold_of[j] == r ? test : train).push_back(j);
    Model m = build_model(cfg, subset_rows(data, train));
    ChainConfig cc = chain_config_from(cfg);
    cc.seed = cfg.seed + 1 + static_cast<std::uint64_t>(r);
    PosteriorSamples ps = run_chain(m, cc);

    const long S = ps.draws;
    const int mt = static_cast<int>(test.size());
    Eigen::MatrixXd eta0 = Eigen::MatrixXd::Zero(S, mt);
    Eigen::MatrixXd eta1 = Eigen::MatrixXd::Zero(S, mt);
    int ti = 0;
    for (int k = 0; k < 2; ++k)
      for (const Term& t : m.pred[k].terms) {
        Eigen::MatrixXd& eta = k == 0 ? eta0 : eta1;
        if (t.is_me) {
          for (long s = 0; s < S; ++s)
            for (int j = 0; j < mt; ++j) {
              double xhat =
                  latent_plugin_mean(full.me.quad_a[test[j]],
                                     full.me.quad_b[test[j]], ps.mu_x[s],
                                     ps.tau2_x[s]);
              eta(s, j) +=
                  t.binned_X.row(t.grid.index(xhat)).dot(ps.beta[ti][s]);
            }
        } else {
          Eigen::MatrixXd h = heldout_rows(t, data, test);
          Eigen::MatrixXd b(t.size(), S);
          for (long s = 0; s < S; ++s) b.col(s) = ps.beta[ti][s];
          eta += (h * b).transpose();
        }
        ++ti;
      }

    Eigen::MatrixXd th0(S, mt), th1(S, mt);
    for (long s = 0; s < S; ++s)
      for (int j = 0; j < mt; ++j) {
        auto theta = m.family.apply_links({eta0(s, j), eta1(s, j)});
        th0(s, j) = theta[0];
        th1(s, j) = theta[1];
      }
    Eigen::VectorXd yt(mt);
    for (int j = 0; j < mt; ++j) yt[j] = full.y[test[j]];
    ProperScores sc = proper_scores(m.family, yt, th0, th1);
    out.fold_log[r] = sc.mean_log;
    out.fold_quadratic[r] = sc.mean_quadratic;
    out.fold_spherical[r] = sc.mean_spherical;
    out.floored += sc.floored;
  }
  out.mean_log = out.fold_log.mean();
  out.mean_quadratic = out.fold_quadratic.mean();
  out.mean_spherical = out.fold_spherical.mean();
  return out;
}

}  // namespace starme
