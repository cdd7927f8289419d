// End-to-end acceptance checks, one per release claim. Each criterion prints
// a single PASS/FAIL line (with measured numbers as indented notes) and the
// exit code is the number of failed criteria, so the binary doubles as a
// regression gate and as a quick report. Individual criteria can be selected
// by number on the command line: `acceptance 4 6 7`.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "starme/bingrid.hpp"
#include "starme/commands.hpp"
#include "starme/evaluation.hpp"
#include "starme/families.hpp"
#include "starme/lattice.hpp"
#include "starme/me_block.hpp"
#include "starme/model.hpp"
#include "starme/penalty.hpp"
#include "starme/rng.hpp"
#include "starme/sampler.hpp"
#include "starme/simulation.hpp"

using namespace starme;
namespace fs = std::filesystem;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

template <class... Args>
std::string fmt(const char* pattern, Args... args) {
  char buf[768];
  std::snprintf(buf, sizeof(buf), pattern, args...);
  return std::string(buf);
}

// accumulated verdict of one criterion: any recorded failure flips the line
// to FAIL; notes are printed either way so the measured numbers stay visible
struct Ctx {
  std::vector<std::string> fails;
  std::vector<std::string> notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) fails.push_back(what);
  }
  void note(const std::string& s) { notes.push_back(s); }
};

// ---------------------------------------------------------------------------
// simulation-study helpers (criteria 1-3 share the row bookkeeping)

const ComparisonRow& aggregate_row(const ComparisonResult& r,
                                   const std::string& setting,
                                   const std::string& summary) {
  for (const ComparisonRow& row : r.rows)
    if (row.setting == setting && row.summary == summary) return row;
  throw std::runtime_error("missing " + summary + " row for " + setting);
}

std::map<int, double> per_rep_rmse(const ComparisonResult& r,
                                   const std::string& setting) {
  std::map<int, double> out;
  for (const ComparisonRow& row : r.rows)
    if (row.setting == setting && row.summary == "rep")
      out[row.replication] = row.rmse;
  return out;
}

struct TimedComparison {
  ComparisonResult res;
  double seconds = 0;
};

// criteria 1 and 2 read different columns of the same 20-replication run, so
// it is computed once and cached
const TimedComparison& gaussian_scenario2_run() {
  static std::optional<TimedComparison> cached;
  if (!cached) {
    ScenarioConfig sc;
    sc.family = "gaussian";
    sc.scenario = 2;
    sc.replications = 20;
    sc.seed = 1;
    ChainSettings chain;  // resolved to the family defaults 10000/5000/5
    double t0 = now_seconds();
    ComparisonResult res = run_comparison(sc, chain);
    cached = TimedComparison{std::move(res), now_seconds() - t0};
  }
  return *cached;
}

void criterion_rmse_ordering(Ctx& c, const ComparisonResult& res,
                             bool check_pairs) {
  for (const std::string& msg : res.messages) c.note("excluded: " + msg);
  c.expect(res.failures == 0,
           fmt("%d fits were excluded; orderings need the full design",
               res.failures));

  double b = aggregate_row(res, "benchmark", "mean").rmse;
  double m = aggregate_row(res, "me", "mean").rmse;
  double n = aggregate_row(res, "naive", "mean").rmse;
  c.note(fmt("mean RMSE: benchmark %.4f < me %.4f < naive %.4f expected", b, m,
             n));
  c.expect(b < m, "mean RMSE(benchmark) is not below mean RMSE(me)");
  c.expect(m < n, "mean RMSE(me) is not below mean RMSE(naive)");

  std::map<int, double> me = per_rep_rmse(res, "me");
  std::map<int, double> naive = per_rep_rmse(res, "naive");
  int pairs = 0, wins = 0;
  for (const auto& [rep, rmse] : me) {
    auto it = naive.find(rep);
    if (it == naive.end()) continue;
    ++pairs;
    if (rmse < it->second) ++wins;
  }
  c.note(fmt("paired replications with RMSE(me) < RMSE(naive): %d of %d", wins,
             pairs));
  if (check_pairs) {
    c.expect(pairs > 0 && wins * 4 >= pairs * 3,
             "me beats naive in fewer than 75% of paired replications");
  }
}

void criterion_1(Ctx& c) {
  const TimedComparison& run = gaussian_scenario2_run();
  criterion_rmse_ordering(c, run.res, true);
  c.note(fmt("runtime %.0f s (budget 1200 s)", run.seconds));
  c.expect(run.seconds <= 1200.0, "runtime exceeded the 20-minute target");
}

void criterion_2(Ctx& c) {
  const ComparisonResult& res = gaussian_scenario2_run().res;
  double wb = aggregate_row(res, "benchmark", "mean").mean_ci_width;
  double wn = aggregate_row(res, "naive", "mean").mean_ci_width;
  double wm = aggregate_row(res, "me", "mean").mean_ci_width;
  double r_naive = wn / wb, r_me = wm / wb;
  c.note(fmt("mean 95%% band width ratio vs benchmark: naive %.3f, me %.3f",
             r_naive, r_me));
  c.expect(r_naive >= 0.8 && r_naive <= 1.25,
           "naive/benchmark width ratio outside [0.8, 1.25]");
  c.expect(r_me > 1.25,
           "me/benchmark width ratio does not exceed 1.25 (the correction "
           "should widen the bands)");
}

void criterion_3(Ctx& c) {
  ScenarioConfig sc;
  sc.family = "beta";
  sc.scenario = 2;
  sc.replications = 10;
  sc.seed = 1;
  ChainSettings chain;
  chain.iterations = 20000;
  chain.burnin = 14000;
  chain.thinning = 6;
  double t0 = now_seconds();
  ComparisonResult res = run_comparison(sc, chain);
  double secs = now_seconds() - t0;
  criterion_rmse_ordering(c, res, false);
  c.note(fmt("runtime %.0f s (budget 2400 s)", secs));
  c.expect(secs <= 2400.0, "runtime exceeded the 40-minute target");
}

// ---------------------------------------------------------------------------
// criterion 4: Gibbs full conditionals vs dense conjugate formulas

// hand-assembled heteroscedastic Gaussian model with an intercept and one
// random design block, every state randomized
Model conjugate_toy(Rng& rng, int n, int p, bool penalized) {
  Model m;
  m.family = family_from_name("gaussian");
  m.y.resize(n);
  for (int i = 0; i < n; ++i) m.y[i] = rng.normal(0.3, 1.2);

  Term t0;
  t0.name = "location.intercept";
  t0.X = Eigen::MatrixXd::Ones(n, 1);
  t0.beta = Eigen::VectorXd::Constant(1, rng.normal());
  Term t1;
  t1.name = "location.block";
  t1.X.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) t1.X(i, j) = rng.normal();
  t1.beta.resize(p);
  for (int j = 0; j < p; ++j) t1.beta[j] = 0.4 * rng.normal();
  if (penalized) {
    t1.K = difference_penalty(p, 2);
    t1.penalized = true;
    t1.k_rank = p - 2;
    t1.tau2 = 0.4 + rng.uniform();
  }
  m.pred[0].terms = {t0, t1};

  Term s0;
  s0.name = "scale.intercept";
  s0.param = 1;
  s0.X = Eigen::MatrixXd::Ones(n, 1);
  s0.beta = Eigen::VectorXd::Constant(1, std::log(0.7));
  Term s1;
  s1.name = "scale.v";
  s1.param = 1;
  s1.X.resize(n, 1);
  for (int i = 0; i < n; ++i) s1.X(i, 0) = rng.uniform() < 0.5 ? 0.0 : 1.0;
  s1.beta = Eigen::VectorXd::Constant(1, 0.5);
  m.pred[1].terms = {s0, s1};

  m.refresh_eta(0);
  m.refresh_eta(1);
  return m;
}

void criterion_4(Ctx& c) {
  Rng rng(404);
  double worst_mean = 0, worst_cov = 0;
  for (int rep = 0; rep < 50; ++rep) {
    int p = 3 + int(rng.uniform_int(6));  // 3..8 coefficients
    Model m = conjugate_toy(rng, 30, p, rep % 2 == 0);
    for (int idx : {0, 1}) {
      const Term& t = m.pred[0].terms[idx];
      // textbook conjugate posterior with an explicit inverse
      Eigen::VectorXd w(m.n());
      for (int i = 0; i < m.n(); ++i)
        w[i] = 1.0 / std::exp(m.pred[1].eta[i]);
      Eigen::MatrixXd P = t.X.transpose() * w.asDiagonal() * t.X;
      if (t.penalized) P += t.K / t.tau2;
      Eigen::MatrixXd cov = P.inverse();
      Eigen::VectorXd r = m.y - (m.pred[0].eta - t.X * t.beta);
      Eigen::VectorXd mean =
          cov * (t.X.transpose() * (w.array() * r.array()).matrix());

      GaussianConditional g = gaussian_location_conditional(m, idx);
      Eigen::MatrixXd cov_llt =
          g.llt.solve(Eigen::MatrixXd::Identity(mean.size(), mean.size()));
      worst_mean =
          std::max(worst_mean, (g.mean - mean).cwiseAbs().maxCoeff());
      worst_cov =
          std::max(worst_cov, (cov_llt - cov).cwiseAbs().maxCoeff());
    }
  }
  c.note(fmt("50 instances: max |mean diff| %.2e, max |cov diff| %.2e",
             worst_mean, worst_cov));
  c.expect(worst_mean < 1e-8, "conditional mean deviates by more than 1e-8");
  c.expect(worst_cov < 1e-8,
           "conditional covariance deviates by more than 1e-8");
}

// ---------------------------------------------------------------------------
// criterion 5: latent imputation kernel vs analytic posterior

// single-site model whose smooth coefficients are zero, so the response
// contributes nothing and the sweep targets prior x ME likelihood exactly
Model single_site_model(const Eigen::MatrixXd& xtilde,
                        const Eigen::MatrixXd& sigma, double mu_x,
                        double tau2_x) {
  Model m;
  m.family = family_from_name("gaussian");
  m.y = Eigen::VectorXd::Zero(1);

  Term t;
  t.spec.kind = TermKind::MePspline;
  t.name = "location.me";
  t.is_me = true;
  t.grid = build_bin_grid(mu_x - 12.0, mu_x + 12.0, 400);
  t.binned_X.resize(t.grid.g, 1);
  for (int b = 0; b < t.grid.g; ++b) t.binned_X(b, 0) = t.grid.midpoint(b);
  t.beta = Eigen::VectorXd::Zero(1);
  m.pred[0].terms = {t};
  m.pred[1].terms = {};

  m.has_me = true;
  m.me_param = 0;
  m.me_term = 0;
  m.me = make_me_block(xtilde, {sigma}, 1.0);
  initialize_latent(m.me);
  m.me.mu_x = mu_x;
  m.me.tau2_x = tau2_x;

  Term& tm = m.me_term_ref();
  tm.bin_idx = {tm.grid.index(m.me.x[0])};
  tm.X = tm.binned_X.row(tm.bin_idx[0]);
  m.refresh_eta(0);
  m.refresh_eta(1);
  return m;
}

void criterion_5(Ctx& c) {
  struct SiteCfg {
    int M;
    double sigma2, c_u, mu_x, tau2_x;
  };
  // covers c_u = 0.8 and both replicate-error variances, plus uncorrelated
  // and mildly correlated fillers at varying replicate counts
  const std::vector<SiteCfg> cfgs = {
      {3, 1.0, 0.8, 0.0, 1.0},  {3, 2.0, 0.8, 1.5, 0.5},
      {2, 1.0, 0.8, -1.0, 2.0}, {4, 2.0, 0.8, 0.5, 1.0},
      {5, 1.0, 0.8, -0.5, 0.8}, {3, 1.0, 0.0, 2.0, 1.5},
      {3, 2.0, 0.4, -2.0, 0.7}, {2, 2.0, 0.0, 0.3, 1.2},
      {4, 1.0, 0.4, 1.0, 2.5},  {3, 2.0, 0.8, -0.7, 0.6}};

  const long burn = 5000, keep = 400000;
  const int n_batches = 500;
  double worst_mean_se = 0, worst_var_rel = 0;
  for (size_t idx = 0; idx < cfgs.size(); ++idx) {
    const SiteCfg& cf = cfgs[idx];
    Rng rng(500 + static_cast<std::uint64_t>(idx));

    double x_true = cf.mu_x + std::sqrt(cf.tau2_x) * rng.normal();
    Eigen::MatrixXd sigma = equicorrelation_cov(cf.M, cf.sigma2, cf.c_u);
    Eigen::LLT<Eigen::MatrixXd> chol(sigma);
    Eigen::VectorXd z(cf.M);
    for (int j = 0; j < cf.M; ++j) z[j] = rng.normal();
    Eigen::MatrixXd xtilde =
        (Eigen::VectorXd::Constant(cf.M, x_true) + chol.matrixL() * z)
            .transpose();

    // analytic posterior, derived directly from the covariance
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(cf.M);
    Eigen::VectorXd si = sigma.llt().solve(ones);
    double a = ones.dot(si);
    double b = xtilde.row(0) * si;
    double prec = a + 1.0 / cf.tau2_x;
    double m_star = (b + cf.mu_x / cf.tau2_x) / prec;
    double v_star = 1.0 / prec;

    Model m = single_site_model(xtilde, sigma, cf.mu_x, cf.tau2_x);
    BlockStats stats;
    for (long it = 0; it < burn; ++it) me_sweep_sites(m, rng, stats);
    std::vector<double> draws(keep);
    for (long it = 0; it < keep; ++it) {
      me_sweep_sites(m, rng, stats);
      draws[it] = m.me.x[0];
    }

    double mean = 0;
    for (double d : draws) mean += d;
    mean /= keep;
    double var = 0;
    for (double d : draws) var += (d - mean) * (d - mean);
    var /= keep - 1;

    // batch means soak up the random-walk autocorrelation
    const long blen = keep / n_batches;
    double bm_var = 0;
    for (int bi = 0; bi < n_batches; ++bi) {
      double bm = 0;
      for (long j = bi * blen; j < (bi + 1) * blen; ++j) bm += draws[j];
      bm = bm / blen - mean;
      bm_var += bm * bm;
    }
    double se = std::sqrt(bm_var / (n_batches - 1) / n_batches);

    double mean_dev_se = std::abs(mean - m_star) / se;
    double var_rel = std::abs(var - v_star) / v_star;
    worst_mean_se = std::max(worst_mean_se, mean_dev_se);
    worst_var_rel = std::max(worst_var_rel, var_rel);
    if (mean_dev_se > 3.0)
      c.fails.push_back(
          fmt("config %zu (M=%d, s2=%.0f, c=%.1f): mean %.5f vs %.5f is "
              "%.1f MC standard errors away",
              idx, cf.M, cf.sigma2, cf.c_u, mean, m_star, mean_dev_se));
    if (var_rel > 0.05)
      c.fails.push_back(
          fmt("config %zu (M=%d, s2=%.0f, c=%.1f): variance %.5f vs %.5f "
              "deviates by %.1f%%",
              idx, cf.M, cf.sigma2, cf.c_u, var, v_star, 100 * var_rel));
  }
  c.note(fmt("10 configs, %ld draws each: worst mean deviation %.2f MC "
             "standard errors, worst variance deviation %.2f%%",
             keep, worst_mean_se, 100 * worst_var_rel));
}

// ---------------------------------------------------------------------------
// criterion 6: information criteria and proper-score oracles

void criterion_6(Ctx& c) {
  Rng rng(606);
  const int S = 50, n = 20;
  Eigen::MatrixXd ll(S, n);
  for (int s = 0; s < S; ++s)
    for (int i = 0; i < n; ++i) ll(s, i) = -1.0 + 0.5 * rng.normal();

  // deviance draws against a naive per-draw loop
  Eigen::VectorXd dev = deviance_draws(ll);
  double worst = 0;
  std::vector<double> dev_oracle(S);
  for (int s = 0; s < S; ++s) {
    double acc = 0;
    for (int i = 0; i < n; ++i) acc += ll(s, i);
    dev_oracle[s] = -2.0 * acc;
    worst = std::max(worst, std::abs(dev[s] - dev_oracle[s]));
  }
  c.expect(worst < 1e-10, fmt("deviance draws deviate by %.2e", worst));

  double dbar = 0;
  for (double d : dev_oracle) dbar += d;
  dbar /= S;
  double d_at_mean = dbar - 2.5;  // arbitrary plug-in deviance
  DicResult dr = dic(dev, d_at_mean);
  double pd_oracle = dbar - d_at_mean;
  double dic_oracle = d_at_mean + 2.0 * pd_oracle;
  double dic_diff = std::max({std::abs(dr.dic - dic_oracle),
                              std::abs(dr.p_d - pd_oracle),
                              std::abs(dr.mean_deviance - dbar)});
  c.note(fmt("DIC vs double loop: max |diff| %.2e", dic_diff));
  c.expect(dic_diff < 1e-10, "DIC deviates from the double-loop oracle");

  WaicResult w = waic(ll);
  double lppd = 0, p_waic = 0;
  for (int i = 0; i < n; ++i) {
    double acc = 0, mean = 0;
    for (int s = 0; s < S; ++s) {
      acc += std::exp(ll(s, i));
      mean += ll(s, i);
    }
    lppd += std::log(acc / S);
    mean /= S;
    double v = 0;
    for (int s = 0; s < S; ++s) v += (ll(s, i) - mean) * (ll(s, i) - mean);
    p_waic += v / (S - 1);
  }
  double waic_oracle = -2.0 * (lppd - p_waic);
  double waic_diff =
      std::max({std::abs(w.lppd - lppd), std::abs(w.p_waic - p_waic),
                std::abs(w.waic - waic_oracle)});
  c.note(fmt("WAIC vs double loop: max |diff| %.2e", waic_diff));
  c.expect(waic_diff < 1e-10, "WAIC deviates from the double-loop oracle");

  // closed form for the quadratic score of a single standard normal draw
  ResponseFamily fam = family_from_name("gaussian");
  Eigen::VectorXd y(1);
  y << 0.0;
  Eigen::MatrixXd t0 = Eigen::MatrixXd::Zero(1, 1);
  Eigen::MatrixXd t1 = Eigen::MatrixXd::Ones(1, 1);
  ProperScores ps = proper_scores(fam, y, t0, t1);
  const double pi = 3.14159265358979323846;
  double target = 2.0 / std::sqrt(2.0 * pi) - 1.0 / (2.0 * std::sqrt(pi));
  c.note(fmt("Gaussian quadratic score at y=0 under N(0,1): %.12f vs "
             "2*phi(0) - 1/(2*sqrt(pi)) = %.12f",
             ps.quadratic[0], target));
  c.expect(std::abs(ps.quadratic[0] - target) < 1e-9,
           "quadratic score misses the closed form by more than 1e-9");
}

// ---------------------------------------------------------------------------
// criterion 7: proportional neighbor counts on the reference survey sizes

void criterion_7(Ctx& c) {
  std::vector<long> k4 = proportional_k({186667, 202172, 91438, 222278}, 27);
  std::vector<long> want4 = {55, 59, 27, 65};
  c.note(fmt("four surveys at k0=27: %ld %ld %ld %ld", k4[0], k4[1], k4[2],
             k4[3]));
  c.expect(k4 == want4, "four-survey neighbor counts do not match");

  // the fifth series keeps the same reference minimum
  std::vector<long> k5 =
      proportional_k({186667, 202172, 91438, 222278, 120261}, 27);
  c.note(fmt("fifth series: %ld", k5[4]));
  c.expect(k5[4] == 35, "fifth-series neighbor count is not 35");
  c.expect(std::vector<long>(k5.begin(), k5.begin() + 4) == want4,
           "adding the fifth series changed the first four counts");
}

// ---------------------------------------------------------------------------
// criterion 8: indexed kNN aggregation vs exhaustive scan

void criterion_8(Ctx& c) {
  Rng rng(808);
  const int n = 10000, layers = 3;
  Eigen::VectorXd x(n), y(n);
  Eigen::MatrixXd values(n, layers);
  for (int i = 0; i < n; ++i) {
    x[i] = 340.0 * rng.uniform();
    y[i] = 210.0 * rng.uniform();
    for (int j = 0; j < layers; ++j) values(i, j) = rng.normal(50.0, 12.0);
  }
  Lattice lat = build_lattice(0.0, 0.0, 340.0, 210.0, 16);
  c.note(fmt("lattice %dx%d = %d cells over %d points", lat.nx, lat.ny,
             lat.cells(), n));

  for (int k : {1, 5, 27}) {
    LatticeSummary a = knn_aggregate(x, y, values, lat, k);
    LatticeSummary b = knn_aggregate_bruteforce(x, y, values, lat, k);
    double mean_diff = (a.means - b.means).cwiseAbs().maxCoeff();
    double cov_diff = 0;
    for (int cell = 0; cell < lat.cells(); ++cell)
      cov_diff = std::max(
          cov_diff, (a.cov[cell] - b.cov[cell]).cwiseAbs().maxCoeff());
    c.note(fmt("k=%d: max |mean diff| %.1e, max |cov diff| %.1e", k,
               mean_diff, cov_diff));
    c.expect(mean_diff == 0.0,
             fmt("k=%d: indexed means differ from the brute-force scan", k));
    c.expect(cov_diff <= 1e-12,
             fmt("k=%d: covariance difference exceeds 1e-12", k));
  }
}

// ---------------------------------------------------------------------------
// criterion 9: spline basis and penalty structure

void criterion_9(Ctx& c) {
  Rng rng(909);

  // partition of unity inside the knot range, cubic and quadratic
  double worst_pou = 0;
  for (int degree : {2, 3}) {
    SplineBasis basis = make_spline_basis(-2.0, 5.0, 17, degree);
    for (int i = 0; i < 300; ++i) {
      double x = -2.0 + 7.0 * rng.uniform();
      worst_pou = std::max(worst_pou,
                           std::abs(basis.eval_full(x).sum() - 1.0));
    }
  }
  c.note(fmt("partition of unity: max |row sum - 1| = %.2e", worst_pou));
  c.expect(worst_pou < 1e-12, "basis rows do not sum to one within 1e-12");

  // null spaces on integer-valued sequences are exact in floating point
  for (int L : {8, 15}) {
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(L);
    Eigen::VectorXd ramp(L);
    for (int j = 0; j < L; ++j) ramp[j] = j;
    double n1 = (difference_penalty(L, 1) * ones).cwiseAbs().maxCoeff();
    double n2a = (difference_penalty(L, 2) * ones).cwiseAbs().maxCoeff();
    double n2b = (difference_penalty(L, 2) * ramp).cwiseAbs().maxCoeff();
    c.expect(n1 == 0.0 && n2a == 0.0 && n2b == 0.0,
             fmt("L=%d: penalty null spaces are not annihilated exactly "
                 "(%.1e, %.1e, %.1e)",
                 L, n1, n2a, n2b));
  }
  c.note("order-1 and order-2 penalty null spaces annihilated exactly");

  // anisotropic tensor penalty against an index-by-index Kronecker oracle
  const int Lx = 6, Ly = 4;
  Eigen::MatrixXd Kx = difference_penalty(Lx, 2);
  Eigen::MatrixXd Ky = difference_penalty(Ly, 1);
  double worst_tensor = 0;
  for (double omega : {1.0 / 12, 0.5, 11.0 / 12}) {
    Eigen::MatrixXd K = tensor_penalty(Kx, Ky, omega);
    Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(Lx * Ly, Lx * Ly);
    for (int ix = 0; ix < Lx; ++ix)
      for (int iy = 0; iy < Ly; ++iy)
        for (int jx = 0; jx < Lx; ++jx)
          for (int jy = 0; jy < Ly; ++jy) {
            double val = 0;
            if (iy == jy) val += omega * Kx(ix, jx);
            if (ix == jx) val += (1.0 - omega) * Ky(iy, jy);
            oracle(ix * Ly + iy, jx * Ly + jy) = val;
          }
    worst_tensor =
        std::max(worst_tensor, (K - oracle).cwiseAbs().maxCoeff());
  }
  c.note(fmt("tensor penalty vs Kronecker oracle: max |diff| %.2e",
             worst_tensor));
  c.expect(worst_tensor < 1e-8, "tensor penalty deviates from the oracle");

  // binned design lookup error is first order in the bin width
  SplineBasis basis = make_spline_basis(0.0, 1.0, 10, 3);
  Eigen::VectorXd beta(basis.size());
  for (int i = 0; i < beta.size(); ++i) beta[i] = rng.normal();
  std::vector<double> xs(50000);
  for (double& v : xs) v = rng.uniform();
  auto mean_err = [&](int g) {
    BinGrid grid = build_bin_grid(0.0, 1.0, g);
    Eigen::MatrixXd mid = bspline_design(grid.midpoints(), basis);
    double acc = 0;
    for (double v : xs)
      acc += std::abs(basis.eval_full(v).dot(beta) -
                      mid.row(grid.index(v)).dot(beta));
    return acc / xs.size();
  };
  double ratio = mean_err(400) / mean_err(200);
  c.note(fmt("mean binned-lookup error ratio G=400 vs G=200: %.3f", ratio));
  c.expect(ratio > 0.4 && ratio < 0.6,
           "doubling the bin count does not halve the lookup error");
}

// ---------------------------------------------------------------------------
// criterion 10: quantile-residual calibration under true and wrong models

TermSpec term_intercept() { return TermSpec{}; }

TermSpec term_linear(const std::string& var) {
  TermSpec t;
  t.kind = TermKind::Linear;
  t.var = var;
  return t;
}

TermSpec term_pspline(const std::string& var) {
  TermSpec t;
  t.kind = TermKind::Pspline;
  t.var = var;
  return t;
}

// fits one replication and reports whether the KS check passes at 5%
bool ks_passes(const RunConfig& cfg, const DataTable& data) {
  Model m = build_model(cfg, data);
  ChainConfig cc = chain_config_from(cfg);
  PosteriorSamples ps = run_chain(m, cc);
  Eigen::VectorXd z = quantile_residuals(m.family, m.y, ps.theta_bar);
  return ks_statistic(z) < ks_critical_5pct(static_cast<int>(z.size()));
}

void criterion_10(Ctx& c) {
  const int reps = 50, n = 300;

  int pass_gaussian = 0;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(7000 + static_cast<std::uint64_t>(rep));
    std::vector<double> x(n), v(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = -3.0 + 6.0 * rng.uniform();
      v[i] = rng.bernoulli(0.5);
      double sd = std::exp(0.5 * (-1.1 + 0.8 * v[i]));
      y[i] = rng.normal(0.4 + std::sin(x[i]), sd);
    }
    DataTable d;
    d.add("x", x);
    d.add("v", v);
    d.add("y", y);
    RunConfig cfg;
    cfg.family = "gaussian";
    cfg.seed = 17000 + static_cast<std::uint64_t>(rep);
    cfg.location = {term_intercept(), term_pspline("x")};
    cfg.scale = {term_intercept(), term_linear("v")};
    cfg.chain.iterations = 3000;
    cfg.chain.burnin = 1000;
    cfg.chain.thinning = 4;
    if (ks_passes(cfg, d)) ++pass_gaussian;
  }
  c.note(fmt("true Gaussian model: KS pass rate %d/%d", pass_gaussian, reps));
  c.expect(pass_gaussian * 10 >= reps * 9,
           "true Gaussian model passes KS in fewer than 90% of replications");

  int pass_beta = 0;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(8000 + static_cast<std::uint64_t>(rep));
    std::vector<double> x(n), v(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = -3.0 + 6.0 * rng.uniform();
      v[i] = rng.bernoulli(0.5);
      double mu = 1.0 / (1.0 + std::exp(0.3 - std::sin(x[i])));
      double s2 = 1.0 / (1.0 + std::exp(1.5 - 0.6 * v[i]));
      double phi = 1.0 / s2 - 1.0;
      y[i] = rng.beta(mu * phi, (1.0 - mu) * phi);
    }
    DataTable d;
    d.add("x", x);
    d.add("v", v);
    d.add("y", y);
    RunConfig cfg;
    cfg.family = "beta";
    cfg.seed = 18000 + static_cast<std::uint64_t>(rep);
    cfg.location = {term_intercept(), term_pspline("x")};
    cfg.scale = {term_intercept(), term_linear("v")};
    cfg.chain.iterations = 4000;
    cfg.chain.burnin = 2000;
    cfg.chain.thinning = 4;
    if (ks_passes(cfg, d)) ++pass_beta;
  }
  c.note(fmt("true Beta model: KS pass rate %d/%d", pass_beta, reps));
  c.expect(pass_beta * 10 >= reps * 9,
           "true Beta model passes KS in fewer than 90% of replications");

  // intercept-only fit to a strongly bimodal signal: the plug-in residuals
  // inherit the sin shape and the KS check should reject
  int fail_wrong = 0;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(9000 + static_cast<std::uint64_t>(rep));
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = -3.0 + 6.0 * rng.uniform();
      y[i] = 1.2 * std::sin(x[i]) + 0.3 * rng.normal();
    }
    DataTable d;
    d.add("x", x);
    d.add("y", y);
    RunConfig cfg;
    cfg.family = "gaussian";
    cfg.seed = 19000 + static_cast<std::uint64_t>(rep);
    cfg.location = {term_intercept()};
    cfg.scale = {term_intercept()};
    cfg.chain.iterations = 2000;
    cfg.chain.burnin = 500;
    cfg.chain.thinning = 3;
    if (!ks_passes(cfg, d)) ++fail_wrong;
  }
  c.note(fmt("misspecified fit: KS failure rate %d/%d", fail_wrong, reps));
  c.expect(fail_wrong * 2 >= reps,
           "misspecified fit fails KS in fewer than 50% of replications");
}

// ---------------------------------------------------------------------------
// criterion 11: byte-identical reruns of the command workflows

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// runs one workflow twice with byte-for-byte identical arguments: the first
// run's artifacts are stashed aside, the second overwrites them in place,
// and the two generations are compared (several artifacts embed their own
// paths, so reruns must reuse the same directories)
void rerun_and_compare(Ctx& c, const std::string& what, const fs::path& stash,
                       const std::function<std::vector<std::string>()>& run) {
  std::vector<std::string> first = run();
  fs::create_directories(stash);
  std::vector<fs::path> copies;
  for (const std::string& f : first) {
    fs::path dst = stash / fs::path(f).filename();
    fs::copy_file(f, dst, fs::copy_options::overwrite_existing);
    copies.push_back(dst);
  }
  std::vector<std::string> second = run();
  c.expect(first == second,
           what + ": the two runs reported different artifact lists");
  if (first == second)
    for (size_t i = 0; i < first.size(); ++i)
      c.expect(slurp(first[i]) == slurp(copies[i]),
               what + ": " + fs::path(first[i]).filename().string() +
                   " differs between runs");
  c.note(fmt("%s: %zu files byte-compared across reruns", what.c_str(),
             first.size()));
}

void criterion_11(Ctx& c) {
  fs::path base = fs::temp_directory_path() / "starme_acceptance_rerun";
  fs::remove_all(base);
  fs::create_directories(base);

  {  // application-style bundle: data + ready-to-run model config
    SimulateArgs sa;
    sa.preset = "app_synthetic";
    sa.seed = 7;
    sa.output_dir = (base / "app").string();
    rerun_and_compare(c, "app_synthetic", base / "app_stash",
                      [&] { return cmd_simulate(sa); });
  }

  {  // comparison preset with reduced chains through the same code path
    SimulateArgs sa;
    sa.preset = "gaussian_s2";
    sa.replications = 2;
    sa.iterations = 600;
    sa.burnin = 300;
    sa.thinning = 3;
    sa.seed = 5;
    sa.output_dir = (base / "sim").string();
    rerun_and_compare(c, "gaussian_s2 (2 replications, reduced chains)",
                      base / "sim_stash", [&] { return cmd_simulate(sa); });
  }

  {  // fit workflow
    Rng rng(111);
    std::vector<double> x(60), v(60), y(60);
    for (int i = 0; i < 60; ++i) {
      x[i] = -2.0 + 4.0 * rng.uniform();
      v[i] = rng.bernoulli(0.5);
      y[i] = rng.normal(std::sin(x[i]), 0.5);
    }
    DataTable d;
    d.add("x", x);
    d.add("v", v);
    d.add("y", y);
    write_table((base / "toy.csv").string(), d);
    std::ofstream(base / "fit.cfg")
        << "[run]\nfamily = gaussian\ninput = " << (base / "toy.csv").string()
        << "\noutput_dir = " << (base / "fit").string()
        << "\nseed = 3\n\n[chain]\niterations = 2000\nburnin = 1000\n"
           "thinning = 5\n\n[location]\nterms = intercept + pspline(x)\n"
           "\n[scale]\nterms = intercept + linear(v)\n";
    rerun_and_compare(c, "fit", base / "fit_stash", [&] {
      return cmd_fit((base / "fit.cfg").string());
    });
  }

  {  // downscale workflow
    Rng rng(222);
    DataTable cloud;
    std::vector<double> px(4000), py(4000), l1(4000), l2(4000);
    for (int i = 0; i < 4000; ++i) {
      px[i] = 100.0 * rng.uniform();
      py[i] = 60.0 * rng.uniform();
      l1[i] = rng.normal(40.0, 8.0);
      l2[i] = rng.normal(55.0, 9.0);
    }
    cloud.add("x", px);
    cloud.add("y", py);
    cloud.add("d1", l1);
    cloud.add("d2", l2);
    write_table((base / "cloud.csv").string(), cloud);
    DownscaleArgs da;
    da.input = (base / "cloud.csv").string();
    da.cells = 24;
    da.k0 = 9;
    da.stem = "er";
    da.output = (base / "grid.csv").string();
    rerun_and_compare(c, "downscale", base / "grid_stash",
                      [&] { return cmd_downscale(da); });
  }
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* title;
    std::function<void(Ctx&)> run;
  };
  const std::vector<Criterion> all = {
      {1, "Gaussian scenario-2 RMSE ordering over 20 replications",
       criterion_1},
      {2, "credible-band width ratios in the same run", criterion_2},
      {3, "Beta scenario-2 RMSE ordering over 10 replications", criterion_3},
      {4, "Gibbs conditionals match dense conjugate formulas", criterion_4},
      {5, "latent imputation kernel matches the analytic posterior",
       criterion_5},
      {6, "WAIC/DIC double-loop oracles and quadratic-score closed form",
       criterion_6},
      {7, "proportional neighbor counts on the survey sizes", criterion_7},
      {8, "indexed kNN aggregation equals the exhaustive scan", criterion_8},
      {9, "spline basis and penalty structure", criterion_9},
      {10, "quantile-residual calibration, true and misspecified fits",
       criterion_10},
      {11, "byte-identical reruns across all workflows", criterion_11},
  };

  std::vector<int> wanted;
  for (int a = 1; a < argc; ++a) wanted.push_back(std::atoi(argv[a]));

  int failed = 0, ran = 0;
  for (const Criterion& cr : all) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), cr.id) == wanted.end())
      continue;
    ++ran;
    std::printf("[criterion %2d] %s ...\n", cr.id, cr.title);
    std::fflush(stdout);
    Ctx ctx;
    double t0 = now_seconds();
    try {
      cr.run(ctx);
    } catch (const std::exception& e) {
      ctx.fails.push_back(std::string("exception: ") + e.what());
    }
    double secs = now_seconds() - t0;
    for (const std::string& n : ctx.notes)
      std::printf("    %s\n", n.c_str());
    for (const std::string& f : ctx.fails)
      std::printf("    failed: %s\n", f.c_str());
    std::printf("criterion %2d %s: %s (%.1f s)\n", cr.id,
                ctx.fails.empty() ? "PASS" : "FAIL", cr.title, secs);
    std::fflush(stdout);
    if (!ctx.fails.empty()) ++failed;
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed;
}
