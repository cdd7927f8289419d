#include "starme/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "starme/evaluation.hpp"
#include "starme/families.hpp"
#include "starme/me_block.hpp"
#include "starme/model.hpp"
#include "starme/sampler.hpp"

namespace starme {

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

void validate(const ScenarioConfig& config) {
  if (config.family != "gaussian" && config.family != "beta")
    throw std::invalid_argument("scenario: family must be gaussian or beta");
  if (config.scenario != 1 && config.scenario != 2)
    throw std::invalid_argument("scenario: scenario must be 1 or 2");
  if (config.n < 2)
    throw std::invalid_argument("scenario: need at least two sites");
  if (config.m_reps < 1)
    throw std::invalid_argument("scenario: need at least one replicate");
  if (config.replications < 1)
    throw std::invalid_argument("scenario: replications must be >= 1");
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

DataTable generate_dataset(const ScenarioConfig& config, Rng& rng) {
  validate(config);
  const int n = config.n;
  const int M = config.m_reps;
  const double sd_x = config.x_sd_reading ? 5.0 : std::sqrt(5.0);
  const ResponseFamily family = family_from_name(config.family);
  const bool beta = family.kind() == FamilyKind::Beta;

  // replicate-error covariance per half-sample (variance 1, then 2)
  const Eigen::MatrixXd sigma_lo = equicorrelation_cov(M, 1.0, config.c_u());
  const Eigen::MatrixXd sigma_hi = equicorrelation_cov(M, 2.0, config.c_u());
  const Eigen::MatrixXd chol_lo = sigma_lo.llt().matrixL();
  const Eigen::MatrixXd chol_hi = sigma_hi.llt().matrixL();

  std::vector<double> y(n), v(n), x_true(n), x_naive(n);
  std::vector<std::vector<double>> reps(M, std::vector<double>(n));

  const long kResampleCap = 1000;
  for (int i = 0; i < n; ++i) {
    double x = 0, scale = 0;
    int vi = 0;
    long tries = 0;
    for (;;) {
      x = rng.normal(0.0, sd_x);
      vi = rng.bernoulli(0.5);
      const double var_y = vi ? 0.5 : 0.3;
      if (!beta) {
        scale = var_y;
        break;
      }
      const double mu = logistic(std::sin(x));
      scale = config.beta_variance_mapping ? var_y / (mu * (1.0 - mu)) : var_y;
      if (scale > 0.0 && scale < 1.0) break;
      if (!config.resample_invalid)
        throw std::runtime_error(
            "generate_dataset: mapped beta scale " + std::to_string(scale) +
            " at site " + std::to_string(i + 1) +
            " lies outside (0,1); use the direct scale reading or enable "
            "resampling");
      if (++tries >= kResampleCap)
        throw std::runtime_error("generate_dataset: no valid beta scale after " +
                                 std::to_string(kResampleCap) +
                                 " resamples at site " + std::to_string(i + 1));
    }
    x_true[i] = x;
    v[i] = vi;
    const double mu = beta ? logistic(std::sin(x)) : std::sin(x);
    y[i] = family.clamp_response(family.sample({mu, scale}, rng));

    const Eigen::MatrixXd& chol = (i < n / 2) ? chol_lo : chol_hi;
    Eigen::VectorXd z(M);
    for (int m = 0; m < M; ++m) z[m] = rng.normal();
    const Eigen::VectorXd u = chol * z;
    double rep_mean = 0;
    for (int m = 0; m < M; ++m) {
      reps[m][i] = x + u[m];
      rep_mean += reps[m][i];
    }
    x_naive[i] = rep_mean / M;
  }

  DataTable out;
  out.add("y", std::move(y));
  out.add("v", std::move(v));
  out.add("x_true", std::move(x_true));
  out.add("x_naive", std::move(x_naive));
  for (int m = 0; m < M; ++m)
    out.add("x_" + std::to_string(m + 1), std::move(reps[m]));
  for (int j = 0; j < M; ++j)
    for (int k = j; k < M; ++k) {
      std::vector<double> col(n);
      for (int i = 0; i < n; ++i)
        col[i] = (i < n / 2 ? sigma_lo : sigma_hi)(j, k);
      out.add("x_cov_" + std::to_string(j + 1) + std::to_string(k + 1),
              std::move(col));
    }
  return out;
}

namespace {

constexpr int kCurveGrid = 200;

struct FitOutcome {
  bool ok = false;
  std::string error;
  double rmse = 0, dic_value = 0, width = 0;
};

RunConfig setting_config(const ScenarioConfig& sc, const ChainSettings& chain,
                         const std::string& setting, std::uint64_t seed) {
  RunConfig rc;
  rc.family = sc.family;
  rc.seed = seed;
  rc.chain = chain;
  TermSpec smooth;
  if (setting == "benchmark") {
    smooth.kind = TermKind::Pspline;
    smooth.var = "x_true";
  } else if (setting == "naive") {
    smooth.kind = TermKind::Pspline;
    smooth.var = "x_naive";
  } else {
    smooth.kind = TermKind::MePspline;
    smooth.var = "x";
  }
  rc.location = {TermSpec{}, smooth};
  TermSpec lin;
  lin.kind = TermKind::Linear;
  lin.var = "v";
  rc.scale = {TermSpec{}, lin};
  rc.me.covariance = "columns";
  return rc;
}

FitOutcome fit_setting(const ScenarioConfig& sc, const ChainSettings& chain,
                       const DataTable& data, const std::string& setting,
                       std::uint64_t seed) {
  FitOutcome out;
  try {
    const RunConfig rc = setting_config(sc, chain, setting, seed);
    Model m = build_model(rc, data);
    const PosteriorSamples ps = run_chain(m, chain_config_from(rc));

    // by construction the smooth is the second location term, so its flat
    // sample index is 1 (location terms precede scale terms)
    const Term& t = m.pred[0].terms[1];
    const auto& draws = ps.beta[1];

    const auto& xt = data.col("x_true");
    const auto [mn, mx] = std::minmax_element(xt.begin(), xt.end());
    std::vector<double> grid(kCurveGrid);
    for (int g = 0; g < kCurveGrid; ++g)
      grid[g] = *mn + (*mx - *mn) * g / (kCurveGrid - 1.0);
    const Eigen::MatrixXd G = smooth_rows(t, grid);

    Eigen::VectorXd bbar = Eigen::VectorXd::Zero(t.size());
    for (const auto& b : draws) bbar += b;
    bbar /= static_cast<double>(draws.size());

    Eigen::VectorXd fit_curve = G * bbar;
    Eigen::VectorXd target(kCurveGrid);
    for (int g = 0; g < kCurveGrid; ++g) target[g] = std::sin(grid[g]);
    fit_curve.array() -= fit_curve.mean();
    target.array() -= target.mean();
    out.rmse = std::sqrt((fit_curve - target).squaredNorm() / kCurveGrid);

    // mean pointwise 95% interval width of the smooth over the grid
    std::vector<double> at_point(draws.size());
    double width_sum = 0;
    for (int g = 0; g < kCurveGrid; ++g) {
      const Eigen::VectorXd row = G.row(g).transpose();
      for (size_t d = 0; d < draws.size(); ++d) at_point[d] = row.dot(draws[d]);
      std::sort(at_point.begin(), at_point.end());
      width_sum += quantile_sorted(at_point, 0.975) -
                   quantile_sorted(at_point, 0.025);
    }
    out.width = width_sum / kCurveGrid;

    const DicResult d =
        dic(deviance_draws(ps.loglik), deviance_at(m.family, m.y, ps.theta_bar));
    out.dic_value = d.dic;

    if (!std::isfinite(out.rmse) || !std::isfinite(out.dic_value) ||
        !std::isfinite(out.width))
      throw std::runtime_error("non-finite fit summary");
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

ComparisonResult run_comparison(const ScenarioConfig& config,
                                const ChainSettings& chain) {
  validate(config);
  ComparisonResult res;
  res.family = config.family;
  res.scenario = config.scenario;
  const ChainSettings cs = resolve_chain_defaults(chain, config.family);

  const int R = config.replications;
  const char* settings[3] = {"benchmark", "naive", "me"};
  std::vector<std::array<FitOutcome, 3>> outcomes(R);
  std::vector<std::string> gen_errors(R);

#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < R; ++r) {
    // one stream per replication so the merge order never affects a number
    const std::uint64_t rep_seed = config.seed + static_cast<std::uint64_t>(r) + 1;
    DataTable data;
    try {
      Rng rng(rep_seed);
      data = generate_dataset(config, rng);
    } catch (const std::exception& e) {
      gen_errors[r] = e.what();
      continue;
    }
    for (int s = 0; s < 3; ++s)
      outcomes[r][s] = fit_setting(config, cs, data, settings[s], rep_seed);
  }

  std::array<std::vector<double>, 3> rmses, dics, widths;
  for (int r = 0; r < R; ++r) {
    if (!gen_errors[r].empty()) {
      res.failures += 3;
      res.messages.push_back("replication " + std::to_string(r + 1) + ": " +
                             gen_errors[r]);
      continue;
    }
    for (int s = 0; s < 3; ++s) {
      const FitOutcome& fo = outcomes[r][s];
      if (!fo.ok) {
        ++res.failures;
        res.messages.push_back("replication " + std::to_string(r + 1) + ", " +
                               settings[s] + ": " + fo.error);
        continue;
      }
      ComparisonRow row;
      row.setting = settings[s];
      row.summary = "rep";
      row.replication = r + 1;
      row.rmse = fo.rmse;
      row.dic = fo.dic_value;
      row.mean_ci_width = fo.width;
      res.rows.push_back(row);
      rmses[s].push_back(fo.rmse);
      dics[s].push_back(fo.dic_value);
      widths[s].push_back(fo.width);
    }
  }

  for (int s = 0; s < 3; ++s) {
    if (rmses[s].empty()) continue;
    ComparisonRow agg;
    agg.setting = settings[s];
    agg.summary = "mean";
    agg.rmse = mean_of(rmses[s]);
    agg.dic = mean_of(dics[s]);
    agg.mean_ci_width = mean_of(widths[s]);
    res.rows.push_back(agg);
    std::sort(rmses[s].begin(), rmses[s].end());
    std::sort(dics[s].begin(), dics[s].end());
    std::sort(widths[s].begin(), widths[s].end());
    agg.summary = "median";
    agg.rmse = quantile_sorted(rmses[s], 0.5);
    agg.dic = quantile_sorted(dics[s], 0.5);
    agg.mean_ci_width = quantile_sorted(widths[s], 0.5);
    res.rows.push_back(agg);
  }
  return res;
}

}  // namespace starme
