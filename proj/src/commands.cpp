#include "starme/commands.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "starme/config.hpp"
#include "starme/dataset.hpp"
#include "starme/evaluation.hpp"
#include "starme/families.hpp"
#include "starme/lattice.hpp"
#include "starme/me_block.hpp"
#include "starme/model.hpp"
#include "starme/sampler.hpp"
#include "starme/simulation.hpp"

namespace fs = std::filesystem;

namespace starme {

namespace {

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  ParseResult pr = parse_config(ss.str());
  for (const auto& w : pr.warnings) std::cerr << "warning: " << w << "\n";
  if (!pr.ok()) {
    std::string msg = "config '" + path + "' has " +
                      std::to_string(pr.errors.size()) + " error(s):";
    for (const auto& e : pr.errors) msg += "\n  " + e;
    throw std::runtime_error(msg);
  }
  return pr.config;
}

std::string join(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  return dir + "/" + name;
}

// CSV headers are comma-delimited, so tensor labels like tensor(sx,sy)
// cannot appear verbatim as column names
std::string csv_name(std::string name) {
  std::replace(name.begin(), name.end(), ',', ';');
  return name;
}

// term label -> filename fragment (alnum kept, runs of anything else -> '_')
std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      out += c;
    else if (!out.empty() && out.back() != '_')
      out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

struct CurveBands {
  Eigen::VectorXd mean, lo, hi;
};

// posterior mean and pointwise 95% band of G beta over the draws
CurveBands curve_bands(const Eigen::MatrixXd& G,
                       const std::vector<Eigen::VectorXd>& draws) {
  const int npts = static_cast<int>(G.rows());
  const size_t S = draws.size();
  Eigen::VectorXd bbar = Eigen::VectorXd::Zero(G.cols());
  for (const auto& b : draws) bbar += b;
  bbar /= static_cast<double>(S);

  CurveBands cb{G * bbar, Eigen::VectorXd(npts), Eigen::VectorXd(npts)};
  std::vector<double> at(S);
  for (int g = 0; g < npts; ++g) {
    const Eigen::VectorXd row = G.row(g).transpose();
    for (size_t s = 0; s < S; ++s) at[s] = row.dot(draws[s]);
    std::sort(at.begin(), at.end());
    cb.lo[g] = quantile_sorted(at, 0.025);
    cb.hi[g] = quantile_sorted(at, 0.975);
  }
  return cb;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1.0);
  return g;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

void write_curve_files(const RunConfig& cfg, const Model& m,
                       const PosteriorSamples& ps, const DataTable& data,
                       std::vector<std::string>& written) {
  const std::vector<TermSpec>* specs[2] = {&cfg.location, &cfg.scale};
  int flat = 0;
  for (int k = 0; k < 2; ++k) {
    for (size_t j = 0; j < specs[k]->size(); ++j, ++flat) {
      const TermSpec& spec = (*specs[k])[j];
      const Term& t = m.pred[k].terms[j];
      if (spec.kind == TermKind::Pspline || spec.kind == TermKind::MePspline) {
        double lo, hi;
        if (spec.kind == TermKind::Pspline) {
          const auto& col = data.col(spec.var);
          auto [mn, mx] = std::minmax_element(col.begin(), col.end());
          lo = *mn;
          hi = *mx;
        } else {  // latent covariate: use the imputation grid's support
          lo = t.grid.lo;
          hi = t.grid.hi;
        }
        std::vector<double> grid = linspace(lo, hi, 200);
        CurveBands cb = curve_bands(smooth_rows(t, grid), ps.beta[flat]);
        DataTable out;
        out.add(spec.var, grid);
        out.add("mean", to_std(cb.mean));
        out.add("lo95", to_std(cb.lo));
        out.add("hi95", to_std(cb.hi));
        std::string path =
            join(cfg.output_dir, "curve_" + sanitize(t.name) + ".csv");
        write_table(path, out);
        write_schema(path,
                     {spec.var + ": evaluation grid over the covariate range",
                      "mean: posterior mean of the centered smooth " + t.name,
                      "lo95: pointwise 2.5% posterior quantile",
                      "hi95: pointwise 97.5% posterior quantile"});
        written.push_back(path);
      } else if (spec.kind == TermKind::Tensor) {
        const auto& c1 = data.col(spec.var);
        const auto& c2 = data.col(spec.var2);
        auto [mn1, mx1] = std::minmax_element(c1.begin(), c1.end());
        auto [mn2, mx2] = std::minmax_element(c2.begin(), c2.end());
        const int side = 20;
        std::vector<double> g1 = linspace(*mn1, *mx1, side);
        std::vector<double> g2 = linspace(*mn2, *mx2, side);
        std::vector<double> xs, ys;  // x varies fastest, as in the lattice
        for (int b = 0; b < side; ++b)
          for (int a = 0; a < side; ++a) {
            xs.push_back(g1[a]);
            ys.push_back(g2[b]);
          }
        CurveBands cb = curve_bands(smooth_rows_2d(t, xs, ys), ps.beta[flat]);
        DataTable out;
        out.add(spec.var, xs);
        out.add(spec.var2, ys);
        out.add("mean", to_std(cb.mean));
        out.add("lo95", to_std(cb.lo));
        out.add("hi95", to_std(cb.hi));
        std::string path =
            join(cfg.output_dir, "curve_" + sanitize(t.name) + ".csv");
        write_table(path, out);
        write_schema(
            path, {spec.var + ": first coordinate (varies fastest)",
                   spec.var2 + ": second coordinate",
                   "mean: posterior mean of the centered surface " + t.name,
                   "lo95: pointwise 2.5% posterior quantile",
                   "hi95: pointwise 97.5% posterior quantile"});
        written.push_back(path);
      }
    }
  }
}

}  // namespace

std::vector<std::string> cmd_fit(const std::string& config_path) {
  RunConfig cfg = load_config(config_path);
  if (cfg.input.empty())
    throw std::runtime_error("config: [data] input is required");
  DataTable data = read_table(cfg.input);
  Model m = build_model(cfg, data);
  PosteriorSamples ps = run_chain(m, chain_config_from(cfg));
  const int n = m.n();
  const long S = ps.draws;
  if (S < 1)
    throw std::runtime_error(
        "fit: the chain stores no draws; increase iterations or lower "
        "burnin/thinning");

  fs::create_directories(cfg.output_dir);
  std::vector<std::string> written;

  // coefficient, variance and latent-level draws, one row per stored draw
  DataTable samples;
  {
    std::vector<double> drawcol(S);
    for (long s = 0; s < S; ++s) drawcol[s] = static_cast<double>(s + 1);
    samples.add("draw", drawcol);
    std::vector<std::string> schema = {"draw: stored draw index (1-based)"};
    for (size_t ti = 0; ti < ps.term_names.size(); ++ti) {
      const std::string name = csv_name(ps.term_names[ti]);
      const int p = static_cast<int>(ps.beta[ti][0].size());
      for (int j = 0; j < p; ++j) {
        std::vector<double> col(S);
        for (long s = 0; s < S; ++s) col[s] = ps.beta[ti][s][j];
        samples.add(name + ".b" + std::to_string(j + 1), col);
      }
      schema.push_back(name + ".b1..b" + std::to_string(p) +
                       ": coefficient draws");
      if (!ps.tau2[ti].empty()) {
        samples.add(name + ".tau2", ps.tau2[ti]);
        schema.push_back(name + ".tau2: smoothing variance draws");
      }
      if (!ps.omega[ti].empty()) {
        samples.add(name + ".omega", ps.omega[ti]);
        schema.push_back(name + ".omega: anisotropy weight draws");
      }
    }
    if (!ps.mu_x.empty()) {
      samples.add("latent.mu_x", ps.mu_x);
      samples.add("latent.tau2_x", ps.tau2_x);
      schema.push_back("latent.mu_x: latent covariate level draws");
      schema.push_back("latent.tau2_x: latent covariate variance draws");
    }
    std::string path = join(cfg.output_dir, "samples.csv");
    write_table(path, samples);
    write_schema(path, schema);
    written.push_back(path);
  }

  // model evaluation metrics
  const DicResult dr =
      dic(deviance_draws(ps.loglik), deviance_at(m.family, m.y, ps.theta_bar));
  const WaicResult wr = waic(ps.loglik);
  const ProperScores scores = proper_scores(m.family, m.y, ps.theta0, ps.theta1);
  const Eigen::VectorXd qres = quantile_residuals(m.family, m.y, ps.theta_bar);
  const double ks = ks_statistic(qres);
  const double crit = ks_critical_5pct(n);
  {
    std::vector<std::vector<std::string>> rows;
    auto put = [&rows](const std::string& name, double v) {
      rows.push_back({name, format_number(v)});
    };
    put("n", n);
    put("draws", static_cast<double>(S));
    put("dic", dr.dic);
    put("dic_p_d", dr.p_d);
    put("mean_deviance", dr.mean_deviance);
    put("deviance_at_mean", dr.deviance_at_mean);
    put("waic", wr.waic);
    put("lppd", wr.lppd);
    put("waic_p", wr.p_waic);
    put("mean_log_score", scores.mean_log);
    put("mean_quadratic_score", scores.mean_quadratic);
    put("mean_spherical_score", scores.mean_spherical);
    put("floored_log_scores", static_cast<double>(scores.floored));
    put("ks_statistic", ks);
    put("ks_critical_5pct", crit);
    put("ks_pass", ks < crit ? 1 : 0);
    std::string path = join(cfg.output_dir, "metrics.csv");
    write_csv(path, {"metric", "value"}, rows);
    write_schema(path,
                 {"metric: metric name (deviance criteria, mixture-predictive "
                  "proper scores, quantile-residual normality check)",
                  "value: metric value"});
    written.push_back(path);
  }

  // per-observation plug-in parameters and quantile residuals
  {
    DataTable res;
    std::vector<double> row(n), yv(n), th0(n), th1(n), rz(n);
    for (int i = 0; i < n; ++i) {
      row[i] = i + 1;
      yv[i] = m.y[i];
      th0[i] = ps.theta_bar(i, 0);
      th1[i] = ps.theta_bar(i, 1);
      rz[i] = qres[i];
    }
    res.add("row", row);
    res.add("y", yv);
    res.add("location", th0);
    res.add("scale", th1);
    res.add("quantile_residual", rz);
    std::string path = join(cfg.output_dir, "residuals.csv");
    write_table(path, res);
    write_schema(path,
                 {"row: observation index (1-based, input order)",
                  "y: observed response",
                  "location: posterior mean of the location parameter",
                  "scale: posterior mean of the scale parameter",
                  "quantile_residual: probit of the plug-in cdf at y; close "
                  "to standard normal under a well-specified model"});
    written.push_back(path);
  }

  write_curve_files(cfg, m, ps, data, written);

  // plain-text run report (no timestamps, so reruns are byte-identical)
  {
    std::string path = join(cfg.output_dir, "summary.txt");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "fit: " << cfg.family << " family, " << n << " observations, " << S
        << " stored draws\n";
    out << "input: " << cfg.input << "\n";
    out << "seed: " << cfg.seed << "\n\n";
    out << "blocks (acceptance rate, attempts, fallbacks, nonfinite):\n";
    for (const auto& st : ps.stats)
      out << "  " << st.name << ": " << format_number(st.rate()) << ", "
          << st.attempted << ", " << st.fallbacks << ", " << st.nonfinite
          << "\n";
    out << "\nposterior means:\n";
    for (size_t ti = 0; ti < ps.term_names.size(); ++ti) {
      if (ps.tau2[ti].empty()) continue;
      double mtau = 0;
      for (double v : ps.tau2[ti]) mtau += v;
      out << "  " << ps.term_names[ti]
          << ".tau2: " << format_number(mtau / ps.tau2[ti].size()) << "\n";
      if (!ps.omega[ti].empty()) {
        double mo = 0;
        for (double v : ps.omega[ti]) mo += v;
        out << "  " << ps.term_names[ti]
            << ".omega: " << format_number(mo / ps.omega[ti].size()) << "\n";
      }
    }
    if (!ps.mu_x.empty()) {
      double mm = 0, mt = 0;
      for (double v : ps.mu_x) mm += v;
      for (double v : ps.tau2_x) mt += v;
      out << "  latent.mu_x: " << format_number(mm / ps.mu_x.size()) << "\n";
      out << "  latent.tau2_x: " << format_number(mt / ps.tau2_x.size())
          << "\n";
    }
    out << "\nmetrics: dic " << format_number(dr.dic) << " (p_d "
        << format_number(dr.p_d) << "), waic " << format_number(wr.waic)
        << ", mean log score " << format_number(scores.mean_log)
        << "\nquantile residuals: ks " << format_number(ks) << " vs 5% value "
        << format_number(crit) << (ks < crit ? " (pass)" : " (fail)") << "\n";
    written.push_back(path);
  }

  std::cout << "fit: wrote " << written.size() << " files to " << cfg.output_dir
            << "\n";
  return written;
}

std::vector<std::string> cmd_evaluate(const std::string& config_path,
                                      int folds) {
  RunConfig cfg = load_config(config_path);
  if (cfg.input.empty())
    throw std::runtime_error("config: [data] input is required");
  DataTable data = read_table(cfg.input);
  CvResult cv = cross_validate(cfg, data, folds, cfg.seed);

  fs::create_directories(cfg.output_dir);
  std::vector<std::vector<std::string>> rows;
  for (int r = 0; r < folds; ++r)
    rows.push_back({std::to_string(r + 1), "fold",
                    format_number(cv.fold_log[r]),
                    format_number(cv.fold_quadratic[r]),
                    format_number(cv.fold_spherical[r])});
  rows.push_back({"0", "mean", format_number(cv.mean_log),
                  format_number(cv.mean_quadratic),
                  format_number(cv.mean_spherical)});
  std::string path = join(cfg.output_dir, "cv_scores.csv");
  write_csv(path,
            {"fold", "summary", "log_score", "quadratic_score",
             "spherical_score"},
            rows);
  write_schema(
      path,
      {"fold: fold index (1-based; 0 on the aggregate row)",
       "summary: fold for per-fold rows, mean for the aggregate",
       "log_score: held-out mean logarithmic score (larger is better)",
       "quadratic_score: held-out mean quadratic score",
       "spherical_score: held-out mean spherical score"});
  if (cv.floored > 0)
    std::cerr << "note: " << cv.floored
              << " held-out log predictive values hit the -700 floor\n";
  std::cout << "evaluate: mean log score " << format_number(cv.mean_log)
            << " over " << folds << " folds\n";
  return {path};
}

namespace {

// synthetic analogue of the field application: beta response driven by a
// seasonal shift, a smooth spatial surface and a latent covariate observed
// through three correlated replicate layers
DataTable app_synthetic_data(int n, Rng& rng) {
  const ResponseFamily family = family_from_name("beta");
  const int M = 3;
  const Eigen::MatrixXd sigma = equicorrelation_cov(M, 0.4, 0.3);
  const Eigen::MatrixXd chol = sigma.llt().matrixL();

  std::vector<double> y(n), season(n), sx(n), sy(n);
  std::vector<std::vector<double>> reps(M, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    sx[i] = rng.uniform();
    sy[i] = rng.uniform();
    season[i] = rng.bernoulli(0.5);
    const double pi = 3.14159265358979323846;
    const double x = 1.5 * std::sin(2 * pi * sx[i]) * std::cos(pi * sy[i]) +
                     0.3 * rng.normal();
    const double eta0 = -0.3 + 0.4 * season[i] +
                        0.8 * std::sin(pi * sx[i]) * std::sin(pi * sy[i]) +
                        0.6 * std::sin(x);
    const double mu = 1.0 / (1.0 + std::exp(-eta0));
    const double s2 = 1.0 / (1.0 + std::exp(1.2 - 0.5 * season[i]));
    y[i] = family.clamp_response(family.sample({mu, s2}, rng));
    Eigen::VectorXd z(M);
    for (int m = 0; m < M; ++m) z[m] = rng.normal();
    const Eigen::VectorXd u = chol * z;
    for (int m = 0; m < M; ++m) reps[m][i] = x + u[m];
  }

  DataTable out;
  out.add("y", std::move(y));
  out.add("season", std::move(season));
  out.add("sx", std::move(sx));
  out.add("sy", std::move(sy));
  for (int m = 0; m < M; ++m)
    out.add("er_" + std::to_string(m + 1), std::move(reps[m]));
  for (int j = 0; j < M; ++j)
    for (int k = j; k < M; ++k) {
      std::vector<double> col(n, sigma(j, k));
      out.add("er_cov_" + std::to_string(j + 1) + std::to_string(k + 1),
              std::move(col));
    }
  return out;
}

std::vector<std::string> simulate_app_synthetic(const SimulateArgs& args) {
  fs::create_directories(args.output_dir);
  Rng rng(args.seed);
  DataTable data = app_synthetic_data(600, rng);
  std::string data_path = join(args.output_dir, "app_data.csv");
  write_table(data_path, data);
  write_schema(
      data_path,
      {"y: beta response in (0,1)",
       "season: binary seasonal indicator",
       "sx, sy: planar site coordinates in the unit square",
       "er_1..er_3: replicate layers of the latent covariate",
       "er_cov_jk: upper-triangle replicate-error covariance (constant here)"});

  RunConfig rc;
  rc.command = "fit";
  rc.family = "beta";
  rc.input = data_path;
  rc.output_dir = join(args.output_dir, "app_fit");
  rc.seed = args.seed;
  rc.chain = resolve_chain_defaults(rc.chain, rc.family);
  TermSpec lin;
  lin.kind = TermKind::Linear;
  lin.var = "season";
  TermSpec tensor;
  tensor.kind = TermKind::Tensor;
  tensor.var = "sx";
  tensor.var2 = "sy";
  tensor.knots = 8;
  tensor.knots2 = 8;
  TermSpec me;
  me.kind = TermKind::MePspline;
  me.var = "er";
  rc.location = {TermSpec{}, lin, tensor, me};
  rc.scale = {TermSpec{}, lin};
  rc.me.covariance = "columns";

  std::string cfg_path = join(args.output_dir, "app_model.cfg");
  std::ofstream out(cfg_path);
  if (!out) throw std::runtime_error("cannot write '" + cfg_path + "'");
  out << serialize_config(rc);
  out.close();

  std::cout << "simulate: wrote " << data_path << " and " << cfg_path << "\n";
  return {data_path, cfg_path};
}

}  // namespace

std::vector<std::string> cmd_simulate(const SimulateArgs& args) {
  if (args.preset == "app_synthetic") return simulate_app_synthetic(args);

  ScenarioConfig sc;
  ChainSettings chain;
  if (args.preset == "gaussian_s1" || args.preset == "gaussian_s2") {
    sc.family = "gaussian";
    sc.replications = 20;
  } else if (args.preset == "beta_s1" || args.preset == "beta_s2") {
    sc.family = "beta";
    sc.replications = 10;
    // desk-scale beta chains; the family default is sized for real fits
    chain.iterations = 20000;
    chain.burnin = 14000;
    chain.thinning = 6;
  } else {
    throw std::runtime_error(
        "unknown preset '" + args.preset +
        "' (expected gaussian_s1, gaussian_s2, beta_s1, beta_s2, or "
        "app_synthetic)");
  }
  sc.scenario = (args.preset.back() == '2') ? 2 : 1;
  sc.seed = args.seed;
  if (args.replications > 0) sc.replications = args.replications;
  if (args.iterations > 0) chain.iterations = args.iterations;
  if (args.burnin > 0) chain.burnin = args.burnin;
  if (args.thinning > 0) chain.thinning = args.thinning;

  ComparisonResult res = run_comparison(sc, chain);
  for (const auto& msg : res.messages) std::cerr << "excluded: " << msg << "\n";
  if (res.rows.empty())
    throw std::runtime_error("simulate: every replication failed (" +
                             (res.messages.empty() ? std::string("no detail")
                                                   : res.messages.front()) +
                             ")");

  fs::create_directories(args.output_dir);
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : res.rows)
    rows.push_back({res.family, std::to_string(res.scenario), r.setting,
                    std::to_string(r.replication), format_number(r.rmse),
                    format_number(r.dic), format_number(r.mean_ci_width),
                    r.summary});
  std::string path =
      join(args.output_dir, "comparison_" + args.preset + ".csv");
  write_csv(path,
            {"family", "scenario", "setting", "replication", "rmse", "dic",
             "mean_ci_width", "summary"},
            rows);
  write_schema(
      path,
      {"family: response family of the scenario",
       "scenario: 1 independent replicate errors, 2 correlated (c_u = 0.8)",
       "setting: benchmark (true covariate), naive (replicate means), me "
       "(replicates with known error covariance)",
       "replication: replication index (0 on aggregate rows)",
       "rmse: centered RMSE of the posterior-mean smooth against sin(x)",
       "dic: deviance information criterion",
       "mean_ci_width: mean pointwise 95% band width of the smooth",
       "summary: rep for data rows, mean/median for the aggregate block"});
  if (res.failures > 0)
    std::cerr << "simulate: excluded " << res.failures << " failed fits\n";
  for (const auto& r : res.rows)
    if (r.summary == "mean")
      std::cout << "simulate: " << r.setting << " mean rmse "
                << format_number(r.rmse) << ", dic " << format_number(r.dic)
                << ", width " << format_number(r.mean_ci_width) << "\n";
  return {path};
}

namespace {

struct Cloud {
  Eigen::VectorXd x, y;
  Eigen::MatrixXd values;  // points x layers
};

std::string coord_label(double x, double y) {
  return "(" + format_number(x) + ", " + format_number(y) + ")";
}

// long format: one (x, y, value) row per site and layer; sites are kept in
// first-appearance order, layers in ascending key order, and every site must
// carry every layer exactly once
Cloud pivot_long(const DataTable& d) {
  const auto& x = d.col("x");
  const auto& y = d.col("y");
  const auto& value = d.col("value");
  const size_t nrows = d.n_rows();
  const bool has_layer = d.has("layer");
  const std::vector<double>* layer_col = has_layer ? &d.col("layer") : nullptr;

  std::vector<double> keys;
  if (has_layer) {
    keys = d.col("layer");
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  } else {
    keys = {0.0};
  }
  const int M = static_cast<int>(keys.size());
  std::map<double, int> layer_idx;
  for (int m = 0; m < M; ++m) layer_idx[keys[m]] = m;

  std::map<std::pair<double, double>, int> site_idx;
  std::vector<std::pair<double, double>> sites;  // first-appearance order
  std::vector<std::vector<double>> vals;         // [site][layer]
  for (size_t r = 0; r < nrows; ++r) {
    if (std::isnan(x[r]) || std::isnan(y[r]) || std::isnan(value[r]))
      throw std::runtime_error("downscale: missing value on row " +
                               std::to_string(r + 2));
    const std::pair<double, double> key{x[r], y[r]};
    auto it = site_idx.find(key);
    int si;
    if (it == site_idx.end()) {
      si = static_cast<int>(sites.size());
      site_idx[key] = si;
      sites.push_back(key);
      vals.emplace_back(M, std::numeric_limits<double>::quiet_NaN());
    } else {
      si = it->second;
    }
    const int li = has_layer ? layer_idx.at((*layer_col)[r]) : 0;
    if (!std::isnan(vals[si][li]))
      throw std::runtime_error("downscale: duplicate layer " +
                               format_number(keys[li]) + " at site " +
                               coord_label(x[r], y[r]));
    vals[si][li] = value[r];
  }
  for (size_t si = 0; si < sites.size(); ++si)
    for (int m = 0; m < M; ++m)
      if (std::isnan(vals[si][m]))
        throw std::runtime_error("downscale: site " +
                                 coord_label(sites[si].first,
                                             sites[si].second) +
                                 " is missing layer " + format_number(keys[m]));

  Cloud c;
  const int n = static_cast<int>(sites.size());
  c.x.resize(n);
  c.y.resize(n);
  c.values.resize(n, M);
  for (int i = 0; i < n; ++i) {
    c.x[i] = sites[i].first;
    c.y[i] = sites[i].second;
    for (int m = 0; m < M; ++m) c.values(i, m) = vals[i][m];
  }
  return c;
}

// wide format: x, y, then one column per layer in file order
Cloud pivot_wide(const DataTable& d) {
  std::vector<std::string> layer_cols;
  for (const auto& name : d.names)
    if (name != "x" && name != "y") layer_cols.push_back(name);
  if (layer_cols.empty())
    throw std::runtime_error(
        "downscale: need a value column (long format) or layer columns "
        "(wide format) besides x and y");
  std::vector<std::string> used = {"x", "y"};
  used.insert(used.end(), layer_cols.begin(), layer_cols.end());
  auto missing = d.missing_rows(used);
  if (!missing.empty()) {
    std::string rows;
    for (size_t i = 0; i < missing.size() && i < 10; ++i)
      rows += (i ? ", " : "") + std::to_string(missing[i] + 2);
    if (missing.size() > 10)
      rows += ", and " + std::to_string(missing.size() - 10) + " more";
    throw std::runtime_error("downscale: missing values on rows " + rows);
  }

  Cloud c;
  const int n = static_cast<int>(d.n_rows());
  const int M = static_cast<int>(layer_cols.size());
  c.x.resize(n);
  c.y.resize(n);
  c.values.resize(n, M);
  const auto& x = d.col("x");
  const auto& y = d.col("y");
  for (int i = 0; i < n; ++i) {
    c.x[i] = x[i];
    c.y[i] = y[i];
  }
  for (int m = 0; m < M; ++m) {
    const auto& col = d.col(layer_cols[m]);
    for (int i = 0; i < n; ++i) c.values(i, m) = col[i];
  }
  return c;
}

}  // namespace

std::vector<std::string> cmd_downscale(const DownscaleArgs& args) {
  if (args.cells < 1)
    throw std::runtime_error("downscale: --cells must be positive");
  if (args.k0 < 1) throw std::runtime_error("downscale: --k0 must be >= 1");

  DataTable d = read_table(args.input);
  for (const char* req : {"x", "y"})
    if (!d.has(req))
      throw std::runtime_error("downscale: input needs a '" +
                               std::string(req) + "' column");
  Cloud cloud = d.has("value") ? pivot_long(d) : pivot_wide(d);
  const int n = static_cast<int>(cloud.x.size());
  const int M = static_cast<int>(cloud.values.cols());
  if (M > 9)
    throw std::runtime_error(
        "downscale: more than 9 layers would make the _cov_jk column names "
        "ambiguous");
  if (args.k0 > n)
    throw std::runtime_error("downscale: k0 exceeds the number of sites (" +
                             std::to_string(n) + ")");

  const Lattice lat =
      build_lattice(cloud.x.minCoeff(), cloud.y.minCoeff(), cloud.x.maxCoeff(),
                    cloud.y.maxCoeff(), args.cells);
  LatticeSummary s = knn_aggregate(cloud.x, cloud.y, cloud.values, lat, args.k0);
  if (args.se_scale)
    for (auto& cov : s.cov) cov /= static_cast<double>(args.k0);

  const int admissible = admissible_k0(cloud.x, cloud.y, lat);
  std::cout << "downscale: " << n << " sites with " << M << " layers onto "
            << lat.nx << " x " << lat.ny << " cells, k = " << args.k0 << "\n";
  std::cout << "downscale: largest k0 with all neighborhoods inside 2 cell "
               "diagonals: "
            << admissible << "\n";
  if (args.k0 > admissible)
    std::cerr << "warning: requested k0 " << args.k0
              << " reaches beyond 2 cell diagonals for some cells\n";

  DataTable out;
  const int C = lat.cells();
  {
    std::vector<double> cell(C), cx(C), cy(C);
    for (int c = 0; c < C; ++c) {
      cell[c] = c;
      cx[c] = lat.cx(c);
      cy[c] = lat.cy(c);
    }
    out.add("cell", std::move(cell));
    out.add("cx", std::move(cx));
    out.add("cy", std::move(cy));
  }
  for (int m = 0; m < M; ++m) {
    std::vector<double> col(C);
    for (int c = 0; c < C; ++c) col[c] = s.means(c, m);
    out.add(args.stem + "_" + std::to_string(m + 1), std::move(col));
  }
  for (int j = 0; j < M; ++j)
    for (int k = j; k < M; ++k) {
      std::vector<double> col(C);
      for (int c = 0; c < C; ++c) col[c] = s.cov[c](j, k);
      out.add(args.stem + "_cov_" + std::to_string(j + 1) + std::to_string(k + 1),
              std::move(col));
    }
  write_table(args.output, out);
  write_schema(
      args.output,
      {"cell: lattice cell id (row-major, x varies fastest)",
       "cx, cy: cell center coordinates",
       args.stem + "_1.." + args.stem + "_" + std::to_string(M) +
           ": layer means over the k nearest sites",
       args.stem + "_cov_jk: upper-triangle layer covariance over the same "
           "sites (diagonal jittered by 1e-8 x mean diagonal" +
           std::string(args.se_scale ? ", then divided by k)" : ")"),
       "k: " + std::to_string(args.k0)});
  return {args.output};
}

}  // namespace starme
