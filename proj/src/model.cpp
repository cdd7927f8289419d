#include "starme/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "starme/penalty.hpp"

namespace starme {

Eigen::VectorXd Model::loglik_all() const {
  Eigen::VectorXd ll(n());
  for (int i = 0; i < n(); ++i) ll[i] = loglik_at(i);
  return ll;
}

void Model::refresh_eta(int k) {
  Predictor& p = pred[k];
  p.eta = Eigen::VectorXd::Zero(n());
  for (const Term& t : p.terms) p.eta += t.X * t.beta;
}

void Model::refresh_me_design() {
  Term& t = me_term_ref();
  for (int i = 0; i < n(); ++i) t.X.row(i) = t.binned_X.row(t.bin_idx[i]);
}

Eigen::MatrixXd constraint_null_basis(const Eigen::VectorXd& w) {
  const int L = static_cast<int>(w.size());
  double nw = w.norm();
  if (!(nw > 0.0))
    throw std::invalid_argument("constraint vector is zero");
  Eigen::VectorXd u = w;
  u[0] += (w[0] >= 0.0 ? nw : -nw);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(L, L) -
                      (2.0 / u.squaredNorm()) * (u * u.transpose());
  return H.rightCols(L - 1);
}

std::vector<double> default_omega_grid() {
  std::vector<double> g(11);
  for (int i = 0; i < 11; ++i) g[i] = (i + 1) / 12.0;
  return g;
}

namespace {

const std::vector<double>& column_checked(const DataTable& data,
                                          const std::string& name,
                                          const std::string& where) {
  if (!data.has(name))
    throw std::runtime_error("model: column '" + name + "' required by " +
                             where + " not found in the data");
  return data.col(name);
}

void check_complete(const DataTable& data, const std::vector<std::string>& cols,
                    const std::string& what) {
  auto rows = data.missing_rows(cols);
  if (rows.empty()) return;
  std::string list;
  for (size_t r = 0; r < rows.size() && r < 20; ++r) {
    if (r) list += ", ";
    list += std::to_string(rows[r] + 2);  // header is line 1
  }
  if (rows.size() > 20) list += ", ...";
  throw std::runtime_error("model: " + what + " has missing values on " +
                           std::to_string(rows.size()) + " row(s) (file lines " +
                           list + "); imputation of model variables other than "
                           "the latent ME covariate is not supported");
}

std::pair<double, double> range_of(const std::vector<double>& v) {
  auto mm = std::minmax_element(v.begin(), v.end());
  double lo = *mm.first, hi = *mm.second;
  if (!(hi > lo)) {
    // constant column: widen so the basis stays well defined
    lo -= 0.5;
    hi += 0.5;
  }
  double margin = 1e-9 * (hi - lo);
  return {lo - margin, hi + margin};
}

// shared finishing step for every smooth term: absorb the sum-to-zero
// constraint and transform the penalty
void finish_smooth(Term& t, const Eigen::MatrixXd& B_raw,
                   const Eigen::MatrixXd& K_raw) {
  Eigen::VectorXd w = B_raw.colwise().mean();
  t.Z = constraint_null_basis(w);
  t.X = B_raw * t.Z;
  t.K = t.Z.transpose() * K_raw * t.Z;
  t.constrained = true;
  t.penalized = true;
  auto pd = log_pseudo_det(t.K);
  t.k_rank = pd.rank;
}

struct MeColumns {
  Eigen::MatrixXd xtilde;
  std::vector<Eigen::MatrixXd> sigmas;
};

MeColumns assemble_me_columns(const RunConfig& config, const DataTable& data,
                              const std::string& prefix) {
  // replicate columns prefix_1..prefix_M
  std::vector<std::string> rep_cols;
  for (int m = 1;; ++m) {
    std::string name = prefix + "_" + std::to_string(m);
    if (!data.has(name)) break;
    rep_cols.push_back(name);
  }
  if (rep_cols.empty())
    throw std::runtime_error("model: me_pspline(" + prefix +
                             ") needs replicate columns " + prefix + "_1, " +
                             prefix + "_2, ...");
  const int M = static_cast<int>(rep_cols.size());
  const int n = static_cast<int>(data.n_rows());
  check_complete(data, rep_cols, "replicate block '" + prefix + "'");

  bool cov_columns_present = false;
  for (size_t j = 0; j < data.names.size(); ++j)
    if (data.names[j].rfind(prefix + "_cov_", 0) == 0) cov_columns_present = true;

  MeColumns out;
  out.xtilde.resize(n, M);
  for (int m = 0; m < M; ++m) {
    const auto& col = data.col(rep_cols[m]);
    for (int i = 0; i < n; ++i) out.xtilde(i, m) = col[i];
  }

  if (config.me.covariance == "global") {
    if (cov_columns_present)
      throw std::runtime_error(
          "model: conflicting ME specifications: global sigma2/c_u pattern "
          "given but per-site covariance columns '" + prefix +
          "_cov_*' are present");
    Eigen::MatrixXd s = equicorrelation_cov(M, config.me.sigma2, config.me.c_u);
    out.sigmas.assign(n, s);
    return out;
  }

  // per-site upper-triangle columns prefix_cov_jk (1-based, j <= k)
  std::vector<std::vector<double>> tri;
  std::vector<std::string> tri_names;
  for (int j = 1; j <= M; ++j)
    for (int k = j; k <= M; ++k) {
      std::string name =
          prefix + "_cov_" + std::to_string(j) + std::to_string(k);
      if (!data.has(name))
        throw std::runtime_error("model: per-site covariance column '" + name +
                                 "' missing (expected the upper triangle " +
                                 prefix + "_cov_jk for 1 <= j <= k <= " +
                                 std::to_string(M) + ")");
      tri_names.push_back(name);
    }
  check_complete(data, tri_names, "covariance block '" + prefix + "'");
  out.sigmas.resize(n);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd s(M, M);
    size_t c = 0;
    for (int j = 0; j < M; ++j)
      for (int k = j; k < M; ++k) {
        double v = data.col(tri_names[c])[i];
        s(j, k) = v;
        s(k, j) = v;
        ++c;
      }
    out.sigmas[i] = s;
  }
  return out;
}

}  // namespace

Eigen::MatrixXd smooth_rows(const Term& t, const std::vector<double>& x) {
  Eigen::MatrixXd B(x.size(), t.basis.size());
  for (size_t i = 0; i < x.size(); ++i)
    B.row(i) = t.basis.eval_full(x[i]).transpose();
  return t.constrained ? Eigen::MatrixXd(B * t.Z) : B;
}

Eigen::MatrixXd smooth_rows_2d(const Term& t, const std::vector<double>& x,
                               const std::vector<double>& y) {
  const int Ly = t.basis2.size();
  Eigen::MatrixXd B(x.size(), t.basis.size() * Ly);
  for (size_t i = 0; i < x.size(); ++i) {
    Eigen::VectorXd rx = t.basis.eval_full(x[i]);
    Eigen::VectorXd ry = t.basis2.eval_full(y[i]);
    for (int a = 0; a < rx.size(); ++a)
      for (int b = 0; b < Ly; ++b) B(i, a * Ly + b) = rx[a] * ry[b];
  }
  return t.constrained ? Eigen::MatrixXd(B * t.Z) : B;
}

Model build_model(const RunConfig& config, const DataTable& data) {
  Model m;
  m.family = family_from_name(config.family);
  const int n = static_cast<int>(data.n_rows());
  if (n == 0) throw std::runtime_error("model: data table is empty");

  const std::string response_col = "y";
  const auto& y = column_checked(data, response_col, "the response");
  check_complete(data, {response_col}, "response 'y'");
  m.y.resize(n);
  for (int i = 0; i < n; ++i) m.y[i] = m.family.clamp_response(y[i]);

  const std::vector<TermSpec>* lists[2] = {&config.location, &config.scale};
  for (int k = 0; k < 2; ++k) {
    for (const TermSpec& spec : *lists[k]) {
      Term t;
      t.spec = spec;
      t.param = k;
      std::string side = (k == 0) ? "location" : "scale";
      t.name = side + "." + spec.label();

      switch (spec.kind) {
        case TermKind::Intercept: {
          t.X = Eigen::MatrixXd::Ones(n, 1);
          break;
        }
        case TermKind::Linear: {
          const auto& col = column_checked(data, spec.var, t.name);
          check_complete(data, {spec.var}, "term " + t.name);
          t.X.resize(n, 1);
          for (int i = 0; i < n; ++i) t.X(i, 0) = col[i];
          break;
        }
        case TermKind::Pspline: {
          const auto& col = column_checked(data, spec.var, t.name);
          check_complete(data, {spec.var}, "term " + t.name);
          auto [lo, hi] = range_of(col);
          t.basis = make_spline_basis(lo, hi, spec.knots, spec.degree);
          Eigen::MatrixXd B = bspline_design(col, t.basis);
          finish_smooth(t, B, difference_penalty(t.basis.size(), spec.order));
          break;
        }
        case TermKind::Tensor: {
          const auto& cx = column_checked(data, spec.var, t.name);
          const auto& cy = column_checked(data, spec.var2, t.name);
          check_complete(data, {spec.var, spec.var2}, "term " + t.name);
          auto [lox, hix] = range_of(cx);
          auto [loy, hiy] = range_of(cy);
          t.basis = make_spline_basis(lox, hix, spec.knots, spec.degree);
          t.basis2 = make_spline_basis(loy, hiy, spec.knots2, spec.degree);
          Eigen::MatrixXd B = tensor_design(cx, cy, t.basis, t.basis2);
          Eigen::MatrixXd Kx = difference_penalty(t.basis.size(), spec.order);
          Eigen::MatrixXd Ky = difference_penalty(t.basis2.size(), spec.order);

          Eigen::VectorXd w = B.colwise().mean();
          t.Z = constraint_null_basis(w);
          t.X = B * t.Z;
          t.constrained = true;
          t.penalized = true;
          t.has_omega = true;
          t.omega_grid = default_omega_grid();
          for (double om : t.omega_grid) {
            Eigen::MatrixXd Ko =
                t.Z.transpose() * tensor_penalty(Kx, Ky, om) * t.Z;
            auto pd = log_pseudo_det(Ko);
            t.K_omega.push_back(std::move(Ko));
            t.logpdet_omega.push_back(pd.value);
            t.rank_omega.push_back(pd.rank);
          }
          t.omega_idx = static_cast<int>(t.omega_grid.size()) / 2;
          t.K = t.K_omega[t.omega_idx];
          t.k_rank = t.rank_omega[t.omega_idx];
          break;
        }
        case TermKind::MePspline: {
          if (m.has_me)
            throw std::runtime_error(
                "model: only one me_pspline term is supported");
          auto cols = assemble_me_columns(config, data, spec.var);
          m.me = make_me_block(cols.xtilde, cols.sigmas,
                               config.chain.proposal_f);
          initialize_latent(m.me);

          // knot range padded by 4 error standard deviations so imputed
          // values rarely leave the grid
          double max_sd = 0.0;
          for (const auto& s : cols.sigmas)
            max_sd = std::max(max_sd, std::sqrt(s.diagonal().maxCoeff()));
          double lo = cols.xtilde.minCoeff() - 4.0 * max_sd;
          double hi = cols.xtilde.maxCoeff() + 4.0 * max_sd;
          t.basis = make_spline_basis(lo, hi, spec.knots, spec.degree);
          t.grid = build_bin_grid(lo, hi, config.chain.bins);
          t.is_me = true;

          Eigen::MatrixXd B_mid = bspline_design(t.grid.midpoints(), t.basis);
          t.bin_idx.resize(n);
          Eigen::MatrixXd B_init(n, t.basis.size());
          for (int i = 0; i < n; ++i) {
            t.bin_idx[i] = t.grid.index(m.me.x[i]);
            B_init.row(i) = B_mid.row(t.bin_idx[i]);
          }
          // constraint built from the initial latent design
          Eigen::VectorXd w = B_init.colwise().mean();
          t.Z = constraint_null_basis(w);
          t.binned_X = B_mid * t.Z;
          // gather rows from the binned matrix (not a second product) so a
          // design refresh is a bitwise no-op
          t.X.resize(n, t.binned_X.cols());
          for (int i = 0; i < n; ++i) t.X.row(i) = t.binned_X.row(t.bin_idx[i]);
          t.K = t.Z.transpose() *
                difference_penalty(t.basis.size(), spec.order) * t.Z;
          t.constrained = true;
          t.penalized = true;
          auto pd = log_pseudo_det(t.K);
          t.k_rank = pd.rank;

          m.has_me = true;
          m.me_param = k;
          m.me_term = static_cast<int>(m.pred[k].terms.size());
          break;
        }
      }

      t.beta = Eigen::VectorXd::Zero(t.X.cols());
      m.pred[k].terms.push_back(std::move(t));
    }
    m.refresh_eta(k);
  }

  // start the location intercept at the link-scale response mean and the
  // scale intercept at the link of the response variance so early iterations
  // see finite densities
  double ybar = m.y.mean();
  double yvar = (m.y.array() - ybar).square().sum() / std::max(n - 1, 1);
  yvar = std::max(yvar, 1e-8);
  std::array<double, 2> start;
  if (m.family.kind() == FamilyKind::Gaussian) {
    start = {ybar, yvar};
  } else {
    double mu0 = std::min(std::max(ybar, 1e-3), 1.0 - 1e-3);
    double s2 = yvar / (mu0 * (1.0 - mu0));
    start = {mu0, std::min(std::max(s2, 1e-3), 1.0 - 1e-3)};
  }
  for (int k = 0; k < 2; ++k) {
    for (Term& t : m.pred[k].terms) {
      if (t.spec.kind == TermKind::Intercept) {
        t.beta[0] = link_invert(m.family.link(k), start[k]);
        break;
      }
    }
    m.refresh_eta(k);
  }
  return m;
}

}  // namespace starme
