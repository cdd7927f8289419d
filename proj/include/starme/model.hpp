#pragma once

#include <array>
#include <string>
#include <vector>

#include "starme/bingrid.hpp"
#include "starme/bspline.hpp"
#include "starme/config.hpp"
#include "starme/dataset.hpp"
#include "starme/families.hpp"
#include "starme/me_block.hpp"

namespace starme {

// one additive component of a predictor, stored with its effective design
// after the sum-to-zero constraint has been absorbed (smooth terms work in
// the (L-1)-dimensional constrained space)
struct Term {
  TermSpec spec;
  std::string name;
  int param = 0;  // 0 location, 1 scale

  Eigen::MatrixXd X;  // n x p effective design
  Eigen::MatrixXd K;  // p x p penalty at unit variance; zero size = flat prior
  bool penalized = false;
  int k_rank = 0;
  double tau2 = 10.0;
  Eigen::VectorXd beta;

  // smooth bookkeeping for reconstruction on new covariate values
  SplineBasis basis, basis2;
  Eigen::MatrixXd Z;  // L x p constraint transform
  bool constrained = false;

  // tensor anisotropy state: penalties and pseudo-determinants cached on the
  // discrete grid
  bool has_omega = false;
  std::vector<double> omega_grid;
  int omega_idx = 0;
  std::vector<Eigen::MatrixXd> K_omega;
  std::vector<double> logpdet_omega;
  std::vector<int> rank_omega;

  // latent-covariate term: design rows are looked up at bin midpoints
  bool is_me = false;
  BinGrid grid;
  Eigen::MatrixXd binned_X;  // G x p
  std::vector<int> bin_idx;

  int size() const { return static_cast<int>(X.cols()); }
  double omega() const { return has_omega ? omega_grid[omega_idx] : 0.0; }
};

struct Predictor {
  std::vector<Term> terms;
  Eigen::VectorXd eta;
};

struct Model {
  ResponseFamily family{FamilyKind::Gaussian};
  Eigen::VectorXd y;
  std::array<Predictor, 2> pred;

  bool has_me = false;
  MeBlock me;
  int me_param = -1, me_term = -1;

  int n() const { return static_cast<int>(y.size()); }
  Term& me_term_ref() { return pred[me_param].terms[me_term]; }

  std::array<double, 2> theta_at(int i) const {
    return family.apply_links({pred[0].eta[i], pred[1].eta[i]});
  }
  double loglik_at(int i) const { return family.log_density(y[i], theta_at(i)); }
  Eigen::VectorXd loglik_all() const;

  // recompute a predictor from scratch (initialization / consistency checks)
  void refresh_eta(int k);
  // pull current binned design rows of the latent term into X
  void refresh_me_design();
};

// assembles design matrices, constraints, penalties and the ME block from a
// parsed config and an ingested table; throws with a descriptive message on
// validation failures (missing columns, missing values, conflicting ME specs)
Model build_model(const RunConfig& config, const DataTable& data);

// effective design rows of a smooth term at new covariate values (clamped to
// the basis range), for curve summaries and held-out prediction
Eigen::MatrixXd smooth_rows(const Term& term, const std::vector<double>& x);
Eigen::MatrixXd smooth_rows_2d(const Term& term, const std::vector<double>& x,
                               const std::vector<double>& y);

// orthonormal basis of the hyperplane w'v = 0 (Householder construction)
Eigen::MatrixXd constraint_null_basis(const Eigen::VectorXd& w);

// default anisotropy grid {1/12, ..., 11/12}
std::vector<double> default_omega_grid();

}  // namespace starme
