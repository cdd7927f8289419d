#pragma once

#include <Eigen/Dense>
#include <vector>

namespace starme {

// clamped B-spline basis on [lo, hi]: boundary knots repeated degree+1 times,
// equidistant interior knots, L = n_interior + degree + 1 basis functions
struct SplineBasis {
  int degree = 3;
  std::vector<double> knots;

  int size() const { return static_cast<int>(knots.size()) - degree - 1; }
  double lo() const { return knots[degree]; }
  double hi() const { return knots[knots.size() - degree - 1]; }

  // knot span index for x (clamped into [lo, hi])
  int find_span(double x) const;

  // de Boor basis-function recurrence; writes the degree+1 values that are
  // nonzero at x into vals, with the column of the first one in first
  void eval(double x, int& first, double* vals) const;

  Eigen::VectorXd eval_full(double x) const;
};

SplineBasis make_spline_basis(double lo, double hi, int n_interior, int degree);

// dense n x L design matrix; at most degree+1 nonzeros per row; throws
// out_of_range naming the offending index if any x leaves the knot range
Eigen::MatrixXd bspline_design(const std::vector<double>& x,
                               const SplineBasis& basis);

// row i is the Kronecker product of the two univariate rows at (sx_i, sy_i),
// y index running fastest to match tensor_penalty's layout
Eigen::MatrixXd tensor_design(const std::vector<double>& sx,
                              const std::vector<double>& sy,
                              const SplineBasis& bx, const SplineBasis& by);

}  // namespace starme
