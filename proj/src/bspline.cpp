#include "starme/bspline.hpp"

#include <algorithm>
#include <stdexcept>

namespace starme {

SplineBasis make_spline_basis(double lo, double hi, int n_interior,
                              int degree) {
  if (!(hi > lo)) throw std::invalid_argument("spline basis: hi must exceed lo");
  if (degree < 1 || degree > 15)
    throw std::invalid_argument("spline basis: degree must be in [1, 15]");
  if (n_interior < 0)
    throw std::invalid_argument("spline basis: negative interior knot count");
  SplineBasis b;
  b.degree = degree;
  b.knots.reserve(2 * (degree + 1) + n_interior);
  for (int i = 0; i <= degree; ++i) b.knots.push_back(lo);
  double h = (hi - lo) / (n_interior + 1);
  for (int i = 1; i <= n_interior; ++i) b.knots.push_back(lo + i * h);
  for (int i = 0; i <= degree; ++i) b.knots.push_back(hi);
  return b;
}

int SplineBasis::find_span(double x) const {
  int L = size();
  if (x >= hi()) return L - 1;
  if (x <= lo()) return degree;
  // binary search: knots[span] <= x < knots[span+1]
  int low = degree, high = L;
  int mid = (low + high) / 2;
  while (x < knots[mid] || x >= knots[mid + 1]) {
    if (x < knots[mid])
      high = mid;
    else
      low = mid;
    mid = (low + high) / 2;
  }
  return mid;
}

void SplineBasis::eval(double x, int& first, double* vals) const {
  x = std::clamp(x, lo(), hi());
  int span = find_span(x);
  first = span - degree;

  // triangular recurrence (de Boor); left/right hold distances to knots
  double left[16], right[16];
  vals[0] = 1.0;
  for (int j = 1; j <= degree; ++j) {
    left[j] = x - knots[span + 1 - j];
    right[j] = knots[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      double tmp = vals[r] / (right[r + 1] + left[j - r]);
      vals[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    vals[j] = saved;
  }
}

Eigen::VectorXd SplineBasis::eval_full(double x) const {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(size());
  double vals[16];
  int first;
  eval(x, first, vals);
  for (int j = 0; j <= degree; ++j) row[first + j] = vals[j];
  return row;
}

namespace {

void check_range(double x, size_t i, const SplineBasis& basis) {
  if (!(x >= basis.lo() && x <= basis.hi()))
    throw std::out_of_range("design: covariate at index " + std::to_string(i) +
                            " (value " + std::to_string(x) +
                            ") outside knot range [" +
                            std::to_string(basis.lo()) + ", " +
                            std::to_string(basis.hi()) + "]");
}

}  // namespace

Eigen::MatrixXd bspline_design(const std::vector<double>& x,
                               const SplineBasis& basis) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(x.size(), basis.size());
  double vals[16];
  int first;
  for (size_t i = 0; i < x.size(); ++i) {
    check_range(x[i], i, basis);
    basis.eval(x[i], first, vals);
    for (int j = 0; j <= basis.degree; ++j) B(i, first + j) = vals[j];
  }
  return B;
}

Eigen::MatrixXd tensor_design(const std::vector<double>& sx,
                              const std::vector<double>& sy,
                              const SplineBasis& bx, const SplineBasis& by) {
  if (sx.size() != sy.size())
    throw std::invalid_argument("tensor_design: coordinate lengths differ");
  int Ly = by.size();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(sx.size(), bx.size() * Ly);
  double vx[16], vy[16];
  int fx, fy;
  for (size_t i = 0; i < sx.size(); ++i) {
    check_range(sx[i], i, bx);
    check_range(sy[i], i, by);
    bx.eval(sx[i], fx, vx);
    by.eval(sy[i], fy, vy);
    for (int a = 0; a <= bx.degree; ++a)
      for (int b = 0; b <= by.degree; ++b)
        B(i, (fx + a) * Ly + (fy + b)) = vx[a] * vy[b];
  }
  return B;
}

}  // namespace starme
