#pragma once

#include <Eigen/Dense>
#include <vector>

namespace starme {

// complete rectangular grid of cell centers over a bounding box, row-major
// with x varying fastest
struct Lattice {
  double x0 = 0, y0 = 0, x1 = 1, y1 = 1;
  int nx = 0, ny = 0;

  int cells() const { return nx * ny; }
  double cell_w() const { return (x1 - x0) / nx; }
  double cell_h() const { return (y1 - y0) / ny; }
  double cx(int cell) const { return x0 + (cell % nx + 0.5) * cell_w(); }
  double cy(int cell) const { return y0 + (cell / nx + 0.5) * cell_h(); }
};

// cell counts chosen to keep cells near-square; the actual total must land
// within 5% of the target or the call fails
Lattice build_lattice(double x0, double y0, double x1, double y1,
                      int target_cells);

// bucket-grid spatial index; queries return the k nearest point indices
// ordered by (squared distance, index), which also fixes the tie rule
class PointIndex {
 public:
  PointIndex(const Eigen::VectorXd& x, const Eigen::VectorXd& y);
  std::vector<int> query(double qx, double qy, int k) const;
  // points within squared distance r2 of (qx, qy), boundary included
  int count_within(double qx, double qy, double r2) const;

 private:
  Eigen::VectorXd x_, y_;
  double bx0_ = 0, by0_ = 0, bw_ = 1, bh_ = 1;
  int gx_ = 1, gy_ = 1;
  std::vector<std::vector<int>> buckets_;
  int bucket_of(double px, double py) const;
};

// exhaustive reference selection with the same ordering rule
std::vector<int> knn_bruteforce(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& y, double qx, double qy,
                                int k);

struct LatticeSummary {
  Lattice lattice;
  int k = 0;
  Eigen::MatrixXd means;              // cells x layers
  std::vector<Eigen::MatrixXd> cov;   // per-cell layer covariance, jittered
};

// nearest-neighbor change of support: per cell, the k closest points feed a
// layer-wise mean and an across-layer sample covariance (divisor k-1, zero
// matrix at k=1); the indexed and brute-force paths sum neighbors in the
// identical order and so agree bitwise
LatticeSummary knn_aggregate(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                             const Eigen::MatrixXd& values, const Lattice& lat,
                             int k);
LatticeSummary knn_aggregate_bruteforce(const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y,
                                        const Eigen::MatrixXd& values,
                                        const Lattice& lat, int k);

// adds 1e-8 x mean diagonal to the diagonal so downstream Cholesky
// factorizations see a strictly positive definite matrix
void jitter_covariance(Eigen::MatrixXd& cov);

// k_j = floor(k0 * n_j / min n): the base count is assigned to the smallest
// series and the rest scale proportionally
std::vector<long> proportional_k(const std::vector<long>& sizes, long k0);

// largest base count such that every cell finds that many neighbors within
// max_diagonals cell diagonals of its center (0 when some cell has none);
// reported as a diagnostic, never silently substituted
int admissible_k0(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                  const Lattice& lat, double max_diagonals = 2.0);

}  // namespace starme
