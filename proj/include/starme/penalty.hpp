#pragma once

#include <Eigen/Dense>

namespace starme {

// d-th order forward difference operator, (L-d) x L
Eigen::MatrixXd difference_matrix(int L, int order);

// D'D random-walk penalty; rank L - order, null space = polynomials of
// degree < order over the coefficient index
Eigen::MatrixXd difference_penalty(int L, int order);

Eigen::MatrixXd ridge_penalty(int L);

Eigen::MatrixXd kronecker(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// anisotropy mixture for tensor-product coefficients laid out with the
// y index running fastest: omega * (Kx kron Iy) + (1-omega) * (Ix kron Ky)
Eigen::MatrixXd tensor_penalty(const Eigen::MatrixXd& Kx,
                               const Eigen::MatrixXd& Ky, double omega);

// log pseudo-determinant (product of eigenvalues above tol) and rank
struct LogPdet {
  double value = 0.0;
  int rank = 0;
};
LogPdet log_pseudo_det(const Eigen::MatrixXd& K, double tol = 1e-10);

}  // namespace starme
