#include "starme/penalty.hpp"

#include <stdexcept>

namespace starme {

Eigen::MatrixXd difference_matrix(int L, int order) {
  if (order < 1 || order >= L)
    throw std::invalid_argument("difference_matrix: need 1 <= order < L");
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(L, L);
  for (int d = 0; d < order; ++d) {
    int m = L - d;
    Eigen::MatrixXd D1 = Eigen::MatrixXd::Zero(m - 1, m);
    for (int i = 0; i < m - 1; ++i) {
      D1(i, i) = -1.0;
      D1(i, i + 1) = 1.0;
    }
    D = D1 * D;
  }
  return D;
}

Eigen::MatrixXd difference_penalty(int L, int order) {
  Eigen::MatrixXd D = difference_matrix(L, order);
  return D.transpose() * D;
}

Eigen::MatrixXd ridge_penalty(int L) { return Eigen::MatrixXd::Identity(L, L); }

Eigen::MatrixXd kronecker(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

Eigen::MatrixXd tensor_penalty(const Eigen::MatrixXd& Kx,
                               const Eigen::MatrixXd& Ky, double omega) {
  if (omega < 0.0 || omega > 1.0)
    throw std::invalid_argument("tensor_penalty: omega outside [0, 1]");
  Eigen::MatrixXd Ix = Eigen::MatrixXd::Identity(Kx.rows(), Kx.cols());
  Eigen::MatrixXd Iy = Eigen::MatrixXd::Identity(Ky.rows(), Ky.cols());
  return omega * kronecker(Kx, Iy) + (1.0 - omega) * kronecker(Ix, Ky);
}

LogPdet log_pseudo_det(const Eigen::MatrixXd& K, double tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K,
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("log_pseudo_det: eigensolver failed");
  const auto& ev = es.eigenvalues();
  double thresh = tol * std::max(1.0, ev.cwiseAbs().maxCoeff());
  LogPdet out;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] > thresh) {
      out.value += std::log(ev[i]);
      ++out.rank;
    }
  }
  return out;
}

}  // namespace starme
