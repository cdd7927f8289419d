#include "starme/lattice.hpp"

#include <algorithm>
#include <cstdlib>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace starme {

namespace {

inline double sq_dist(double ax, double ay, double bx, double by) {
  double dx = ax - bx, dy = ay - by;
  return dx * dx + dy * dy;
}

using Cand = std::pair<double, int>;  // (squared distance, index)

}  // namespace

Lattice build_lattice(double x0, double y0, double x1, double y1,
                      int target_cells) {
  if (!(x1 > x0) || !(y1 > y0))
    throw std::invalid_argument("build_lattice: degenerate bounding box");
  if (target_cells < 1)
    throw std::invalid_argument("build_lattice: target cell count must be >= 1");
  const double w = x1 - x0, h = y1 - y0;
  int nx0 = std::max(1, (int)std::lround(std::sqrt(target_cells * w / h)));
  int ny0 = std::max(1, (int)std::lround(std::sqrt(target_cells * h / w)));
  int best_nx = nx0, best_ny = ny0;
  long best_diff = std::labs((long)nx0 * ny0 - target_cells);
  // the aspect-true grid wins whenever it lands inside the tolerance; the
  // neighboring counts are fallbacks, not improvements
  if (best_diff > 0.05 * target_cells) {
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy) {
        int nx = std::max(1, nx0 + dx), ny = std::max(1, ny0 + dy);
        long diff = std::labs((long)nx * ny - target_cells);
        if (diff < best_diff) {
          best_diff = diff;
          best_nx = nx;
          best_ny = ny;
        }
      }
  }
  if (best_diff > 0.05 * target_cells)
    throw std::invalid_argument(
        "build_lattice: no near-square grid within 5% of " +
        std::to_string(target_cells) + " cells (closest: " +
        std::to_string(best_nx) + "x" + std::to_string(best_ny) + ")");
  Lattice lat;
  lat.x0 = x0;
  lat.y0 = y0;
  lat.x1 = x1;
  lat.y1 = y1;
  lat.nx = best_nx;
  lat.ny = best_ny;
  return lat;
}

PointIndex::PointIndex(const Eigen::VectorXd& x, const Eigen::VectorXd& y)
    : x_(x), y_(y) {
  const int n = static_cast<int>(x.size());
  if (n == 0) throw std::invalid_argument("point index: empty cloud");
  if (y.size() != n)
    throw std::invalid_argument("point index: coordinate length mismatch");
  bx0_ = x.minCoeff();
  by0_ = y.minCoeff();
  double w = x.maxCoeff() - bx0_, h = y.maxCoeff() - by0_;
  if (w <= 0) w = 1.0;
  if (h <= 0) h = 1.0;
  // aim for a handful of points per bucket
  int g = std::max(1, (int)std::lround(std::sqrt(n / 8.0)));
  gx_ = gy_ = g;
  bw_ = w / gx_;
  bh_ = h / gy_;
  buckets_.resize((size_t)gx_ * gy_);
  for (int i = 0; i < n; ++i) buckets_[bucket_of(x[i], y[i])].push_back(i);
}

int PointIndex::bucket_of(double px, double py) const {
  int ix = std::clamp((int)std::floor((px - bx0_) / bw_), 0, gx_ - 1);
  int iy = std::clamp((int)std::floor((py - by0_) / bh_), 0, gy_ - 1);
  return iy * gx_ + ix;
}

std::vector<int> PointIndex::query(double qx, double qy, int k) const {
  const int n = static_cast<int>(x_.size());
  if (k < 1) throw std::invalid_argument("point index: k must be >= 1");
  if (k > n) throw std::invalid_argument("point index: k exceeds cloud size");

  int qix = std::clamp((int)std::floor((qx - bx0_) / bw_), 0, gx_ - 1);
  int qiy = std::clamp((int)std::floor((qy - by0_) / bh_), 0, gy_ - 1);
  std::priority_queue<Cand> best;  // worst kept candidate on top
  const double min_dim = std::min(bw_, bh_);
  const int max_ring = std::max(gx_, gy_);

  for (int r = 0; r <= max_ring; ++r) {
    // ring r: buckets at Chebyshev distance exactly r from the query bucket
    for (int iy = qiy - r; iy <= qiy + r; ++iy) {
      if (iy < 0 || iy >= gy_) continue;
      bool edge_row = (iy == qiy - r || iy == qiy + r);
      int step = edge_row ? 1 : 2 * r;
      for (int ix = qix - r; ix <= qix + r; ix += step) {
        if (ix < 0 || ix >= gx_) continue;
        for (int i : buckets_[(size_t)iy * gx_ + ix]) {
          Cand c{sq_dist(x_[i], y_[i], qx, qy), i};
          if ((int)best.size() < k) {
            best.push(c);
          } else if (c < best.top()) {
            best.pop();
            best.push(c);
          }
        }
      }
    }
    // a point in ring r+1 or beyond lies at least r * min_dim away from
    // anywhere inside the query bucket; strict inequality preserves the
    // (distance, index) tie rule exactly
    if ((int)best.size() == k) {
      double bound = r * min_dim;
      if (best.top().first < bound * bound) break;
    }
  }
  std::vector<Cand> out;
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::sort(out.begin(), out.end());
  std::vector<int> idx(out.size());
  for (size_t i = 0; i < out.size(); ++i) idx[i] = out[i].second;
  return idx;
}

int PointIndex::count_within(double qx, double qy, double r2) const {
  const double r = std::sqrt(r2);
  int lo_x = std::clamp((int)std::floor((qx - r - bx0_) / bw_), 0, gx_ - 1);
  int hi_x = std::clamp((int)std::floor((qx + r - bx0_) / bw_), 0, gx_ - 1);
  int lo_y = std::clamp((int)std::floor((qy - r - by0_) / bh_), 0, gy_ - 1);
  int hi_y = std::clamp((int)std::floor((qy + r - by0_) / bh_), 0, gy_ - 1);
  int count = 0;
  for (int iy = lo_y; iy <= hi_y; ++iy)
    for (int ix = lo_x; ix <= hi_x; ++ix)
      for (int i : buckets_[(size_t)iy * gx_ + ix])
        if (sq_dist(x_[i], y_[i], qx, qy) <= r2) ++count;
  return count;
}

std::vector<int> knn_bruteforce(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& y, double qx, double qy,
                                int k) {
  const int n = static_cast<int>(x.size());
  if (n == 0) throw std::invalid_argument("knn: empty cloud");
  if (k < 1 || k > n) throw std::invalid_argument("knn: k out of range");
  std::vector<Cand> all(n);
  for (int i = 0; i < n; ++i) all[i] = {sq_dist(x[i], y[i], qx, qy), i};
  std::partial_sort(all.begin(), all.begin() + k, all.end());
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = all[i].second;
  return idx;
}

void jitter_covariance(Eigen::MatrixXd& cov) {
  double mean_diag = cov.diagonal().mean();
  cov.diagonal().array() += 1e-8 * mean_diag;
}

namespace {

// shared accumulation so both selection strategies produce bitwise-equal
// summaries: neighbors are visited in (distance, index) order in both paths
template <typename Selector>
LatticeSummary aggregate_with(const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& values, const Lattice& lat,
                              int k, Selector&& select, bool parallel) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(values.cols());
  if (n == 0) throw std::invalid_argument("knn_aggregate: empty cloud");
  if (y.size() != n)
    throw std::invalid_argument("knn_aggregate: x and y length mismatch");
  if (values.rows() != n)
    throw std::invalid_argument("knn_aggregate: one value row per point");
  if (k < 1 || k > n)
    throw std::invalid_argument("knn_aggregate: k must be in [1, n]");
  if (lat.cells() < 1)
    throw std::invalid_argument("knn_aggregate: empty lattice");

  LatticeSummary out;
  out.lattice = lat;
  out.k = k;
  out.means.resize(lat.cells(), m);
  out.cov.assign(lat.cells(), Eigen::MatrixXd());

#pragma omp parallel for schedule(dynamic, 16) if (parallel)
  for (int c = 0; c < lat.cells(); ++c) {
    std::vector<int> nb = select(lat.cx(c), lat.cy(c), k);
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(m);
    for (int i : nb) mean += values.row(i);
    mean /= double(k);
    out.means.row(c) = mean;
    Eigen::MatrixXd cv = Eigen::MatrixXd::Zero(m, m);
    if (k > 1) {
      for (int i : nb) {
        Eigen::RowVectorXd d = values.row(i) - mean;
        cv += d.transpose() * d;
      }
      cv /= double(k - 1);
    }
    jitter_covariance(cv);
    out.cov[c] = std::move(cv);
  }
  return out;
}

}  // namespace

LatticeSummary knn_aggregate(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                             const Eigen::MatrixXd& values, const Lattice& lat,
                             int k) {
  PointIndex index(x, y);
  return aggregate_with(
      x, y, values, lat, k,
      [&](double cx, double cy, int kk) { return index.query(cx, cy, kk); },
      true);
}

LatticeSummary knn_aggregate_bruteforce(const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y,
                                        const Eigen::MatrixXd& values,
                                        const Lattice& lat, int k) {
  return aggregate_with(
      x, y, values, lat, k,
      [&](double cx, double cy, int kk) {
        return knn_bruteforce(x, y, cx, cy, kk);
      },
      false);
}

std::vector<long> proportional_k(const std::vector<long>& sizes, long k0) {
  if (sizes.empty()) throw std::invalid_argument("proportional_k: no series");
  if (k0 < 1) throw std::invalid_argument("proportional_k: k0 must be >= 1");
  long min_n = *std::min_element(sizes.begin(), sizes.end());
  if (min_n < 1)
    throw std::invalid_argument("proportional_k: series sizes must be >= 1");
  std::vector<long> k(sizes.size());
  for (size_t j = 0; j < sizes.size(); ++j) k[j] = k0 * sizes[j] / min_n;
  return k;
}

int admissible_k0(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                  const Lattice& lat, double max_diagonals) {
  if (x.size() == 0) throw std::invalid_argument("admissible_k0: empty cloud");
  PointIndex index(x, y);
  double diag = std::hypot(lat.cell_w(), lat.cell_h());
  double r = max_diagonals * diag;
  int k = static_cast<int>(x.size());
  for (int c = 0; c < lat.cells(); ++c)
    k = std::min(k, index.count_within(lat.cx(c), lat.cy(c), r * r));
  return k;
}

}  // namespace starme
