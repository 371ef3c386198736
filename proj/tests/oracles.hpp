// Independent reference computations used by the unit and acceptance tests.
#ifndef RSCRUB_TESTS_ORACLES_HPP
#define RSCRUB_TESTS_ORACLES_HPP

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "rscrub/types.hpp"

namespace oracle {

using rscrub::Index;
using rscrub::IndexSet;
using rscrub::Matrix;

// Sample covariance (divisor m - 1) of the given rows, via explicit sums.
inline Matrix subset_covariance(const Matrix& x, const IndexSet& rows) {
  const auto m = static_cast<double>(rows.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(x.cols());
  for (Index r : rows) mean += x.row(r).transpose();
  mean /= m;
  Matrix cov = Matrix::Zero(x.cols(), x.cols());
  for (Index r : rows) {
    const Eigen::VectorXd d = x.row(r).transpose() - mean;
    cov += d * d.transpose();
  }
  return cov / (m - 1.0);
}

struct ExactMcd {
  IndexSet subset;
  double log_det = std::numeric_limits<double>::infinity();
};

// Minimum covariance determinant by enumerating every h-subset.
inline ExactMcd exhaustive_mcd(const Matrix& x, Index h) {
  const Index n = x.rows();
  ExactMcd best;
  IndexSet idx(static_cast<std::size_t>(h));
  for (Index i = 0; i < h; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    const double det = subset_covariance(x, idx).determinant();
    if (det > 0.0 && std::log(det) < best.log_det) {
      best.log_det = std::log(det);
      best.subset = idx;
    }
    // next combination in lexicographic order
    Index k = h - 1;
    while (k >= 0 && idx[static_cast<std::size_t>(k)] == n - h + k) --k;
    if (k < 0) break;
    ++idx[static_cast<std::size_t>(k)];
    for (Index j = k + 1; j < h; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

// Mahalanobis distance through an explicit inverse (independent of the
// Cholesky path in the library).
inline double mahalanobis(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Matrix& cov) {
  const Eigen::VectorXd d = x - mean;
  return std::sqrt(d.dot(cov.inverse() * d));
}

}  // namespace oracle

#endif  // RSCRUB_TESTS_ORACLES_HPP
