#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "airware/dataset.hpp"
#include "airware/error.hpp"
#include "airware/random.hpp"

namespace airware::baselines {

struct PcaModel {
  Eigen::RowVectorXd mean;
  Matrix components;                  // [k x d], orthonormal rows
  Eigen::VectorXd explained_variance;  // non-increasing
  std::size_t k() const { return static_cast<std::size_t>(components.rows()); }
  std::vector<std::uint64_t> fitted_on;  // sorted record keys, when fitted from records
  std::vector<std::string> warnings;

  bool was_fitted_on(std::uint64_t key) const { return std::binary_search(fitted_on.begin(), fitted_on.end(), key); }
};

namespace detail {

/// Eigenpairs of a symmetric matrix, largest first.
inline void top_eigen(const Eigen::MatrixXd& sym, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  require(es.info() == Eigen::Success, ErrorCode::DomainError, "eigendecomposition failed");
  values = es.eigenvalues().reverse();
  vectors = es.eigenvectors().rowwise().reverse();
}

inline Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

}  // namespace detail

/// Top-k principal axes of X. Small problems use an exact eigensolve of the
/// smaller Gram/covariance matrix; large ones randomized subspace iteration.
/// k is clipped to the numerical rank with a RankDeficiency warning.
inline PcaModel pca_fit(const Matrix& X, std::size_t k, std::uint64_t seed = 0) {
  const auto n = X.rows(), d = X.cols();
  require(n >= 2, ErrorCode::InsufficientSamples, "pca needs at least 2 rows");
  require(k >= 1, ErrorCode::InvalidArgument, "pca needs k >= 1");
  PcaModel m;
  m.mean = X.colwise().mean();
  const Eigen::MatrixXd Xc = X.rowwise() - m.mean;

  const auto limit = std::min(n, d);
  Eigen::VectorXd sv2;  // squared singular values, descending
  Eigen::MatrixXd V;    // right singular vectors as columns
  const Eigen::Index oversample = 10;
  const bool randomized = static_cast<Eigen::Index>(k) + oversample < limit / 2;
  if (!randomized) {
    Eigen::VectorXd lam;
    Eigen::MatrixXd U;
    if (d <= n) {
      detail::top_eigen(Xc.transpose() * Xc, lam, V);
      sv2 = lam;
    } else {
      detail::top_eigen(Xc * Xc.transpose(), lam, U);
      sv2 = lam;
      V.resize(d, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = std::sqrt(std::max(lam(i), 0.0));
        V.col(i) = s > 0 ? Eigen::VectorXd(Xc.transpose() * U.col(i) / s) : Eigen::VectorXd::Zero(d);
      }
    }
  } else {
    const Eigen::Index l = static_cast<Eigen::Index>(k) + oversample;
    Rng rng(seed);
    Eigen::MatrixXd omega(d, l);
    for (Eigen::Index i = 0; i < omega.size(); ++i) omega.data()[i] = rng.normal();
    Eigen::MatrixXd Q = detail::orthonormalize(Xc * omega);
    for (int it = 0; it < 2; ++it) {
      const Eigen::MatrixXd Z = detail::orthonormalize(Xc.transpose() * Q);
      Q = detail::orthonormalize(Xc * Z);
    }
    const Eigen::MatrixXd B = Q.transpose() * Xc;  // l x d
    Eigen::VectorXd lam;
    Eigen::MatrixXd U;
    detail::top_eigen(B * B.transpose(), lam, U);
    sv2 = lam;
    V.resize(d, l);
    for (Eigen::Index i = 0; i < l; ++i) {
      const double s = std::sqrt(std::max(lam(i), 0.0));
      V.col(i) = s > 0 ? Eigen::VectorXd(B.transpose() * U.col(i) / s) : Eigen::VectorXd::Zero(d);
    }
  }

  const double top = sv2.size() ? std::max(sv2(0), 0.0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv2.size(); ++i)
    if (top > 0 && sv2(i) > top * 1e-12) ++rank;
  rank = std::min(rank, limit - (n <= d ? 1 : 0));  // centring removes one dimension when n <= d
  auto kk = static_cast<Eigen::Index>(k);
  if (kk > rank) {
    m.warnings.push_back("RankDeficiency: requested " + std::to_string(k) + " components, data rank is " +
                         std::to_string(rank) + "; k clipped");
    kk = std::max<Eigen::Index>(rank, 1);
  }
  m.components = V.leftCols(kk).transpose();
  // Deterministic sign: the largest-magnitude loading of each axis is positive.
  for (Eigen::Index i = 0; i < kk; ++i) {
    Eigen::Index j;
    m.components.row(i).cwiseAbs().maxCoeff(&j);
    if (m.components(i, j) < 0) m.components.row(i) *= -1.0;
  }
  m.explained_variance = sv2.head(kk).cwiseMax(0.0) / static_cast<double>(n - 1);
  return m;
}

inline Matrix pca_transform(const PcaModel& m, const Matrix& X) {
  require(X.cols() == m.mean.size(), ErrorCode::ShapeMismatch, "pca input width mismatch");
  return (X.rowwise() - m.mean) * m.components.transpose();
}

inline Matrix pca_inverse(const PcaModel& m, const Matrix& Z) {
  require(static_cast<std::size_t>(Z.cols()) == m.k(), ErrorCode::ShapeMismatch, "pca code width mismatch");
  return (Z * m.components).rowwise() + m.mean;
}

}  // namespace airware::baselines
