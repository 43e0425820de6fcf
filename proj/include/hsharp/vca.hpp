#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hsharp/error.hpp"
#include "hsharp/raster.hpp"

namespace hsharp {

/// Spectral subspace basis E (bands x p).
struct Subspace {
  Eigen::MatrixXd basis;
  std::vector<std::size_t> pixel_indices;  // source pixel of each VCA column
  bool pca_fallback = false;

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(basis.cols()); }
};

/// Pixel spectra as a bands x pixels matrix.
inline Eigen::MatrixXd spectra_matrix(const HyperCube& cube) {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(cube.bands()), static_cast<Eigen::Index>(cube.pixels()));
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    const auto band = cube.band(b);
    for (std::size_t i = 0; i < cube.pixels(); ++i)
      y(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)) = band[i];
  }
  return y;
}

namespace detail {

/// Leading p eigenvectors of the (uncentered) spectral correlation matrix.
inline Eigen::MatrixXd signal_subspace(const Eigen::MatrixXd& y, std::size_t p) {
  const Eigen::MatrixXd corr = (y * y.transpose()) / static_cast<double>(y.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  const auto bands = corr.rows();
  const auto pp = static_cast<Eigen::Index>(p);
  // Eigen sorts ascending; take the last p columns in descending order.
  Eigen::MatrixXd u(bands, pp);
  for (Eigen::Index k = 0; k < pp; ++k) u.col(k) = eig.eigenvectors().col(bands - 1 - k);
  return u;
}

inline bool well_conditioned(const Eigen::MatrixXd& e) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
  const auto& s = svd.singularValues();
  return s.size() > 0 && s[s.size() - 1] > 1e-8 * s[0];
}

}  // namespace detail

/// Vertex component analysis: returns p observed pixel spectra at the
/// vertices of the data simplex. Falls back to the principal signal subspace
/// (flagged) when the selection degenerates.
inline Subspace vca(const HyperCube& hs, std::size_t p, std::uint64_t seed) {
  if (p == 0) fail_validation("subspace dimension must be positive");
  if (p > hs.bands() || p > hs.pixels())
    fail_validation("subspace dimension " + std::to_string(p) + " exceeds bands (" +
                    std::to_string(hs.bands()) + ") or pixels (" + std::to_string(hs.pixels()) + ")");
  const Eigen::MatrixXd y = spectra_matrix(hs);
  const auto pp = static_cast<Eigen::Index>(p);
  const Eigen::Index n = y.cols();

  const Eigen::MatrixXd ud = detail::signal_subspace(y, p);
  Eigen::MatrixXd x = ud.transpose() * y;  // p x n
  const Eigen::VectorXd u = x.rowwise().mean();
  const Eigen::RowVectorXd denom = u.transpose() * x;
  if (denom.minCoeff() > 0.0) {
    // Projective projection onto the plane u.x = 1.
    for (Eigen::Index j = 0; j < n; ++j) x.col(j) /= denom[j];
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(pp, pp);
  a(pp - 1, 0) = 1.0;
  std::vector<std::size_t> picked;
  for (Eigen::Index i = 0; i < pp; ++i) {
    Eigen::VectorXd w(pp);
    for (Eigen::Index k = 0; k < pp; ++k) w[k] = normal(rng);
    const Eigen::MatrixXd proj = a * a.completeOrthogonalDecomposition().pseudoInverse();
    Eigen::VectorXd f = w - proj * w;
    const double norm = f.norm();
    if (norm > 0.0) f /= norm;
    const Eigen::RowVectorXd v = f.transpose() * x;
    Eigen::Index best = 0;
    v.cwiseAbs().maxCoeff(&best);
    picked.push_back(static_cast<std::size_t>(best));
    a.col(i) = x.col(best);
  }

  Subspace s;
  s.pixel_indices = picked;
  s.basis.resize(y.rows(), pp);
  for (Eigen::Index i = 0; i < pp; ++i) s.basis.col(i) = y.col(static_cast<Eigen::Index>(picked[i]));

  std::vector<std::size_t> sorted = picked;
  std::sort(sorted.begin(), sorted.end());
  const bool duplicate = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
  if (duplicate || !detail::well_conditioned(s.basis)) {
    s.basis = ud;
    s.pca_fallback = true;
  }
  return s;
}

}  // namespace hsharp
