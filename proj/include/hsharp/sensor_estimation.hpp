#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "hsharp/error.hpp"
#include "hsharp/preprocess.hpp"
#include "hsharp/raster.hpp"

namespace hsharp {

struct SensorEstimateOptions {
  std::size_t psf_size = 0;  // 0 selects 2*ratio + 1
  double smooth_r = 1e-6;
  double smooth_b = 1e-6;
  double mtf_gain_hs = 0.3;
};

/// Estimates the spectral response R and PSF B relating the observations:
///   min || R.hs - (pan * B) decimated ||^2 + smooth_r ||D R||^2 + smooth_b ||Lap B||^2
/// with D the first difference over bands and Lap the 5-point Laplacian over
/// the kernel (zero outside it). The scale ambiguity between R and B is fixed
/// by sum(B) = 1, which makes the objective jointly quadratic; the constrained
/// system is solved directly. Negative entries are clipped and both R and B
/// are renormalized to unit sum.
inline SensorModel estimate_sensor(const HyperCube& hs, const PanImage& pan, std::size_t ratio,
                                   const SensorEstimateOptions& opts = {}) {
  if (ratio < 2) fail_validation("ratio must be >= 2");
  if (pan.rows() != hs.rows() * ratio || pan.cols() != hs.cols() * ratio)
    fail_validation("pan dims must equal hs dims x ratio");
  const std::size_t side = opts.psf_size == 0 ? 2 * ratio + 1 : opts.psf_size;
  if (side % 2 == 0) fail_validation("psf size must be odd");
  if (side > pan.rows() || side > pan.cols()) fail_validation("psf larger than the pan raster");

  const std::size_t nb = hs.bands();
  const std::size_t nk = side * side;
  const auto m = static_cast<Eigen::Index>(nb + nk);
  const std::size_t rows = pan.rows(), cols = pan.cols();
  const auto c = static_cast<std::ptrdiff_t>(side / 2);
  auto wrap = [](std::ptrdiff_t i, std::size_t n) {
    const auto s = static_cast<std::ptrdiff_t>(n);
    const std::ptrdiff_t r = i % s;
    return static_cast<std::size_t>(r < 0 ? r + s : r);
  };

  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd row(m);
  const std::size_t n_low = hs.pixels();
  for (std::size_t i = 0; i < hs.rows(); ++i)
    for (std::size_t j = 0; j < hs.cols(); ++j) {
      const std::size_t pix = i * hs.cols() + j;
      for (std::size_t b = 0; b < nb; ++b) row[static_cast<Eigen::Index>(b)] = hs.band(b)[pix];
      for (std::size_t u = 0; u < side; ++u) {
        const std::size_t y = wrap(static_cast<std::ptrdiff_t>(ratio * i) + c - static_cast<std::ptrdiff_t>(u), rows);
        for (std::size_t v = 0; v < side; ++v) {
          const std::size_t x = wrap(static_cast<std::ptrdiff_t>(ratio * j) + c - static_cast<std::ptrdiff_t>(v), cols);
          row[static_cast<Eigen::Index>(nb + u * side + v)] = -static_cast<double>(pan.at(y, x));
        }
      }
      normal.selfadjointView<Eigen::Lower>().rankUpdate(row);
    }
  normal = normal.selfadjointView<Eigen::Lower>();
  normal /= static_cast<double>(n_low);

  // Smoothness penalties.
  for (std::size_t b = 0; b + 1 < nb; ++b) {
    const auto i0 = static_cast<Eigen::Index>(b), i1 = i0 + 1;
    normal(i0, i0) += opts.smooth_r;
    normal(i1, i1) += opts.smooth_r;
    normal(i0, i1) -= opts.smooth_r;
    normal(i1, i0) -= opts.smooth_r;
  }
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nk), static_cast<Eigen::Index>(nk));
  for (std::size_t u = 0; u < side; ++u)
    for (std::size_t v = 0; v < side; ++v) {
      const auto k = static_cast<Eigen::Index>(u * side + v);
      lap(k, k) = -4.0;
      if (u > 0) lap(k, k - static_cast<Eigen::Index>(side)) = 1.0;
      if (u + 1 < side) lap(k, k + static_cast<Eigen::Index>(side)) = 1.0;
      if (v > 0) lap(k, k - 1) = 1.0;
      if (v + 1 < side) lap(k, k + 1) = 1.0;
    }
  normal.bottomRightCorner(static_cast<Eigen::Index>(nk), static_cast<Eigen::Index>(nk)) +=
      opts.smooth_b * lap.transpose() * lap;

  // KKT system for sum(B) = 1.
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
  kkt.topLeftCorner(m, m) = normal;
  for (std::size_t k = 0; k < nk; ++k) {
    kkt(static_cast<Eigen::Index>(nb + k), m) = 1.0;
    kkt(m, static_cast<Eigen::Index>(nb + k)) = 1.0;
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
  rhs[m] = 1.0;
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  if (!sol.allFinite()) fail_numerical("sensor estimation system is singular");

  SensorModel model;
  model.ratio = ratio;
  model.response.resize(nb);
  double rs = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    model.response[b] = std::max(0.0, sol[static_cast<Eigen::Index>(b)]);
    rs += model.response[b];
  }
  if (!(rs > 0.0)) fail_numerical("estimated spectral response is non-positive everywhere");
  for (double& w : model.response) w /= rs;
  model.psf.side = side;
  model.psf.weights.resize(nk);
  double ks = 0.0;
  for (std::size_t k = 0; k < nk; ++k) {
    model.psf.weights[k] = std::max(0.0, sol[static_cast<Eigen::Index>(nb + k)]);
    ks += model.psf.weights[k];
  }
  if (!(ks > 0.0)) fail_numerical("estimated PSF is non-positive everywhere");
  for (double& w : model.psf.weights) w /= ks;
  model.mtf_gain_nyquist.assign(nb, opts.mtf_gain_hs);
  return model;
}

}  // namespace hsharp
