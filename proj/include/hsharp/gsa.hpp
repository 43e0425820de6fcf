#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "hsharp/error.hpp"
#include "hsharp/preprocess.hpp"
#include "hsharp/raster.hpp"
#include "hsharp/stats.hpp"

namespace hsharp {

/// Regression of the degraded pan onto the hyperspectral bands.
struct GsaWeights {
  std::vector<double> band;  // one coefficient per band
  double intercept = 0.0;
};

struct GsaArtifacts {
  std::vector<double> weights;      // band coefficients, intercept last
  std::vector<double> intensity;    // synthetic intensity I at pan resolution
  std::vector<double> matched_pan;  // pan after mean/std matching to I
  std::vector<double> gains;        // per-band injection gains
};

/// Least squares pan ~ sum_k w_k band_k + w_0 over all pixels, through
/// mean-normalized normal equations with 1e-8 damping on the band block.
inline GsaWeights gsa_weights(const HyperCube& hs_low, const PanImage& pan_degraded) {
  if (hs_low.rows() != pan_degraded.rows() || hs_low.cols() != pan_degraded.cols())
    fail_validation("regression inputs must share dimensions");
  const std::size_t nb = hs_low.bands();
  const std::size_t n = hs_low.pixels();
  if (n < nb + 1)
    fail_validation("regression is underdetermined: " + std::to_string(n) + " pixels for " +
                    std::to_string(nb + 1) + " unknowns");
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nb + 1),
                                               static_cast<Eigen::Index>(nb + 1));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb + 1));
  Eigen::VectorXd x(static_cast<Eigen::Index>(nb + 1));
  const auto& pan = pan_degraded.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < nb; ++b) x[static_cast<Eigen::Index>(b)] = hs_low.band(b)[i];
    x[static_cast<Eigen::Index>(nb)] = 1.0;
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
    rhs += x * static_cast<double>(pan[i]);
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  gram /= static_cast<double>(n);
  rhs /= static_cast<double>(n);
  for (std::size_t b = 0; b < nb; ++b)
    gram(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b)) += 1e-8;
  const Eigen::VectorXd w = gram.ldlt().solve(rhs);
  if (!w.allFinite()) fail_numerical("GSA regression produced non-finite weights");
  GsaWeights out;
  out.band.assign(w.data(), w.data() + nb);
  out.intercept = w[static_cast<Eigen::Index>(nb)];
  return out;
}

/// Gram-Schmidt adaptive component substitution.
inline std::pair<HyperCube, GsaArtifacts> gsa_sharpen(const HyperCube& hs, const PanImage& pan,
                                                      const SensorModel& model) {
  const std::size_t r = model.ratio;
  if (pan.rows() != hs.rows() * r || pan.cols() != hs.cols() * r)
    fail_validation("pan dims must equal hs dims x ratio");
  if (model.psf.side % 2 == 0) fail_validation("psf side length must be odd");

  const PanImage pan_low = degrade(pan, model);
  const GsaWeights w = gsa_weights(hs, pan_low);
  HyperCube up = upsample(hs, r);

  const std::size_t n = pan.pixels();
  GsaArtifacts art;
  art.weights = w.band;
  art.weights.push_back(w.intercept);
  art.intensity.assign(n, w.intercept);
  for (std::size_t b = 0; b < hs.bands(); ++b) {
    const auto band = up.band(b);
    for (std::size_t i = 0; i < n; ++i) art.intensity[i] += w.band[b] * band[i];
  }

  const std::span<const double> intensity(art.intensity);
  const double mean_i = stats::mean(intensity);
  const double var_i = stats::variance(intensity);
  if (stats::negligible_variance(var_i, mean_i))
    fail_numerical("GSA synthetic intensity has zero variance");
  const std::span<const float> pan_values(pan.data());
  const double mean_p = stats::mean(pan_values);
  const double sd_p = stats::stddev(pan_values);
  const double scale = sd_p > 0.0 ? std::sqrt(var_i) / sd_p : 0.0;
  art.matched_pan.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    art.matched_pan[i] = (static_cast<double>(pan_values[i]) - mean_p) * scale + mean_i;

  art.gains.resize(hs.bands());
  for (std::size_t b = 0; b < hs.bands(); ++b) {
    auto band = up.band(b);
    art.gains[b] = stats::covariance(std::span<const float>(band), intensity) / var_i;
    for (std::size_t i = 0; i < n; ++i)
      band[i] = static_cast<float>(static_cast<double>(band[i]) +
                                   art.gains[b] * (art.matched_pan[i] - art.intensity[i]));
  }
  up.set_gsd_m(pan.gsd_m());
  return {std::move(up), std::move(art)};
}

}  // namespace hsharp
