#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hsharp/error.hpp"
#include "hsharp/preprocess.hpp"
#include "hsharp/raster.hpp"
#include "hsharp/stats.hpp"

namespace hsharp {

enum class GainMode { unit, regression, hpm };

inline const char* to_string(GainMode m) {
  switch (m) {
    case GainMode::unit: return "unit";
    case GainMode::regression: return "regression";
    case GainMode::hpm: return "hpm";
  }
  return "?";
}

inline GainMode parse_gain_mode(const std::string& s) {
  if (s == "unit") return GainMode::unit;
  if (s == "regression") return GainMode::regression;
  if (s == "hpm") return GainMode::hpm;
  fail_validation("unknown gain mode '" + s + "' (expected unit, regression or hpm)");
}

struct GlpArtifacts {
  GainMode gain_mode = GainMode::regression;
  // Scalar gain per band; for hpm the mean of the pixel-wise gain map.
  std::vector<double> gains;
  // Per-band planes, only populated when requested (they are large).
  std::vector<std::vector<double>> pan_lowpass;
  std::vector<std::vector<double>> details;
};

/// One-level GLP approximation: MTF-matched blur, decimation, bicubic re-expansion.
inline PanImage glp_lowpass(const PanImage& pan, const SensorModel& model, std::size_t band) {
  if (band >= model.mtf_gain_nyquist.size()) fail_validation("band index outside the sensor model");
  const std::size_t r = model.ratio;
  const Kernel k = mtf_kernel(model.mtf_gain_nyquist[band], r, default_mtf_size(r));
  return upsample(as_pan(degrade(as_cube(pan), k, r)), r);
}

/// MTF-GLP pansharpening with per-band mean/std pan matching.
/// The matched pan is an affine map a*pan + c of the input and the GLP
/// low-pass preserves constants, so lowpass(matched) = a*lowpass(pan) + c and
/// the pan is filtered once per distinct MTF gain.
inline std::pair<HyperCube, GlpArtifacts> mtfglp_sharpen(const HyperCube& hs, const PanImage& pan,
                                                         const SensorModel& model,
                                                         GainMode gain_mode = GainMode::regression,
                                                         bool keep_planes = false) {
  const std::size_t r = model.ratio;
  if (pan.rows() != hs.rows() * r || pan.cols() != hs.cols() * r)
    fail_validation("pan dims must equal hs dims x ratio");
  if (model.mtf_gain_nyquist.size() != hs.bands()) fail_validation("need one MTF gain per band");

  HyperCube up = upsample(hs, r);
  const std::size_t n = pan.pixels();
  const std::span<const float> pan_values(pan.data());
  const double mean_p = stats::mean(pan_values);
  const double sd_p = stats::stddev(pan_values);

  std::map<double, std::vector<double>> lowpass_cache;
  auto pan_lowpass = [&](std::size_t band) -> const std::vector<double>& {
    const double g = model.mtf_gain_nyquist[band];
    auto it = lowpass_cache.find(g);
    if (it == lowpass_cache.end()) {
      const PanImage lp = glp_lowpass(pan, model, band);
      it = lowpass_cache.emplace(g, std::vector<double>(lp.data().begin(), lp.data().end())).first;
    }
    return it->second;
  };

  GlpArtifacts art;
  art.gain_mode = gain_mode;
  art.gains.resize(hs.bands());
  std::vector<double> lowpass(n), detail(n);
  for (std::size_t b = 0; b < hs.bands(); ++b) {
    auto band = up.band(b);
    const std::span<const float> band_values(band);
    const double mean_u = stats::mean(band_values);
    const double scale = sd_p > 0.0 ? stats::stddev(band_values) / sd_p : 0.0;
    const double offset = mean_u - scale * mean_p;
    const auto& lp_pan = pan_lowpass(b);
    for (std::size_t i = 0; i < n; ++i) {
      lowpass[i] = scale * lp_pan[i] + offset;
      const double matched = scale * static_cast<double>(pan_values[i]) + offset;
      detail[i] = matched - lowpass[i];
    }

    switch (gain_mode) {
      case GainMode::unit:
        art.gains[b] = 1.0;
        for (std::size_t i = 0; i < n; ++i)
          band[i] = static_cast<float>(static_cast<double>(band[i]) + detail[i]);
        break;
      case GainMode::regression: {
        const std::span<const double> lp(lowpass);
        const double var_lp = stats::variance(lp);
        if (stats::negligible_variance(var_lp, stats::mean(lp)))
          fail_numerical("low-pass pan of band " + std::to_string(b) +
                         " has zero variance; regression gain undefined");
        const double g = stats::covariance(band_values, lp) / var_lp;
        art.gains[b] = g;
        for (std::size_t i = 0; i < n; ++i)
          band[i] = static_cast<float>(static_cast<double>(band[i]) + g * detail[i]);
        break;
      }
      case GainMode::hpm: {
        double mean_abs = 0.0;
        for (double v : lowpass) mean_abs += std::abs(v);
        const double eps = std::max(1e-6 * mean_abs / static_cast<double>(n),
                                     std::numeric_limits<double>::min());
        double gain_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double u = band[i];
          const double g = u / std::max(lowpass[i], eps);
          gain_sum += g;
          band[i] = static_cast<float>(u + g * detail[i]);
        }
        art.gains[b] = gain_sum / static_cast<double>(n);
        break;
      }
    }
    if (keep_planes) {
      art.pan_lowpass.push_back(lowpass);
      art.details.push_back(detail);
    }
  }
  up.set_gsd_m(pan.gsd_m());
  return {std::move(up), std::move(art)};
}

}  // namespace hsharp
