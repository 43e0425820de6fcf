#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "hsharp/error.hpp"
#include "hsharp/preprocess.hpp"
#include "hsharp/raster.hpp"

namespace hsharp {

/// Simulated ground truth with the observations derived from it.
struct SyntheticScene {
  HyperCube truth;
  HyperCube hs;
  PanImage pan;
  SensorModel model;
  Eigen::MatrixXd endmembers;  // bands x p
  std::uint64_t seed = 0;
};

struct SceneOptions {
  std::size_t rows = 96;
  std::size_t cols = 96;
  std::size_t bands = 30;
  std::size_t endmembers = 3;
  std::size_t ratio = 6;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  double mtf_gain = 0.3;
  double pan_gsd_m = 5.0;
  // Width of the mixing zone between materials, in units of the abundance
  // field's standard deviation; smaller gives sharper edges.
  double mixing_width = 0.5;
  // Highest spatial frequency (cycles per image) of the abundance fields.
  int max_frequency = 3;
};

namespace detail {

/// Periodic random field from a handful of low-frequency cosines, unit std.
inline std::vector<double> low_frequency_field(std::size_t rows, std::size_t cols, int kmax,
                                               std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> f(rows * cols, 0.0);
  for (int ky = 0; ky <= kmax; ++ky)
    for (int kx = -kmax; kx <= kmax; ++kx) {
      if (ky == 0 && kx <= 0) continue;
      const double amp = normal(rng) / (1.0 + ky * ky + kx * kx);
      const double ph = phase(rng);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
          const double arg = 2.0 * std::numbers::pi *
                                 (ky * static_cast<double>(r) / static_cast<double>(rows) +
                                  kx * static_cast<double>(c) / static_cast<double>(cols)) +
                             ph;
          f[r * cols + c] += amp * std::cos(arg);
        }
    }
  double m = 0.0, s = 0.0;
  for (double v : f) m += v;
  m /= static_cast<double>(f.size());
  for (double v : f) s += (v - m) * (v - m);
  s = std::sqrt(s / static_cast<double>(f.size()));
  if (s > 0.0)
    for (double& v : f) v = (v - m) / s;
  return f;
}

}  // namespace detail

inline std::vector<double> linear_wavelengths(std::size_t bands, double lo = 400.0, double hi = 2500.0) {
  std::vector<double> wl(bands);
  for (std::size_t b = 0; b < bands; ++b)
    wl[b] = bands == 1 ? lo : lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bands - 1);
  return wl;
}

/// Linear-mixing scene: truth = E A with smooth positive unit-sum spectra E and
/// abundance maps A that are non-negative, sum to one per pixel and contain
/// pure pixels wherever one material's field dominates by more than the mixing width.
inline SyntheticScene make_scene(const SceneOptions& o) {
  if (o.ratio < 2) fail_validation("ratio must be >= 2");
  if (o.rows == 0 || o.cols == 0 || o.rows % o.ratio != 0 || o.cols % o.ratio != 0)
    fail_validation("scene dims must be positive multiples of the ratio");
  if (o.endmembers == 0 || o.endmembers > o.bands)
    fail_validation("endmember count must lie in [1, bands]");
  if (o.noise_std < 0.0) fail_validation("noise_std must be non-negative");

  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t nb = o.bands, p = o.endmembers, n = o.rows * o.cols;
  const auto wl = linear_wavelengths(nb);

  SyntheticScene s;
  s.seed = o.seed;
  s.endmembers.resize(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(p));
  for (std::size_t k = 0; k < p; ++k) {
    std::vector<double> spec(nb, 0.2 + 0.3 * unif(rng));
    for (int bump = 0; bump < 3; ++bump) {
      const double center = 400.0 + 2100.0 * unif(rng);
      const double width = 100.0 + 400.0 * unif(rng);
      const double amp = 0.2 + unif(rng);
      for (std::size_t b = 0; b < nb; ++b) {
        const double d = (wl[b] - center) / width;
        spec[b] += amp * std::exp(-0.5 * d * d);
      }
    }
    double sum = 0.0;
    for (double v : spec) sum += v;
    for (std::size_t b = 0; b < nb; ++b)
      s.endmembers(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = spec[b] / sum;
  }

  std::vector<std::vector<double>> fields;
  for (std::size_t k = 0; k < p; ++k)
    fields.push_back(detail::low_frequency_field(o.rows, o.cols, o.max_frequency, rng));
  std::vector<double> abundance(p * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double top = -1e300;
    for (std::size_t k = 0; k < p; ++k) top = std::max(top, fields[k][i]);
    double sum = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      const double w = std::max(0.0, fields[k][i] - (top - o.mixing_width));
      abundance[k * n + i] = w;
      sum += w;
    }
    for (std::size_t k = 0; k < p; ++k) abundance[k * n + i] /= sum;
  }

  std::vector<float> truth(nb * n);
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      for (std::size_t k = 0; k < p; ++k)
        v += s.endmembers(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) * abundance[k * n + i];
      truth[b * n + i] = static_cast<float>(v);
    }
  s.truth = HyperCube(nb, o.rows, o.cols, std::move(truth), wl, o.pan_gsd_m);

  s.model.ratio = o.ratio;
  s.model.psf = mtf_kernel(o.mtf_gain, o.ratio, default_mtf_size(o.ratio));
  s.model.mtf_gain_nyquist.assign(nb, o.mtf_gain);
  s.model.response.resize(nb);
  double rsum = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    const double d = (wl[b] - 700.0) / 250.0;
    s.model.response[b] = std::exp(-d * d) + 0.01;
    rsum += s.model.response[b];
  }
  for (double& w : s.model.response) w /= rsum;

  s.hs = degrade(s.truth, s.model);
  std::vector<float> pan(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    for (std::size_t b = 0; b < nb; ++b) v += s.model.response[b] * s.truth.band(b)[i];
    pan[i] = static_cast<float>(v);
  }
  s.pan = PanImage(o.rows, o.cols, std::move(pan), o.pan_gsd_m);

  if (o.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, o.noise_std);
    for (float& v : s.hs.data()) v = static_cast<float>(v + noise(rng));
    for (float& v : s.pan.data()) v = static_cast<float>(v + noise(rng));
  }
  return s;
}

inline SyntheticScene make_scene(std::size_t rows, std::size_t cols, std::size_t bands, std::size_t p,
                                 std::size_t ratio, double noise_std, std::uint64_t seed) {
  SceneOptions o;
  o.rows = rows;
  o.cols = cols;
  o.bands = bands;
  o.endmembers = p;
  o.ratio = ratio;
  o.noise_std = noise_std;
  o.seed = seed;
  return make_scene(o);
}

}  // namespace hsharp
