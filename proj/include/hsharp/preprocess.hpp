#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "hsharp/error.hpp"
#include "hsharp/raster.hpp"
#include "hsharp/stats.hpp"

namespace hsharp {

/// Square, odd-sided spatial kernel; element (u, v) sits at offset
/// (u - side/2, v - side/2) from the center.
struct Kernel {
  std::size_t side = 1;
  std::vector<double> weights{1.0};

  static Kernel identity() { return {}; }

  static Kernel uniform(std::size_t side) {
    return Kernel{side, std::vector<double>(side * side, 1.0 / static_cast<double>(side * side))};
  }

  double at(std::size_t u, std::size_t v) const { return weights[u * side + v]; }
  std::size_t radius() const noexcept { return side / 2; }

  double sum() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }

  bool operator==(const Kernel&) const = default;
};

/// Degradation operators relating the fused product to the observations:
/// spectral response R (pan = R . cube), PSF B and decimation ratio.
struct SensorModel {
  std::vector<double> response;
  Kernel psf;
  std::size_t ratio = 2;
  std::vector<double> mtf_gain_nyquist;  // per hyperspectral band

  void validate(std::size_t bands) const {
    if (ratio < 2) fail_validation("decimation ratio must be >= 2");
    if (psf.side % 2 == 0) fail_validation("psf side length must be odd");
    if (psf.weights.size() != psf.side * psf.side) fail_validation("psf weight count mismatch");
    for (double w : psf.weights)
      if (!(w >= 0.0)) fail_validation("psf weights must be non-negative");
    if (std::abs(psf.sum() - 1.0) > 1e-9) fail_validation("psf must sum to 1");
    if (response.size() != bands)
      fail_validation("spectral response has " + std::to_string(response.size()) +
                      " entries for " + std::to_string(bands) + " bands");
    double s = 0.0;
    for (double w : response) {
      if (!(w >= 0.0)) fail_validation("spectral response must be non-negative");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-9) fail_validation("spectral response must sum to 1");
    if (mtf_gain_nyquist.size() != bands)
      fail_validation("need one MTF gain per band");
    for (double g : mtf_gain_nyquist)
      if (!(g > 0.0 && g < 1.0)) fail_validation("MTF gains must lie in (0, 1)");
  }

  /// Restricts the per-band fields to the bands kept by `keep`, renormalizing R.
  SensorModel select_bands(const std::vector<bool>& keep) const {
    SensorModel m = *this;
    m.response.clear();
    m.mtf_gain_nyquist.clear();
    for (std::size_t b = 0; b < keep.size(); ++b)
      if (keep[b]) {
        m.response.push_back(response[b]);
        m.mtf_gain_nyquist.push_back(mtf_gain_nyquist[b]);
      }
    double s = 0.0;
    for (double w : m.response) s += w;
    if (s > 0.0)
      for (double& w : m.response) w /= s;
    return m;
  }
};

// ---------------------------------------------------------------------------
// Band screening

enum class BandReason { kept, atmospheric, low_snr, manual };

inline const char* to_string(BandReason r) {
  switch (r) {
    case BandReason::kept: return "kept";
    case BandReason::atmospheric: return "atmospheric";
    case BandReason::low_snr: return "low_snr";
    case BandReason::manual: return "manual";
  }
  return "?";
}

struct BandMask {
  std::vector<bool> keep;
  std::vector<BandReason> reason;

  std::size_t kept_count() const {
    return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
  }
};

/// Closed wavelength interval in nm; `hi` may be +infinity.
struct WavelengthInterval {
  double lo_nm = 0.0;
  double hi_nm = 0.0;
  bool contains(double w) const { return w >= lo_nm && w <= hi_nm; }
};

/// Absorption windows commonly removed from VNIR-SWIR imagery.
inline std::vector<WavelengthInterval> default_atmospheric_intervals() {
  return {{1350.0, 1460.0}, {1790.0, 1970.0}, {2400.0, std::numeric_limits<double>::infinity()}};
}

/// Median over 8x8 blocks of block mean / block standard deviation.
/// Blocks with zero deviation count as infinite SNR.
inline double estimate_snr(std::span<const float> band, std::size_t rows, std::size_t cols) {
  constexpr std::size_t block = 8;
  const std::size_t br = rows >= block ? block : rows;
  const std::size_t bc = cols >= block ? block : cols;
  std::vector<double> ratios;
  for (std::size_t r0 = 0; r0 + br <= rows; r0 += br)
    for (std::size_t c0 = 0; c0 + bc <= cols; c0 += bc) {
      double s = 0.0, s2 = 0.0;
      for (std::size_t r = r0; r < r0 + br; ++r)
        for (std::size_t c = c0; c < c0 + bc; ++c) s += band[r * cols + c];
      const double n = static_cast<double>(br * bc);
      const double m = s / n;
      for (std::size_t r = r0; r < r0 + br; ++r)
        for (std::size_t c = c0; c < c0 + bc; ++c) {
          const double d = band[r * cols + c] - m;
          s2 += d * d;
        }
      const double sd = std::sqrt(s2 / n);
      ratios.push_back(sd > 0.0 ? m / sd : std::numeric_limits<double>::infinity());
    }
  std::sort(ratios.begin(), ratios.end());
  const std::size_t n = ratios.size();
  if (n % 2 == 1) return ratios[n / 2];
  const double a = ratios[n / 2 - 1], b = ratios[n / 2];
  if (std::isinf(a) || std::isinf(b)) return std::isinf(a) ? a : b;
  return 0.5 * (a + b);
}

inline BandMask screen_bands(const HyperCube& cube, const std::vector<WavelengthInterval>& manual_drop,
                             double snr_threshold) {
  if (!manual_drop.empty() && !cube.has_wavelengths())
    fail_validation("wavelength intervals given for a cube without wavelength metadata");
  for (const auto& iv : manual_drop)
    if (!(iv.lo_nm <= iv.hi_nm)) fail_validation("wavelength interval has lo > hi");

  BandMask mask;
  mask.keep.assign(cube.bands(), true);
  mask.reason.assign(cube.bands(), BandReason::kept);
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    const bool dropped =
        std::any_of(manual_drop.begin(), manual_drop.end(),
                    [&](const WavelengthInterval& iv) { return iv.contains(cube.wavelengths_nm()[b]); });
    if (dropped) {
      mask.keep[b] = false;
      mask.reason[b] = BandReason::atmospheric;
      continue;
    }
    if (snr_threshold > 0.0 && estimate_snr(cube.band(b), cube.rows(), cube.cols()) < snr_threshold) {
      mask.keep[b] = false;
      mask.reason[b] = BandReason::low_snr;
    }
  }
  if (mask.kept_count() == 0) fail_validation("band screening removed every band");
  return mask;
}

inline HyperCube apply_band_mask(const HyperCube& cube, const BandMask& mask) {
  if (mask.keep.size() != cube.bands())
    fail_validation("band mask has " + std::to_string(mask.keep.size()) + " entries for " +
                    std::to_string(cube.bands()) + " bands");
  const std::size_t kept = mask.kept_count();
  if (kept == 0) fail_validation("band mask keeps no bands");
  std::vector<float> data;
  data.reserve(kept * cube.pixels());
  std::vector<double> wl;
  std::vector<std::string> names;
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    if (!mask.keep[b]) continue;
    const auto band = cube.band(b);
    data.insert(data.end(), band.begin(), band.end());
    if (cube.has_wavelengths()) wl.push_back(cube.wavelengths_nm()[b]);
    if (!cube.band_names().empty()) names.push_back(cube.band_names()[b]);
  }
  return HyperCube(kept, cube.rows(), cube.cols(), std::move(data), std::move(wl), cube.gsd_m(),
                   std::move(names));
}

// ---------------------------------------------------------------------------
// Resolution changes

/// Cyclic convolution with `psf` followed by decimation by `ratio`, sampling
/// rows/cols ratio*i + phase. This is the operator X -> X B M.
inline HyperCube degrade(const HyperCube& src, const Kernel& psf, std::size_t ratio,
                         std::size_t phase = 0) {
  if (ratio == 0) fail_validation("ratio must be positive");
  if (src.rows() % ratio != 0 || src.cols() % ratio != 0)
    fail_validation("raster dims " + std::to_string(src.rows()) + "x" + std::to_string(src.cols()) +
                    " are not divisible by ratio " + std::to_string(ratio));
  if (phase >= ratio) fail_validation("sampling phase must be < ratio");
  if (psf.side % 2 == 0) fail_validation("psf side length must be odd");
  const std::size_t rows = src.rows(), cols = src.cols();
  const std::size_t out_rows = rows / ratio, out_cols = cols / ratio;
  const auto c = static_cast<std::ptrdiff_t>(psf.radius());
  HyperCube out = src.blank_like(out_rows, out_cols, src.gsd_m() * static_cast<double>(ratio));

  // Precomputed wrapped source indices per kernel tap.
  auto wrap = [](std::ptrdiff_t i, std::size_t n) {
    const auto m = static_cast<std::ptrdiff_t>(n);
    const std::ptrdiff_t r = i % m;
    return static_cast<std::size_t>(r < 0 ? r + m : r);
  };
  std::vector<std::size_t> row_idx(out_rows * psf.side), col_idx(out_cols * psf.side);
  for (std::size_t i = 0; i < out_rows; ++i)
    for (std::size_t u = 0; u < psf.side; ++u)
      row_idx[i * psf.side + u] =
          wrap(static_cast<std::ptrdiff_t>(ratio * i + phase) + c - static_cast<std::ptrdiff_t>(u), rows);
  for (std::size_t j = 0; j < out_cols; ++j)
    for (std::size_t v = 0; v < psf.side; ++v)
      col_idx[j * psf.side + v] =
          wrap(static_cast<std::ptrdiff_t>(ratio * j + phase) + c - static_cast<std::ptrdiff_t>(v), cols);

  for (std::size_t b = 0; b < src.bands(); ++b) {
    const auto in = src.band(b);
    auto dst = out.band(b);
    for (std::size_t i = 0; i < out_rows; ++i)
      for (std::size_t j = 0; j < out_cols; ++j) {
        double s = 0.0;
        for (std::size_t u = 0; u < psf.side; ++u) {
          const float* row = in.data() + row_idx[i * psf.side + u] * cols;
          for (std::size_t v = 0; v < psf.side; ++v)
            s += psf.weights[u * psf.side + v] * static_cast<double>(row[col_idx[j * psf.side + v]]);
        }
        dst[i * out_cols + j] = static_cast<float>(s);
      }
  }
  return out;
}

inline HyperCube degrade(const HyperCube& src, const SensorModel& model, std::size_t phase = 0) {
  return degrade(src, model.psf, model.ratio, phase);
}

inline PanImage degrade(const PanImage& src, const SensorModel& model, std::size_t phase = 0) {
  return as_pan(degrade(as_cube(src), model.psf, model.ratio, phase));
}

namespace detail {

/// Keys cubic convolution kernel, a = -1/2.
inline double keys_cubic(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::ptrdiff_t first = 0;  // low-res index of the first of four taps
  double w[4]{};
};

/// Interpolation taps for each of the n*ratio high-res positions.
inline std::vector<Taps> cubic_taps(std::size_t n, std::size_t ratio, std::size_t phase) {
  std::vector<Taps> taps(n * ratio);
  for (std::size_t y = 0; y < n * ratio; ++y) {
    const double t = (static_cast<double>(y) - static_cast<double>(phase)) / static_cast<double>(ratio);
    const double base = std::floor(t);
    const double f = t - base;
    Taps& tp = taps[y];
    tp.first = static_cast<std::ptrdiff_t>(base) - 1;
    tp.w[0] = keys_cubic(f + 1.0);
    tp.w[1] = keys_cubic(f);
    tp.w[2] = keys_cubic(1.0 - f);
    tp.w[3] = keys_cubic(2.0 - f);
  }
  return taps;
}

}  // namespace detail

/// Separable bicubic interpolation to ratio x the grid with periodic borders.
/// Low-res sample (i, j) lands exactly on high-res pixel
/// (ratio*i + phase, ratio*j + phase), matching degrade's sampling.
inline HyperCube upsample(const HyperCube& src, std::size_t ratio, std::size_t phase = 0) {
  if (ratio < 2) fail_validation("upsampling ratio must be >= 2");
  if (phase >= ratio) fail_validation("sampling phase must be < ratio");
  const std::size_t rows = src.rows(), cols = src.cols();
  const std::size_t out_rows = rows * ratio, out_cols = cols * ratio;
  const auto row_taps = detail::cubic_taps(rows, ratio, phase);
  const auto col_taps = detail::cubic_taps(cols, ratio, phase);
  auto wrap = [](std::ptrdiff_t i, std::size_t n) {
    const auto m = static_cast<std::ptrdiff_t>(n);
    const std::ptrdiff_t r = i % m;
    return static_cast<std::size_t>(r < 0 ? r + m : r);
  };
  HyperCube out = src.blank_like(out_rows, out_cols, src.gsd_m() / static_cast<double>(ratio));
  std::vector<double> horiz(rows * out_cols);
  for (std::size_t b = 0; b < src.bands(); ++b) {
    const auto in = src.band(b);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t x = 0; x < out_cols; ++x) {
        const auto& tp = col_taps[x];
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += tp.w[k] * in[r * cols + wrap(tp.first + k, cols)];
        horiz[r * out_cols + x] = s;
      }
    auto dst = out.band(b);
    for (std::size_t y = 0; y < out_rows; ++y) {
      const auto& tp = row_taps[y];
      for (std::size_t x = 0; x < out_cols; ++x) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += tp.w[k] * horiz[wrap(tp.first + k, rows) * out_cols + x];
        dst[y * out_cols + x] = static_cast<float>(s);
      }
    }
  }
  return out;
}

inline PanImage upsample(const PanImage& src, std::size_t ratio, std::size_t phase = 0) {
  return as_pan(upsample(as_cube(src), ratio, phase));
}

// ---------------------------------------------------------------------------
// MTF-matched Gaussian

namespace detail {

inline std::vector<double> gaussian_taps(double sigma, std::size_t size) {
  std::vector<double> g(size);
  const double c = static_cast<double>(size / 2);
  double s = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double x = static_cast<double>(i) - c;
    g[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    s += g[i];
  }
  for (double& v : g) v /= s;
  return g;
}

/// Real part of the 1-D DTFT of centered, normalized taps at `freq` cycles/pixel.
inline double taps_response(const std::vector<double>& g, double freq) {
  const double c = static_cast<double>(g.size() / 2);
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    s += g[i] * std::cos(2.0 * std::numbers::pi * freq * (static_cast<double>(i) - c));
  return s;
}

}  // namespace detail

/// Isotropic sampled Gaussian whose frequency response equals `gain_nyquist`
/// at 1/(2*ratio) cycles/pixel, the Nyquist frequency of the decimated grid.
/// Sigma starts from the continuous relation ratio*sqrt(-2 ln g)/pi and is
/// refined by bisection so the discrete kernel meets the gain exactly.
inline Kernel mtf_kernel(double gain_nyquist, std::size_t ratio, std::size_t size) {
  if (!(gain_nyquist > 0.0 && gain_nyquist < 1.0)) fail_validation("MTF gain must lie in (0, 1)");
  if (ratio < 1) fail_validation("ratio must be positive");
  if (size % 2 == 0) fail_validation("MTF kernel size must be odd");
  if (size < 2 * ratio + 1)
    fail_validation("MTF kernel size " + std::to_string(size) + " is below 2*ratio+1");
  const double freq = 1.0 / (2.0 * static_cast<double>(ratio));
  auto response = [&](double sigma) {
    return detail::taps_response(detail::gaussian_taps(sigma, size), freq);
  };
  double lo = std::log(1e-3), hi = std::log(static_cast<double>(size));
  if (response(std::exp(hi)) > gain_nyquist)
    fail_validation("MTF gain is unattainable with kernel size " + std::to_string(size));
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (response(std::exp(mid)) > gain_nyquist) lo = mid;
    else hi = mid;
  }
  const auto g = detail::gaussian_taps(std::exp(0.5 * (lo + hi)), size);
  Kernel k{size, std::vector<double>(size * size)};
  for (std::size_t u = 0; u < size; ++u)
    for (std::size_t v = 0; v < size; ++v) k.weights[u * size + v] = g[u] * g[v];
  return k;
}

/// Kernel side used for MTF filters at a given ratio.
inline std::size_t default_mtf_size(std::size_t ratio) { return 6 * ratio + 1; }

}  // namespace hsharp
