#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hsharp/error.hpp"

namespace hsharp {

/// Band-major hyperspectral cube (bands x rows x cols, 32-bit reals).
/// An empty wavelength list means the source carried no spectral metadata.
class HyperCube {
 public:
  HyperCube() = default;

  HyperCube(std::size_t bands, std::size_t rows, std::size_t cols, std::vector<float> data,
            std::vector<double> wavelengths_nm = {}, double gsd_m = 1.0,
            std::vector<std::string> band_names = {})
      : bands_(bands),
        rows_(rows),
        cols_(cols),
        data_(std::move(data)),
        wavelengths_(std::move(wavelengths_nm)),
        band_names_(std::move(band_names)),
        gsd_(gsd_m) {
    if (bands_ == 0 || rows_ == 0 || cols_ == 0)
      fail_validation("cube dimensions must be positive");
    if (data_.size() != bands_ * rows_ * cols_)
      fail_validation("cube payload size " + std::to_string(data_.size()) +
                      " does not match " + std::to_string(bands_) + "x" + std::to_string(rows_) +
                      "x" + std::to_string(cols_));
    if (!wavelengths_.empty()) {
      if (wavelengths_.size() != bands_) fail_validation("wavelength count must equal band count");
      for (std::size_t b = 1; b < bands_; ++b)
        if (!(wavelengths_[b] > wavelengths_[b - 1]))
          fail_validation("wavelengths must be strictly increasing");
    }
    if (!band_names_.empty() && band_names_.size() != bands_)
      fail_validation("band name count must equal band count");
    if (!(gsd_ > 0.0) || !std::isfinite(gsd_)) fail_validation("gsd_m must be positive");
  }

  static HyperCube zeros(std::size_t bands, std::size_t rows, std::size_t cols,
                         std::vector<double> wavelengths_nm = {}, double gsd_m = 1.0) {
    return HyperCube(bands, rows, cols, std::vector<float>(bands * rows * cols, 0.0f),
                     std::move(wavelengths_nm), gsd_m);
  }

  std::size_t bands() const noexcept { return bands_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t pixels() const noexcept { return rows_ * cols_; }
  double gsd_m() const noexcept { return gsd_; }
  bool has_wavelengths() const noexcept { return !wavelengths_.empty(); }
  const std::vector<double>& wavelengths_nm() const noexcept { return wavelengths_; }
  const std::vector<std::string>& band_names() const noexcept { return band_names_; }

  float& at(std::size_t b, std::size_t r, std::size_t c) { return data_[(b * rows_ + r) * cols_ + c]; }
  float at(std::size_t b, std::size_t r, std::size_t c) const {
    return data_[(b * rows_ + r) * cols_ + c];
  }

  std::span<float> band(std::size_t b) { return {data_.data() + b * pixels(), pixels()}; }
  std::span<const float> band(std::size_t b) const { return {data_.data() + b * pixels(), pixels()}; }

  std::vector<float>& data() noexcept { return data_; }
  const std::vector<float>& data() const noexcept { return data_; }

  void set_gsd_m(double gsd) {
    if (!(gsd > 0.0)) fail_validation("gsd_m must be positive");
    gsd_ = gsd;
  }

  /// Same metadata, different spatial grid.
  HyperCube blank_like(std::size_t rows, std::size_t cols, double gsd_m) const {
    HyperCube out(bands_, rows, cols, std::vector<float>(bands_ * rows * cols, 0.0f), wavelengths_,
                  gsd_m, band_names_);
    return out;
  }

  void require_finite() const {
    for (std::size_t i = 0; i < data_.size(); ++i)
      if (!std::isfinite(data_[i]))
        fail_validation("cube sample " + std::to_string(i) + " is not finite");
  }

  bool operator==(const HyperCube&) const = default;

 private:
  std::size_t bands_ = 0, rows_ = 0, cols_ = 0;
  std::vector<float> data_;
  std::vector<double> wavelengths_;
  std::vector<std::string> band_names_;
  double gsd_ = 1.0;
};

/// Single-band high resolution raster.
class PanImage {
 public:
  PanImage() = default;

  PanImage(std::size_t rows, std::size_t cols, std::vector<float> data, double gsd_m = 1.0)
      : rows_(rows), cols_(cols), data_(std::move(data)), gsd_(gsd_m) {
    if (rows_ == 0 || cols_ == 0) fail_validation("pan dimensions must be positive");
    if (data_.size() != rows_ * cols_) fail_validation("pan payload size does not match dims");
    if (!(gsd_ > 0.0) || !std::isfinite(gsd_)) fail_validation("gsd_m must be positive");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t pixels() const noexcept { return rows_ * cols_; }
  double gsd_m() const noexcept { return gsd_; }

  float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::vector<float>& data() noexcept { return data_; }
  const std::vector<float>& data() const noexcept { return data_; }

  void require_finite() const {
    for (std::size_t i = 0; i < data_.size(); ++i)
      if (!std::isfinite(data_[i]))
        fail_validation("pan sample " + std::to_string(i) + " is not finite");
  }

  bool operator==(const PanImage&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<float> data_;
  double gsd_ = 1.0;
};

inline HyperCube as_cube(const PanImage& pan) {
  return HyperCube(1, pan.rows(), pan.cols(), pan.data(), {}, pan.gsd_m());
}

inline PanImage as_pan(const HyperCube& cube) {
  if (cube.bands() != 1) fail_validation("expected a single-band raster");
  return PanImage(cube.rows(), cube.cols(), cube.data(), cube.gsd_m());
}

// ---------------------------------------------------------------------------
// Tiling

enum class PadMode { zero, reflect };

inline const char* to_string(PadMode mode) { return mode == PadMode::zero ? "zero" : "reflect"; }

inline PadMode parse_pad_mode(const std::string& s) {
  if (s == "zero") return PadMode::zero;
  if (s == "reflect") return PadMode::reflect;
  fail_validation("unknown pad mode '" + s + "' (expected zero or reflect)");
}

struct Tile {
  std::size_t row_origin = 0;
  std::size_t col_origin = 0;
  std::size_t valid_rows = 0;
  std::size_t valid_cols = 0;
  bool operator==(const Tile&) const = default;
};

struct TileGrid {
  std::size_t tile_size = 0;
  std::size_t source_rows = 0;
  std::size_t source_cols = 0;
  std::size_t ratio = 1;
  std::size_t tiles_down = 0;
  std::size_t tiles_across = 0;
  PadMode pad_mode = PadMode::reflect;
  std::vector<Tile> tiles;

  std::size_t size() const noexcept { return tiles.size(); }

  /// The same partition expressed on the grid `ratio` times coarser.
  TileGrid downscaled() const {
    if (source_rows % ratio != 0 || source_cols % ratio != 0)
      fail_validation("raster dims are not divisible by the decimation ratio");
    TileGrid g = *this;
    g.tile_size = tile_size / ratio;
    g.source_rows = source_rows / ratio;
    g.source_cols = source_cols / ratio;
    g.ratio = 1;
    for (auto& t : g.tiles) {
      t.row_origin /= ratio;
      t.col_origin /= ratio;
      t.valid_rows /= ratio;
      t.valid_cols /= ratio;
    }
    return g;
  }
};

inline TileGrid plan_tiles(std::size_t rows, std::size_t cols, std::size_t tile_size,
                           std::size_t ratio, PadMode pad_mode = PadMode::reflect) {
  if (rows == 0 || cols == 0) fail_validation("raster dims must be positive");
  if (tile_size == 0 || ratio == 0) fail_validation("tile size and ratio must be positive");
  if (tile_size % ratio != 0)
    fail_validation("tile size " + std::to_string(tile_size) +
                    " is not aligned to decimation ratio " + std::to_string(ratio));
  TileGrid g;
  g.tile_size = tile_size;
  g.source_rows = rows;
  g.source_cols = cols;
  g.ratio = ratio;
  g.pad_mode = pad_mode;
  g.tiles_down = (rows + tile_size - 1) / tile_size;
  g.tiles_across = (cols + tile_size - 1) / tile_size;
  g.tiles.reserve(g.tiles_down * g.tiles_across);
  for (std::size_t i = 0; i < g.tiles_down; ++i)
    for (std::size_t j = 0; j < g.tiles_across; ++j) {
      Tile t;
      t.row_origin = i * tile_size;
      t.col_origin = j * tile_size;
      t.valid_rows = std::min(tile_size, rows - t.row_origin);
      t.valid_cols = std::min(tile_size, cols - t.col_origin);
      g.tiles.push_back(t);
    }
  return g;
}

namespace detail {

/// Whole-sample symmetric index folding, valid for any offset.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * n - 2);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

}  // namespace detail

inline HyperCube extract_tile(const HyperCube& cube, const TileGrid& grid, std::size_t index) {
  if (index >= grid.tiles.size())
    fail_validation("tile index " + std::to_string(index) + " out of range (" +
                    std::to_string(grid.tiles.size()) + " tiles)");
  if (cube.rows() != grid.source_rows || cube.cols() != grid.source_cols)
    fail_validation("cube dims do not match the tile grid");
  const Tile& t = grid.tiles[index];
  const std::size_t n = grid.tile_size;
  HyperCube out = cube.blank_like(n, n, cube.gsd_m());
  for (std::size_t b = 0; b < cube.bands(); ++b)
    for (std::size_t r = 0; r < n; ++r) {
      const bool row_valid = r < t.valid_rows;
      if (!row_valid && grid.pad_mode == PadMode::zero) continue;
      const std::size_t sr = row_valid ? t.row_origin + r
                                       : detail::reflect_index(
                                             static_cast<std::ptrdiff_t>(t.row_origin + r),
                                             grid.source_rows);
      for (std::size_t c = 0; c < n; ++c) {
        const bool col_valid = c < t.valid_cols;
        if (!col_valid && grid.pad_mode == PadMode::zero) continue;
        const std::size_t sc = col_valid ? t.col_origin + c
                                         : detail::reflect_index(
                                               static_cast<std::ptrdiff_t>(t.col_origin + c),
                                               grid.source_cols);
        out.at(b, r, c) = cube.at(b, sr, sc);
      }
    }
  return out;
}

inline PanImage extract_tile(const PanImage& pan, const TileGrid& grid, std::size_t index) {
  return as_pan(extract_tile(as_cube(pan), grid, index));
}

inline HyperCube merge_tiles(std::span<const HyperCube> tiles, const TileGrid& grid) {
  if (tiles.size() != grid.tiles.size())
    fail_validation("expected " + std::to_string(grid.tiles.size()) + " tiles, got " +
                    std::to_string(tiles.size()));
  if (tiles.empty()) fail_validation("no tiles to merge");
  const HyperCube& first = tiles.front();
  HyperCube out = first.blank_like(grid.source_rows, grid.source_cols, first.gsd_m());
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const HyperCube& tile = tiles[i];
    if (tile.rows() != grid.tile_size || tile.cols() != grid.tile_size ||
        tile.bands() != first.bands())
      fail_validation("tile " + std::to_string(i) + " has shape " + std::to_string(tile.bands()) +
                      "x" + std::to_string(tile.rows()) + "x" + std::to_string(tile.cols()) +
                      ", expected " + std::to_string(first.bands()) + "x" +
                      std::to_string(grid.tile_size) + "x" + std::to_string(grid.tile_size));
    const Tile& t = grid.tiles[i];
    for (std::size_t b = 0; b < out.bands(); ++b)
      for (std::size_t r = 0; r < t.valid_rows; ++r) {
        const float* src = tile.band(b).data() + r * tile.cols();
        std::copy(src, src + t.valid_cols, &out.at(b, t.row_origin + r, t.col_origin));
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Composites

/// Percentile with linear interpolation between order statistics.
inline double percentile(std::vector<double> values, double pct) {
  if (values.empty()) fail_validation("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

struct CompositeProvenance {
  std::array<std::size_t, 3> source_indices{0, 1, 2};
  double stretch_lo_pct = 2.0;
  double stretch_hi_pct = 98.0;
  std::array<double, 3> lo_value{};
  std::array<double, 3> hi_value{};
  std::array<bool, 3> degenerate{};
};

struct RgbComposite {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> data;  // 3 x rows x cols
  CompositeProvenance provenance;

  std::uint8_t at(std::size_t ch, std::size_t r, std::size_t c) const {
    return data[(ch * rows + r) * cols + c];
  }
};

/// Stretches three channel planes (3 x rows x cols, channel-major) independently
/// from their [lo, hi] percentile values onto [0, 255].
inline RgbComposite render_composite(std::span<const double> channels, std::size_t rows,
                                     std::size_t cols, double stretch_lo = 2.0,
                                     double stretch_hi = 98.0,
                                     std::array<std::size_t, 3> source_indices = {0, 1, 2}) {
  if (!(stretch_lo < stretch_hi) || stretch_lo < 0.0 || stretch_hi > 100.0)
    fail_validation("stretch percentiles must satisfy 0 <= lo < hi <= 100");
  const std::size_t n = rows * cols;
  if (n == 0 || channels.size() != 3 * n) fail_validation("composite expects 3 x rows x cols values");
  RgbComposite out;
  out.rows = rows;
  out.cols = cols;
  out.data.assign(3 * n, 0);
  out.provenance.source_indices = source_indices;
  out.provenance.stretch_lo_pct = stretch_lo;
  out.provenance.stretch_hi_pct = stretch_hi;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const auto plane = channels.subspan(ch * n, n);
    std::vector<double> values(plane.begin(), plane.end());
    const double lo = percentile(values, stretch_lo);
    const double hi = percentile(std::move(values), stretch_hi);
    out.provenance.lo_value[ch] = lo;
    out.provenance.hi_value[ch] = hi;
    if (!(hi > lo)) {
      out.provenance.degenerate[ch] = true;
      continue;
    }
    const double scale = 255.0 / (hi - lo);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = std::clamp((plane[i] - lo) * scale, 0.0, 255.0);
      out.data[ch * n + i] = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return out;
}

}  // namespace hsharp
