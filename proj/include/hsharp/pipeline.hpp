#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "hsharp/error.hpp"
#include "hsharp/metrics.hpp"
#include "hsharp/pca.hpp"
#include "hsharp/preprocess.hpp"
#include "hsharp/protocols.hpp"
#include "hsharp/raster.hpp"
#include "hsharp/raster_io.hpp"
#include "hsharp/sensor_estimation.hpp"

namespace hsharp {

using json = nlohmann::json;

/// Metric formatting shared by report files and the CLI: 5 significant digits.
inline std::string format_metric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%#.5g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Configuration

enum class SensorSource { mtf, estimate };

struct SensorSpec {
  SensorSource source = SensorSource::mtf;
  std::vector<double> response;          // per input band; empty means uniform
  std::optional<Kernel> psf;             // empty means a Gaussian matching the MTF gain
  std::vector<double> mtf_gain_nyquist;  // per input band; empty means mtf_gain_hs everywhere
  double mtf_gain_hs = 0.3;
  SensorEstimateOptions estimate;
  std::size_t estimate_crop = 64;  // low-resolution pixels per side of the central crop
};

struct BandScreenConfig {
  bool enabled = true;
  std::vector<WavelengthInterval> intervals = default_atmospheric_intervals();
  double snr_threshold = 10.0;
};

struct PcaConfig {
  bool enabled = false;
  WavelengthInterval band_range{400.0, 1010.0};
  std::array<std::size_t, 3> components{0, 1, 2};
  double stretch_lo = 2.0;
  double stretch_hi = 98.0;
};

struct RunConfig {
  std::filesystem::path hs_path;
  std::filesystem::path pan_path;
  std::filesystem::path output_dir = "out";
  std::string hs_label, pan_label;  // paths as written in the config, for reports
  std::vector<Method> methods{Method::gsa, Method::mtfglp, Method::hysure};
  MethodParams params;
  std::optional<std::size_t> ratio;
  SensorSpec sensor;
  BandScreenConfig band_screen;
  std::size_t tile_size = 360;
  PadMode pad_mode = PadMode::reflect;
  bool wald = true;
  bool full_resolution = true;
  std::size_t window = 32;
  PcaConfig pca;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 selects the available parallelism
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) fail_validation(where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key)) fail_validation("unknown key '" + key + "' in " + where);
}

template <class T>
T get_as(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    fail_validation("bad value for '" + what + "'");
  }
}

inline std::size_t get_count(const json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail_validation("'" + what + "' must be a non-negative integer");
  return j.get<std::size_t>();
}

inline WavelengthInterval parse_interval(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) fail_validation("'" + what + "' must be [lo, hi]");
  WavelengthInterval iv;
  iv.lo_nm = get_as<double>(j[0], what);
  iv.hi_nm = j[1].is_null() ? std::numeric_limits<double>::infinity() : get_as<double>(j[1], what);
  if (!(iv.lo_nm <= iv.hi_nm)) fail_validation("'" + what + "' has lo > hi");
  return iv;
}

inline Kernel parse_kernel(const json& j) {
  if (!j.is_array() || j.empty()) fail_validation("sensor.psf must be a square array of rows");
  Kernel k;
  k.side = j.size();
  k.weights.clear();
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != k.side) fail_validation("sensor.psf must be square");
    for (const auto& v : row) k.weights.push_back(get_as<double>(v, "sensor.psf"));
  }
  return k;
}

inline std::filesystem::path resolve_path(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace detail

inline SensorSpec parse_sensor(const json& j) {
  SensorSpec s;
  if (j.is_string()) {
    const auto v = j.get<std::string>();
    if (v == "estimate") s.source = SensorSource::estimate;
    else if (v == "mtf") s.source = SensorSource::mtf;
    else fail_validation("sensor must be \"mtf\", \"estimate\" or an object");
    return s;
  }
  detail::reject_unknown_keys(j, {"source", "response", "psf", "mtf_gain_nyquist", "mtf_gain_hs", "estimate"},
                              "sensor");
  if (j.contains("source")) s = parse_sensor(j["source"]);
  if (j.contains("response")) {
    if (j["response"].is_string()) {
      if (j["response"] != "uniform") fail_validation("sensor.response must be \"uniform\" or a list");
    } else {
      s.response = detail::get_as<std::vector<double>>(j["response"], "sensor.response");
    }
  }
  if (j.contains("psf")) s.psf = detail::parse_kernel(j["psf"]);
  if (j.contains("mtf_gain_nyquist"))
    s.mtf_gain_nyquist = detail::get_as<std::vector<double>>(j["mtf_gain_nyquist"], "sensor.mtf_gain_nyquist");
  if (j.contains("mtf_gain_hs")) s.mtf_gain_hs = detail::get_as<double>(j["mtf_gain_hs"], "sensor.mtf_gain_hs");
  if (!(s.mtf_gain_hs > 0.0 && s.mtf_gain_hs < 1.0)) fail_validation("sensor.mtf_gain_hs must lie in (0, 1)");
  if (j.contains("estimate")) {
    const json& e = j["estimate"];
    detail::reject_unknown_keys(e, {"psf_size", "smooth_r", "smooth_b", "crop"}, "sensor.estimate");
    if (e.contains("psf_size")) s.estimate.psf_size = detail::get_count(e["psf_size"], "sensor.estimate.psf_size");
    if (e.contains("smooth_r")) s.estimate.smooth_r = detail::get_as<double>(e["smooth_r"], "sensor.estimate.smooth_r");
    if (e.contains("smooth_b")) s.estimate.smooth_b = detail::get_as<double>(e["smooth_b"], "sensor.estimate.smooth_b");
    if (e.contains("crop")) s.estimate_crop = detail::get_count(e["crop"], "sensor.estimate.crop");
    if (s.estimate.smooth_r < 0.0 || s.estimate.smooth_b < 0.0)
      fail_validation("sensor estimation weights must be non-negative");
    if (s.estimate_crop == 0) fail_validation("sensor.estimate.crop must be positive");
  }
  s.estimate.mtf_gain_hs = s.mtf_gain_hs;
  return s;
}

inline json sensor_to_json(const SensorModel& m) {
  json psf = json::array();
  for (std::size_t u = 0; u < m.psf.side; ++u) {
    json row = json::array();
    for (std::size_t v = 0; v < m.psf.side; ++v) row.push_back(m.psf.at(u, v));
    psf.push_back(row);
  }
  return {{"response", m.response}, {"psf", psf}, {"mtf_gain_nyquist", m.mtf_gain_nyquist}};
}

/// Parses and validates a run configuration. Relative paths resolve against
/// `base_dir`. No file is touched.
inline RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir = {}) {
  detail::reject_unknown_keys(j,
                              {"hs", "pan", "output_dir", "methods", "mtfglp", "hysure", "ratio", "sensor",
                               "band_screen", "tile_size", "pad_mode", "protocols", "window", "pca", "seed",
                               "threads"},
                              "run config");
  RunConfig c;
  if (j.contains("hs")) {
    c.hs_label = detail::get_as<std::string>(j["hs"], "hs");
    c.hs_path = detail::resolve_path(c.hs_label, base_dir);
  }
  if (j.contains("pan")) {
    c.pan_label = detail::get_as<std::string>(j["pan"], "pan");
    c.pan_path = detail::resolve_path(c.pan_label, base_dir);
  }
  if (j.contains("output_dir"))
    c.output_dir = detail::resolve_path(detail::get_as<std::string>(j["output_dir"], "output_dir"), base_dir);
  else
    c.output_dir = detail::resolve_path("out", base_dir);

  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : detail::get_as<std::vector<std::string>>(j["methods"], "methods")) {
      const Method id = parse_method(m);
      if (std::find(c.methods.begin(), c.methods.end(), id) != c.methods.end())
        fail_validation("method '" + m + "' listed twice");
      c.methods.push_back(id);
    }
    if (c.methods.empty()) fail_validation("methods must not be empty");
  }
  if (j.contains("mtfglp")) {
    detail::reject_unknown_keys(j["mtfglp"], {"gain_mode"}, "mtfglp");
    if (j["mtfglp"].contains("gain_mode"))
      c.params.gain_mode = parse_gain_mode(detail::get_as<std::string>(j["mtfglp"]["gain_mode"], "mtfglp.gain_mode"));
  }
  if (j.contains("hysure")) {
    const json& h = j["hysure"];
    detail::reject_unknown_keys(h, {"lambda_m", "lambda_phi", "mu", "max_iter", "rel_tol", "subspace_dim"}, "hysure");
    auto& p = c.params.hysure;
    if (h.contains("lambda_m")) p.lambda_m = detail::get_as<double>(h["lambda_m"], "hysure.lambda_m");
    if (h.contains("lambda_phi")) p.lambda_phi = detail::get_as<double>(h["lambda_phi"], "hysure.lambda_phi");
    if (h.contains("mu")) p.mu = detail::get_as<double>(h["mu"], "hysure.mu");
    if (h.contains("max_iter")) p.max_iter = detail::get_count(h["max_iter"], "hysure.max_iter");
    if (h.contains("rel_tol")) p.rel_tol = detail::get_as<double>(h["rel_tol"], "hysure.rel_tol");
    if (h.contains("subspace_dim")) p.subspace_dim = detail::get_count(h["subspace_dim"], "hysure.subspace_dim");
    p.validate();
  }
  if (j.contains("ratio") && !j["ratio"].is_null()) {
    c.ratio = detail::get_count(j["ratio"], "ratio");
    if (*c.ratio < 2) fail_validation("ratio must be >= 2");
  }
  if (j.contains("sensor")) c.sensor = parse_sensor(j["sensor"]);
  if (j.contains("band_screen")) {
    const json& b = j["band_screen"];
    if (b.is_null() || b == false) {
      c.band_screen.enabled = false;
    } else {
      detail::reject_unknown_keys(b, {"enabled", "intervals", "snr_threshold"}, "band_screen");
      if (b.contains("enabled")) c.band_screen.enabled = detail::get_as<bool>(b["enabled"], "band_screen.enabled");
      if (b.contains("intervals")) {
        if (!b["intervals"].is_array()) fail_validation("band_screen.intervals must be a list");
        c.band_screen.intervals.clear();
        for (const auto& iv : b["intervals"])
          c.band_screen.intervals.push_back(detail::parse_interval(iv, "band_screen.intervals"));
      }
      if (b.contains("snr_threshold"))
        c.band_screen.snr_threshold = detail::get_as<double>(b["snr_threshold"], "band_screen.snr_threshold");
      if (c.band_screen.snr_threshold < 0.0) fail_validation("band_screen.snr_threshold must be non-negative");
    }
  }
  if (j.contains("tile_size")) {
    c.tile_size = detail::get_count(j["tile_size"], "tile_size");
    if (c.tile_size == 0) fail_validation("tile_size must be positive");
  }
  if (j.contains("pad_mode")) c.pad_mode = parse_pad_mode(detail::get_as<std::string>(j["pad_mode"], "pad_mode"));
  if (j.contains("protocols")) {
    c.wald = c.full_resolution = false;
    for (const auto& p : detail::get_as<std::vector<std::string>>(j["protocols"], "protocols")) {
      if (p == "wald") c.wald = true;
      else if (p == "full_resolution") c.full_resolution = true;
      else fail_validation("unknown protocol '" + p + "'; valid protocols: wald, full_resolution");
    }
  }
  if (j.contains("window")) {
    c.window = detail::get_count(j["window"], "window");
    if (c.window < 2) fail_validation("window must be >= 2");
  }
  if (j.contains("pca")) {
    const json& p = j["pca"];
    detail::reject_unknown_keys(p, {"enabled", "band_range", "components", "stretch"}, "pca");
    c.pca.enabled = p.value("enabled", true);
    if (p.contains("band_range")) c.pca.band_range = detail::parse_interval(p["band_range"], "pca.band_range");
    if (p.contains("components")) {
      const auto v = detail::get_as<std::vector<std::size_t>>(p["components"], "pca.components");
      if (v.size() != 3) fail_validation("pca.components must list 3 indices");
      c.pca.components = {v[0], v[1], v[2]};
      if (std::set<std::size_t>(v.begin(), v.end()).size() != 3) fail_validation("pca.components must be distinct");
    }
    if (p.contains("stretch")) {
      const auto v = detail::get_as<std::vector<double>>(p["stretch"], "pca.stretch");
      if (v.size() != 2 || !(0.0 <= v[0] && v[0] < v[1] && v[1] <= 100.0))
        fail_validation("pca.stretch must be [lo, hi] percentiles with 0 <= lo < hi <= 100");
      c.pca.stretch_lo = v[0];
      c.pca.stretch_hi = v[1];
    }
  }
  if (j.contains("seed")) c.seed = detail::get_as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("threads")) c.threads = detail::get_count(j["threads"], "threads");
  c.params.seed = c.seed;
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_io("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail_validation("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_json_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Sensor resolution

/// Builds the sensor model for a (screened) cube. Per-band fields given in the
/// config refer to the unscreened bands and are reduced by `keep`.
inline SensorModel resolve_sensor(const SensorSpec& spec, const HyperCube& hs, const PanImage& pan,
                                  std::size_t ratio, const std::vector<bool>& keep) {
  if (spec.source == SensorSource::estimate) {
    const std::size_t crop_rows = std::min(hs.rows(), spec.estimate_crop);
    const std::size_t crop_cols = std::min(hs.cols(), spec.estimate_crop);
    const std::size_t r0 = (hs.rows() - crop_rows) / 2, c0 = (hs.cols() - crop_cols) / 2;
    std::vector<float> hs_crop(hs.bands() * crop_rows * crop_cols);
    for (std::size_t b = 0; b < hs.bands(); ++b)
      for (std::size_t r = 0; r < crop_rows; ++r)
        for (std::size_t c = 0; c < crop_cols; ++c)
          hs_crop[(b * crop_rows + r) * crop_cols + c] = hs.at(b, r0 + r, c0 + c);
    std::vector<float> pan_crop(crop_rows * ratio * crop_cols * ratio);
    for (std::size_t r = 0; r < crop_rows * ratio; ++r)
      for (std::size_t c = 0; c < crop_cols * ratio; ++c)
        pan_crop[r * crop_cols * ratio + c] = pan.at(r0 * ratio + r, c0 * ratio + c);
    const HyperCube hs_c(hs.bands(), crop_rows, crop_cols, std::move(hs_crop));
    const PanImage pan_c(crop_rows * ratio, crop_cols * ratio, std::move(pan_crop));
    return estimate_sensor(hs_c, pan_c, ratio, spec.estimate);
  }

  const std::size_t full = keep.size();
  SensorModel m;
  m.ratio = ratio;
  m.psf = spec.psf ? *spec.psf : mtf_kernel(spec.mtf_gain_hs, ratio, default_mtf_size(ratio));
  if (spec.response.empty()) {
    m.response.assign(full, 1.0 / static_cast<double>(full));
  } else {
    if (spec.response.size() != full)
      fail_validation("sensor.response has " + std::to_string(spec.response.size()) + " entries for " +
                      std::to_string(full) + " bands");
    m.response = spec.response;
    double s = 0.0;
    for (double w : m.response) {
      if (!(w >= 0.0)) fail_validation("sensor.response must be non-negative");
      s += w;
    }
    if (!(s > 0.0)) fail_validation("sensor.response must not be all zero");
    for (double& w : m.response) w /= s;
  }
  if (spec.mtf_gain_nyquist.empty()) {
    m.mtf_gain_nyquist.assign(full, spec.mtf_gain_hs);
  } else {
    if (spec.mtf_gain_nyquist.size() != full) fail_validation("sensor.mtf_gain_nyquist length mismatch");
    m.mtf_gain_nyquist = spec.mtf_gain_nyquist;
  }
  m = m.select_bands(keep);
  m.validate(hs.bands());
  return m;
}

inline std::size_t resolve_ratio(const HyperCube& hs, const PanImage& pan, std::optional<std::size_t> ratio) {
  if (hs.rows() == 0 || pan.rows() % hs.rows() != 0)
    fail_validation("pan rows are not an integer multiple of hs rows");
  const std::size_t r = ratio.value_or(pan.rows() / hs.rows());
  if (r < 2) fail_validation("ratio must be >= 2");
  if (pan.rows() != hs.rows() * r || pan.cols() != hs.cols() * r)
    fail_validation("pan dims " + std::to_string(pan.rows()) + "x" + std::to_string(pan.cols()) +
                    " do not equal hs dims " + std::to_string(hs.rows()) + "x" + std::to_string(hs.cols()) +
                    " times ratio " + std::to_string(r));
  return r;
}

// ---------------------------------------------------------------------------
// Tiled execution

inline std::size_t worker_count(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) on at most `threads` workers. If any call
/// throws, the exception of the lowest failing index is rethrown.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(worker_count(threads), count);
  if (n <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct TiledFusion {
  HyperCube fused;
  TileGrid grid;
  std::vector<std::optional<SolveTrace>> traces;  // per tile, HySure only
  std::vector<bool> pca_fallback;
};

/// A raster smaller than the configured tile runs as a single tile just big
/// enough to hold it.
inline std::size_t effective_tile_size(std::size_t tile_size, std::size_t rows, std::size_t cols,
                                       std::size_t ratio) {
  const std::size_t need = (std::max(rows, cols) + ratio - 1) / ratio * ratio;
  return std::min(tile_size, need);
}

inline TiledFusion fuse_tiled(const HyperCube& hs, const PanImage& pan, const SensorModel& model, Method method,
                              const MethodParams& params, std::size_t tile_size, PadMode pad,
                              std::size_t threads) {
  const std::size_t r = model.ratio;
  if (pan.rows() != hs.rows() * r || pan.cols() != hs.cols() * r)
    fail_validation("pan dims must equal hs dims x ratio");
  TiledFusion out;
  out.grid = plan_tiles(pan.rows(), pan.cols(), effective_tile_size(tile_size, pan.rows(), pan.cols(), r), r, pad);
  const TileGrid low = out.grid.downscaled();
  const std::size_t count = out.grid.size();
  std::vector<HyperCube> tiles(count);
  out.traces.resize(count);
  std::vector<char> fallback(count, 0);
  const std::string stage = std::string("sharpen:") + to_string(method);

  parallel_for(count, threads, [&](std::size_t i) {
    try {
      MethodParams p = params;
      p.seed = params.seed + i;
      FusionOutput f = run_method(method, extract_tile(hs, low, i), extract_tile(pan, out.grid, i), model, p);
      tiles[i] = std::move(f.fused);
      out.traces[i] = std::move(f.trace);
      fallback[i] = f.pca_fallback;
    } catch (const Error& e) {
      throw e.with_context(stage, i);
    }
  });

  try {
    out.fused = merge_tiles(tiles, out.grid);
  } catch (const Error& e) {
    throw e.with_context("merge");
  }
  out.fused.set_gsd_m(pan.gsd_m());
  out.pca_fallback.assign(fallback.begin(), fallback.end());
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end run

struct MethodOutcome {
  Method method;
  std::filesystem::path fused_path;
  std::optional<WaldRun> wald;
  std::optional<QualityReport> full;
  std::optional<CompositeProvenance> composite;
  std::vector<std::optional<SolveTrace>> traces;
  std::vector<bool> pca_fallback;
};

struct RunReport {
  RunConfig config;
  std::size_t ratio = 0;
  std::size_t bands_in = 0;
  BandMask mask;
  SensorModel model;
  TileGrid grid;
  std::vector<MethodOutcome> methods;
  std::string text;
  json structured;
};

namespace detail {

inline std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

inline std::string metric_or_dash(const std::optional<double>& v) { return v ? format_metric(*v) : "-"; }

inline std::string render_text_report(const RunReport& rep, const HyperCube& hs, const PanImage& pan) {
  const RunConfig& c = rep.config;
  std::ostringstream o;
  o << "hsharp run report\n\n";
  o << "[inputs]\n";
  o << "hs = " << c.hs_label << "\n";
  o << "pan = " << c.pan_label << "\n";
  o << "hs_shape = " << rep.bands_in << " x " << hs.rows() << " x " << hs.cols() << "\n";
  o << "pan_shape = " << pan.rows() << " x " << pan.cols() << "\n";
  o << "ratio = " << rep.ratio << "\n\n";

  std::size_t atmospheric = 0, low_snr = 0;
  for (BandReason r : rep.mask.reason) {
    atmospheric += r == BandReason::atmospheric;
    low_snr += r == BandReason::low_snr;
  }
  o << "[preprocess]\n";
  o << "band_screen = " << (c.band_screen.enabled ? "on" : "off") << "\n";
  o << "bands_kept = " << rep.mask.kept_count() << " of " << rep.bands_in << "\n";
  o << "dropped_atmospheric = " << atmospheric << "\n";
  o << "dropped_low_snr = " << low_snr << "\n";
  if (c.band_screen.enabled) o << "snr_threshold = " << format_metric(c.band_screen.snr_threshold) << "\n";
  o << "\n[sensor]\n";
  o << "source = " << (c.sensor.source == SensorSource::estimate ? "estimate" : "mtf") << "\n";
  o << "psf_side = " << rep.model.psf.side << "\n";
  o << "mtf_gain_hs = " << format_metric(c.sensor.mtf_gain_hs) << "\n\n";

  o << "[tiling]\n";
  o << "tile_size = " << rep.grid.tile_size << "\n";
  o << "pad_mode = " << (c.pad_mode == PadMode::reflect ? "reflect" : "zero") << "\n";
  o << "tiles = " << rep.grid.tiles_down << " x " << rep.grid.tiles_across << " = " << rep.grid.size() << "\n\n";

  o << "[methods]\n";
  o << "seed = " << c.seed << "\n";
  for (const auto& m : rep.methods) {
    if (m.method == Method::mtfglp) o << "mtfglp.gain_mode = " << to_string(c.params.gain_mode) << "\n";
    if (m.method == Method::hysure) {
      const auto& h = c.params.hysure;
      o << "hysure.subspace_dim = " << h.subspace_dim << "\n";
      o << "hysure.lambda_m = " << format_metric(h.lambda_m) << "\n";
      o << "hysure.lambda_phi = " << format_metric(h.lambda_phi) << "\n";
      o << "hysure.mu = " << format_metric(h.mu) << "\n";
      o << "hysure.max_iter = " << h.max_iter << "\n";
      o << "hysure.rel_tol = " << format_metric(h.rel_tol) << "\n";
    }
  }

  if (c.wald && !rep.methods.empty()) {
    o << "\n[wald]\nwindow = " << rep.methods.front().wald->report.window << "\n";
    o << pad_right("Method", 10) << pad_right("UIQI", 12) << pad_right("SAM", 12) << "ERGAS\n";
    for (const auto& m : rep.methods) {
      const auto& q = m.wald->report;
      o << pad_right(to_string(m.method), 10) << pad_right(metric_or_dash(q.uiqi), 12)
        << pad_right(metric_or_dash(q.sam_deg), 12) << metric_or_dash(q.ergas) << "\n";
    }
  }
  if (c.full_resolution && !rep.methods.empty()) {
    o << "\n[full_resolution]\nwindow = " << rep.methods.front().full->window << "\n";
    o << "d_lambda_variant = mean_uiqi\n";
    o << pad_right("Method", 10) << pad_right("D_lambda_k", 12) << pad_right("D_s_star", 12) << "Q_star\n";
    for (const auto& m : rep.methods) {
      const auto& q = *m.full;
      o << pad_right(to_string(m.method), 10) << pad_right(metric_or_dash(q.d_lambda_k), 12)
        << pad_right(metric_or_dash(q.d_s_star), 12) << metric_or_dash(q.q_star) << "\n";
    }
  }
  for (const auto& m : rep.methods) {
    if (m.method != Method::hysure) continue;
    o << "\n[hysure_traces]\n";
    o << pad_right("Tile", 6) << pad_right("Iters", 7) << pad_right("Conv", 6) << pad_right("Obj0", 13)
      << pad_right("ObjN", 13) << "Fallback\n";
    for (std::size_t i = 0; i < m.traces.size(); ++i) {
      const auto& t = *m.traces[i];
      o << pad_right(std::to_string(i), 6) << pad_right(std::to_string(t.iterations_run), 7)
        << pad_right(t.converged ? "yes" : "no", 6) << pad_right(format_metric(t.initial_objective), 13)
        << pad_right(format_metric(t.objective.empty() ? t.initial_objective : t.objective.back()), 13)
        << (m.pca_fallback[i] ? "pca" : "-") << "\n";
    }
  }
  for (const auto& m : rep.methods) {
    if (!m.composite) continue;
    const auto& p = *m.composite;
    o << "\n[composite." << to_string(m.method) << "]\n";
    o << "components = " << p.source_indices[0] << " " << p.source_indices[1] << " " << p.source_indices[2] << "\n";
    o << "stretch = " << format_metric(p.stretch_lo_pct) << " " << format_metric(p.stretch_hi_pct) << "\n";
    for (std::size_t ch = 0; ch < 3; ++ch)
      o << "channel" << ch << " = " << format_metric(p.lo_value[ch]) << " " << format_metric(p.hi_value[ch])
        << (p.degenerate[ch] ? " degenerate" : "") << "\n";
  }
  return o.str();
}

inline json report_to_json(const QualityReport& q) {
  json j = {{"context", to_string(q.context)}, {"method", q.method}, {"window", q.window}, {"ratio", q.ratio}};
  auto put = [&](const char* k, const std::optional<double>& v) { j[k] = v ? json(*v) : json(nullptr); };
  if (q.context == EvalContext::wald) {
    put("uiqi", q.uiqi);
    put("sam_deg", q.sam_deg);
    put("ergas", q.ergas);
  } else {
    put("d_lambda_k", q.d_lambda_k);
    put("d_s_star", q.d_s_star);
    put("q_star", q.q_star);
  }
  return j;
}

inline json trace_to_json(const SolveTrace& t) {
  json res = json::array();
  for (const auto& r : t.primal_residuals) res.push_back({r[0], r[1], r[2]});
  return {{"initial_objective", t.initial_objective},
          {"objective", t.objective},
          {"primal_residuals", res},
          {"iterations_run", t.iterations_run},
          {"converged", t.converged}};
}

inline json render_json_report(const RunReport& rep) {
  const RunConfig& c = rep.config;
  json j;
  j["inputs"] = {{"hs", c.hs_label}, {"pan", c.pan_label}, {"bands_in", rep.bands_in}, {"ratio", rep.ratio}};
  json reasons = json::array();
  for (BandReason r : rep.mask.reason) reasons.push_back(to_string(r));
  j["preprocess"] = {{"enabled", c.band_screen.enabled},
                     {"snr_threshold", c.band_screen.snr_threshold},
                     {"bands_kept", rep.mask.kept_count()},
                     {"band_reasons", reasons}};
  json ivs = json::array();
  for (const auto& iv : c.band_screen.intervals)
    ivs.push_back({iv.lo_nm, std::isinf(iv.hi_nm) ? json(nullptr) : json(iv.hi_nm)});
  j["preprocess"]["intervals"] = ivs;
  j["sensor"] = sensor_to_json(rep.model);
  j["sensor"]["source"] = c.sensor.source == SensorSource::estimate ? "estimate" : "mtf";
  j["tiling"] = {{"tile_size", rep.grid.tile_size},
                 {"tiles_down", rep.grid.tiles_down},
                 {"tiles_across", rep.grid.tiles_across},
                 {"pad_mode", c.pad_mode == PadMode::reflect ? "reflect" : "zero"}};
  const auto& h = c.params.hysure;
  j["params"] = {{"seed", c.seed},
                 {"window", c.window},
                 {"d_lambda_variant", "mean_uiqi"},
                 {"mtfglp", {{"gain_mode", to_string(c.params.gain_mode)}}},
                 {"hysure",
                  {{"lambda_m", h.lambda_m},
                   {"lambda_phi", h.lambda_phi},
                   {"mu", h.mu},
                   {"max_iter", h.max_iter},
                   {"rel_tol", h.rel_tol},
                   {"subspace_dim", h.subspace_dim}}}};
  j["methods"] = json::array();
  for (const auto& m : rep.methods) {
    json e = {{"method", to_string(m.method)}, {"fused", m.fused_path.filename().string()}};
    if (m.wald) {
      e["wald"] = report_to_json(m.wald->report);
      e["wald"]["degraded_inputs_checksum"] = m.wald->degraded_inputs_checksum;
    }
    if (m.full) e["full_resolution"] = report_to_json(*m.full);
    if (m.method == Method::hysure) {
      json traces = json::array();
      for (std::size_t i = 0; i < m.traces.size(); ++i) {
        json t = trace_to_json(*m.traces[i]);
        t["tile"] = i;
        t["pca_fallback"] = static_cast<bool>(m.pca_fallback[i]);
        traces.push_back(t);
      }
      e["tile_traces"] = traces;
    }
    if (m.composite) {
      const auto& p = *m.composite;
      e["composite"] = {{"file", std::string("composite_") + to_string(m.method) + ".png"},
                        {"components", p.source_indices},
                        {"stretch", {p.stretch_lo_pct, p.stretch_hi_pct}},
                        {"lo", p.lo_value},
                        {"hi", p.hi_value},
                        {"degenerate", p.degenerate}};
    }
    j["methods"].push_back(e);
  }
  return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_io("cannot write " + path.string());
  out << text;
  if (!out) fail_io("write failed for " + path.string());
}

}  // namespace detail

/// Reads a cube and screens its bands per the config.
inline std::pair<HyperCube, BandMask> preprocess_cube(const HyperCube& hs, const BandScreenConfig& cfg) {
  BandMask mask;
  if (cfg.enabled) {
    mask = screen_bands(hs, cfg.intervals, cfg.snr_threshold);
    return {apply_band_mask(hs, mask), mask};
  }
  mask.keep.assign(hs.bands(), true);
  mask.reason.assign(hs.bands(), BandReason::kept);
  return {hs, mask};
}

/// Full workflow: read, screen, resolve the sensor, fuse tile by tile, merge,
/// evaluate on the merged rasters, render composites and write all outputs.
inline RunReport run_pipeline(const RunConfig& config) {
  if (config.hs_path.empty() || config.pan_path.empty()) fail_validation("run config needs 'hs' and 'pan'");
  RunReport rep;
  rep.config = config;

  HyperCube raw;
  PanImage pan;
  try {
    raw = read_cube(config.hs_path);
    pan = read_pan(config.pan_path);
  } catch (const Error& e) {
    throw e.with_context("read");
  }
  rep.bands_in = raw.bands();

  HyperCube hs;
  try {
    rep.ratio = resolve_ratio(raw, pan, config.ratio);
    std::tie(hs, rep.mask) = preprocess_cube(raw, config.band_screen);
  } catch (const Error& e) {
    throw e.with_context("preprocess");
  }
  try {
    rep.model = resolve_sensor(config.sensor, hs, pan, rep.ratio, rep.mask.keep);
  } catch (const Error& e) {
    throw e.with_context("sensor");
  }

  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) fail_io("cannot create output directory " + config.output_dir.string() + ": " + ec.message());

  for (Method method : config.methods) {
    MethodOutcome out;
    out.method = method;
    TiledFusion tf = fuse_tiled(hs, pan, rep.model, method, config.params, config.tile_size, config.pad_mode,
                                config.threads);
    rep.grid = tf.grid;
    out.traces = std::move(tf.traces);
    out.pca_fallback = std::move(tf.pca_fallback);
    out.fused_path = config.output_dir / (std::string("fused_") + to_string(method) + ".hdr");
    write_raster(tf.fused, out.fused_path);

    if (config.wald) {
      try {
        FusionFn fn = [&](const HyperCube& h, const PanImage& p, const SensorModel& m) {
          return fuse_tiled(h, p, m, method, config.params, config.tile_size, config.pad_mode, config.threads)
              .fused;
        };
        out.wald = wald_protocol(hs, pan, to_string(method), fn, rep.model, config.window);
      } catch (const Error& e) {
        throw e.with_context("wald");
      }
    }
    if (config.full_resolution) {
      try {
        out.full = full_resolution_eval(tf.fused, hs, pan, rep.model, config.window, to_string(method));
      } catch (const Error& e) {
        throw e.with_context("full_resolution");
      }
    }
    if (config.pca.enabled) {
      try {
        const PcaFit fit = pca_fit(tf.fused, config.pca.band_range);
        const RgbComposite rgb =
            pca_composite(tf.fused, fit, config.pca.components, config.pca.stretch_lo, config.pca.stretch_hi);
        write_png(rgb, config.output_dir / (std::string("composite_") + to_string(method) + ".png"));
        out.composite = rgb.provenance;
      } catch (const Error& e) {
        throw e.with_context("composite");
      }
    }
    rep.methods.push_back(std::move(out));
  }

  rep.text = detail::render_text_report(rep, raw, pan);
  rep.structured = detail::render_json_report(rep);
  detail::write_text_file(config.output_dir / "report.txt", rep.text);
  detail::write_text_file(config.output_dir / "report.json", rep.structured.dump(2) + "\n");
  return rep;
}

}  // namespace hsharp
