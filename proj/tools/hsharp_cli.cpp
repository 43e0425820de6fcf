#include "hsharp/hsharp.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;

namespace {

using namespace hsharp;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return 1;
    case ErrorKind::io: return 2;
    case ErrorKind::numerical: return 3;
  }
  return 3;
}

struct Options {
  std::string hs, pan, fused, out, method = "gsa", config, pad;
  std::optional<std::size_t> ratio, tile_size, window, threads;
  std::optional<std::uint64_t> seed;
  std::size_t rows = 96, cols = 96, bands = 30, endmembers = 3;
  double noise = 0.0;
};

RunConfig base_config(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.ratio) c.ratio = *o.ratio;
  if (o.tile_size) c.tile_size = *o.tile_size;
  if (o.window) c.window = *o.window;
  if (o.threads) c.threads = *o.threads;
  if (o.seed) c.seed = c.params.seed = *o.seed;
  if (!o.pad.empty()) c.pad_mode = parse_pad_mode(o.pad);
  if (c.tile_size == 0) fail_validation("--tile-size must be positive");
  if (c.window < 2) fail_validation("--window must be >= 2");
  return c;
}

HyperCube load_cube(const std::string& path) {
  try {
    return read_cube(path);
  } catch (const Error& e) {
    throw e.with_context("read");
  }
}

PanImage load_pan(const std::string& path) {
  try {
    return read_pan(path);
  } catch (const Error& e) {
    throw e.with_context("read");
  }
}

SensorModel sensor_for(const RunConfig& c, const HyperCube& hs, const PanImage& pan, std::size_t ratio) {
  return resolve_sensor(c.sensor, hs, pan, ratio, std::vector<bool>(hs.bands(), true));
}

int cmd_preprocess(const Options& o) {
  const RunConfig c = base_config(o);
  const HyperCube hs = load_cube(o.hs);
  const auto [screened, mask] = preprocess_cube(hs, c.band_screen);
  write_raster(screened, o.out);
  std::size_t atmospheric = 0, low_snr = 0;
  for (BandReason r : mask.reason) {
    atmospheric += r == BandReason::atmospheric;
    low_snr += r == BandReason::low_snr;
  }
  std::cout << "bands_kept = " << mask.kept_count() << " of " << hs.bands() << "\n"
            << "dropped_atmospheric = " << atmospheric << "\n"
            << "dropped_low_snr = " << low_snr << "\n";
  return 0;
}

int cmd_sharpen(const Options& o) {
  const Method method = parse_method(o.method);
  const RunConfig c = base_config(o);
  const HyperCube hs = load_cube(o.hs);
  const PanImage pan = load_pan(o.pan);
  const std::size_t ratio = resolve_ratio(hs, pan, c.ratio);
  const SensorModel model = sensor_for(c, hs, pan, ratio);
  const TiledFusion tf = fuse_tiled(hs, pan, model, method, c.params, c.tile_size, c.pad_mode, c.threads);
  write_raster(tf.fused, o.out);
  std::cout << "method = " << to_string(method) << "\n"
            << "tiles = " << tf.grid.tiles_down << " x " << tf.grid.tiles_across << " = " << tf.grid.size() << "\n";
  return 0;
}

int cmd_eval_wald(const Options& o) {
  const Method method = parse_method(o.method, true);
  const RunConfig c = base_config(o);
  const HyperCube hs = load_cube(o.hs);
  const PanImage pan = load_pan(o.pan);
  const std::size_t ratio = resolve_ratio(hs, pan, c.ratio);
  const SensorModel model = sensor_for(c, hs, pan, ratio);
  FusionFn fn;
  if (method == Method::identity)
    fn = [&hs](const HyperCube&, const PanImage&, const SensorModel&) { return hs; };
  else
    fn = [&](const HyperCube& h, const PanImage& p, const SensorModel& m) {
      return fuse_tiled(h, p, m, method, c.params, c.tile_size, c.pad_mode, c.threads).fused;
    };
  const WaldRun run = wald_protocol(hs, pan, to_string(method), fn, model, c.window);
  std::cout << "method = " << run.method << "\n"
            << "window = " << run.report.window << "\n"
            << "UIQI " << format_metric(*run.report.uiqi) << "\n"
            << "SAM " << format_metric(*run.report.sam_deg) << "\n"
            << "ERGAS " << format_metric(*run.report.ergas) << "\n";
  return 0;
}

int cmd_eval_full(const Options& o) {
  const RunConfig c = base_config(o);
  const HyperCube fused = load_cube(o.fused);
  const HyperCube hs = load_cube(o.hs);
  const PanImage pan = load_pan(o.pan);
  const std::size_t ratio = resolve_ratio(hs, pan, c.ratio);
  const SensorModel model = sensor_for(c, hs, pan, ratio);
  const QualityReport q = full_resolution_eval(fused, hs, pan, model, c.window);
  std::cout << "window = " << q.window << "\n"
            << "D_lambda_k " << format_metric(*q.d_lambda_k) << "\n"
            << "D_s_star " << format_metric(*q.d_s_star) << "\n"
            << "Q_star " << format_metric(*q.q_star) << "\n";
  return 0;
}

int cmd_composite(const Options& o) {
  const RunConfig c = base_config(o);
  const HyperCube cube = load_cube(o.hs);
  const PcaFit fit = pca_fit(cube, c.pca.band_range);
  const RgbComposite rgb = pca_composite(cube, fit, c.pca.components, c.pca.stretch_lo, c.pca.stretch_hi);
  write_png(rgb, o.out);
  const auto& p = rgb.provenance;
  std::cout << "pca_bands = " << fit.band_indices.size() << "\n"
            << "components = " << p.source_indices[0] << " " << p.source_indices[1] << " " << p.source_indices[2]
            << "\n";
  for (std::size_t ch = 0; ch < 3; ++ch)
    std::cout << "channel" << ch << " = " << format_metric(p.lo_value[ch]) << " " << format_metric(p.hi_value[ch])
              << (p.degenerate[ch] ? " degenerate" : "") << "\n";
  return 0;
}

int cmd_make_scene(const Options& o) {
  SceneOptions so;
  so.rows = o.rows;
  so.cols = o.cols;
  so.bands = o.bands;
  so.endmembers = o.endmembers;
  so.ratio = o.ratio.value_or(6);
  so.noise_std = o.noise;
  so.seed = o.seed.value_or(0);
  const SyntheticScene s = make_scene(so);

  const fs::path dir = o.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail_io("cannot create " + dir.string() + ": " + ec.message());
  write_raster(s.truth, dir / "truth.hdr");
  write_raster(s.hs, dir / "hs.hdr");
  write_raster(s.pan, dir / "pan.hdr");

  json cfg = {{"hs", "hs.hdr"},
              {"pan", "pan.hdr"},
              {"ratio", so.ratio},
              {"sensor", sensor_to_json(s.model)},
              {"band_screen", {{"enabled", false}}},
              {"output_dir", "out"},
              {"seed", so.seed}};
  detail::write_text_file(dir / "config.json", cfg.dump(2) + "\n");
  std::cout << "scene = " << s.truth.bands() << " x " << s.truth.rows() << " x " << s.truth.cols() << "\n"
            << "ratio = " << so.ratio << "\n"
            << "written = " << dir.string() << "\n";
  return 0;
}

int cmd_run(const Options& o) {
  RunConfig c = base_config(o);
  if (!o.out.empty()) c.output_dir = o.out;
  const RunReport rep = run_pipeline(c);
  std::cout << rep.text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperspectral pansharpening: GSA, MTF-GLP and HySure with quality assessment"};
  app.require_subcommand(1);
  Options o;

  auto add_hs = [&](CLI::App* s, bool required = true) {
    auto* opt = s->add_option("--hs", o.hs, "Hyperspectral cube (.hdr)");
    if (required) opt->required();
  };
  auto add_pan = [&](CLI::App* s) { s->add_option("--pan", o.pan, "Panchromatic image (.hdr)")->required(); };
  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "Run config (JSON) supplying sensor and method parameters");
    s->add_option("--ratio", o.ratio, "Decimation ratio (default: pan rows / hs rows)");
  };
  auto add_tiling = [&](CLI::App* s) {
    s->add_option("--tile-size", o.tile_size, "Tile side in pan pixels (multiple of the ratio)");
    s->add_option("--pad", o.pad, "Tile padding: reflect or zero");
    s->add_option("--seed", o.seed, "Seed for VCA initialization");
    s->add_option("--threads", o.threads, "Tile worker count (default: available parallelism)");
  };

  auto* pre = app.add_subcommand("preprocess", "Screen atmospheric and low-SNR bands");
  add_hs(pre);
  pre->add_option("--out", o.out, "Screened cube (.hdr)")->required();
  pre->add_option("--config", o.config, "Run config (JSON) supplying band_screen");

  auto* sharpen = app.add_subcommand("sharpen", "Fuse one hyperspectral/panchromatic pair");
  add_hs(sharpen);
  add_pan(sharpen);
  sharpen->add_option("--out", o.out, "Fused cube (.hdr)")->required();
  sharpen->add_option("--method", o.method, "gsa, mtfglp or hysure")->required();
  add_common(sharpen);
  add_tiling(sharpen);

  auto* wald = app.add_subcommand("eval-wald", "Reduced-resolution evaluation (UIQI, SAM, ERGAS)");
  add_hs(wald);
  add_pan(wald);
  wald->add_option("--method", o.method, "gsa, mtfglp, hysure, upsample or identity")->required();
  wald->add_option("--window", o.window, "UIQI window side");
  add_common(wald);
  add_tiling(wald);

  auto* full = app.add_subcommand("eval-full", "Full-resolution evaluation (D_lambda_k, D_s_star, Q_star)");
  full->add_option("--fused", o.fused, "Fused cube (.hdr)")->required();
  add_hs(full);
  add_pan(full);
  full->add_option("--window", o.window, "UIQI window side");
  add_common(full);

  auto* comp = app.add_subcommand("composite", "PCA false-colour composite of a cube");
  add_hs(comp);
  comp->add_option("--out", o.out, "Output PNG")->required();
  comp->add_option("--config", o.config, "Run config (JSON) supplying pca settings");

  auto* scene = app.add_subcommand("make-scene", "Write a synthetic scene with its generating sensor model");
  scene->add_option("--out", o.out, "Output directory")->required();
  scene->add_option("--ratio", o.ratio, "Decimation ratio")->default_str("6");
  scene->add_option("--seed", o.seed, "Random seed")->default_str("0");
  scene->add_option("--rows", o.rows, "Truth rows")->capture_default_str();
  scene->add_option("--cols", o.cols, "Truth columns")->capture_default_str();
  scene->add_option("--bands", o.bands, "Band count")->capture_default_str();
  scene->add_option("--endmembers", o.endmembers, "Endmember count")->capture_default_str();
  scene->add_option("--noise", o.noise, "Gaussian noise std added to hs and pan")->capture_default_str();

  auto* run = app.add_subcommand("run", "Run the configured end-to-end workflow");
  run->add_option("--config", o.config, "Run config (JSON)")->required();
  run->add_option("--out", o.out, "Override the output directory");
  run->add_option("--seed", o.seed, "Override the seed");
  run->add_option("--threads", o.threads, "Tile worker count (default: available parallelism)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*pre) return cmd_preprocess(o);
    if (*sharpen) return cmd_sharpen(o);
    if (*wald) return cmd_eval_wald(o);
    if (*full) return cmd_eval_full(o);
    if (*comp) return cmd_composite(o);
    if (*scene) return cmd_make_scene(o);
    if (*run) return cmd_run(o);
  } catch (const Error& e) {
    std::cerr << "hsharp: " << e.describe() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "hsharp: io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "hsharp: numerical error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
