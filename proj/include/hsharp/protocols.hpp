#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hsharp/error.hpp"
#include "hsharp/gsa.hpp"
#include "hsharp/hysure.hpp"
#include "hsharp/metrics.hpp"
#include "hsharp/mtfglp.hpp"
#include "hsharp/preprocess.hpp"
#include "hsharp/raster.hpp"
#include "hsharp/vca.hpp"

namespace hsharp {

// Fusion methods plus two evaluation-only baselines: `upsample` (bicubic
// interpolation, no detail) and `identity` (an oracle returning the reference).
enum class Method { gsa, mtfglp, hysure, upsample, identity };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::gsa: return "gsa";
    case Method::mtfglp: return "mtfglp";
    case Method::hysure: return "hysure";
    case Method::upsample: return "upsample";
    case Method::identity: return "identity";
  }
  return "?";
}

inline Method parse_method(const std::string& s, bool allow_baselines = false) {
  if (s == "gsa") return Method::gsa;
  if (s == "mtfglp") return Method::mtfglp;
  if (s == "hysure") return Method::hysure;
  if (allow_baselines && s == "upsample") return Method::upsample;
  if (allow_baselines && s == "identity") return Method::identity;
  fail_validation("unknown method '" + s + "'; valid methods: gsa, mtfglp, hysure" +
                  std::string(allow_baselines ? ", upsample, identity" : ""));
}

struct MethodParams {
  GainMode gain_mode = GainMode::regression;
  HysureParams hysure;
  std::uint64_t seed = 0;
};

struct FusionOutput {
  HyperCube fused;
  std::optional<SolveTrace> trace;
  bool pca_fallback = false;
};

/// Fuses one (hs, pan) pair with a real method or the upsample baseline.
inline FusionOutput run_method(Method method, const HyperCube& hs, const PanImage& pan,
                               const SensorModel& model, const MethodParams& params) {
  FusionOutput out;
  switch (method) {
    case Method::gsa:
      out.fused = gsa_sharpen(hs, pan, model).first;
      break;
    case Method::mtfglp:
      out.fused = mtfglp_sharpen(hs, pan, model, params.gain_mode).first;
      break;
    case Method::hysure: {
      const std::size_t p = std::min({params.hysure.subspace_dim, hs.bands(), hs.pixels()});
      const Subspace sub = vca(hs, p, params.seed);
      auto [fused, trace] = hysure_sharpen(hs, pan, model, sub, params.hysure);
      out.fused = std::move(fused);
      out.trace = std::move(trace);
      out.pca_fallback = sub.pca_fallback;
      break;
    }
    case Method::upsample:
      if (pan.rows() != hs.rows() * model.ratio || pan.cols() != hs.cols() * model.ratio)
        fail_validation("pan dims must equal hs dims x ratio");
      out.fused = upsample(hs, model.ratio);
      out.fused.set_gsd_m(pan.gsd_m());
      break;
    case Method::identity:
      fail_validation("the identity oracle needs the reference cube; use wald_protocol");
  }
  return out;
}

using FusionFn = std::function<HyperCube(const HyperCube& hs, const PanImage& pan, const SensorModel& model)>;

/// 64-bit FNV-1a over raw sample bytes.
inline std::uint64_t content_hash(std::span<const float> data, std::uint64_t h = 1469598103934665603ull) {
  for (float v : data) {
    unsigned char bytes[sizeof(float)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ull;
    }
  }
  return h;
}

struct WaldRun {
  std::string method;
  SensorModel model;
  QualityReport report;
  std::uint64_t degraded_inputs_checksum = 0;
};

inline std::size_t effective_window(std::size_t window, std::size_t rows, std::size_t cols) {
  return std::max<std::size_t>(2, std::min({window, rows, cols}));
}

/// Reduced-scale evaluation: degrade both inputs by the model, fuse the
/// degraded pair and score the result against the original cube.
inline WaldRun wald_protocol(const HyperCube& hs, const PanImage& pan, const std::string& method_name,
                             const FusionFn& fuse, const SensorModel& model, std::size_t window = 32) {
  model.validate(hs.bands());
  const std::size_t r = model.ratio;
  if (pan.rows() != hs.rows() * r || pan.cols() != hs.cols() * r)
    fail_validation("pan dims must equal hs dims x ratio");
  if (hs.rows() % r != 0 || hs.cols() % r != 0)
    fail_validation("hs dims must be divisible by the ratio for the reduced-scale protocol");

  const HyperCube hs_low = degrade(hs, model);
  const PanImage pan_low = degrade(pan, model);
  WaldRun run;
  run.method = method_name;
  run.model = model;
  run.degraded_inputs_checksum = content_hash(pan_low.data(), content_hash(hs_low.data()));

  const HyperCube fused = fuse(hs_low, pan_low, model);
  if (fused.bands() != hs.bands() || fused.rows() != hs.rows() || fused.cols() != hs.cols())
    fail_validation("method output does not match the reference shape");
  const std::size_t w = effective_window(window, hs.rows(), hs.cols());
  run.report.context = EvalContext::wald;
  run.report.method = method_name;
  run.report.window = w;
  run.report.ratio = r;
  run.report.uiqi = uiqi(hs, fused, w);
  run.report.sam_deg = sam(hs, fused);
  run.report.ergas = ergas(hs, fused, r);
  return run;
}

inline WaldRun wald_protocol(const HyperCube& hs, const PanImage& pan, Method method,
                             const SensorModel& model, const MethodParams& params = {},
                             std::size_t window = 32) {
  FusionFn fn;
  if (method == Method::identity)
    fn = [&hs](const HyperCube&, const PanImage&, const SensorModel&) { return hs; };
  else
    fn = [method, &params](const HyperCube& h, const PanImage& p, const SensorModel& m) {
      return run_method(method, h, p, m, params).fused;
    };
  return wald_protocol(hs, pan, to_string(method), fn, model, window);
}

/// Full-scale evaluation of a fused product against its own inputs.
inline QualityReport full_resolution_eval(const HyperCube& fused, const HyperCube& hs, const PanImage& pan,
                                          const SensorModel& model, std::size_t window = 32,
                                          const std::string& method_name = {}) {
  if (fused.bands() != hs.bands()) fail_validation("fused and hs band counts differ");
  if (fused.rows() != pan.rows() || fused.cols() != pan.cols())
    fail_validation("fused and pan dims differ");
  QualityReport q;
  q.context = EvalContext::full_resolution;
  q.method = method_name;
  q.ratio = model.ratio;
  q.window = effective_window(window, hs.rows(), hs.cols());
  q.d_lambda_k = d_lambda_k(fused, hs, model, q.window);
  q.d_s_star = d_s_star(fused, pan);
  q.q_star = q_star(*q.d_lambda_k, *q.d_s_star);
  return q;
}

}  // namespace hsharp
