#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>

#include "hsharp/error.hpp"
#include "hsharp/preprocess.hpp"
#include "hsharp/raster.hpp"
#include "hsharp/stats.hpp"

namespace hsharp {

enum class EvalContext { wald, full_resolution };

inline const char* to_string(EvalContext c) { return c == EvalContext::wald ? "wald" : "full_resolution"; }

/// The six indices; protocol-specific fields are unset when not computed.
struct QualityReport {
  EvalContext context = EvalContext::wald;
  std::optional<double> uiqi, sam_deg, ergas;
  std::optional<double> d_lambda_k, d_s_star, q_star;
  std::size_t window = 0;
  std::size_t ratio = 0;
  std::string method;
};

namespace detail {

inline void require_same_shape(const HyperCube& a, const HyperCube& b) {
  if (a.bands() != b.bands() || a.rows() != b.rows() || a.cols() != b.cols())
    fail_validation("cubes differ in shape");
}

}  // namespace detail

/// Q index of one band averaged over non-overlapping window x window blocks.
/// Returns nullopt when every block is degenerate.
inline std::optional<double> uiqi_band(std::span<const float> a, std::span<const float> b,
                                       std::size_t rows, std::size_t cols, std::size_t window) {
  const double n = static_cast<double>(window * window);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t r0 = 0; r0 + window <= rows; r0 += window)
    for (std::size_t c0 = 0; c0 + window <= cols; c0 += window) {
      double sa = 0.0, sb = 0.0;
      for (std::size_t r = r0; r < r0 + window; ++r)
        for (std::size_t c = c0; c < c0 + window; ++c) {
          sa += a[r * cols + c];
          sb += b[r * cols + c];
        }
      const double ma = sa / n, mb = sb / n;
      double vaa = 0.0, vbb = 0.0, vab = 0.0;
      for (std::size_t r = r0; r < r0 + window; ++r)
        for (std::size_t c = c0; c < c0 + window; ++c) {
          const double da = a[r * cols + c] - ma, db = b[r * cols + c] - mb;
          vaa += da * da;
          vbb += db * db;
          vab += da * db;
        }
      vaa /= n;
      vbb /= n;
      vab /= n;
      const double denom = (vaa + vbb) * (ma * ma + mb * mb);
      if (!(denom >= 1e-12)) continue;
      sum += 4.0 * vab * ma * mb / denom;
      ++count;
    }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

/// Universal image quality index, mean over bands.
inline double uiqi(const HyperCube& ref, const HyperCube& test, std::size_t window) {
  detail::require_same_shape(ref, test);
  if (window < 2 || window > std::min(ref.rows(), ref.cols()))
    fail_validation("UIQI window " + std::to_string(window) + " must lie in [2, min(rows, cols)]");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < ref.bands(); ++b)
    if (auto q = uiqi_band(ref.band(b), test.band(b), ref.rows(), ref.cols(), window)) {
      sum += *q;
      ++count;
    }
  if (count == 0) fail_numerical("every UIQI window is degenerate");
  return sum / static_cast<double>(count);
}

/// Mean spectral angle in degrees.
inline double sam(const HyperCube& ref, const HyperCube& test) {
  detail::require_same_shape(ref, test);
  double sum = 0.0;
  std::size_t count = 0;
  // 2 atan2(|u - v|, |u + v|) on the unit vectors stays accurate near zero
  // angle, where acos of the normalized dot product loses half its digits.
  for (std::size_t i = 0; i < ref.pixels(); ++i) {
    double na = 0.0, nb = 0.0;
    for (std::size_t b = 0; b < ref.bands(); ++b) {
      const double x = ref.band(b)[i], y = test.band(b)[i];
      na += x * x;
      nb += y * y;
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < 1e-12 || nb < 1e-12) continue;
    double diff = 0.0, plus = 0.0;
    for (std::size_t b = 0; b < ref.bands(); ++b) {
      const double u = ref.band(b)[i] / na, v = test.band(b)[i] / nb;
      diff += (u - v) * (u - v);
      plus += (u + v) * (u + v);
    }
    sum += 2.0 * std::atan2(std::sqrt(diff), std::sqrt(plus));
    ++count;
  }
  if (count == 0) fail_numerical("every SAM pixel is degenerate");
  return sum / static_cast<double>(count) * 180.0 / std::numbers::pi;
}

inline double ergas(const HyperCube& ref, const HyperCube& test, std::size_t ratio) {
  detail::require_same_shape(ref, test);
  if (ratio == 0) fail_validation("ratio must be positive");
  double acc = 0.0;
  for (std::size_t b = 0; b < ref.bands(); ++b) {
    const auto a = ref.band(b), t = test.band(b);
    const double mu = stats::mean(a);
    if (mu == 0.0) fail_numerical("ERGAS undefined: reference band " + std::to_string(b) + " has zero mean");
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = static_cast<double>(a[i]) - t[i];
      se += d * d;
    }
    const double rmse = std::sqrt(se / static_cast<double>(a.size()));
    acc += (rmse / mu) * (rmse / mu);
  }
  return 100.0 / static_cast<double>(ratio) * std::sqrt(acc / static_cast<double>(ref.bands()));
}

/// Spectral distortion: 1 - UIQI between hs and the degraded fused product.
inline double d_lambda_k(const HyperCube& fused, const HyperCube& hs, const SensorModel& model,
                         std::size_t window) {
  if (fused.rows() != hs.rows() * model.ratio || fused.cols() != hs.cols() * model.ratio)
    fail_validation("fused dims must equal hs dims x ratio");
  const HyperCube low = degrade(fused, model);
  return std::clamp(1.0 - uiqi(hs, low, window), 0.0, 1.0);
}

/// Spatial distortion: 1 - R^2 of the least-squares fit (with intercept) of
/// pan onto the fused bands.
inline double d_s_star(const HyperCube& fused, const PanImage& pan) {
  if (fused.rows() != pan.rows() || fused.cols() != pan.cols())
    fail_validation("fused and pan must share dimensions");
  const std::span<const float> p(pan.data());
  const double mean_p = stats::mean(p);
  const double ss_tot = stats::variance(p) * static_cast<double>(p.size());
  if (stats::negligible_variance(ss_tot / static_cast<double>(p.size()), mean_p))
    fail_numerical("pan has zero variance; spatial distortion undefined");

  const auto nb = static_cast<Eigen::Index>(fused.bands());
  const std::size_t n = fused.pixels();
  Eigen::VectorXd means(nb);
  for (Eigen::Index b = 0; b < nb; ++b) means[b] = stats::mean(fused.band(static_cast<std::size_t>(b)));
  Eigen::MatrixXd sxx = Eigen::MatrixXd::Zero(nb, nb);
  Eigen::VectorXd sxy = Eigen::VectorXd::Zero(nb);
  Eigen::VectorXd x(nb);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index b = 0; b < nb; ++b) x[b] = fused.band(static_cast<std::size_t>(b))[i] - means[b];
    sxx.selfadjointView<Eigen::Lower>().rankUpdate(x);
    sxy += x * (static_cast<double>(p[i]) - mean_p);
  }
  sxx = sxx.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd w = sxx.completeOrthogonalDecomposition().solve(sxy);
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double fit = mean_p;
    for (Eigen::Index b = 0; b < nb; ++b) fit += w[b] * (fused.band(static_cast<std::size_t>(b))[i] - means[b]);
    const double d = static_cast<double>(p[i]) - fit;
    ss_res += d * d;
  }
  return std::clamp(ss_res / ss_tot, 0.0, 1.0);
}

inline double q_star(double d_lambda, double d_s) { return (1.0 - d_lambda) * (1.0 - d_s); }

}  // namespace hsharp
