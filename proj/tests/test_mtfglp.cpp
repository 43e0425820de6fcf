#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "hsharp/metrics.hpp"
#include "hsharp/mtfglp.hpp"
#include "hsharp/scene.hpp"
#include "oracles.hpp"

using namespace hsharp;

namespace {

PanImage pan_from(std::size_t rows, std::size_t cols, const std::function<double(std::size_t, std::size_t)>& f) {
  std::vector<float> v(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) v[r * cols + c] = static_cast<float>(f(r, c));
  return PanImage(rows, cols, std::move(v));
}

SensorModel flat_model(std::size_t bands, std::size_t ratio, double gain) {
  SensorModel m;
  m.ratio = ratio;
  m.psf = mtf_kernel(gain, ratio, default_mtf_size(ratio));
  m.response.assign(bands, 1.0 / static_cast<double>(bands));
  m.mtf_gain_nyquist.assign(bands, gain);
  return m;
}

double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

TEST(GlpLowpass, ConstantPanIsUnchanged) {
  const PanImage pan = pan_from(24, 24, [](auto, auto) { return 0.8; });
  const PanImage lp = glp_lowpass(pan, flat_model(1, 6, 0.3), 0);
  for (float v : lp.data()) EXPECT_NEAR(v, 0.8f, 1e-6);
}

TEST(GlpLowpass, NyquistCheckerboardIsSuppressed) {
  const PanImage pan = pan_from(48, 48, [](auto r, auto c) { return ((r + c) % 2) ? 1.0 : -1.0; });
  const PanImage lp = glp_lowpass(pan, flat_model(1, 6, 0.3), 0);
  for (float v : lp.data()) EXPECT_LT(std::abs(v), 0.35);
}

TEST(GlpLowpass, SlowSinusoidPassesWithinFivePercent) {
  // Period 8*ratio along both axes. The Gaussian pass-band at a quarter of the
  // low-res Nyquist is gain^(1/16): 0.958 for gain 0.5.
  const std::size_t r = 6, n = 8 * r * 2;
  auto f = [&](std::size_t y, std::size_t x) {
    return std::sin(2 * std::numbers::pi * y / (8.0 * r)) + std::cos(2 * std::numbers::pi * x / (8.0 * r));
  };
  const PanImage pan = pan_from(n, n, f);
  const PanImage lp = glp_lowpass(pan, flat_model(1, r, 0.5), 0);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pan.pixels(); ++i) {
    num += lp.data()[i] * pan.data()[i];
    den += pan.data()[i] * pan.data()[i];
  }
  EXPECT_NEAR(num / den, 1.0, 0.05);
}

TEST(MtfGlp, ConstantPanInjectsNothing) {
  const SyntheticScene s = make_scene(24, 24, 4, 2, 2, 0.0, 3);
  const PanImage pan = pan_from(24, 24, [](auto, auto) { return 0.4; });
  const HyperCube up = upsample(s.hs, 2);
  for (GainMode m : {GainMode::unit, GainMode::hpm}) {
    const HyperCube f = mtfglp_sharpen(s.hs, pan, s.model, m).first;
    for (std::size_t i = 0; i < f.data().size(); ++i) EXPECT_NEAR(f.data()[i], up.data()[i], 1e-6);
  }
  EXPECT_THROW(mtfglp_sharpen(s.hs, pan, s.model, GainMode::regression), Error);
}

TEST(MtfGlp, UnitModeMatchesStepByStepOracle) {
  const std::size_t r = 2;
  const HyperCube hs(1, 6, 6, [] {
    std::vector<float> v(36);
    for (std::size_t i = 0; i < 36; ++i) v[i] = static_cast<float>(1.0 + 0.3 * std::sin(0.7 * i));
    return v;
  }());
  const PanImage pan = pan_from(12, 12, [](auto y, auto x) { return 2.0 + std::cos(0.9 * y) * std::sin(1.3 * x); });
  const SensorModel model = flat_model(1, r, 0.3);
  const auto [fused, art] = mtfglp_sharpen(hs, pan, model, GainMode::unit, true);

  const auto up = oracle::upsample_plane(oracle::plane(hs, 0), 6, 6, r);
  const std::vector<double> p(pan.data().begin(), pan.data().end());
  const double a = std::sqrt(oracle::cov(up, up) / oracle::cov(p, p));
  std::vector<double> matched(144);
  for (std::size_t i = 0; i < 144; ++i) matched[i] = (p[i] - oracle::mean(p)) * a + oracle::mean(up);
  const auto low = oracle::degrade_plane(matched, 12, 12, mtf_kernel(0.3, r, default_mtf_size(r)), r);
  const auto lowpass = oracle::upsample_plane(low, 6, 6, r);
  for (std::size_t i = 0; i < 144; ++i) {
    EXPECT_NEAR(fused.data()[i], up[i] + matched[i] - lowpass[i], 1e-5);
    EXPECT_NEAR(art.details[0][i], matched[i] - lowpass[i], 1e-6);
  }
}

TEST(MtfGlp, RegressionGainIsCovarianceRatio) {
  const SyntheticScene s = make_scene(48, 48, 5, 3, 4, 0.0, 4);
  const auto [fused, art] = mtfglp_sharpen(s.hs, s.pan, s.model, GainMode::regression, true);
  const HyperCube up = upsample(s.hs, 4);
  for (std::size_t b = 0; b < 5; ++b) {
    const auto u = oracle::plane(up, b);
    EXPECT_NEAR(art.gains[b], oracle::cov(u, art.pan_lowpass[b]) / oracle::cov(art.pan_lowpass[b], art.pan_lowpass[b]),
                1e-9);
    for (std::size_t i = 0; i < u.size(); ++i)
      EXPECT_NEAR(fused.band(b)[i], u[i] + art.gains[b] * art.details[b][i], 1e-5);
  }
}

TEST(MtfGlp, HpmAndUnitAgreeWhenLowpassTracksTheBand) {
  // One band whose truth is the pan itself: the low-pass of the matched pan
  // is close to the upsampled band, so the HPM gain map sits near 1.
  const std::size_t r = 4, n = 64;
  const PanImage pan = pan_from(n, n, [&](auto y, auto x) {
    return 5.0 + std::sin(2 * std::numbers::pi * y / 32.0) * std::cos(2 * std::numbers::pi * x / 16.0) +
           0.3 * std::cos(2 * std::numbers::pi * (x + y) / 8.0);
  });
  const SensorModel model = flat_model(1, r, 0.3);
  const HyperCube hs = degrade(as_cube(pan), model);
  const HyperCube unit = mtfglp_sharpen(hs, pan, model, GainMode::unit).first;
  const HyperCube hpm = mtfglp_sharpen(hs, pan, model, GainMode::hpm).first;
  std::vector<double> diff(unit.data().size()), ref(unit.data().size());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = hpm.data()[i] - unit.data()[i];
    ref[i] = unit.data()[i];
  }
  EXPECT_LT(rms(diff) / rms(ref), 0.02);
}

TEST(MtfGlp, BandLimitedPanIsAFixedPoint) {
  // With a near-delta MTF the GLP low-pass is decimate-then-interpolate, which
  // leaves an already interpolated image untouched.
  const std::size_t r = 2;
  const SensorModel model = flat_model(3, r, 1.0 - 1e-7);
  SceneOptions o;
  o.rows = o.cols = 24;
  o.bands = 3;
  o.endmembers = 2;
  o.ratio = r;
  const SyntheticScene s = make_scene(o);
  const HyperCube low(1, 12, 12, std::vector<float>(s.hs.band(0).begin(), s.hs.band(0).end()));
  const PanImage pan = as_pan(upsample(low, r));
  const PanImage lp = glp_lowpass(pan, model, 0);
  for (std::size_t i = 0; i < pan.pixels(); ++i) ASSERT_NEAR(lp.data()[i], pan.data()[i], 1e-5);
  const HyperCube fused = mtfglp_sharpen(s.hs, pan, model, GainMode::regression).first;
  const HyperCube up = upsample(s.hs, r);
  for (std::size_t i = 0; i < fused.data().size(); ++i) EXPECT_NEAR(fused.data()[i], up.data()[i], 1e-5);
}

TEST(MtfGlp, DetailPlanesAreZeroMeanHighPass) {
  const SyntheticScene s = make_scene(96, 96, 4, 3, 6, 0.0, 8);
  const auto art = mtfglp_sharpen(s.hs, s.pan, s.model, GainMode::regression, true).second;
  for (const auto& d : art.details) EXPECT_NEAR(oracle::mean(d), 0.0, 1e-6);

  // Fraction of a pan pattern that ends up in the detail plane.
  const std::size_t r = 6, n = 96;
  const HyperCube hs(1, n / r, n / r, std::vector<float>((n / r) * (n / r), 1.0f));
  auto detail_fraction = [&](double period) {
    std::vector<float> v(n * n);
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) v[y * n + x] = static_cast<float>(std::cos(2 * std::numbers::pi * x / period));
    // Give the hs band some variance so the matched pan is not flat.
    HyperCube h = hs;
    h.at(0, 0, 0) = 2.0f;
    const auto a = mtfglp_sharpen(h, PanImage(n, n, v), flat_model(1, r, 0.3), GainMode::unit, true).second;
    std::vector<double> matched(n * n);
    for (std::size_t i = 0; i < n * n; ++i) matched[i] = a.details[0][i] + a.pan_lowpass[0][i];
    std::vector<double> centered(n * n);
    for (std::size_t i = 0; i < n * n; ++i) centered[i] = matched[i] - oracle::mean(matched);
    return rms(a.details[0]) / rms(centered);
  };
  EXPECT_LT(detail_fraction(96.0), 0.15);
  EXPECT_GT(detail_fraction(2.0), 0.9);
  EXPECT_LT(detail_fraction(96.0), detail_fraction(16.0));
  EXPECT_LT(detail_fraction(16.0), detail_fraction(4.0));
}

TEST(MtfGlp, DegradedFusionStaysCloseToInput) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SyntheticScene s = make_scene(96, 96, 10, 3, 6, 0.0, seed);
    const HyperCube back = degrade(mtfglp_sharpen(s.hs, s.pan, s.model).first, s.model);
    EXPECT_LT(ergas(s.hs, back, 6), 1.0) << seed;
  }
}

TEST(MtfGlp, GainModeParsing) {
  EXPECT_EQ(parse_gain_mode("hpm"), GainMode::hpm);
  EXPECT_STREQ(to_string(GainMode::regression), "regression");
  EXPECT_THROW(parse_gain_mode("adaptive"), Error);
}
