#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "hsharp/preprocess.hpp"
#include "oracles.hpp"

using namespace hsharp;

namespace {

HyperCube cube_from(std::size_t bands, std::size_t rows, std::size_t cols,
                    const std::function<double(std::size_t, std::size_t, std::size_t)>& f,
                    std::vector<double> wl = {}) {
  std::vector<float> v(bands * rows * cols);
  for (std::size_t b = 0; b < bands; ++b)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) v[(b * rows + r) * cols + c] = static_cast<float>(f(b, r, c));
  return HyperCube(bands, rows, cols, std::move(v), std::move(wl));
}

std::vector<double> linspace_wl(std::size_t n, double lo, double hi) {
  std::vector<double> wl(n);
  for (std::size_t i = 0; i < n; ++i) wl[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return wl;
}

// Centered 1-D DTFT of the middle row of a separable kernel, normalized by the row sum.
double kernel_response(const Kernel& k, double freq) {
  const std::size_t mid = k.side / 2;
  double re = 0.0, s = 0.0;
  for (std::size_t v = 0; v < k.side; ++v) {
    re += k.at(mid, v) * std::cos(2.0 * std::numbers::pi * freq * (static_cast<double>(v) - mid));
    s += k.at(mid, v);
  }
  return re / s;
}

}  // namespace

TEST(ScreenBands, IntervalListReducesTwoHundredFortyBandsToOneHundredSixtySeven) {
  // 240 bands across 400-2500 nm; three windows chosen to cover exactly 73 bands.
  const auto wl = linspace_wl(240, 400.0, 2500.0);
  const HyperCube c = cube_from(240, 16, 16, [](auto b, auto r, auto q) { return 100.0 + b + 0.1 * ((r * 7 + q * 3) % 5); }, wl);
  std::vector<WavelengthInterval> iv{{wl[80], wl[99]}, {wl[130], wl[159]}, {wl[217], 1e9}};
  const BandMask m = screen_bands(c, iv, 0.0);
  EXPECT_EQ(m.kept_count(), 167u);
  for (std::size_t b = 0; b < 240; ++b)
    EXPECT_EQ(m.reason[b], m.keep[b] ? BandReason::kept : BandReason::atmospheric);
}

TEST(ScreenBands, EmptyIntervalsZeroThresholdKeepsAll) {
  const HyperCube c = cube_from(5, 8, 8, [](auto b, auto r, auto q) { return std::sin(double(b + r * q)); });
  EXPECT_EQ(screen_bands(c, {}, 0.0).kept_count(), 5u);
}

TEST(ScreenBands, NoiseBandIsTaggedLowSnr) {
  // Band 0: offset 10 plus a +-1 checkerboard, so every 8x8 block has mean 10
  // and population std 1 (SNR 10). Band 1: zero-mean noise, block SNR near 0.
  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  const HyperCube c = cube_from(2, 32, 32, [&](auto b, auto r, auto q) {
    return b == 0 ? 10.0 + (((r + q) % 2) ? 1.0 : -1.0) : nd(rng);
  });
  EXPECT_NEAR(estimate_snr(c.band(0), 32, 32), 10.0, 1e-9);
  EXPECT_LT(std::abs(estimate_snr(c.band(1), 32, 32)), 1.0);
  const BandMask m = screen_bands(c, {}, 5.0);
  EXPECT_TRUE(m.keep[0]);
  EXPECT_FALSE(m.keep[1]);
  EXPECT_EQ(m.reason[1], BandReason::low_snr);
}

TEST(ScreenBands, IntervalOrderDoesNotMatter) {
  const auto wl = linspace_wl(30, 400.0, 2500.0);
  const HyperCube c = cube_from(30, 8, 8, [](auto b, auto r, auto q) { return 50.0 + b + ((r + q) % 2); }, wl);
  std::vector<WavelengthInterval> a{{1350, 1460}, {1790, 1970}, {2400, 1e9}};
  std::vector<WavelengthInterval> z(a.rbegin(), a.rend());
  const BandMask m1 = screen_bands(c, a, 10.0), m2 = screen_bands(c, z, 10.0);
  EXPECT_EQ(m1.keep, m2.keep);
  EXPECT_EQ(m1.reason, m2.reason);
}

TEST(ScreenBands, DroppingEverythingFails) {
  const auto wl = linspace_wl(4, 400.0, 500.0);
  const HyperCube c = cube_from(4, 4, 4, [](auto, auto, auto) { return 1.0; }, wl);
  EXPECT_THROW(screen_bands(c, {{300, 600}}, 0.0), Error);
}

TEST(ApplyBandMask, SelectsBandsAndWavelengths) {
  const HyperCube c = cube_from(3, 2, 2, [](auto b, auto r, auto q) { return 10.0 * b + 2 * r + q; }, {400, 500, 600});
  EXPECT_EQ(apply_band_mask(c, {{true, true, true}, {}}), c);
  const HyperCube s = apply_band_mask(c, {{true, false, true}, {}});
  ASSERT_EQ(s.bands(), 2u);
  EXPECT_EQ(s.wavelengths_nm(), (std::vector<double>{400, 600}));
  EXPECT_EQ(s.at(1, 1, 1), 23.0f);
  EXPECT_THROW(apply_band_mask(c, {{false, false, false}, {}}), Error);
  EXPECT_THROW(apply_band_mask(c, {{true, false}, {}}), Error);
}

TEST(Degrade, ConstantStaysConstant) {
  const HyperCube c = cube_from(2, 12, 12, [](auto, auto, auto) { return 4.25; });
  const HyperCube d = degrade(c, mtf_kernel(0.3, 3, 19), 3);
  ASSERT_EQ(d.rows(), 4u);
  for (float v : d.data()) EXPECT_NEAR(v, 4.25f, 1e-5);
}

TEST(Degrade, ImpulseWithIdentityPsf) {
  const HyperCube c = cube_from(1, 6, 6, [](auto, auto r, auto q) { return r == 0 && q == 0 ? 7.0 : 0.0; });
  const HyperCube d = degrade(c, Kernel::identity(), 6);
  ASSERT_EQ(d.data().size(), 1u);
  EXPECT_EQ(d.data()[0], 7.0f);
}

TEST(Degrade, RampMatchesBruteForceOracle) {
  const HyperCube c = cube_from(1, 12, 12, [](auto, auto r, auto q) { return 3.0 * r + 0.5 * q + 1.0; });
  const Kernel k = Kernel::uniform(3);
  for (std::size_t phase : {0u, 2u, 5u}) {
    const HyperCube d = degrade(c, k, 6, phase);
    const auto ref = oracle::degrade_plane(oracle::plane(c, 0), 12, 12, k, 6, phase);
    ASSERT_EQ(d.data().size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(d.data()[i], ref[i], 1e-5) << phase << " " << i;
  }
  // Interior sample of the ramp is the ramp itself; the wrapped corner is not.
  EXPECT_NEAR(degrade(c, k, 6, 2).at(0, 1, 1), 3.0 * 8 + 0.5 * 8 + 1.0, 1e-5);
}

TEST(Degrade, AsymmetricKernelIsConvolutionNotCorrelation) {
  Kernel k{3, {0, 0, 0, 0, 0, 1, 0, 0, 0}};  // picks x(r, c - 1)
  const HyperCube c = cube_from(1, 4, 4, [](auto, auto r, auto q) { return 10.0 * r + q; });
  const HyperCube d = degrade(c, k, 2, 1);
  const auto ref = oracle::degrade_plane(oracle::plane(c, 0), 4, 4, k, 2, 1);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_EQ(d.data()[i], static_cast<float>(ref[i]));
  EXPECT_EQ(d.at(0, 0, 0), 10.0f);  // x(1, 0)
}

TEST(Degrade, IsLinear) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  const HyperCube x = cube_from(3, 18, 18, [&](auto, auto, auto) { return u(rng); });
  const HyperCube y = cube_from(3, 18, 18, [&](auto, auto, auto) { return u(rng); });
  const double a = 2.5, b = -0.75;
  const HyperCube z = cube_from(3, 18, 18, [&](auto bb, auto r, auto q) { return a * x.at(bb, r, q) + b * y.at(bb, r, q); });
  const Kernel k = mtf_kernel(0.3, 3, 19);
  const HyperCube dx = degrade(x, k, 3), dy = degrade(y, k, 3), dz = degrade(z, k, 3);
  for (std::size_t i = 0; i < dz.data().size(); ++i)
    EXPECT_NEAR(dz.data()[i], a * dx.data()[i] + b * dy.data()[i], 1e-5 * (1.0 + std::abs(dz.data()[i])));
}

TEST(Degrade, CommutesWithBandSelection) {
  const HyperCube c = cube_from(4, 12, 12, [](auto b, auto r, auto q) { return std::cos(0.3 * r * (b + 1)) + q; }, {1, 2, 3, 4});
  const BandMask m{{true, false, false, true}, {}};
  const Kernel k = Kernel::uniform(5);
  EXPECT_EQ(apply_band_mask(degrade(c, k, 4), m), degrade(apply_band_mask(c, m), k, 4));
}

TEST(Degrade, RejectsNonDivisibleDims) {
  const HyperCube c = HyperCube::zeros(1, 13, 12);
  EXPECT_THROW(degrade(c, Kernel::identity(), 6), Error);
}

TEST(Upsample, TwoByTwoMatchesKernelSumOracle) {
  const HyperCube c = cube_from(1, 2, 2, [](auto, auto r, auto q) { return r == 0 ? (q == 0 ? 1.0 : 4.0) : (q == 0 ? -2.0 : 0.5); });
  const HyperCube u = upsample(c, 2);
  ASSERT_EQ(u.rows(), 4u);
  const auto ref = oracle::upsample_plane(oracle::plane(c, 0), 2, 2, 2);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(u.data()[i], ref[i], 1e-6) << i;
}

TEST(Upsample, LargerRandomInputMatchesOracle) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(0, 1);
  const HyperCube c = cube_from(2, 5, 7, [&](auto, auto, auto) { return d(rng); });
  const HyperCube u = upsample(c, 3);
  for (std::size_t b = 0; b < 2; ++b) {
    const auto ref = oracle::upsample_plane(oracle::plane(c, b), 5, 7, 3);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(u.band(b)[i], ref[i], 1e-6);
  }
}

TEST(Upsample, ConstantsAreReproduced) {
  const HyperCube c = cube_from(1, 3, 4, [](auto, auto, auto) { return -3.5; });
  const HyperCube u = upsample(c, 5);
  for (float v : u.data()) EXPECT_NEAR(v, -3.5f, 1e-6);
}

TEST(Upsample, AffineRampReproducedAwayFromBorders) {
  const std::size_t n = 10, r = 4;
  const HyperCube c = cube_from(1, n, n, [](auto, auto i, auto j) { return 0.2 * i - 0.1 * j + 1.0; });
  const HyperCube u = upsample(c, r);
  for (std::size_t y = 2 * r; y < (n - 2) * r; ++y)
    for (std::size_t x = 2 * r; x < (n - 2) * r; ++x)
      EXPECT_NEAR(u.at(0, y, x), 0.2 * y / double(r) - 0.1 * x / double(r) + 1.0, 1e-5);
}

TEST(Upsample, DegradeWithDeltaPsfRecoversInput) {
  const HyperCube c = cube_from(2, 8, 8, [](auto b, auto i, auto j) {
    return 2.0 + std::sin(2 * std::numbers::pi * i / 8.0) * std::cos(2 * std::numbers::pi * (j + b) / 8.0);
  });
  const HyperCube back = degrade(upsample(c, 3), Kernel::identity(), 3);
  for (std::size_t i = 0; i < c.data().size(); ++i) EXPECT_NEAR(back.data()[i], c.data()[i], 1e-3 * std::abs(c.data()[i]));
}

TEST(Upsample, RejectsRatioBelowTwo) {
  EXPECT_THROW(upsample(HyperCube::zeros(1, 2, 2), 1), Error);
}

TEST(MtfKernel, MatchesNyquistGain) {
  const Kernel k = mtf_kernel(0.3, 6, 41);
  EXPECT_NEAR(kernel_response(k, 1.0 / 12.0), 0.3, 1e-3);
  // The full 2-D transform at (f, 0) agrees with the separable row response.
  double re = 0.0;
  for (std::size_t u = 0; u < 41; ++u)
    for (std::size_t v = 0; v < 41; ++v)
      re += k.at(u, v) * std::cos(2 * std::numbers::pi / 12.0 * (static_cast<double>(v) - 20.0));
  EXPECT_NEAR(re, 0.3, 1e-3);
}

TEST(MtfKernel, HighGainApproachesDelta) {
  const Kernel k = mtf_kernel(0.9999, 2, 5);
  EXPECT_GT(k.at(2, 2), 0.99);
}

TEST(MtfKernel, SumsToOne) {
  for (double g : {0.1, 0.3, 0.5, 0.9})
    for (std::size_t r : {2u, 3u, 6u}) EXPECT_NEAR(mtf_kernel(g, r, default_mtf_size(r)).sum(), 1.0, 1e-12);
}

TEST(MtfKernel, RejectsBadSizes) {
  EXPECT_THROW(mtf_kernel(0.3, 6, 40), Error);
  EXPECT_THROW(mtf_kernel(0.3, 6, 11), Error);
  EXPECT_THROW(mtf_kernel(1.0, 6, 41), Error);
}

TEST(SensorModel, ValidateChecksInvariants) {
  SensorModel m{{0.5, 0.5}, Kernel::uniform(3), 2, {0.3, 0.3}};
  EXPECT_NO_THROW(m.validate(2));
  auto bad = m;
  bad.response = {0.6, 0.6};
  EXPECT_THROW(bad.validate(2), Error);
  bad = m;
  bad.ratio = 1;
  EXPECT_THROW(bad.validate(2), Error);
  bad = m;
  bad.psf = Kernel{2, {0.25, 0.25, 0.25, 0.25}};
  EXPECT_THROW(bad.validate(2), Error);
  const SensorModel sel = SensorModel{{0.2, 0.3, 0.5}, Kernel::identity(), 2, {0.3, 0.4, 0.5}}.select_bands({true, false, true});
  EXPECT_NEAR(sel.response[0], 0.2 / 0.7, 1e-15);
  EXPECT_EQ(sel.mtf_gain_nyquist, (std::vector<double>{0.3, 0.5}));
}
