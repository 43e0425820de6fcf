#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hsharp/gsa.hpp"
#include "hsharp/scene.hpp"
#include "oracles.hpp"

using namespace hsharp;

namespace {

HyperCube random_cube(std::size_t bands, std::size_t rows, std::size_t cols, unsigned seed, double lo = 0.0,
                      double hi = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<float> v(bands * rows * cols);
  for (auto& x : v) x = static_cast<float>(u(rng));
  return HyperCube(bands, rows, cols, std::move(v));
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  return oracle::cov(a, b) / std::sqrt(oracle::cov(a, a) * oracle::cov(b, b));
}

}  // namespace

TEST(GsaWeights, PanEqualToFirstBand) {
  const HyperCube hs = random_cube(4, 10, 10, 1);
  const PanImage pan(10, 10, std::vector<float>(hs.band(0).begin(), hs.band(0).end()));
  const GsaWeights w = gsa_weights(hs, pan);
  EXPECT_NEAR(w.band[0], 1.0, 1e-6);
  for (std::size_t b = 1; b < 4; ++b) EXPECT_NEAR(w.band[b], 0.0, 1e-6);
  EXPECT_NEAR(w.intercept, 0.0, 1e-6);
}

TEST(GsaWeights, RecoversKnownLinearCombination) {
  const HyperCube hs = random_cube(5, 20, 20, 2);
  std::vector<float> p(400);
  for (std::size_t i = 0; i < 400; ++i) p[i] = static_cast<float>(2.0 * hs.band(0)[i] + 3.0 * hs.band(1)[i] + 5.0);
  const GsaWeights w = gsa_weights(hs, PanImage(20, 20, p));
  const std::vector<double> expect{2, 3, 0, 0, 0};
  for (std::size_t b = 0; b < 5; ++b) EXPECT_NEAR(w.band[b], expect[b], 1e-5);
  EXPECT_NEAR(w.intercept, 5.0, 1e-5);
}

TEST(GsaWeights, SingleBandMatchesClosedFormSlope) {
  const HyperCube hs = random_cube(1, 16, 16, 3);
  std::mt19937 rng(9);
  std::normal_distribution<double> nd(0.0, 0.1);
  std::vector<float> p(256);
  for (std::size_t i = 0; i < 256; ++i) p[i] = static_cast<float>(0.7 * hs.band(0)[i] + nd(rng));
  const GsaWeights w = gsa_weights(hs, PanImage(16, 16, p));
  const auto x = oracle::plane(hs, 0);
  const std::vector<double> y(p.begin(), p.end());
  const double slope = oracle::cov(x, y) / oracle::cov(x, x);
  EXPECT_NEAR(w.band[0], slope, 1e-6);
  EXPECT_NEAR(w.intercept, oracle::mean(y) - slope * oracle::mean(x), 1e-6);
}

TEST(GsaWeights, UnderdeterminedIsRejected) {
  const HyperCube hs = random_cube(10, 3, 3, 4);
  EXPECT_THROW(gsa_weights(hs, PanImage(3, 3, std::vector<float>(9, 1.0f))), Error);
}

TEST(GsaSharpen, MatchesStepByStepOracle) {
  // Two bands, 12x12 pan, ratio 2, 3x3 box PSF.
  SensorModel model{{0.5, 0.5}, Kernel::uniform(3), 2, {0.3, 0.3}};
  const HyperCube hs = random_cube(2, 6, 6, 5, 0.5, 1.5);
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<float> p(144);
  for (auto& v : p) v = static_cast<float>(u(rng));
  const PanImage pan(12, 12, p);
  const auto [fused, art] = gsa_sharpen(hs, pan, model);
  const auto ref = oracle::gsa(hs, pan, model);
  ASSERT_EQ(fused.bands(), 2u);
  ASSERT_EQ(fused.rows(), 12u);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 144; ++i) EXPECT_NEAR(fused.band(b)[i], ref[b][i], 1e-4) << b << " " << i;
  EXPECT_EQ(art.weights.size(), 3u);
}

TEST(GsaSharpen, ConstantHyperspectralGivesDegenerateIntensity) {
  SensorModel model{{1.0}, Kernel::identity(), 2, {0.3}};
  const HyperCube hs(1, 4, 4, std::vector<float>(16, 2.0f));
  const HyperCube noise = random_cube(1, 8, 8, 7);
  const PanImage pan(8, 8, noise.data());
  try {
    gsa_sharpen(hs, pan, model);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numerical);
  }
}

TEST(GsaSharpen, ZeroDetailLeavesUpsampledBands) {
  // When pan is itself the synthetic intensity, matching is the identity and
  // no detail is injected.
  SensorModel model{{0.5, 0.5}, Kernel::identity(), 2, {0.3, 0.3}};
  const HyperCube hs = random_cube(2, 6, 6, 8, 1.0, 2.0);
  const HyperCube up = upsample(hs, 2);
  // With a delta PSF, pan = 0.3*up0 + 0.7*up1 + 0.1 degrades to exactly that
  // combination of the hs bands, so the regression recovers it.
  std::vector<float> p(144);
  for (std::size_t i = 0; i < 144; ++i) p[i] = static_cast<float>(0.3 * up.band(0)[i] + 0.7 * up.band(1)[i] + 0.1);
  const auto [fused, art] = gsa_sharpen(hs, PanImage(12, 12, p), model);
  for (std::size_t i = 0; i < fused.data().size(); ++i) EXPECT_NEAR(fused.data()[i], up.data()[i], 1e-5);
}

TEST(GsaSharpen, DetailInjectionIdentity) {
  const SyntheticScene s = make_scene(48, 48, 6, 3, 4, 0.0, 21);
  const auto [fused, art] = gsa_sharpen(s.hs, s.pan, s.model);
  const HyperCube up = upsample(s.hs, 4);
  for (std::size_t b = 0; b < 6; ++b)
    for (std::size_t i = 0; i < fused.pixels(); ++i)
      EXPECT_NEAR(fused.band(b)[i] - up.band(b)[i], art.gains[b] * (art.matched_pan[i] - art.intensity[i]), 1e-6);
}

TEST(GsaSharpen, AffinePanChangeIsAbsorbed) {
  const SyntheticScene s = make_scene(48, 48, 6, 3, 4, 0.0, 22);
  std::vector<float> p = s.pan.data();
  for (auto& v : p) v = 3.0f * v + 0.25f;
  const HyperCube a = gsa_sharpen(s.hs, s.pan, s.model).first;
  const HyperCube b = gsa_sharpen(s.hs, PanImage(48, 48, p, s.pan.gsd_m()), s.model).first;
  for (std::size_t i = 0; i < a.data().size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-5);
}

TEST(GsaSharpen, DegradedFusionCorrelatesWithInput) {
  for (std::size_t ratio : {2u, 4u}) {
    const SyntheticScene s = make_scene(48, 48, 8, 3, ratio, 0.0, 30 + ratio);
    const HyperCube back = degrade(gsa_sharpen(s.hs, s.pan, s.model).first, s.model);
    for (std::size_t b = 0; b < 8; ++b) EXPECT_GE(correlation(oracle::plane(back, b), oracle::plane(s.hs, b)), 0.99);
  }
}

TEST(GsaSharpen, ShapeMismatchIsRejected) {
  SensorModel model{{1.0}, Kernel::identity(), 2, {0.3}};
  EXPECT_THROW(gsa_sharpen(random_cube(1, 4, 4, 1), PanImage(9, 8, std::vector<float>(72)), model), Error);
}
