#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "hsharp/metrics.hpp"
#include "hsharp/scene.hpp"
#include "oracles.hpp"

using namespace hsharp;

namespace {

HyperCube random_cube(std::size_t bands, std::size_t rows, std::size_t cols, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<float> v(bands * rows * cols);
  for (auto& x : v) x = static_cast<float>(u(rng));
  return HyperCube(bands, rows, cols, std::move(v));
}

HyperCube map_cube(const HyperCube& c, const std::function<float(float)>& f) {
  std::vector<float> v = c.data();
  for (auto& x : v) x = f(x);
  return HyperCube(c.bands(), c.rows(), c.cols(), std::move(v));
}

HyperCube reverse_bands(const HyperCube& c) {
  std::vector<float> v;
  for (std::size_t b = c.bands(); b-- > 0;) v.insert(v.end(), c.band(b).begin(), c.band(b).end());
  return HyperCube(c.bands(), c.rows(), c.cols(), std::move(v));
}

struct Table2Row {
  double d_lambda, d_s, q;
};

// Full-resolution figures for the two scenes, three methods each.
constexpr Table2Row kTable2[] = {
    {0.00844, 0.55155, 0.44466}, {0.00850, 0.55137, 0.44482}, {0.00811, 0.55199, 0.44437},
    {0.00982, 0.51065, 0.48454}, {0.00988, 0.51036, 0.48480}, {0.00875, 0.51200, 0.48372},
};

}  // namespace

TEST(Uiqi, TwoByTwoBlockMatchesScalarFormula) {
  const HyperCube a(1, 2, 2, {1, 2, 3, 4}), b(1, 2, 2, {2, 4, 6, 8});
  const double q = oracle::q_index({1, 2, 3, 4}, {2, 4, 6, 8});
  // sigma_ab = 2.5, mu_a = 2.5, mu_b = 5, sigma_a^2 = 1.25, sigma_b^2 = 5:
  // 4*2.5*2.5*5 / (6.25 * 31.25) = 0.64.
  EXPECT_NEAR(q, 0.64, 1e-15);
  EXPECT_NEAR(uiqi(a, b, 2), q, 1e-12);
}

TEST(Uiqi, IdentityAndSymmetry) {
  for (unsigned s = 0; s < 5; ++s) {
    const HyperCube a = random_cube(3, 16, 16, s), b = random_cube(3, 16, 16, s + 100);
    EXPECT_NEAR(uiqi(a, a, 8), 1.0, 1e-9);
    EXPECT_NEAR(uiqi(a, b, 8), uiqi(b, a, 8), 1e-14);
    const double q = uiqi(a, b, 8);
    EXPECT_GE(q, -1.0);
    EXPECT_LE(q, 1.0);
  }
}

TEST(Uiqi, ConstantOffsetLowersTheScore) {
  const HyperCube a = random_cube(2, 8, 8, 3);
  EXPECT_LT(uiqi(a, map_cube(a, [](float x) { return x + 50.0f; }), 4), 1.0 - 1e-6);
}

TEST(Uiqi, DegenerateWindowsAreSkippedNotZeroed) {
  // Left half constant zero in both (skipped), right half identical texture.
  std::vector<float> v(64, 0.0f);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 4; c < 8; ++c) v[r * 8 + c] = static_cast<float>(1 + (r * 3 + c) % 5);
  const HyperCube a(1, 8, 8, v);
  EXPECT_NEAR(uiqi(a, a, 4), 1.0, 1e-12);
  EXPECT_THROW(uiqi(HyperCube::zeros(1, 4, 4), HyperCube::zeros(1, 4, 4), 2), Error);
}

TEST(Uiqi, WindowAndShapeValidation) {
  const HyperCube a = random_cube(1, 8, 8, 1);
  EXPECT_THROW(uiqi(a, a, 1), Error);
  EXPECT_THROW(uiqi(a, a, 9), Error);
  EXPECT_THROW(uiqi(a, random_cube(2, 8, 8, 1), 4), Error);
}

TEST(Sam, OrthogonalPixelIsNinetyDegrees) {
  EXPECT_NEAR(sam(HyperCube(2, 1, 1, {1, 0}), HyperCube(2, 1, 1, {0, 1})), 90.0, 1e-12);
  EXPECT_NEAR(sam(HyperCube(2, 1, 1, {1, 0}), HyperCube(2, 1, 1, {1, 1})), 45.0, 1e-12);
}

TEST(Sam, IdentityAndScaleInvariance) {
  const HyperCube a = random_cube(5, 6, 6, 7);
  EXPECT_EQ(sam(a, a), 0.0);
  EXPECT_NEAR(sam(a, map_cube(a, [](float x) { return 2.5f * x; })), 0.0, 1e-5);
  // Per-pixel positive scaling.
  HyperCube scaled = a;
  for (std::size_t i = 0; i < a.pixels(); ++i)
    for (std::size_t b = 0; b < 5; ++b) scaled.band(b)[i] *= static_cast<float>(1 + i);
  EXPECT_NEAR(sam(a, scaled), 0.0, 1e-5);
  const HyperCube other = random_cube(5, 6, 6, 8);
  EXPECT_NEAR(sam(a, other), sam(scaled, other), 1e-5);
}

TEST(Sam, ZeroPixelsAreSkipped) {
  const HyperCube a(2, 1, 2, {1, 0, 0, 0}), b(2, 1, 2, {0, 5, 1, 0});
  EXPECT_NEAR(sam(a, b), 90.0, 1e-12);
  EXPECT_THROW(sam(HyperCube::zeros(2, 1, 1), HyperCube::zeros(2, 1, 1)), Error);
}

TEST(Ergas, ClosedFormSingleBand) {
  // Reference mean 10; test differs by +-1 everywhere, so RMSE is 1.
  const HyperCube ref(1, 2, 2, {9, 11, 9, 11});
  const HyperCube test(1, 2, 2, {10, 10, 10, 10});
  EXPECT_NEAR(ergas(ref, test, 6), 100.0 / 6.0 / 10.0, 1e-12);
}

TEST(Ergas, IdentityAndScaleInvariance) {
  const HyperCube a = random_cube(4, 8, 8, 10), b = random_cube(4, 8, 8, 11);
  EXPECT_EQ(ergas(a, a, 4), 0.0);
  const auto times3 = [](float x) { return 3.0f * x; };
  EXPECT_NEAR(ergas(map_cube(a, times3), map_cube(b, times3), 4), ergas(a, b, 4), 1e-6);
  EXPECT_THROW(ergas(HyperCube::zeros(1, 2, 2), a.blank_like(2, 2, 1.0), 2), Error);
}

TEST(Metrics, BandPermutationEquivariance) {
  const HyperCube a = random_cube(6, 16, 16, 12), b = random_cube(6, 16, 16, 13);
  const HyperCube ra = reverse_bands(a), rb = reverse_bands(b);
  EXPECT_NEAR(uiqi(a, b, 8), uiqi(ra, rb, 8), 1e-12);
  EXPECT_NEAR(sam(a, b), sam(ra, rb), 1e-9);
  EXPECT_NEAR(ergas(a, b, 3), ergas(ra, rb, 3), 1e-9);
}

TEST(DLambda, ZeroWhenDegradationReproducesInput) {
  const SyntheticScene s = make_scene(48, 48, 5, 3, 4, 0.0, 2);
  EXPECT_NEAR(d_lambda_k(s.truth, s.hs, s.model, 12), 0.0, 1e-9);
}

TEST(DLambda, NearOneForUnrelatedNoise) {
  const SyntheticScene s = make_scene(96, 96, 5, 3, 2, 0.0, 3);
  std::mt19937 rng(1);
  std::normal_distribution<double> nd(0.0, 1.0);
  HyperCube noise = s.truth;
  for (float& v : noise.data()) v = static_cast<float>(nd(rng));
  // Zero-mean noise leaves the luminance term near 0, so Q is near 0.
  const double d = d_lambda_k(noise, map_cube(s.hs, [](float x) { return x - 0.05f; }), s.model, 8);
  const HyperCube low = degrade(noise, s.model);
  EXPECT_NEAR(d, 1.0 - uiqi(map_cube(s.hs, [](float x) { return x - 0.05f; }), low, 8), 1e-12);
  EXPECT_GT(d, 0.8);
}

TEST(DSStar, PanAsABandGivesZero) {
  const HyperCube f = random_cube(3, 10, 10, 20);
  const PanImage pan(10, 10, std::vector<float>(f.band(1).begin(), f.band(1).end()));
  EXPECT_NEAR(d_s_star(f, pan), 0.0, 1e-9);
}

TEST(DSStar, ConstantFusedGivesOne) {
  const HyperCube f(2, 4, 4, std::vector<float>(32, 3.0f));
  const HyperCube p = random_cube(1, 4, 4, 21);
  EXPECT_NEAR(d_s_star(f, as_pan(p)), 1.0, 1e-12);
  EXPECT_THROW(d_s_star(random_cube(2, 4, 4, 1), PanImage(4, 4, std::vector<float>(16, 1.0f))), Error);
}

TEST(DSStar, MatchesRegressionOracle) {
  const HyperCube f = random_cube(3, 20, 20, 22);
  std::mt19937 rng(4);
  std::normal_distribution<double> nd(0.0, 0.2);
  std::vector<float> p(400);
  for (std::size_t i = 0; i < 400; ++i) p[i] = static_cast<float>(f.band(1)[i] + nd(rng));
  std::vector<std::vector<double>> cols;
  for (std::size_t b = 0; b < 3; ++b) cols.push_back(oracle::plane(f, b));
  const std::vector<double> y(p.begin(), p.end());
  const Eigen::VectorXd w = oracle::regress(cols, y);
  double ss_res = 0.0, ss_tot = 0.0;
  const double my = oracle::mean(y);
  for (std::size_t i = 0; i < 400; ++i) {
    double fit = w[3];
    for (std::size_t b = 0; b < 3; ++b) fit += w[static_cast<Eigen::Index>(b)] * cols[b][i];
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  EXPECT_NEAR(d_s_star(f, PanImage(20, 20, p)), ss_res / ss_tot, 1e-9);
}

TEST(QStar, ReproducesEveryPublishedRow) {
  for (const auto& row : kTable2) EXPECT_NEAR(q_star(row.d_lambda, row.d_s), row.q, 5e-5) << row.d_lambda;
  EXPECT_EQ(q_star(0.0, 0.0), 1.0);
}
