#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gabornoise/error.hpp"
#include "gabornoise/noise.hpp"
#include "gabornoise/rng.hpp"
#include "support/oracles.hpp"

using namespace gabornoise;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<std::pair<double, double>> as_pairs(const PointLattice& l) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : l.points) out.emplace_back(p.x, p.y);
  return out;
}

}  // namespace

TEST(GaborKernel, OriginIsMagnitude) {
  EXPECT_DOUBLE_EQ(eval_gabor_kernel(GaborKernelParams(1.0, 2.0, 5.0, 1.1), 0.0, 0.0), 1.0);
}

TEST(GaborKernel, ZeroFrequencyIsGaussian) {
  EXPECT_NEAR(eval_gabor_kernel(GaborKernelParams(1.0, 1.0, 0.0, 0.0), 1.0, 0.0), std::exp(-kPi), 1e-15);
  EXPECT_NEAR(std::exp(-kPi), 0.043214, 1e-6);
}

TEST(GaborKernel, RejectsInvalidParameters) {
  EXPECT_THROW(GaborKernelParams(0.0, 1.0, 1.0, 0.0), Error);
  EXPECT_THROW(GaborKernelParams(1.0, 0.0, 1.0, 0.0), Error);
  EXPECT_THROW(GaborKernelParams(1.0, 1.0, -0.1, 0.0), Error);
  EXPECT_THROW(GaborKernelParams(1.0, 1.0, 1.0, NAN), Error);
  EXPECT_NO_THROW(GaborKernelParams(1.0, 1.0, 0.0, 0.0));
}

TEST(GaborKernel, OrientationReducedToHalfTurn) {
  for (double w : {-7.0, -kPi, -0.5, 0.0, 1.0, kPi, 3.5 * kPi, 100.0}) {
    const GaborKernelParams p(1.0, 1.0, 1.0, w);
    EXPECT_GE(p.omega(), 0.0) << w;
    EXPECT_LT(p.omega(), kPi) << w;
  }
}

TEST(GaborKernel, EnvelopeBoundAndHalfTurnInvariance) {
  SplitMix64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    const double kappa = rng.uniform(0.1, 3.0);
    const double sigma = rng.uniform(0.01, 2.0);
    const double lambda = rng.uniform(0.0, 2.0);
    const double omega = rng.uniform(-10.0, 10.0);
    const double x = rng.uniform(-30.0, 30.0);
    const double y = rng.uniform(-30.0, 30.0);
    const double v = eval_gabor_kernel(GaborKernelParams(kappa, sigma, lambda, omega), x, y);
    const double envelope = kappa * std::exp(-kPi * sigma * sigma * (x * x + y * y));
    ASSERT_LE(std::abs(v), envelope + 1e-15);
    const double shifted = eval_gabor_kernel(GaborKernelParams(kappa, sigma, lambda, omega + kPi), x, y);
    ASSERT_NEAR(v, shifted, 1e-12);
  }
}

TEST(GaborKernel, DenseGridMatchesClosedForm) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const double sigma = rng.uniform(0.02, 0.5);
    const double lambda = rng.uniform(0.0, 0.7);
    const double omega = rng.uniform(0.0, kPi);
    const GaborKernelParams p(1.0, sigma, lambda, omega);
    for (int y = -11; y <= 11; ++y) {
      for (int x = -11; x <= 11; ++x) {
        ASSERT_NEAR(eval_gabor_kernel(p, x, y), oracle::gabor(1.0, sigma, lambda, p.omega(), x, y), 1e-14);
      }
    }
  }
}

TEST(GaborKernel, PixelUnitMapping) {
  const GaborKernelParams p = kernel_from_pixel_units(4.0, 8.0, 0.0);
  // Envelope exp(-pi s^2 r^2) = exp(-r^2 / (2 * 4^2)) and period 8 px.
  EXPECT_NEAR(eval_gabor_kernel(p, 0.0, 4.0), std::exp(-0.5), 1e-14);
  EXPECT_NEAR(eval_gabor_kernel(p, 8.0, 0.0), std::exp(-64.0 / 32.0), 1e-14);
  EXPECT_NEAR(eval_gabor_kernel(p, 4.0, 0.0), -std::exp(-16.0 / 32.0), 1e-14);
  EXPECT_THROW(kernel_from_pixel_units(0.0, 1.0, 0.0), Error);
  EXPECT_THROW(kernel_from_pixel_units(1.0, 0.0, 0.0), Error);
}

TEST(Lattice, PointCountFormula) {
  // round(270^2 / 23^2) = round(137.83)
  EXPECT_EQ(lattice_point_count(224, 224, 23, 1.0), 138u);
  EXPECT_EQ(lattice_point_count(32, 32, 23, 1.0), 12u);
  EXPECT_EQ(lattice_point_count(10, 20, 5, 2.0), 48u);
  EXPECT_THROW(scatter_points(1, 1, 100, 0.01, 0), Error);
  try {
    scatter_points(1, 1, 100, 0.01, 0);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::zero_points);
  }
}

TEST(Lattice, DeterministicAndInBounds) {
  const auto a = scatter_points(64, 48, 23, 1.5, 99);
  const auto b = scatter_points(64, 48, 23, 1.5, 99);
  ASSERT_EQ(a.size(), lattice_point_count(64, 48, 23, 1.5));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.points[i].x, b.points[i].x);
    EXPECT_EQ(a.points[i].y, b.points[i].y);
    EXPECT_GE(a.points[i].x, -23.0);
    EXPECT_LT(a.points[i].x, 64.0 + 23.0);
    EXPECT_GE(a.points[i].y, -23.0);
    EXPECT_LT(a.points[i].y, 48.0 + 23.0);
    EXPECT_EQ(a.weights[i], 1.0);
  }
  EXPECT_NO_THROW(a.validate(64, 48, 23));
  const auto c = scatter_points(64, 48, 23, 1.5, 100);
  EXPECT_NE(a.points[0].x, c.points[0].x);
}

TEST(Lattice, UniformOverPaddedRectangle) {
  // 10^4 scatters on a 4x4 grid of the padded rectangle, chi-square at 1e-4.
  const int w = 10;
  const int h = 6;
  const int k = 5;
  std::vector<std::size_t> counts(16, 0);
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto lattice = scatter_points(w, h, k, 1.0, mix_seed(42, s));
    for (const auto& p : lattice.points) {
      const int cx = std::min(3, static_cast<int>((p.x + k) / (w + 2.0 * k) * 4.0));
      const int cy = std::min(3, static_cast<int>((p.y + k) / (h + 2.0 * k) * 4.0));
      ++counts[static_cast<std::size_t>(cy * 4 + cx)];
    }
  }
  EXPECT_LT(oracle::chi_square_uniform(counts), oracle::kChiSquare15At1em4);
}

TEST(Lattice, ValidateRejectsBadLattices) {
  PointLattice l;
  l.points = {{0.0, 0.0}};
  EXPECT_THROW(l.validate(4, 4, 2), Error);
  l.weights = {1.0};
  EXPECT_NO_THROW(l.validate(4, 4, 2));
  l.points[0].x = 7.5;
  EXPECT_THROW(l.validate(4, 4, 2), Error);
}

TEST(Synthesis, SinglePointEqualsSampledKernel) {
  AnisotropicNoiseParams params;
  params.theta = {3.0, 0.7, 5.0};
  params.kernel_size = 9;
  PointLattice l;
  l.points = {{16.0, 16.0}};
  l.weights = {1.0};
  const NoiseField f = synth_gabor_noise(params, l, 33, 33);
  const GaborKernelParams k = params.kernel();
  for (int y = 0; y < 33; ++y) {
    for (int x = 0; x < 33; ++x) {
      const double dx = x - 16.0;
      const double dy = y - 16.0;
      const double expect = (std::abs(dx) <= 9 && std::abs(dy) <= 9) ? eval_gabor_kernel(k, dx, dy) : 0.0;
      ASSERT_EQ(f.at(x, y), expect);
    }
  }
  EXPECT_FALSE(f.normalized());
}

TEST(Synthesis, LinearInLattice) {
  AnisotropicNoiseParams params;
  params.theta = {2.5, 1.2, 4.0};
  params.kernel_size = 11;
  const auto a = scatter_points(40, 30, 11, 1.0, 1);
  const auto b = scatter_points(40, 30, 11, 2.0, 2);
  const auto fa = synth_gabor_noise(params, a, 40, 30);
  const auto fb = synth_gabor_noise(params, b, 40, 30);
  const auto fab = synth_gabor_noise(params, a.concat(b), 40, 30);
  const auto faa = synth_gabor_noise(params, a.concat(a), 40, 30);
  for (std::size_t i = 0; i < fab.values().size(); ++i) {
    ASSERT_NEAR(fab.values()[i], fa.values()[i] + fb.values()[i], 1e-12);
    ASSERT_NEAR(faa.values()[i], 2.0 * fa.values()[i], 1e-12);
  }
}

TEST(Synthesis, MatchesNaiveAccumulation) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    AnisotropicNoiseParams params;
    params.theta = {rng.uniform(1.5, 9.0), rng.uniform(0.0, kPi), rng.uniform(1.5, 9.0)};
    params.kernel_size = 23;
    PointLattice l;
    for (int i = 0; i < 100; ++i) {
      l.points.push_back({rng.uniform(-23.0, 87.0), rng.uniform(-23.0, 87.0)});
      l.weights.push_back(rng.uniform(-1.0, 1.0));
    }
    const auto field = synth_gabor_noise(params, l, 64, 64);
    const GaborKernelParams k = params.kernel();
    const auto naive = oracle::naive_synthesis(k.sigma(), k.lambda_freq(), k.omega(), 23, as_pairs(l), l.weights, 64, 64);
    for (std::size_t i = 0; i < naive.size(); ++i) ASSERT_NEAR(field.values()[i], naive[i], 1e-9);
  }
}

TEST(Synthesis, HalfTurnGivesSameField) {
  AnisotropicNoiseParams a;
  a.theta = {4.0, 0.4, 6.0};
  a.seed = 17;
  AnisotropicNoiseParams b = a;
  b.theta.omega += kPi;
  const auto fa = make_gabor_noise(a, 48, 48);
  const auto fb = make_gabor_noise(b, 48, 48);
  for (std::size_t i = 0; i < fa.values().size(); ++i) ASSERT_NEAR(fa.values()[i], fb.values()[i], 1e-12);
}

TEST(Normalize, MapsExtremesToUnit) {
  const NoiseField f(3, 1, {-2.0, 0.0, 2.0}, false);
  const NoiseField n = normalize_field(f);
  EXPECT_TRUE(n.normalized());
  EXPECT_EQ(n.values(), (std::vector<double>{-1.0, 0.0, 1.0}));
}

TEST(Normalize, ConstantFieldIsDegenerate) {
  const NoiseField f(4, 4, std::vector<double>(16, 3.5), false);
  try {
    normalize_field(f);
    FAIL() << "expected DegenerateField";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_field);
  }
}

TEST(Normalize, RandomFieldsHaveZeroMeanUnitPeak) {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(37 * 23);
    const double offset = rng.uniform(-100.0, 100.0);
    const double scale = rng.uniform(0.001, 1000.0);
    for (double& x : v) x = offset + scale * rng.symmetric();
    const NoiseField n = normalize_field(NoiseField(37, 23, v, false));
    double mean = 0.0;
    double peak = 0.0;
    for (double x : n.values()) {
      mean += x;
      peak = std::max(peak, std::abs(x));
    }
    mean /= static_cast<double>(v.size());
    EXPECT_LE(std::abs(mean), 1e-9);
    EXPECT_NEAR(peak, 1.0, 1e-6);
  }
}

TEST(Normalize, RejectsAlreadyNormalized) {
  const NoiseField n = normalize_field(NoiseField(2, 1, {0.0, 1.0}, false));
  EXPECT_THROW(normalize_field(n), Error);
}

TEST(Noise, SeededDeterminism) {
  AnisotropicNoiseParams p;
  p.theta = {5.0, 2.0, 3.0};
  p.seed = 1234;
  const auto a = make_gabor_noise(p, 32, 40);
  const auto b = make_gabor_noise(p, 32, 40);
  EXPECT_EQ(a.values(), b.values());
  p.seed = 1235;
  EXPECT_NE(make_gabor_noise(p, 32, 40).values(), a.values());
}

TEST(Noise, ParamsValidation) {
  AnisotropicNoiseParams p;
  p.theta = {1.0, 0.0, 1.0};
  p.kernel_size = 0;
  EXPECT_THROW(p.validate(), Error);
  p.kernel_size = 3;
  p.theta.sigma = INFINITY;
  EXPECT_THROW(p.validate(), Error);
}
