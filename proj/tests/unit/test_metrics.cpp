#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "sista/error.hpp"
#include "sista/io/scenes.hpp"
#include "sista/metrics/metrics.hpp"

namespace sista::metrics {
namespace {

using io::Image;

Image random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Image img(h, w);
  for (double& v : img.pixels) v = u(rng);
  return img;
}

Image add(const Image& a, double c) {
  Image b = a;
  for (double& v : b.pixels) v += c;
  return b;
}

double tv_energy(const Image& u, const Image& f, double weight) {
  double fit = 0, tv = 0;
  for (std::size_t y = 0; y < u.height; ++y)
    for (std::size_t x = 0; x < u.width; ++x) {
      fit += 0.5 * std::pow(u.at(y, x) - f.at(y, x), 2);
      const double gx = x + 1 < u.width ? u.at(y, x + 1) - u.at(y, x) : 0.0;
      const double gy = y + 1 < u.height ? u.at(y + 1, x) - u.at(y, x) : 0.0;
      tv += std::hypot(gx, gy);
    }
  return fit + weight * tv;
}

TEST(Psnr, IdenticalIsFlaggedInfinite) {
  const Image a = random_image(8, 8, 1);
  const auto r = psnr(a, a);
  EXPECT_TRUE(r.identical);
  EXPECT_TRUE(std::isinf(r.db));
}

TEST(Psnr, ConstantOffsets) {
  const Image a = random_image(8, 8, 1);
  EXPECT_NEAR(psnr(a, add(a, 0.1)).db, 20.0, 1e-9);
  EXPECT_NEAR(psnr(a, add(a, 0.01)).db, 40.0, 1e-9);
  EXPECT_NEAR(psnr(add(a, 0.1), a).db, psnr(a, add(a, 0.1)).db, 1e-12);
}

TEST(Psnr, ShapeMismatch) {
  try {
    psnr(Image(2, 3), Image(3, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(Psnr, DecreasesWithNoiseLevel) {
  const Image a = io::builtin_scene("texture");
  std::vector<double> means;
  for (double sigma : {0.01, 0.02, 0.05}) {
    double acc = 0;
    for (int t = 0; t < 20; ++t) {
      std::mt19937_64 rng(100 + t);
      std::normal_distribution<double> g(0, sigma);
      Image b = a;
      for (double& v : b.pixels) v += g(rng);
      acc += psnr(a, b).db;
    }
    means.push_back(acc / 20);
  }
  EXPECT_GT(means[0], means[1]);
  EXPECT_GT(means[1], means[2]);
}

TEST(Ssim, IdentityAndSymmetry) {
  const Image a = random_image(20, 24, 3), b = random_image(20, 24, 4);
  EXPECT_NEAR(ssim(a, a).value, 1.0, 1e-12);
  EXPECT_FALSE(ssim(a, a).global_fallback);
  EXPECT_NEAR(ssim(a, b).value, ssim(b, a).value, 1e-12);
  EXPECT_LT(ssim(a, b).value, 0.2);
}

TEST(Ssim, InvertedBinaryImageIsNegative) {
  const Image a = io::builtin_scene("glyph");
  Image b = a;
  for (double& v : b.pixels) v = 1.0 - v;
  EXPECT_LT(ssim(a, b).value, 0.0);
}

TEST(Ssim, EqualConstantsGiveOne) {
  EXPECT_NEAR(ssim(Image(16, 16, 0.3), Image(16, 16, 0.3)).value, 1.0, 1e-12);
  EXPECT_NEAR(ssim(Image(4, 4, 0.0), Image(4, 4, 0.0)).value, 1.0, 1e-12);
}

TEST(Ssim, SmallImageFallsBackToGlobal) {
  const Image a = random_image(6, 6, 5);
  const auto r = ssim(a, a);
  EXPECT_TRUE(r.global_fallback);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
}

TEST(Ssim, MatchesGlobalFormulaForWindowSizedImage) {
  // An 11x11 image has a single window; with uniform structure the weighted
  // and unweighted moments coincide for a constant-plus-offset pair.
  const Image a(11, 11, 0.4), b(11, 11, 0.6);
  const double c1 = 1e-4;
  const double expected = (2 * 0.4 * 0.6 + c1) / (0.16 + 0.36 + c1);
  EXPECT_NEAR(ssim(a, b).value, expected, 1e-12);
}

TEST(Cnr, PinnedEstimator) {
  // Target pixels 0.8; background alternates 0.1 / 0.3 -> mean 0.2, std 0.1.
  Image img(1, 6);
  img.pixels = {0.8, 0.8, 0.1, 0.3, 0.1, 0.3};
  const Mask t{1, 1, 0, 0, 0, 0}, b{0, 0, 1, 1, 1, 1};
  EXPECT_NEAR(cnr(img, t, b), 6.0, 1e-12);
  EXPECT_NEAR(cnr(add(img, 0.37), t, b), 6.0, 1e-9);
}

TEST(Cnr, ConstantImageIsDegenerate) {
  try {
    cnr(Image(2, 2, 0.5), Mask{1, 0, 0, 0}, Mask{0, 1, 1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerate);
    EXPECT_NE(std::string(e.what()).find("degenerate background"), std::string::npos);
  }
}

TEST(Cnr, MaskValidation) {
  const Image img = random_image(2, 2, 1);
  EXPECT_THROW(cnr(img, Mask{1, 1, 0, 0}, Mask{0, 1, 1, 1}), Error);
  EXPECT_THROW(cnr(img, Mask{0, 0, 0, 0}, Mask{0, 1, 1, 1}), Error);
  EXPECT_THROW(cnr(img, Mask{1, 0, 0}, Mask{0, 1, 1, 1}), Error);
}

TEST(Otsu, SeparatesBimodalImage) {
  Image img(1, 100);
  for (std::size_t i = 0; i < 100; ++i) img.pixels[i] = i < 70 ? 0.2 : 0.8;
  const double t = otsu_threshold(img);
  EXPECT_GT(t, 0.2);
  EXPECT_LE(t, 0.8);
}

TEST(Morphology, OpeningRemovesIsolatedPixel) {
  Image img(7, 7, 0.0);
  img.at(3, 3) = 1.0;
  for (double v : open3(img).pixels) EXPECT_EQ(v, 0.0);
  Image block(7, 7, 0.0);
  for (int y = 1; y < 5; ++y)
    for (int x = 1; x < 5; ++x) block.at(y, x) = 1.0;
  EXPECT_EQ(open3(block).pixels, block.pixels);
}

TEST(Morphology, ClosingFillsIsolatedHole) {
  Image img(7, 7, 1.0);
  img.at(3, 3) = 0.0;
  for (double v : close3(img).pixels) EXPECT_EQ(v, 1.0);
}

TEST(Median, RemovesImpulse) {
  Image img(5, 5, 0.2);
  img.at(2, 2) = 1.0;
  EXPECT_DOUBLE_EQ(median3(img).at(2, 2), 0.2);
}

TEST(Tv, ZeroWeightIsIdentity) {
  const Image f = io::builtin_scene("glyph", 16);
  const Image u = tv_denoise(f, 1e-9, 200);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(u.pixels[i], f.pixels[i], 1e-6);
}

TEST(Tv, LowersEnergyAndBeatsPerturbations) {
  const Image clean = io::builtin_scene("glyph", 16);
  Image f = clean;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0, 0.1);
  for (double& v : f.pixels) v += g(rng);
  const double weight = 0.1;
  const Image u = tv_denoise(f, weight, 500);
  const double e = tv_energy(u, f, weight);
  EXPECT_LT(e, tv_energy(f, f, weight));
  std::uniform_real_distribution<double> d(-1e-3, 1e-3);
  for (int t = 0; t < 20; ++t) {
    Image p = u;
    for (double& v : p.pixels) v += d(rng);
    EXPECT_LE(e, tv_energy(p, f, weight) + 1e-6);
  }
}

TEST(PseudoGt, ConstantImageIsDegenerateZero) {
  const auto r = pseudo_gt(Image(8, 8, 0.6));
  EXPECT_TRUE(r.degenerate);
  for (double v : r.image.pixels) EXPECT_EQ(v, 0.0);
}

TEST(PseudoGt, OutputRangeAndIdempotence) {
  // Blob-like binary targets are fixed points of the median and morphology
  // stages; only the TV contrast loss remains between passes.
  Image disk(64, 64, 0.0), block(64, 64, 0.0);
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      if (std::hypot(y - 31.5, x - 31.5) < 16) disk.at(y, x) = 1.0;
      if (y >= 16 && y < 48 && x >= 12 && x < 40) block.at(y, x) = 1.0;
    }
  for (const Image* clean : {&disk, &block}) {
    const auto first = pseudo_gt(*clean);
    EXPECT_FALSE(first.degenerate);
    double lo = 1, hi = 0;
    for (double v : first.image.pixels) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    EXPECT_DOUBLE_EQ(lo, 0.0);
    EXPECT_DOUBLE_EQ(hi, 1.0);
    const auto second = pseudo_gt(first.image);
    double mad = 0;
    for (std::size_t i = 0; i < clean->size(); ++i)
      mad += std::abs(second.image.pixels[i] - first.image.pixels[i]);
    EXPECT_LE(mad / clean->size(), 1e-3);
  }
}

TEST(PseudoGt, CleansNoisyTarget) {
  const Image clean = io::builtin_scene("glyph");
  Image raw = clean;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 0.15);
  for (double& v : raw.pixels) v = std::clamp(0.2 + 0.6 * v + g(rng), 0.0, 1.0);
  const auto r = pseudo_gt(raw);
  EXPECT_GT(psnr(clean, r.image).db, psnr(clean, raw).db);
}

TEST(Csv, AppendsHeaderOnce) {
  const auto path = std::filesystem::temp_directory_path() / "sista_metrics.csv";
  std::filesystem::remove(path);
  MetricReport r;
  r.scene = "glyph";
  r.method = "dgi";
  r.ratio = 0.1;
  r.psnr = {std::numeric_limits<double>::infinity(), true};
  r.ssim = {1.0, false};
  r.seed = 7;
  append_metric_row(path, r);
  r.has_cnr = true;
  r.cnr = 2.5;
  append_metric_row(path, r);
  std::ifstream in(path);
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  EXPECT_EQ(l1, kMetricCsvHeader);
  EXPECT_EQ(l2, "glyph,dgi,0.100000,inf,1.000000,,7,ground-truth");
  EXPECT_EQ(l3, "glyph,dgi,0.100000,inf,1.000000,2.500000,7,ground-truth");
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace sista::metrics
