#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "sista/error.hpp"
#include "sista/forward/measurement.hpp"
#include "sista/io/binary.hpp"

namespace sista::forward {
namespace {

MeasurementMatrix dense(std::size_t rows, std::size_t h, std::size_t w,
                        std::vector<double> values) {
  MeasurementMatrix m;
  m.n_meas = rows;
  m.height = h;
  m.width = w;
  m.patterns = std::move(values);
  return m;
}

std::vector<double> random_image(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = u(rng);
  return x;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         (name + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
}

TEST(Patterns, BernoulliMeanIsOneHalf) {
  const auto m = make_patterns(PatternKind::kBernoulli, 1000, 32, 32, 7);
  ASSERT_EQ(m.patterns.size(), 1000u * 1024u);
  double mean = 0;
  for (double v : m.patterns) {
    ASSERT_TRUE(v == 0.0 || v == 1.0);
    mean += v;
  }
  mean /= static_cast<double>(m.patterns.size());
  EXPECT_NEAR(mean, 0.5, 0.02);
  EXPECT_TRUE(m.is_binary());
}

TEST(Patterns, SamplingRatioFormatting) {
  MeasurementMatrix m;
  m.height = m.width = 320;
  m.n_meas = 3000;
  EXPECT_EQ(format_sampling_ratio(m.sampling_ratio()), "2.93%");
  m.n_meas = 6000;
  EXPECT_EQ(format_sampling_ratio(m.sampling_ratio()), "5.86%");
  m.n_meas = 10000;
  EXPECT_EQ(format_sampling_ratio(m.sampling_ratio()), "9.77%");
}

TEST(Patterns, RatioToMeasurementCount) {
  EXPECT_EQ(measurements_for_ratio(0.0293, 320, 320), 3000u);
  EXPECT_EQ(measurements_for_ratio(0.0097, 320, 320), 1000u);
  EXPECT_EQ(measurements_for_ratio(0.0977, 320, 320), 10000u);
  EXPECT_EQ(measurements_for_ratio(0.0586, 320, 320), 6000u);
  EXPECT_EQ(measurements_for_ratio(0.01, 64, 64), 41u);
  EXPECT_EQ(measurements_for_ratio(0.123456, 100, 100), 1235u);
  EXPECT_EQ(measurements_for_ratio(0.10, 64, 64), 410u);
  EXPECT_THROW(measurements_for_ratio(0.0, 8, 8), Error);
  EXPECT_THROW(measurements_for_ratio(1.5, 8, 8), Error);
}

TEST(Patterns, DeterministicForSeed) {
  for (auto kind : {PatternKind::kBernoulli, PatternKind::kGaussianSpeckle,
                    PatternKind::kHadamardSubset}) {
    const auto a = make_patterns(kind, 20, 8, 8, 42);
    const auto b = make_patterns(kind, 20, 8, 8, 42);
    const auto c = make_patterns(kind, 20, 8, 8, 43);
    EXPECT_EQ(a.patterns, b.patterns) << pattern_kind_name(kind);
    EXPECT_NE(a.patterns, c.patterns) << pattern_kind_name(kind);
  }
}

TEST(Patterns, SpeckleIsClippedToUnitInterval) {
  const auto m = make_patterns(PatternKind::kGaussianSpeckle, 50, 16, 16, 3);
  double lo = 1, hi = 0;
  for (double v : m.patterns) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LE(hi, 1.0);
  EXPECT_GT(hi - lo, 0.5);
}

TEST(Patterns, HadamardRowsAreBalancedAndDistinct) {
  const auto m = make_patterns(PatternKind::kHadamardSubset, 16, 4, 4, 1);
  std::set<std::vector<double>> rows;
  for (std::size_t i = 0; i < m.n_meas; ++i) {
    const auto r = m.row(i);
    rows.emplace(r.begin(), r.end());
    double ones = 0;
    for (double v : r) ones += v;
    EXPECT_TRUE(ones == 8 || ones == 16);
  }
  EXPECT_EQ(rows.size(), 16u);
}

TEST(Patterns, HadamardRejectsIncompatibleSize) {
  try {
    make_patterns(PatternKind::kHadamardSubset, 4, 6, 6, 1);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("pad"), std::string::npos);
  }
}

TEST(Patterns, ParsesKindNames) {
  for (auto kind : {PatternKind::kBernoulli, PatternKind::kGaussianSpeckle,
                    PatternKind::kHadamardSubset})
    EXPECT_EQ(parse_pattern_kind(pattern_kind_name(kind)), kind);
  EXPECT_THROW(parse_pattern_kind("sobol"), Error);
}

TEST(Measure, IdentityMatrixReturnsImage) {
  const auto m = dense(2, 1, 2, {1, 0, 0, 1});
  const auto y = measure(m, std::vector<double>{0.2, 0.8}, {});
  EXPECT_EQ(y.values, (std::vector<double>{0.2, 0.8}));
}

TEST(Measure, AllOnesRowSums) {
  const std::size_t np = 25;
  const auto m = dense(1, 5, 5, std::vector<double>(np, 1.0));
  const auto y = measure(m, std::vector<double>(np, 0.3), {});
  EXPECT_NEAR(y.values[0], 0.3 * np, 1e-12);
}

TEST(Measure, SizeMismatchThrows) {
  const auto m = make_patterns(PatternKind::kBernoulli, 4, 4, 4, 1);
  try {
    measure(m, std::vector<double>(15, 0.0), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(Measure, LinearWithoutNoise) {
  const auto m = make_patterns(PatternKind::kGaussianSpeckle, 30, 8, 8, 9);
  const auto x1 = random_image(64, 1), x2 = random_image(64, 2);
  const double a = 0.3, b = -1.7;
  std::vector<double> mix(64);
  for (std::size_t i = 0; i < 64; ++i) mix[i] = a * x1[i] + b * x2[i];
  const auto y1 = measure(m, x1, {}), y2 = measure(m, x2, {});
  const auto ym = measure(m, mix, {});
  for (std::size_t i = 0; i < m.n_meas; ++i)
    EXPECT_NEAR(ym.values[i], a * y1.values[i] + b * y2.values[i], 1e-12);
}

TEST(Measure, GaussianNoiseIsUnbiased) {
  const auto m = make_patterns(PatternKind::kBernoulli, 16, 8, 8, 5);
  const auto x = random_image(64, 11);
  const auto clean = measure(m, x, {});
  std::vector<double> acc(m.n_meas, 0.0);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const auto y = measure(m, x, NoiseSpec{0.01, 0.0, static_cast<std::uint64_t>(t)});
    for (std::size_t i = 0; i < m.n_meas; ++i) acc[i] += y.values[i];
  }
  const auto a = measure(m, x, NoiseSpec{0.01, 0.0, 1});
  const auto b = measure(m, x, NoiseSpec{0.01, 0.0, 2});
  EXPECT_NE(a.values, b.values);
  EXPECT_GT(a.applied_sigma, 0.0);
  for (std::size_t i = 0; i < m.n_meas; ++i)
    EXPECT_NEAR(acc[i] / trials, clean.values[i], 1e-3 * clean.values[i]);
}

TEST(Measure, PoissonNoiseStaysNearSignal) {
  const auto m = make_patterns(PatternKind::kBernoulli, 16, 8, 8, 5);
  const auto x = random_image(64, 4);
  const auto clean = measure(m, x, {});
  const auto noisy = measure(m, x, underwater_noise(3));
  for (std::size_t i = 0; i < m.n_meas; ++i) {
    EXPECT_NE(noisy.values[i], clean.values[i]);
    EXPECT_NEAR(noisy.values[i], clean.values[i], 0.5 * clean.values[i]);
  }
}

TEST(Spim, RoundTripIsBitExact) {
  for (auto kind : {PatternKind::kBernoulli, PatternKind::kGaussianSpeckle,
                    PatternKind::kHadamardSubset}) {
    const auto m = make_patterns(kind, 13, 4, 4, 77);
    const auto y = measure(m, random_image(16, 8), NoiseSpec{0.02, 100.0, 99});
    const auto back = decode_spim(encode_spim(m, y));
    EXPECT_EQ(back.matrix.patterns, m.patterns);
    EXPECT_EQ(back.matrix.kind, kind);
    EXPECT_EQ(back.matrix.seed, 77u);
    EXPECT_EQ(back.matrix.height, 4u);
    EXPECT_EQ(back.matrix.n_meas, 13u);
    EXPECT_EQ(back.measurements.values, y.values);
    EXPECT_EQ(back.measurements.noise.gaussian_sigma, 0.02);
    EXPECT_EQ(back.measurements.noise.poisson_scale, 100.0);
    EXPECT_EQ(back.measurements.noise.seed, 99u);
    EXPECT_EQ(back.measurements.applied_sigma, y.applied_sigma);
  }
}

TEST(Spim, SaveLoadFileAndDeterminism) {
  const auto m = make_patterns(PatternKind::kBernoulli, 41, 8, 8, 5);
  const auto y = measure(m, random_image(64, 6), {});
  const auto p1 = temp_path("spim_a.spim"), p2 = temp_path("spim_b.spim");
  save_measurements(p1, m, y);
  save_measurements(p2, make_patterns(PatternKind::kBernoulli, 41, 8, 8, 5),
                    measure(m, random_image(64, 6), {}));
  EXPECT_EQ(io::read_file(p1), io::read_file(p2));
  const auto back = load_measurements(p1);
  EXPECT_EQ(back.measurements.values, y.values);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST(Spim, RejectsWrongMagic) {
  auto bytes = encode_spim(make_patterns(PatternKind::kBernoulli, 2, 2, 2, 1),
                           MeasurementVector{{1.0, 2.0}, {}, 0.0});
  bytes[0] = 'X';
  try {
    decode_spim(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("not an SPIM file"), std::string::npos);
    EXPECT_EQ(e.byte_offset(), 0u);
  }
}

TEST(Spim, RejectsUnsupportedVersion) {
  auto bytes = encode_spim(make_patterns(PatternKind::kBernoulli, 2, 2, 2, 1),
                           MeasurementVector{{1.0, 2.0}, {}, 0.0});
  bytes[4] = 255;
  try {
    decode_spim(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported version"), std::string::npos);
    EXPECT_EQ(e.byte_offset(), 4u);
  }
}

TEST(Spim, RejectsTruncationWithOffset) {
  const auto full = encode_spim(make_patterns(PatternKind::kGaussianSpeckle, 3, 2, 2, 1),
                                MeasurementVector{{1.0, 2.0, 3.0}, {}, 0.0});
  for (std::size_t cut : {std::size_t{2}, std::size_t{9}, full.size() / 2, full.size() - 1}) {
    std::vector<std::uint8_t> bytes(full.begin(), full.begin() + cut);
    try {
      decode_spim(bytes);
      FAIL() << "cut " << cut;
    } catch (const FormatError& e) {
      EXPECT_LE(e.byte_offset(), cut);
    }
  }
}

TEST(Spim, RejectsTrailingBytesAndBadEncoding) {
  auto bytes = encode_spim(make_patterns(PatternKind::kBernoulli, 2, 2, 2, 1),
                           MeasurementVector{{1.0, 2.0}, {}, 0.0});
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(decode_spim(extra), FormatError);
  bytes[18] = 7;
  EXPECT_THROW(decode_spim(bytes), FormatError);
}

TEST(Spim, LoadMissingFileIsIoError) {
  try {
    load_measurements("/nonexistent/dir/x.spim");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/x.spim"), std::string::npos);
  }
}

}  // namespace
}  // namespace sista::forward
