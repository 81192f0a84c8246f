#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sista::forward {

enum class PatternKind : std::uint8_t {
  kBernoulli = 0,
  kGaussianSpeckle = 1,
  kHadamardSubset = 2,
};

std::string_view pattern_kind_name(PatternKind kind);
PatternKind parse_pattern_kind(std::string_view name);

// Stack of n_meas flattened H x W illumination patterns (row-major, one row
// per measurement). Entries lie in [0, 1].
struct MeasurementMatrix {
  std::size_t n_meas = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  PatternKind kind = PatternKind::kBernoulli;
  std::uint64_t seed = 0;
  std::vector<double> patterns;

  std::size_t n_pix() const { return height * width; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(patterns).subspan(i * n_pix(), n_pix());
  }
  double sampling_ratio() const {
    return static_cast<double>(n_meas) / static_cast<double>(n_pix());
  }
  bool is_binary() const;
};

// Percentage with two decimals, e.g. "2.93%".
std::string format_sampling_ratio(double ratio);

// Number of measurements for a requested ratio of N_P. A ratio that is a
// whole number of hundredths of a percent is read as a quoted value: the
// roundest count whose percentage is within 0.01 of it wins (0.97% of 320x320
// gives 1000). Other ratios round to nearest. Always at least 1.
std::size_t measurements_for_ratio(double ratio, std::size_t height,
                                   std::size_t width);

struct NoiseSpec {
  double gaussian_sigma = 0.0;  // fraction of the mean noiseless signal
  double poisson_scale = 0.0;   // photons per unit intensity; 0 = off
  std::uint64_t seed = 0;

  bool active() const { return gaussian_sigma > 0 || poisson_scale > 0; }
};

// Stress preset mimicking scattering plus shot noise.
NoiseSpec underwater_noise(std::uint64_t seed);

struct MeasurementVector {
  std::vector<double> values;
  NoiseSpec noise;
  // Absolute standard deviation of the additive Gaussian term that was applied.
  double applied_sigma = 0.0;
};

// bernoulli: iid {0,1} with p = 0.5.
// gaussian-speckle: white noise smoothed by a Gaussian (sigma 1 px),
//   standardized, mapped to 0.5 + z/6 and clipped to [0, 1]; stored at f32
//   precision.
// hadamard-subset: first n_meas rows of a seeded permutation of the Sylvester
//   Hadamard matrix, mapped to {0, 1}; H*W must be a power of 4.
MeasurementMatrix make_patterns(PatternKind kind, std::size_t n_meas,
                                std::size_t height, std::size_t width,
                                std::uint64_t seed);

// y = Phi x, then Poisson resampling (if enabled), then additive Gaussian noise.
MeasurementVector measure(const MeasurementMatrix& m, std::span<const double> x,
                          const NoiseSpec& noise);

struct SpimData {
  MeasurementMatrix matrix;
  MeasurementVector measurements;
};

std::vector<std::uint8_t> encode_spim(const MeasurementMatrix& m,
                                      const MeasurementVector& y);
SpimData decode_spim(const std::vector<std::uint8_t>& bytes);

void save_measurements(const std::filesystem::path& path,
                       const MeasurementMatrix& m, const MeasurementVector& y);
SpimData load_measurements(const std::filesystem::path& path);

}  // namespace sista::forward
