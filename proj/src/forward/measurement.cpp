#include "sista/forward/measurement.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "sista/error.hpp"
#include "sista/io/binary.hpp"

namespace sista::forward {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'I', 'M'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kKindMask = 0x03;
constexpr std::uint8_t kSeedTrailer = 0x80;
constexpr std::uint8_t kEncodingBits = 0;
constexpr std::uint8_t kEncodingF32 = 1;

void smooth_gaussian(std::vector<double>& img, std::size_t h, std::size_t w,
                     double sigma) {
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> taps(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k)
    taps[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
  const double norm = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= norm;
  auto reflect = [](int i, int n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
    return std::clamp(i, 0, n - 1);
  };
  std::vector<double> tmp(img.size());
  const int H = static_cast<int>(h), W = static_cast<int>(w);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0;
      for (int k = -radius; k <= radius; ++k)
        acc += taps[k + radius] * img[y * W + reflect(x + k, W)];
      tmp[y * W + x] = acc;
    }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0;
      for (int k = -radius; k <= radius; ++k)
        acc += taps[k + radius] * tmp[reflect(y + k, H) * W + x];
      img[y * W + x] = acc;
    }
}

bool is_power_of_four(std::size_t n) {
  return n > 0 && std::has_single_bit(n) && (std::countr_zero(n) % 2 == 0);
}

}  // namespace

std::string_view pattern_kind_name(PatternKind kind) {
  switch (kind) {
    case PatternKind::kBernoulli: return "bernoulli";
    case PatternKind::kGaussianSpeckle: return "gaussian-speckle";
    case PatternKind::kHadamardSubset: return "hadamard-subset";
  }
  return "unknown";
}

PatternKind parse_pattern_kind(std::string_view name) {
  if (name == "bernoulli") return PatternKind::kBernoulli;
  if (name == "gaussian-speckle") return PatternKind::kGaussianSpeckle;
  if (name == "hadamard-subset") return PatternKind::kHadamardSubset;
  throw_invalid("unknown pattern kind '" + std::string(name) +
                "' (expected bernoulli, gaussian-speckle or hadamard-subset)");
}

bool MeasurementMatrix::is_binary() const {
  return std::all_of(patterns.begin(), patterns.end(),
                     [](double v) { return v == 0.0 || v == 1.0; });
}

std::string format_sampling_ratio(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", ratio * 100.0);
  return buf;
}

std::size_t measurements_for_ratio(double ratio, std::size_t height,
                                   std::size_t width) {
  if (!(ratio > 0.0) || ratio > 1.0)
    throw_invalid("sampling ratio must be in (0, 1], got " + std::to_string(ratio));
  const double np = static_cast<double>(height * width);
  const double exact = ratio * np;
  std::size_t best = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(exact)));
  // A ratio quoted as a two-decimal percentage stands for any count whose
  // percentage lies within 0.01 of it; prefer the roundest such count.
  const double hundredths = ratio * 1e4;
  if (std::abs(hundredths - std::round(hundredths)) > 1e-6) return best;
  const double lo = (ratio - 1e-4) * np, hi = (ratio + 1e-4) * np;
  auto zeros = [](std::size_t n) {
    int z = 0;
    while (n > 0 && n % 10 == 0) {
      n /= 10;
      ++z;
    }
    return z;
  };
  for (auto n = static_cast<std::size_t>(std::max(1.0, std::floor(lo)));
       static_cast<double>(n) < hi; ++n) {
    if (static_cast<double>(n) <= lo) continue;
    const int zn = zeros(n), zb = zeros(best);
    if (zn > zb || (zn == zb && std::abs(n - exact) < std::abs(best - exact)))
      best = n;
  }
  return best;
}

NoiseSpec underwater_noise(std::uint64_t seed) {
  return NoiseSpec{0.05, 1e4, seed};
}

MeasurementMatrix make_patterns(PatternKind kind, std::size_t n_meas,
                                std::size_t height, std::size_t width,
                                std::uint64_t seed) {
  if (n_meas < 1) throw_invalid("make_patterns: n_meas must be >= 1");
  if (height * width < 1) throw_invalid("make_patterns: empty image");
  MeasurementMatrix m;
  m.n_meas = n_meas;
  m.height = height;
  m.width = width;
  m.kind = kind;
  m.seed = seed;
  const std::size_t np = m.n_pix();
  m.patterns.resize(n_meas * np);
  std::mt19937_64 rng(seed);
  switch (kind) {
    case PatternKind::kBernoulli: {
      // One random word supplies 64 fair bits.
      std::uint64_t word = 0;
      int left = 0;
      for (double& v : m.patterns) {
        if (left == 0) {
          word = rng();
          left = 64;
        }
        v = static_cast<double>(word & 1u);
        word >>= 1;
        --left;
      }
      break;
    }
    case PatternKind::kGaussianSpeckle: {
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::vector<double> field(np);
      for (std::size_t r = 0; r < n_meas; ++r) {
        for (double& v : field) v = gauss(rng);
        smooth_gaussian(field, height, width, 1.0);
        double mu = 0, var = 0;
        for (double v : field) mu += v;
        mu /= static_cast<double>(np);
        for (double v : field) var += (v - mu) * (v - mu);
        const double sd = np > 1 ? std::sqrt(var / static_cast<double>(np)) : 1.0;
        for (std::size_t p = 0; p < np; ++p) {
          const double z = sd > 0 ? (field[p] - mu) / sd : 0.0;
          const double v = std::clamp(0.5 + z / 6.0, 0.0, 1.0);
          m.patterns[r * np + p] = static_cast<double>(static_cast<float>(v));
        }
      }
      break;
    }
    case PatternKind::kHadamardSubset: {
      if (!is_power_of_four(np)) {
        throw_invalid("hadamard-subset patterns need H*W to be a power of 4 (got " +
                      std::to_string(height) + "x" + std::to_string(width) +
                      "); pad the scene to a square power-of-two size");
      }
      if (n_meas > np)
        throw_invalid("hadamard-subset: n_meas exceeds the number of Hadamard rows");
      std::vector<std::size_t> rows(np);
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      std::shuffle(rows.begin(), rows.end(), rng);
      for (std::size_t r = 0; r < n_meas; ++r)
        for (std::size_t p = 0; p < np; ++p)
          m.patterns[r * np + p] = (std::popcount(rows[r] & p) % 2 == 0) ? 1.0 : 0.0;
      break;
    }
  }
  return m;
}

MeasurementVector measure(const MeasurementMatrix& m, std::span<const double> x,
                          const NoiseSpec& noise) {
  if (x.size() != m.n_pix()) {
    throw Error(ErrorCode::kShapeMismatch,
                "measure: image has " + std::to_string(x.size()) +
                    " pixels, patterns expect " + std::to_string(m.n_pix()));
  }
  if (noise.gaussian_sigma < 0 || noise.poisson_scale < 0)
    throw_invalid("measure: noise parameters must be non-negative");
  MeasurementVector y;
  y.noise = noise;
  y.values.resize(m.n_meas);
  for (std::size_t i = 0; i < m.n_meas; ++i) {
    const auto row = m.row(i);
    double acc = 0;
    for (std::size_t p = 0; p < row.size(); ++p) acc += row[p] * x[p];
    y.values[i] = acc;
  }
  if (!noise.active()) return y;

  std::mt19937_64 rng(noise.seed);
  const double mean_signal =
      std::accumulate(y.values.begin(), y.values.end(), 0.0) /
      static_cast<double>(y.values.size());
  if (noise.poisson_scale > 0) {
    for (double& v : y.values) {
      const double photons = std::max(0.0, v * noise.poisson_scale);
      std::poisson_distribution<long long> shot(photons);
      v = photons > 0 ? static_cast<double>(shot(rng)) / noise.poisson_scale : 0.0;
    }
  }
  if (noise.gaussian_sigma > 0) {
    y.applied_sigma = noise.gaussian_sigma * std::abs(mean_signal);
    std::normal_distribution<double> gauss(0.0, y.applied_sigma);
    for (double& v : y.values) v += gauss(rng);
  }
  return y;
}

std::vector<std::uint8_t> encode_spim(const MeasurementMatrix& m,
                                      const MeasurementVector& y) {
  if (y.values.size() != m.n_meas)
    throw Error(ErrorCode::kShapeMismatch, "encode_spim: measurement count mismatch");
  if (m.patterns.size() != m.n_meas * m.n_pix())
    throw Error(ErrorCode::kShapeMismatch, "encode_spim: pattern buffer size mismatch");
  io::ByteWriter w;
  w.raw(kMagic, 4);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(static_cast<std::uint8_t>(m.kind) & kKindMask) |
       kSeedTrailer);
  w.u32(static_cast<std::uint32_t>(m.height));
  w.u32(static_cast<std::uint32_t>(m.width));
  w.u32(static_cast<std::uint32_t>(m.n_meas));
  const bool binary = m.is_binary();
  w.u8(binary ? kEncodingBits : kEncodingF32);
  if (binary) {
    // Whole matrix as one LSB-first bitstream, zero-padded to a byte.
    std::uint8_t byte = 0;
    int bit = 0;
    for (double v : m.patterns) {
      if (v != 0.0) byte |= static_cast<std::uint8_t>(1u << bit);
      if (++bit == 8) {
        w.u8(byte);
        byte = 0;
        bit = 0;
      }
    }
    if (bit) w.u8(byte);
  } else {
    for (double v : m.patterns) w.f32(static_cast<float>(v));
  }
  for (double v : y.values) w.f64(v);
  w.f64(y.noise.gaussian_sigma);
  w.f64(y.noise.poisson_scale);
  w.f64(y.applied_sigma);
  w.u64(y.noise.seed);
  w.u64(m.seed);
  return w.take();
}

SpimData decode_spim(const std::vector<std::uint8_t>& bytes) {
  io::ByteReader r(bytes, "SPIM");
  char magic[4] = {};
  if (bytes.size() < 4) throw FormatError("not an SPIM file", 0);
  r.raw(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("not an SPIM file", 0);
  const std::size_t version_at = r.offset();
  const std::uint8_t version = r.u8();
  if (version != kVersion)
    throw FormatError("unsupported version " + std::to_string(version), version_at);
  const std::size_t flags_at = r.offset();
  const std::uint8_t flags = r.u8();
  if ((flags & kKindMask) > 2 || (flags & ~(kKindMask | kSeedTrailer)) != 0)
    throw FormatError("invalid flags byte", flags_at);
  SpimData out;
  MeasurementMatrix& m = out.matrix;
  m.kind = static_cast<PatternKind>(flags & kKindMask);
  const std::size_t dims_at = r.offset();
  m.height = r.u32();
  m.width = r.u32();
  m.n_meas = r.u32();
  if (m.height == 0 || m.width == 0 || m.n_meas == 0)
    throw FormatError("zero image size or measurement count", dims_at);
  const std::size_t enc_at = r.offset();
  const std::uint8_t encoding = r.u8();
  const std::size_t count = m.n_meas * m.n_pix();
  m.patterns.resize(count);
  if (encoding == kEncodingBits) {
    std::vector<std::uint8_t> packed((count + 7) / 8);
    r.raw(packed.data(), packed.size());
    for (std::size_t i = 0; i < count; ++i)
      m.patterns[i] = (packed[i / 8] >> (i % 8)) & 1u ? 1.0 : 0.0;
  } else if (encoding == kEncodingF32) {
    for (double& v : m.patterns) v = r.f32();
  } else {
    throw FormatError("unknown pattern encoding " + std::to_string(encoding), enc_at);
  }
  MeasurementVector& y = out.measurements;
  y.values.resize(m.n_meas);
  for (double& v : y.values) v = r.f64();
  y.noise.gaussian_sigma = r.f64();
  y.noise.poisson_scale = r.f64();
  y.applied_sigma = r.f64();
  y.noise.seed = r.u64();
  if (flags & kSeedTrailer) m.seed = r.u64();
  if (r.remaining() != 0) throw FormatError("unexpected trailing bytes", r.offset());
  return out;
}

void save_measurements(const std::filesystem::path& path,
                       const MeasurementMatrix& m, const MeasurementVector& y) {
  io::write_file(path, encode_spim(m, y));
}

SpimData load_measurements(const std::filesystem::path& path) {
  return decode_spim(io::read_file(path));
}

}  // namespace sista::forward
