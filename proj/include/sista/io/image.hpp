#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace sista::io {

// Grayscale image with values nominally in [0, 1], row-major.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), pixels(h * w, fill) {}

  std::size_t size() const { return pixels.size(); }
  double& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
};

// Binary PGM (P5). 8-bit and 16-bit maxval are read; values are scaled to
// [0, 1] by maxval.
Image read_pgm(const std::filesystem::path& path);

// Writes an 8-bit P5 file; values are clipped to [0, 1] and rounded.
void write_pgm(const std::filesystem::path& path, const Image& image);

// Quantization applied by write_pgm, exposed so callers can compare against
// what a reader will see.
Image quantize8(const Image& image);

}  // namespace sista::io
