#include "sista/io/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sista/error.hpp"

namespace sista::io {

namespace {

void fill_rect(Image& img, double y0, double x0, double y1, double x1,
               double value) {
  const double s = static_cast<double>(img.height);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double fy = (y + 0.5) / s, fx = (x + 0.5) / s;
      if (fy >= y0 && fy < y1 && fx >= x0 && fx < x1) img.at(y, x) = value;
    }
}

Image glyph(std::size_t n) {
  Image img(n, n, 0.0);
  const double s = static_cast<double>(n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double dy = (y + 0.5) / s - 0.5, dx = (x + 0.5) / s - 0.5;
      const double r = std::hypot(dy, dx);
      if (r > 0.40 && r < 0.47) img.at(y, x) = 1.0;
    }
  // "T"
  fill_rect(img, 0.25, 0.20, 0.34, 0.48, 1.0);
  fill_rect(img, 0.34, 0.30, 0.72, 0.38, 1.0);
  // "L"
  fill_rect(img, 0.25, 0.54, 0.72, 0.62, 1.0);
  fill_rect(img, 0.63, 0.62, 0.72, 0.80, 1.0);
  return img;
}

Image texture(std::size_t n) {
  Image img(n, n);
  const double s = static_cast<double>(n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double fy = (y + 0.5) / s, fx = (x + 0.5) / s;
      double v = 0.15 + 0.45 * fx;
      v += 0.12 * std::sin(2 * std::numbers::pi * 4 * fy) *
           std::cos(2 * std::numbers::pi * 3 * fx);
      if (std::hypot(fy - 0.35, fx - 0.65) < 0.16) v = 0.9;
      if (fy > 0.7 && fy < 0.85 && fx > 0.15 && fx < 0.45) v = 0.05;
      img.at(y, x) = std::clamp(v, 0.0, 1.0);
    }
  return img;
}

Image stripes(std::size_t n) {
  Image img(n, n, 0.0);
  // Vertical bars in the top half, horizontal in the bottom half; periods in
  // pixels shrink left to right.
  const std::size_t periods[] = {8, 6, 4, 3};
  const std::size_t group = n / 4;
  for (std::size_t gi = 0; gi < 4; ++gi) {
    const std::size_t p = std::max<std::size_t>(2, periods[gi] * n / 64);
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = gi * group + 1; x + 1 < (gi + 1) * group; ++x) {
        if (y >= 4 * n / 64 && y < n / 2 - 2 * n / 64) {
          if ((x - gi * group) % p < p / 2) img.at(y, x) = 1.0;
        } else if (y >= n / 2 + 2 * n / 64 && y < n - 4 * n / 64) {
          if (y % p < p / 2) img.at(y, x) = 1.0;
        }
      }
  }
  return img;
}

}  // namespace

Image builtin_scene(std::string_view name, std::size_t size) {
  if (size < 8) throw_invalid("builtin_scene: size must be >= 8");
  if (name == "glyph") return glyph(size);
  if (name == "texture") return texture(size);
  if (name == "stripes") return stripes(size);
  throw_invalid("unknown builtin scene '" + std::string(name) +
                "' (expected glyph, texture or stripes)");
}

std::vector<std::string> builtin_scene_names() {
  return {"glyph", "texture", "stripes"};
}

}  // namespace sista::io
