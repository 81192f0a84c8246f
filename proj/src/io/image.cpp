#include "sista/io/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sista/error.hpp"

namespace sista::io {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  return tok;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open image '" + path.string() + "'");
  if (next_token(in) != "P5")
    throw Error(ErrorCode::kFormat, "'" + path.string() + "' is not a binary PGM (P5)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token(in));
    h = std::stoul(next_token(in));
    maxval = std::stoul(next_token(in));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kFormat, "'" + path.string() + "': malformed PGM header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535)
    throw Error(ErrorCode::kFormat, "'" + path.string() + "': unsupported PGM geometry");
  in.get();  // single whitespace before raster
  Image img(h, w);
  const bool wide = maxval > 255;
  std::vector<unsigned char> raster(h * w * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(raster.data()),
          static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size()))
    throw Error(ErrorCode::kFormat, "'" + path.string() + "': truncated PGM raster");
  for (std::size_t i = 0; i < h * w; ++i) {
    const unsigned v = wide ? (raster[2 * i] << 8) | raster[2 * i + 1] : raster[i];
    img.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return img;
}

Image quantize8(const Image& image) {
  Image q = image;
  for (double& v : q.pixels) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return q;
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write image '" + path.string() + "'");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> raster(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image.pixels[i], 0.0, 1.0);
    raster[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raster.data()),
            static_cast<std::streamsize>(raster.size()));
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

}  // namespace sista::io
