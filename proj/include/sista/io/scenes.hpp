#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sista/io/image.hpp"

namespace sista::io {

// Procedural test targets, shipped as PGM under scenes/:
//   glyph    - binary block letters inside a ring
//   texture  - grayscale gradient with sinusoidal texture and a bright disk
//   stripes  - binary bar groups of decreasing period (resolution target)
Image builtin_scene(std::string_view name, std::size_t size = 64);
std::vector<std::string> builtin_scene_names();

}  // namespace sista::io
