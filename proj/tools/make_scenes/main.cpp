// Regenerates the shipped scenes/*.pgm from the procedural definitions.
#include <filesystem>
#include <iostream>

#include "sista/io/image.hpp"
#include "sista/io/scenes.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "scenes";
  std::filesystem::create_directories(dir);
  for (const auto& name : sista::io::builtin_scene_names()) {
    const auto path = dir / (name + ".pgm");
    sista::io::write_pgm(path, sista::io::builtin_scene(name));
    std::cout << path.string() << "\n";
  }
  return 0;
}
