#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sista/arch/model.hpp"

namespace sista::arch {

struct Blob {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

// SSTA layout (little-endian): "SSTA", version u8 = 1, u32 header length,
// JSON header, u32 blob count, then per blob: u32 name length, name, u8 rank,
// rank x u32 dims, f32 values.
struct Checkpoint {
  std::string header_json = "{}";
  std::vector<Blob> blobs;

  const Blob* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Parameter blobs named after the store entries.
template <typename T>
std::vector<Blob> params_to_blobs(const ParamStore<T>& params);

// Copies every stored parameter from the checkpoint; names and shapes must
// match exactly.
template <typename T>
void load_params(ParamStore<T>& params, const Checkpoint& ckpt);

template <typename T>
Blob tensor_blob(const std::string& name, const Tensor<T>& t);

}  // namespace sista::arch
