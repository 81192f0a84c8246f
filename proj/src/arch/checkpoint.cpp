#include "sista/arch/checkpoint.hpp"

#include <json.hpp>

#include "sista/error.hpp"
#include "sista/io/binary.hpp"

namespace sista::arch {

namespace {
constexpr char kMagic[4] = {'S', 'S', 'T', 'A'};
constexpr std::uint8_t kVersion = 1;
}  // namespace

const Blob* Checkpoint::find(const std::string& name) const {
  for (const auto& b : blobs)
    if (b.name == name) return &b;
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  if (!nlohmann::json::accept(ckpt.header_json))
    throw_invalid("checkpoint header is not valid JSON");
  io::ByteWriter w;
  w.raw(kMagic, 4);
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.header_json.size()));
  w.str(ckpt.header_json);
  w.u32(static_cast<std::uint32_t>(ckpt.blobs.size()));
  for (const auto& b : ckpt.blobs) {
    if (tensor::numel_of(b.shape) != b.values.size())
      throw Error(ErrorCode::kShapeMismatch, "checkpoint blob '" + b.name +
                                                 "' has " + std::to_string(b.values.size()) +
                                                 " values for shape " + shape_to_string(b.shape));
    if (b.shape.size() > 255) throw_invalid("checkpoint blob rank too large");
    w.u32(static_cast<std::uint32_t>(b.name.size()));
    w.str(b.name);
    w.u8(static_cast<std::uint8_t>(b.shape.size()));
    for (std::size_t d : b.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : b.values) w.f32(v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin()))
    throw FormatError("not an SSTA checkpoint", 0);
  io::ByteReader r(bytes, "SSTA");
  char magic[4];
  r.raw(magic, 4);
  const std::size_t version_at = r.offset();
  const std::uint8_t version = r.u8();
  if (version != kVersion)
    throw FormatError("unsupported version " + std::to_string(version), version_at);
  Checkpoint ckpt;
  const std::uint32_t header_len = r.u32();
  const std::size_t header_at = r.offset();
  ckpt.header_json = r.str(header_len);
  if (!nlohmann::json::accept(ckpt.header_json))
    throw FormatError("checkpoint header is not valid JSON", header_at);
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    Blob b;
    const std::uint32_t name_len = r.u32();
    b.name = r.str(name_len);
    const std::uint8_t rank = r.u8();
    for (std::uint8_t k = 0; k < rank; ++k) b.shape.push_back(r.u32());
    const std::size_t n = tensor::numel_of(b.shape);
    if (n > r.remaining() / 4)
      throw FormatError("SSTA: truncated file, blob '" + b.name + "' is incomplete",
                        r.offset());
    b.values.resize(n);
    for (float& v : b.values) v = r.f32();
    ckpt.blobs.push_back(std::move(b));
  }
  if (r.remaining() != 0) throw FormatError("unexpected trailing bytes", r.offset());
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

template <typename T>
Blob tensor_blob(const std::string& name, const Tensor<T>& t) {
  Blob b{name, t.shape(), {}};
  b.values.reserve(t.numel());
  for (T v : t.data()) b.values.push_back(static_cast<float>(v));
  return b;
}

template <typename T>
std::vector<Blob> params_to_blobs(const ParamStore<T>& params) {
  std::vector<Blob> out;
  for (const auto& [name, t] : params.entries()) out.push_back(tensor_blob(name, t));
  return out;
}

template <typename T>
void load_params(ParamStore<T>& params, const Checkpoint& ckpt) {
  for (auto& [name, t] : params.entries()) {
    const Blob* b = ckpt.find(name);
    if (!b) throw Error(ErrorCode::kFormat, "checkpoint lacks parameter '" + name + "'");
    if (b->shape != t.shape())
      throw_shape_mismatch("load_params(" + name + ")", t.shape(), b->shape);
  }
  for (auto& entry : params.entries()) {
    Tensor<T> t = entry.second;
    const Blob* b = ckpt.find(entry.first);
    auto dst = t.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(b->values[i]);
  }
}

template Blob tensor_blob(const std::string&, const Tensor<float>&);
template Blob tensor_blob(const std::string&, const Tensor<double>&);
template std::vector<Blob> params_to_blobs(const ParamStore<float>&);
template std::vector<Blob> params_to_blobs(const ParamStore<double>&);
template void load_params(ParamStore<float>&, const Checkpoint&);
template void load_params(ParamStore<double>&, const Checkpoint&);

}  // namespace sista::arch
