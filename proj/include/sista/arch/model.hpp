#pragma once

#include <cstdint>
#include <string>

#include "sista/arch/blocks.hpp"

namespace sista::arch {

// Architecture switches used by the ablation variants.
struct ModelVariant {
  bool proximal = true;       // false: O_P := O_F, no encoder/decoder/alpha
  bool latent_wmb = true;     // false: conv stacks replace the latent WMBs
  bool res2mm_fidelity = true;  // false: plain mini UNet fidelity network
  bool local_windows = true;  // false: window partitioning disabled
};

template <typename T>
struct ModelOutputs {
  Tensor<T> fidelity;   // O_F [1, 1, H, W]
  Tensor<T> latent;     // O_SE
  Tensor<T> sparse;     // Feat_sp
  Tensor<T> proximal;   // O_P [1, 1, H, W]
  Tensor<T> lambda;     // [1]
};

// I ~ U(0, 1)^{H x W}, shaped [1, 1, H, W].
template <typename T>
Tensor<T> make_input_noise(std::size_t height, std::size_t width, std::uint64_t seed);

template <typename T>
class SistaModel {
 public:
  SistaModel(const BlockHyper& hyper, const ModelVariant& variant,
             const ThresholdBounds& bounds, std::uint64_t init_seed,
             double alpha_init = 0.1);

  ModelOutputs<T> forward(const Tensor<T>& input) const;

  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  bool has_alpha() const { return alpha_.defined(); }
  const Tensor<T>& alpha() const { return alpha_; }
  const BlockHyper& hyper() const { return hyper_; }
  const ModelVariant& variant() const { return variant_; }
  const ThresholdBounds& bounds() const { return bounds_; }

  // Test hooks.
  Res2MmNet<T>& fidelity_net() { return fidelity_; }
  SparsityEncoder<T>& encoder() { return encoder_; }
  SparsityDecoder<T>& decoder() { return decoder_; }

 private:
  BlockHyper hyper_;
  ModelVariant variant_;
  ThresholdBounds bounds_;
  ParamStore<T> params_;
  Res2MmNet<T> fidelity_;
  MiniUnet<T> unet_;
  SparsityEncoder<T> encoder_;
  SparsityDecoder<T> decoder_;
  Tensor<T> alpha_;
};

}  // namespace sista::arch
