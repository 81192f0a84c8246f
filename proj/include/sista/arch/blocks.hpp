#pragma once

#include <array>
#include <vector>

#include "sista/arch/params.hpp"

namespace sista::arch {

struct BlockHyper {
  std::size_t base_channels = 32;   // C
  std::size_t n_mamcnn = 3;         // N
  std::size_t window_size = 8;      // w
  std::size_t state_dim = 8;        // d
  std::size_t encoder_downscale = 2;
  std::size_t res_depth = 2;
  std::size_t latent_multiplier = 4;  // C_lat = latent_multiplier * C
  bool branch_pool = false;  // Res2MMB: conv + avg-pool instead of strided conv

  std::size_t latent_channels() const { return latent_multiplier * base_channels; }
  void validate() const;
};

// Visiting orders of the four SS2D sweeps over an H x W grid flattened
// row-major: row-forward, row-backward, column-forward, column-backward.
std::array<std::vector<std::size_t>, 4> ss2d_orders(std::size_t height, std::size_t width);

// Sum of the four directional selective scans of u [N, C, H, W] with shared
// delta [N, C, H, W], B and C [N, S, H, W], per-direction A [C, S] and skip [C].
template <typename T>
Tensor<T> ss2d(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& B,
               const Tensor<T>& C, const std::array<Tensor<T>, 4>& A,
               const std::array<Tensor<T>, 4>& skip);

// group_norm -> 1x1 projection to (u, z) -> silu(dwconv3x3(u)) -> SS2D ->
// gate by silu(z) -> 1x1 output projection -> residual add.
template <typename T>
struct Vssb {
  Tensor<T> norm_gamma, norm_beta;
  Conv<T> in_proj, dwconv, dt_proj, b_proj, c_proj, out_proj;
  std::array<Tensor<T>, 4> a_log, skip;
  std::size_t channels = 0, state = 0;

  static Vssb make(Builder<T> b, std::size_t channels, std::size_t state);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

// Two local VSSBs on w x w windows, then one global VSSB. With
// `local_windows` off the first two VSSBs also run on the whole map.
template <typename T>
struct Wmb {
  Vssb<T> local1, local2, global;
  std::size_t window = 8;
  bool local_windows = true;

  static Wmb make(Builder<T> b, std::size_t channels, std::size_t window,
                  std::size_t state, bool local_windows);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

enum class Res2Order {
  kCoarseToFine,  // X3' feeds X2', X2' feeds X1'
  kIndependent,   // no cross-scale injection (test hook)
};

template <typename T>
struct Res2Mmb {
  Conv<T> branch1, branch2, branch4;
  Conv<T> up32, up21;          // smoothing conv after bilinear x2
  Conv<T> align1, align2, align3;
  Conv<T> fusion;              // 1x1, 3C -> C
  Wmb<T> wmb1, wmb2, wmb3;
  bool branch_pool = false;
  Res2Order order = Res2Order::kCoarseToFine;

  struct Branches {
    Tensor<T> x1, x2, x3;
  };

  static Res2Mmb make(Builder<T> b, const BlockHyper& h, bool local_windows);
  Branches branches(const Tensor<T>& x) const;
  Tensor<T> operator()(const Tensor<T>& x) const;
};

// y = Res2MMB(conv3x3(x)); s = x + y; out = s + conv(relu(conv(s))).
template <typename T>
struct MamCnn {
  Conv<T> conv_in;
  Res2Mmb<T> res2;
  Conv<T> conv_a, conv_b;

  static MamCnn make(Builder<T> b, const BlockHyper& h, bool local_windows);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

template <typename T>
struct ResBlock {
  Conv<T> conv_a, conv_b;
  static ResBlock make(Builder<T> b, std::size_t channels);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

// Fidelity network: head (two 3x3 convs), N MamCNN blocks with a global skip,
// tail (two 3x3 convs) and sigmoid.
template <typename T>
struct Res2MmNet {
  Conv<T> head_a, head_b;
  std::vector<MamCnn<T>> blocks;
  Conv<T> tail_a, tail_b;

  static Res2MmNet make(Builder<T> b, const BlockHyper& h, bool local_windows);
  Tensor<T> head(const Tensor<T>& x) const;
  Tensor<T> operator()(const Tensor<T>& x) const;
};

// Plain three-level skip-connected conv encoder-decoder (ablation c).
template <typename T>
struct MiniUnet {
  Conv<T> enc1a, enc1b, enc2a, enc2b, mid_a, mid_b, dec2a, dec2b, dec1a, dec1b, out;

  static MiniUnet make(Builder<T> b, std::size_t channels);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

// Residual stack of one or more 3x3 convs plus 1x1 convs, sized to match a
// reference parameter count (ablation b).
template <typename T>
struct ConvStack {
  std::vector<Conv<T>> convs;

  static ConvStack make(Builder<T> b, std::size_t channels, std::size_t target_params);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

// Parameter count of a WMB with the given widths, without constructing it.
std::size_t wmb_param_count(std::size_t channels, std::size_t state);

template <typename T>
struct LatentMixer {
  Wmb<T> wmb;
  ConvStack<T> stack;
  bool use_wmb = true;

  static LatentMixer make(Builder<T> b, const BlockHyper& h, bool use_wmb,
                          bool local_windows);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

// Trans (3x3 conv with stride = downscale, relu, 3x3 conv) -> ResSeq -> WMB.
template <typename T>
struct SparsityEncoder {
  Conv<T> trans_a, trans_b;
  std::vector<ResBlock<T>> res;
  LatentMixer<T> mixer;
  std::size_t downscale = 2;

  static SparsityEncoder make(Builder<T> b, const BlockHyper& h, bool use_wmb,
                              bool local_windows);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

// WMB -> ResSeq -> Trans (bilinear x downscale, 3x3 conv, relu) -> tail 3x3
// conv to one channel -> sigmoid, cropped to the requested size.
template <typename T>
struct SparsityDecoder {
  LatentMixer<T> mixer;
  std::vector<ResBlock<T>> res;
  Conv<T> trans, tail;
  std::size_t downscale = 2;

  static SparsityDecoder make(Builder<T> b, const BlockHyper& h, bool use_wmb,
                              bool local_windows);
  Tensor<T> operator()(const Tensor<T>& z, std::size_t height, std::size_t width) const;
};

struct ThresholdBounds {
  double lambda_min = 0.01;
  double lambda_max = 0.5;
  double beta = 20.0;
  void validate() const;
};

// lambda = lambda_min + (lambda_max - lambda_min) * sigmoid(alpha).
double threshold_lambda(double alpha, const ThresholdBounds& bounds = {});

template <typename T>
Tensor<T> threshold_lambda(const Tensor<T>& alpha, const ThresholdBounds& bounds);

// sign(x) * softplus(|x| - lambda; beta), sign detached.
template <typename T>
Tensor<T> learnable_soft_threshold(const Tensor<T>& x, const Tensor<T>& alpha,
                                   const ThresholdBounds& bounds);

}  // namespace sista::arch
