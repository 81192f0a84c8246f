#include "sista/arch/model.hpp"

#include <random>

#include "sista/tensor/ops.hpp"

namespace sista::arch {

template <typename T>
Tensor<T> make_input_noise(std::size_t height, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<T> v(height * width);
  for (T& x : v) x = static_cast<T>(u(rng));
  return Tensor<T>::from({1, 1, height, width}, std::move(v));
}

template <typename T>
SistaModel<T>::SistaModel(const BlockHyper& hyper, const ModelVariant& variant,
                          const ThresholdBounds& bounds, std::uint64_t init_seed,
                          double alpha_init)
    : hyper_(hyper), variant_(variant), bounds_(bounds) {
  hyper_.validate();
  bounds_.validate();
  std::mt19937_64 rng(init_seed);
  Builder<T> root(params_, rng);
  if (variant_.res2mm_fidelity)
    fidelity_ = Res2MmNet<T>::make(root.child("fidelity"), hyper_, variant_.local_windows);
  else
    unet_ = MiniUnet<T>::make(root.child("fidelity_unet"), hyper_.base_channels);
  if (variant_.proximal) {
    encoder_ = SparsityEncoder<T>::make(root.child("encoder"), hyper_, variant_.latent_wmb,
                                        variant_.local_windows);
    decoder_ = SparsityDecoder<T>::make(root.child("decoder"), hyper_, variant_.latent_wmb,
                                        variant_.local_windows);
    alpha_ = root.constant("alpha", {1}, alpha_init);
  }
}

template <typename T>
ModelOutputs<T> SistaModel<T>::forward(const Tensor<T>& input) const {
  ModelOutputs<T> out;
  out.fidelity = variant_.res2mm_fidelity ? fidelity_(input) : unet_(input);
  if (!variant_.proximal) {
    out.proximal = out.fidelity;
    return out;
  }
  out.latent = encoder_(out.fidelity);
  out.lambda = threshold_lambda(alpha_, bounds_);
  out.sparse = learnable_soft_threshold(out.latent, alpha_, bounds_);
  out.proximal = decoder_(out.sparse, input.dim(2), input.dim(3));
  return out;
}

template Tensor<float> make_input_noise(std::size_t, std::size_t, std::uint64_t);
template Tensor<double> make_input_noise(std::size_t, std::size_t, std::uint64_t);
template class SistaModel<float>;
template class SistaModel<double>;

}  // namespace sista::arch
