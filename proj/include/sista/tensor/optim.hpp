#pragma once

#include <cstdint>
#include <vector>

#include "sista/tensor/tensor.hpp"

namespace sista::tensor {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  std::uint64_t step_count = 0;
  AdamHyper hyper;
  double lr = 1e-3;
};

// Bias-corrected Adam over `params` using `grads` (one buffer per param, same
// sizes). Moments are lazily sized on the first call.
template <typename T>
void adam_step(AdamState<T>& state, std::vector<Tensor<T>>& params,
               const std::vector<std::vector<T>>& grads);

// Convenience overload reading each parameter's accumulated grad (missing
// grads count as zero).
template <typename T>
void adam_step(AdamState<T>& state, std::vector<Tensor<T>>& params);

// Cosine annealing from lr_max at step 0 to lr_min at step == total.
// total == 0 returns lr_max.
double cosine_lr(std::uint64_t step, std::uint64_t total, double lr_max,
                 double lr_min);

}  // namespace sista::tensor
