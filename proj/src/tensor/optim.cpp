#include "sista/tensor/optim.hpp"

#include <cmath>
#include <numbers>

namespace sista::tensor {

template <typename T>
void adam_step(AdamState<T>& state, std::vector<Tensor<T>>& params,
               const std::vector<std::vector<T>>& grads) {
  if (grads.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "adam_step: " + std::to_string(grads.size()) +
                    " gradients for " + std::to_string(params.size()) +
                    " parameters");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), T(0));
      state.second_moment.emplace_back(p.numel(), T(0));
    }
  }
  if (state.first_moment.size() != params.size())
    throw_invalid("adam_step: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].numel() ||
        state.first_moment[i].size() != params[i].numel()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "adam_step: gradient " + std::to_string(i) + " has " +
                      std::to_string(grads[i].size()) +
                      " entries, parameter has shape " +
                      shape_to_string(params[i].shape()));
    }
  }
  ++state.step_count;
  const double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
  const double t = static_cast<double>(state.step_count);
  const double corr1 = 1.0 - std::pow(b1, t);
  const double corr2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const auto& g = grads[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      m[k] = static_cast<T>(b1 * m[k] + (1.0 - b1) * g[k]);
      v[k] = static_cast<T>(b2 * v[k] + (1.0 - b2) * g[k] * g[k]);
      const double m_hat = m[k] / corr1;
      const double v_hat = v[k] / corr2;
      value[k] = static_cast<T>(value[k] - state.lr * m_hat /
                                               (std::sqrt(v_hat) + state.hyper.eps));
    }
  }
}

template <typename T>
void adam_step(AdamState<T>& state, std::vector<Tensor<T>>& params) {
  std::vector<std::vector<T>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) {
    if (p.has_grad())
      grads.emplace_back(p.grad().begin(), p.grad().end());
    else
      grads.emplace_back(p.numel(), T(0));
  }
  adam_step(state, params, grads);
}

double cosine_lr(std::uint64_t step, std::uint64_t total, double lr_max,
                 double lr_min) {
  if (total == 0) return lr_max;
  if (step > total) step = total;
  const double progress = static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) *
                      (1.0 + std::cos(std::numbers::pi * progress));
}

template void adam_step<float>(AdamState<float>&, std::vector<Tensor<float>>&,
                               const std::vector<std::vector<float>>&);
template void adam_step<double>(AdamState<double>&,
                                std::vector<Tensor<double>>&,
                                const std::vector<std::vector<double>>&);
template void adam_step<float>(AdamState<float>&, std::vector<Tensor<float>>&);
template void adam_step<double>(AdamState<double>&,
                                std::vector<Tensor<double>>&);

}  // namespace sista::tensor
