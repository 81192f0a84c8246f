#pragma once

#include <functional>
#include <vector>

#include "sista/tensor/tensor.hpp"

namespace sista::tensor {

using ScalarFn = std::function<Tensor<double>(const Tensor<double>&)>;

// Max over coordinates of |analytic - central difference| /
// max(1, |central difference|) for a scalar-valued f at `point`.
double grad_check(const ScalarFn& f, const Tensor<double>& point, double step);

// Same error measure for a closure over leaf tensors (e.g. model parameters):
// analytic gradients by backward, numeric ones by perturbing the leaves in
// place. At most `max_coords` coordinates per leaf are probed, evenly spaced.
double param_grad_check(const std::function<Tensor<double>()>& loss,
                        const std::vector<Tensor<double>>& leaves, double step,
                        std::size_t max_coords = 0);

}  // namespace sista::tensor
