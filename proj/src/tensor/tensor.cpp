#include "sista/tensor/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace sista::tensor {

std::size_t numel_of(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  return full(std::move(shape), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  auto d = std::make_shared<TensorData<T>>();
  d->value.assign(numel_of(shape), value);
  d->shape = std::move(shape);
  return Tensor(std::move(d));
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values) {
  if (numel_of(shape) != values.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "tensor: " + std::to_string(values.size()) +
                    " values do not fill shape " + shape_to_string(shape));
  }
  auto d = std::make_shared<TensorData<T>>();
  d->shape = std::move(shape);
  d->value = std::move(values);
  return Tensor(std::move(d));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
  return from({}, {value});
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "item: tensor of shape " + shape_to_string(shape()) +
                    " is not a scalar");
  }
  return d_->value[0];
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return from(d_->shape, d_->value);
}

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template class Tensor<float>;
template class Tensor<double>;
template bool all_finite<float>(std::span<const float>);
template bool all_finite<double>(std::span<const double>);

}  // namespace sista::tensor
