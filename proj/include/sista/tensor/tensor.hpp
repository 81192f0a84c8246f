#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "sista/error.hpp"

namespace sista::tensor {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);

template <typename T>
struct TensorData {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until a backward pass reaches this tensor
  bool requires_grad = false;
};

// Shared handle to an N-d real array. Copies alias the same storage; use
// clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorData<T>> data) : d_(std::move(data)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor from(Shape shape, std::vector<T> values);
  static Tensor scalar(T value);

  bool defined() const noexcept { return static_cast<bool>(d_); }
  const Shape& shape() const { return d_->shape; }
  std::size_t dim(std::size_t i) const { return d_->shape.at(i); }
  std::size_t rank() const { return d_->shape.size(); }
  std::size_t numel() const { return d_->value.size(); }

  std::span<T> data() { return d_->value; }
  std::span<const T> data() const { return d_->value; }
  T item() const;
  T at(std::size_t flat_index) const { return d_->value.at(flat_index); }

  bool requires_grad() const { return d_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    d_->requires_grad = on;
    return *this;
  }
  bool has_grad() const { return !d_->grad.empty(); }
  std::span<const T> grad() const { return d_->grad; }
  std::span<T> mutable_grad() { return d_->grad; }
  void zero_grad() { d_->grad.clear(); }

  // Deep copy without gradient linkage.
  Tensor clone() const;
  // Same values, not tracked by autograd.
  Tensor detach() const { return clone(); }

  TensorData<T>* impl() const { return d_.get(); }
  const std::shared_ptr<TensorData<T>>& shared() const { return d_; }

 private:
  std::shared_ptr<TensorData<T>> d_;
};

template <typename T>
bool all_finite(std::span<const T> values);

}  // namespace sista::tensor
