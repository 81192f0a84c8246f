#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sista/tensor/graph.hpp"
#include "sista/tensor/tensor.hpp"

namespace sista::tensor::detail {

template <typename T>
using DataPtr = std::shared_ptr<TensorData<T>>;

template <typename T>
Tensor<T> make_tensor(Shape shape) {
  return Tensor<T>::zeros(std::move(shape));
}

template <typename T>
void check_finite(const std::string& op, const Tensor<T>& out) {
  if (!all_finite<T>(out.data())) {
    throw Error(ErrorCode::kNonFinite, op + ": produced a non-finite value");
  }
}

template <typename T>
void require_defined(const std::string& op, const Tensor<T>& t) {
  if (!t.defined()) throw_invalid(op + ": undefined input tensor");
}

// Active graph if any of the inputs needs a gradient, else nullptr.
template <typename T>
Graph<T>* tracking_graph(std::initializer_list<const Tensor<T>*> inputs) {
  Graph<T>* g = active_graph<T>();
  if (!g) return nullptr;
  for (const Tensor<T>* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return g;
  }
  return nullptr;
}

template <typename T>
Graph<T>* tracking_graph(const std::vector<Tensor<T>>& inputs) {
  Graph<T>* g = active_graph<T>();
  if (!g) return nullptr;
  for (const auto& t : inputs) {
    if (t.defined() && t.requires_grad()) return g;
  }
  return nullptr;
}

// Grad buffer of `t` when it participates in autograd, else nullptr.
template <typename T>
T* grad_if_needed(const DataPtr<T>& t) {
  if (!t || !t->requires_grad) return nullptr;
  return grad_buffer(*t).data();
}

// Row-major C = alpha * op(A) * op(B) + beta * C.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, T alpha, const T* a, std::size_t lda, const T* b,
          std::size_t ldb, T beta, T* c, std::size_t ldc);

}  // namespace sista::tensor::detail
