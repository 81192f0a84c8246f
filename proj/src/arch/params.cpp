#include "sista/arch/params.hpp"

#include <algorithm>
#include <cmath>

#include "sista/error.hpp"
#include "sista/tensor/ops.hpp"

namespace sista::arch {

template <typename T>
Tensor<T> ParamStore<T>::add(const std::string& name, Tensor<T> value) {
  if (contains(name)) throw_invalid("duplicate parameter '" + name + "'");
  value.set_requires_grad(true);
  entries_.emplace_back(name, value);
  return value;
}

template <typename T>
bool ParamStore<T>::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return e.second;
  throw_invalid("unknown parameter '" + name + "'");
}

template <typename T>
Tensor<T>& ParamStore<T>::get(const std::string& name) {
  for (auto& e : entries_)
    if (e.first == name) return e.second;
  throw_invalid("unknown parameter '" + name + "'");
}

template <typename T>
std::size_t ParamStore<T>::count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.first.compare(0, prefix.size(), prefix) == 0) n += e.second.numel();
  return n;
}

template <typename T>
std::vector<Tensor<T>> ParamStore<T>::tensors() const {
  std::vector<Tensor<T>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

template <typename T>
Tensor<T> Builder<T>::uniform(const std::string& name, Shape shape, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, fan_in)));
  return uniform_range(name, std::move(shape), -bound, bound);
}

template <typename T>
Tensor<T> Builder<T>::uniform_range(const std::string& name, Shape shape, double lo,
                                    double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(tensor::numel_of(shape));
  for (T& x : v) x = static_cast<T>(dist(*rng_));
  return store_->add(prefix_ + name, Tensor<T>::from(std::move(shape), std::move(v)));
}

template <typename T>
Tensor<T> Builder<T>::constant(const std::string& name, Shape shape, double value) {
  return store_->add(prefix_ + name, Tensor<T>::full(std::move(shape), static_cast<T>(value)));
}

template <typename T>
Tensor<T> Builder<T>::values(const std::string& name, Shape shape, std::vector<T> v) {
  return store_->add(prefix_ + name, Tensor<T>::from(std::move(shape), std::move(v)));
}

template <typename T>
Conv<T> Conv<T>::make(Builder<T> b, std::size_t in, std::size_t out, std::size_t k,
                      std::size_t stride, bool bias) {
  Conv c;
  const std::size_t fan_in = in * k * k;
  c.weight = b.uniform("weight", {out, in, k, k}, fan_in);
  if (bias) c.bias = b.uniform("bias", {out}, fan_in);
  c.stride = stride;
  c.padding = k / 2;
  return c;
}

template <typename T>
Conv<T> Conv<T>::make_depthwise(Builder<T> b, std::size_t channels, std::size_t k) {
  Conv c;
  c.weight = b.uniform("weight", {channels, 1, k, k}, k * k);
  c.bias = b.uniform("bias", {channels}, k * k);
  c.padding = k / 2;
  c.depthwise = true;
  return c;
}

template <typename T>
Tensor<T> Conv<T>::operator()(const Tensor<T>& x) const {
  const tensor::ops::Conv2dAttrs attrs{stride, padding};
  return depthwise ? tensor::ops::depthwise_conv2d(x, weight, bias, attrs)
                   : tensor::ops::conv2d(x, weight, bias, attrs);
}

template <typename T>
std::size_t Conv<T>::in_channels() const {
  return depthwise ? weight.dim(0) : weight.dim(1);
}

template <typename T>
void Conv<T>::zero() {
  for (T& v : weight.data()) v = T(0);
  if (bias.defined())
    for (T& v : bias.data()) v = T(0);
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Builder<float>;
template class Builder<double>;
template struct Conv<float>;
template struct Conv<double>;

}  // namespace sista::arch
