#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sista/tensor/tensor.hpp"

namespace sista::arch {

using tensor::Shape;
using tensor::Tensor;

// Ordered collection of named learnable tensors.
template <typename T>
class ParamStore {
 public:
  Tensor<T> add(const std::string& name, Tensor<T> value);
  bool contains(const std::string& name) const;
  const Tensor<T>& get(const std::string& name) const;
  Tensor<T>& get(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  // Number of scalar parameters whose name starts with `prefix`.
  std::size_t count(const std::string& prefix = "") const;
  const std::vector<std::pair<std::string, Tensor<T>>>& entries() const {
    return entries_;
  }
  std::vector<Tensor<T>> tensors() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
};

// Parameter factory with a name prefix; children share the store and RNG.
template <typename T>
class Builder {
 public:
  Builder(ParamStore<T>& store, std::mt19937_64& rng, std::string prefix = "")
      : store_(&store), rng_(&rng), prefix_(std::move(prefix)) {}

  Builder child(const std::string& name) const {
    return Builder(*store_, *rng_, prefix_ + name + ".");
  }

  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Tensor<T> uniform(const std::string& name, Shape shape, std::size_t fan_in);
  Tensor<T> uniform_range(const std::string& name, Shape shape, double lo, double hi);
  Tensor<T> constant(const std::string& name, Shape shape, double value);
  Tensor<T> values(const std::string& name, Shape shape, std::vector<T> v);

  std::mt19937_64& rng() { return *rng_; }

 private:
  ParamStore<T>* store_;
  std::mt19937_64* rng_;
  std::string prefix_;
};

// Convolution with optional bias. groups == channels selects depthwise.
template <typename T>
struct Conv {
  Tensor<T> weight, bias;
  std::size_t stride = 1, padding = 0;
  bool depthwise = false;

  static Conv make(Builder<T> b, std::size_t in, std::size_t out, std::size_t k,
                   std::size_t stride = 1, bool bias = true);
  static Conv make_depthwise(Builder<T> b, std::size_t channels, std::size_t k);
  Tensor<T> operator()(const Tensor<T>& x) const;
  std::size_t in_channels() const;
  std::size_t out_channels() const { return weight.dim(0); }
  // Zeroes weight and bias in place (test hooks).
  void zero();
};

}  // namespace sista::arch
