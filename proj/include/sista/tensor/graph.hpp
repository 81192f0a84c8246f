#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sista/tensor/tensor.hpp"

namespace sista::tensor {

// Define-by-run tape. Primitives executed while a Graph is active (see
// GraphScope) append one node each; backward() replays the tape in reverse.
template <typename T>
class Graph {
 public:
  using DataPtr = std::shared_ptr<TensorData<T>>;

  struct Node {
    std::string op;
    std::vector<DataPtr> inputs;
    DataPtr output;
    // Reads output->grad, accumulates into inputs' grads.
    std::function<void()> backward;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  void record(std::string op, std::vector<DataPtr> inputs, DataPtr output,
              std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable tensor that
  // requires grad. The tape may be replayed once; clear() and re-run forward
  // before the next call.
  void backward(const Tensor<T>& loss);

  // Drops all nodes and the activations they hold. Safe to call repeatedly.
  void clear();

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  // Number of node visits in the most recent backward pass.
  std::size_t last_backward_visits() const { return last_visits_; }

 private:
  std::vector<Node> nodes_;
  bool consumed_ = false;
  std::size_t last_visits_ = 0;
};

// The graph primitives record into on the calling thread, or nullptr when
// no scope is active (values are then computed without tracking).
template <typename T>
Graph<T>* active_graph();

template <typename T>
class GraphScope {
 public:
  explicit GraphScope(Graph<T>& graph);
  ~GraphScope();
  GraphScope(const GraphScope&) = delete;
  GraphScope& operator=(const GraphScope&) = delete;

 private:
  Graph<T>* previous_;
};

// Suspends recording for the current thread (evaluation, finite differences).
template <typename T>
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Graph<T>* previous_;
};

// Grad buffer of `dst`, zero-filled on first access.
template <typename T>
std::vector<T>& grad_buffer(TensorData<T>& dst);

}  // namespace sista::tensor
