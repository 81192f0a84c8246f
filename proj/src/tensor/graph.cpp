#include "sista/tensor/graph.hpp"


namespace sista::tensor {

namespace {

template <typename T>
Graph<T>*& active_slot() {
  thread_local Graph<T>* graph = nullptr;
  return graph;
}

}  // namespace

template <typename T>
Graph<T>* active_graph() {
  return active_slot<T>();
}

template <typename T>
GraphScope<T>::GraphScope(Graph<T>& graph) : previous_(active_slot<T>()) {
  active_slot<T>() = &graph;
}

template <typename T>
GraphScope<T>::~GraphScope() {
  active_slot<T>() = previous_;
}

template <typename T>
NoGradScope<T>::NoGradScope() : previous_(active_slot<T>()) {
  active_slot<T>() = nullptr;
}

template <typename T>
NoGradScope<T>::~NoGradScope() {
  active_slot<T>() = previous_;
}

template <typename T>
std::vector<T>& grad_buffer(TensorData<T>& dst) {
  if (dst.grad.empty()) dst.grad.assign(dst.value.size(), T(0));
  return dst.grad;
}

template <typename T>
void Graph<T>::record(std::string op, std::vector<DataPtr> inputs,
                      DataPtr output, std::function<void()> backward) {
  if (consumed_) {
    throw Error(ErrorCode::kState,
                "graph: recording onto a consumed tape; call clear() first");
  }
  output->requires_grad = true;
  nodes_.push_back(
      Node{std::move(op), std::move(inputs), std::move(output),
           std::move(backward)});
}

template <typename T>
void Graph<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "backward: loss must be a scalar, got shape " +
                    (loss.defined() ? shape_to_string(loss.shape())
                                    : std::string("<undefined>")));
  }
  if (consumed_) {
    throw Error(ErrorCode::kState,
                "backward: tape already replayed; re-run forward first");
  }
  const TensorData<T>* target = loss.impl();
  bool recorded = false;
  for (const auto& n : nodes_) {
    if (n.output.get() == target) {
      recorded = true;
      break;
    }
  }
  if (!recorded) {
    throw Error(ErrorCode::kState,
                "backward: loss was not produced by a recorded primitive");
  }
  consumed_ = true;
  auto& seed = grad_buffer(*loss.impl());
  seed[0] += T(1);
  last_visits_ = 0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward();
    ++last_visits_;
  }
}

template <typename T>
void Graph<T>::clear() {
  nodes_.clear();
  nodes_.shrink_to_fit();
  consumed_ = false;
  last_visits_ = 0;
}

template class Graph<float>;
template class Graph<double>;
template class GraphScope<float>;
template class GraphScope<double>;
template class NoGradScope<float>;
template class NoGradScope<double>;
template Graph<float>* active_graph<float>();
template Graph<double>* active_graph<double>();
template std::vector<float>& grad_buffer<float>(TensorData<float>&);
template std::vector<double>& grad_buffer<double>(TensorData<double>&);

}  // namespace sista::tensor
