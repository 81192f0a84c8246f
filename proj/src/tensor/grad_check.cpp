#include "sista/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "sista/tensor/graph.hpp"

namespace sista::tensor {

double grad_check(const ScalarFn& f, const Tensor<double>& point,
                  double step) {
  if (!(step > 0)) throw_invalid("grad_check: step must be positive");
  if (!all_finite<double>(point.data()))
    throw Error(ErrorCode::kNonFinite, "grad_check: non-finite point");

  Tensor<double> x = point.clone();
  x.set_requires_grad(true);
  std::vector<double> analytic(x.numel(), 0.0);
  {
    Graph<double> graph;
    GraphScope<double> scope(graph);
    Tensor<double> loss = f(x);
    if (loss.numel() != 1) throw_invalid("grad_check: f must be scalar-valued");
    // A loss that never touched x (all paths detached) has zero gradient.
    if (loss.requires_grad()) graph.backward(loss);
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
  }

  NoGradScope<double> no_grad;
  double worst = 0.0;
  Tensor<double> probe = point.clone();
  for (std::size_t i = 0; i < probe.numel(); ++i) {
    const double saved = probe.data()[i];
    probe.data()[i] = saved + step;
    const double up = f(probe).item();
    probe.data()[i] = saved - step;
    const double down = f(probe).item();
    probe.data()[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw Error(ErrorCode::kNonFinite, "grad_check: non-finite evaluation");
    const double numeric = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic[i] - numeric) /
                                std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

double param_grad_check(const std::function<Tensor<double>()>& loss,
                        const std::vector<Tensor<double>>& leaves, double step,
                        std::size_t max_coords) {
  if (!(step > 0)) throw_invalid("param_grad_check: step must be positive");
  std::vector<Tensor<double>> xs = leaves;
  for (auto& x : xs) {
    x.set_requires_grad(true);
    x.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Graph<double> graph;
    GraphScope<double> scope(graph);
    Tensor<double> l = loss();
    if (l.numel() != 1) throw_invalid("param_grad_check: loss must be scalar-valued");
    if (l.requires_grad()) graph.backward(l);
    for (auto& x : xs) {
      std::vector<double> g(x.numel(), 0.0);
      if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), g.begin());
      analytic.push_back(std::move(g));
      x.zero_grad();
    }
  }
  NoGradScope<double> no_grad;
  double worst = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    auto values = xs[k].data();
    const std::size_t n = values.size();
    const std::size_t probes = max_coords == 0 ? n : std::min(n, max_coords);
    for (std::size_t j = 0; j < probes; ++j) {
      const std::size_t i = probes == n ? j : j * n / probes;
      const double saved = values[i];
      values[i] = saved + step;
      const double up = loss().item();
      values[i] = saved - step;
      const double down = loss().item();
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw Error(ErrorCode::kNonFinite, "param_grad_check: non-finite evaluation");
      const double numeric = (up - down) / (2.0 * step);
      worst = std::max(worst, std::abs(analytic[k][i] - numeric) /
                                  std::max(1.0, std::abs(numeric)));
    }
  }
  return worst;
}

}  // namespace sista::tensor
