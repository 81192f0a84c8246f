#include <algorithm>
#include <cmath>

#include "ops_common.hpp"
#include "sista/tensor/ops.hpp"

namespace sista::tensor::ops {

using detail::DataPtr;

namespace {

// Flat input offsets for every output element under numpy broadcasting.
struct BroadcastPlan {
  Shape out_shape;
  bool same = false;      // identical shapes
  bool b_scalar = false;  // b has one element
  bool a_scalar = false;
  std::vector<std::size_t> offset_a;
  std::vector<std::size_t> offset_b;
};

BroadcastPlan plan_broadcast(const std::string& op, const Shape& a,
                             const Shape& b) {
  BroadcastPlan plan;
  if (a == b) {
    plan.out_shape = a;
    plan.same = true;
    return plan;
  }
  if (numel_of(b) == 1 && b.size() <= a.size()) {
    plan.out_shape = a;
    plan.b_scalar = true;
    return plan;
  }
  if (numel_of(a) == 1 && a.size() <= b.size()) {
    plan.out_shape = b;
    plan.a_scalar = true;
    return plan;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + (rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + (rank - b.size()));
  plan.out_shape.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
      throw_shape_mismatch(op, a, b);
    }
    plan.out_shape[i] = std::max(pa[i], pb[i]);
  }
  // Strides with zeros on broadcast axes.
  std::vector<std::size_t> sa(rank, 0), sb(rank, 0);
  std::size_t ra = 1, rb = 1;
  for (std::size_t i = rank; i-- > 0;) {
    sa[i] = pa[i] == 1 ? 0 : ra;
    sb[i] = pb[i] == 1 ? 0 : rb;
    ra *= pa[i];
    rb *= pb[i];
  }
  const std::size_t n = numel_of(plan.out_shape);
  plan.offset_a.resize(n);
  plan.offset_b.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    plan.offset_a[flat] = oa;
    plan.offset_b[flat] = ob;
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      oa += sa[ax];
      ob += sb[ax];
      if (idx[ax] < plan.out_shape[ax]) break;
      oa -= sa[ax] * idx[ax];
      ob -= sb[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  return plan;
}

inline std::size_t index_a(const BroadcastPlan& p, std::size_t i) {
  if (p.same || p.b_scalar) return i;
  if (p.a_scalar) return 0;
  return p.offset_a[i];
}

inline std::size_t index_b(const BroadcastPlan& p, std::size_t i) {
  if (p.same || p.a_scalar) return i;
  if (p.b_scalar) return 0;
  return p.offset_b[i];
}

enum class BinaryKind { kAdd, kSub, kMul, kDiv };

const char* binary_name(BinaryKind k) {
  switch (k) {
    case BinaryKind::kAdd: return "add";
    case BinaryKind::kSub: return "sub";
    case BinaryKind::kMul: return "mul";
    case BinaryKind::kDiv: return "div";
  }
  return "?";
}

template <typename T>
Tensor<T> binary(BinaryKind kind, const Tensor<T>& a, const Tensor<T>& b) {
  const std::string name = binary_name(kind);
  detail::require_defined(name, a);
  detail::require_defined(name, b);
  auto plan = std::make_shared<BroadcastPlan>(
      plan_broadcast(name, a.shape(), b.shape()));
  Tensor<T> out = detail::make_tensor<T>(plan->out_shape);
  const auto av = a.data();
  const auto bv = b.data();
  auto ov = out.data();
  const std::size_t n = ov.size();
  switch (kind) {
    case BinaryKind::kAdd:
      for (std::size_t i = 0; i < n; ++i)
        ov[i] = av[index_a(*plan, i)] + bv[index_b(*plan, i)];
      break;
    case BinaryKind::kSub:
      for (std::size_t i = 0; i < n; ++i)
        ov[i] = av[index_a(*plan, i)] - bv[index_b(*plan, i)];
      break;
    case BinaryKind::kMul:
      for (std::size_t i = 0; i < n; ++i)
        ov[i] = av[index_a(*plan, i)] * bv[index_b(*plan, i)];
      break;
    case BinaryKind::kDiv:
      for (std::size_t i = 0; i < n; ++i)
        ov[i] = av[index_a(*plan, i)] / bv[index_b(*plan, i)];
      break;
  }
  detail::check_finite(name, out);
  if (auto* g = detail::tracking_graph<T>({&a, &b})) {
    DataPtr<T> pa = a.shared(), pb = b.shared(), po = out.shared();
    g->record(name, {pa, pb}, po, [kind, plan, pa, pb, po] {
      const auto& go = po->grad;
      T* ga = detail::grad_if_needed(pa);
      T* gb = detail::grad_if_needed(pb);
      const auto& x = pa->value;
      const auto& y = pb->value;
      const std::size_t n = go.size();
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ia = index_a(*plan, i);
        const std::size_t ib = index_b(*plan, i);
        const T gi = go[i];
        switch (kind) {
          case BinaryKind::kAdd:
            if (ga) ga[ia] += gi;
            if (gb) gb[ib] += gi;
            break;
          case BinaryKind::kSub:
            if (ga) ga[ia] += gi;
            if (gb) gb[ib] -= gi;
            break;
          case BinaryKind::kMul:
            if (ga) ga[ia] += gi * y[ib];
            if (gb) gb[ib] += gi * x[ia];
            break;
          case BinaryKind::kDiv:
            if (ga) ga[ia] += gi / y[ib];
            if (gb) gb[ib] -= gi * x[ia] / (y[ib] * y[ib]);
            break;
        }
      }
    });
  }
  return out;
}

// Elementwise map with derivative expressed through input x and output y.
template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const char* name, const Tensor<T>& a, Fwd fwd, Deriv deriv) {
  detail::require_defined(name, a);
  Tensor<T> out = detail::make_tensor<T>(a.shape());
  const auto av = a.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = fwd(av[i]);
  detail::check_finite(name, out);
  if (auto* g = detail::tracking_graph<T>({&a})) {
    DataPtr<T> pa = a.shared(), po = out.shared();
    g->record(name, {pa}, po, [pa, po, deriv] {
      T* ga = detail::grad_if_needed(pa);
      if (!ga) return;
      const auto& go = po->grad;
      const auto& x = pa->value;
      const auto& y = po->value;
      for (std::size_t i = 0; i < go.size(); ++i)
        ga[i] += go[i] * deriv(x[i], y[i]);
    });
  }
  return out;
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= 0) {
    const T z = std::exp(-x);
    return T(1) / (T(1) + z);
  }
  const T z = std::exp(x);
  return z / (T(1) + z);
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(BinaryKind::kAdd, a, b);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(BinaryKind::kSub, a, b);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(BinaryKind::kMul, a, b);
}
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(BinaryKind::kDiv, a, b);
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  return unary<T>(
      "add_scalar", a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  return unary<T>(
      "mul_scalar", a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary<T>(
      "sigmoid", a, [](T x) { return stable_sigmoid(x); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> silu(const Tensor<T>& a) {
  return unary<T>(
      "silu", a, [](T x) { return x * stable_sigmoid(x); },
      [](T x, T) {
        const T s = stable_sigmoid(x);
        return s * (T(1) + x * (T(1) - s));
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return unary<T>(
      "relu", a, [](T x) { return x > 0 ? x : T(0); },
      [](T x, T) { return x > 0 ? T(1) : T(0); });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& a, T beta) {
  if (!(beta > 0)) throw_invalid("softplus: beta must be positive");
  return unary<T>(
      "softplus", a,
      [beta](T x) {
        const T z = beta * x;
        // max(z, 0) + log1p(exp(-|z|)) avoids overflow for large |z|.
        return (std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z)))) / beta;
      },
      [beta](T x, T) { return stable_sigmoid(beta * x); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  return unary<T>(
      "abs", a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > 0 ? T(1) : (x < 0 ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> sign(const Tensor<T>& a) {
  detail::require_defined("sign", a);
  Tensor<T> out = detail::make_tensor<T>(a.shape());
  const auto av = a.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i)
    ov[i] = av[i] > 0 ? T(1) : (av[i] < 0 ? T(-1) : T(0));
  return out;
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary<T>(
      "exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  return unary<T>(
      "log", a, [](T x) { return std::log(x); },
      [](T x, T) { return T(1) / x; });
}

#define SISTA_INSTANTIATE(T)                                            \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                   \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                   \
  template Tensor<T> sigmoid(const Tensor<T>&);                         \
  template Tensor<T> silu(const Tensor<T>&);                            \
  template Tensor<T> relu(const Tensor<T>&);                            \
  template Tensor<T> softplus(const Tensor<T>&, T);                     \
  template Tensor<T> abs(const Tensor<T>&);                             \
  template Tensor<T> sign(const Tensor<T>&);                            \
  template Tensor<T> exp(const Tensor<T>&);                             \
  template Tensor<T> log(const Tensor<T>&);

SISTA_INSTANTIATE(float)
SISTA_INSTANTIATE(double)
#undef SISTA_INSTANTIATE

}  // namespace sista::tensor::ops
