#include <algorithm>
#include <cmath>

#include "ops_common.hpp"
#include "sista/tensor/ops.hpp"

namespace sista::tensor::ops {

using detail::DataPtr;

namespace {

// d(out)/d(in_i) = weight(in_i) for a scalar reduction.
template <typename T, typename Fwd, typename Weight>
Tensor<T> reduce(const char* name, const Tensor<T>& a, Fwd fwd, Weight weight) {
  detail::require_defined(name, a);
  Tensor<T> out = Tensor<T>::scalar(fwd(a.data()));
  detail::check_finite(name, out);
  if (auto* g = detail::tracking_graph<T>({&a})) {
    DataPtr<T> pa = a.shared(), po = out.shared();
    g->record(name, {pa}, po, [pa, po, weight] {
      T* ga = detail::grad_if_needed(pa);
      if (!ga) return;
      const T go = po->grad[0];
      const auto& x = pa->value;
      for (std::size_t i = 0; i < x.size(); ++i) ga[i] += go * weight(x[i]);
    });
  }
  return out;
}

struct SoftmaxSplit {
  std::size_t outer, extent, inner;
};

SoftmaxSplit softmax_split(const std::string& op, const Shape& shape,
                           std::size_t axis) {
  if (axis >= shape.size() || shape[axis] == 0)
    throw_invalid(op + ": axis " + std::to_string(axis) +
                  " invalid for shape " + shape_to_string(shape));
  SoftmaxSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Writes log-softmax of `in` along the split axis into `out`.
template <typename T>
void log_softmax_into(const SoftmaxSplit& s, const T* in, T* out) {
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      T mx = in[base];
      for (std::size_t e = 1; e < s.extent; ++e)
        mx = std::max(mx, in[base + e * s.inner]);
      T acc = 0;
      for (std::size_t e = 0; e < s.extent; ++e)
        acc += std::exp(in[base + e * s.inner] - mx);
      const T lse = mx + std::log(acc);
      for (std::size_t e = 0; e < s.extent; ++e)
        out[base + e * s.inner] = in[base + e * s.inner] - lse;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  return reduce<T>(
      "sum", a,
      [](std::span<const T> v) {
        T acc = 0;
        for (T x : v) acc += x;
        return acc;
      },
      [](T) { return T(1); });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.defined() && a.numel() == 0) throw_invalid("mean: empty tensor");
  const T inv = a.defined() ? T(1) / static_cast<T>(a.numel()) : T(0);
  return reduce<T>(
      "mean", a,
      [inv](std::span<const T> v) {
        T acc = 0;
        for (T x : v) acc += x;
        return acc * inv;
      },
      [inv](T) { return inv; });
}

template <typename T>
Tensor<T> l1_norm(const Tensor<T>& a) {
  return reduce<T>(
      "l1_norm", a,
      [](std::span<const T> v) {
        T acc = 0;
        for (T x : v) acc += std::abs(x);
        return acc;
      },
      [](T x) { return x > 0 ? T(1) : (x < 0 ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, std::size_t axis) {
  detail::require_defined("softmax", a);
  const SoftmaxSplit s = softmax_split("softmax", a.shape(), axis);
  Tensor<T> out = detail::make_tensor<T>(a.shape());
  log_softmax_into(s, a.data().data(), out.data().data());
  for (T& v : out.data()) v = std::exp(v);
  detail::check_finite("softmax", out);
  if (auto* g = detail::tracking_graph<T>({&a})) {
    DataPtr<T> pa = a.shared(), po = out.shared();
    g->record("softmax", {pa}, po, [pa, po, s] {
      T* ga = detail::grad_if_needed(pa);
      if (!ga) return;
      const auto& y = po->value;
      const auto& go = po->grad;
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.extent * s.inner + i;
          T dot = 0;
          for (std::size_t e = 0; e < s.extent; ++e)
            dot += go[base + e * s.inner] * y[base + e * s.inner];
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t k = base + e * s.inner;
            ga[k] += y[k] * (go[k] - dot);
          }
        }
    });
  }
  return out;
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& a, std::size_t axis) {
  detail::require_defined("log_softmax", a);
  const SoftmaxSplit s = softmax_split("log_softmax", a.shape(), axis);
  Tensor<T> out = detail::make_tensor<T>(a.shape());
  log_softmax_into(s, a.data().data(), out.data().data());
  detail::check_finite("log_softmax", out);
  if (auto* g = detail::tracking_graph<T>({&a})) {
    DataPtr<T> pa = a.shared(), po = out.shared();
    g->record("log_softmax", {pa}, po, [pa, po, s] {
      T* ga = detail::grad_if_needed(pa);
      if (!ga) return;
      const auto& y = po->value;
      const auto& go = po->grad;
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t base = o * s.extent * s.inner + i;
          T total = 0;
          for (std::size_t e = 0; e < s.extent; ++e)
            total += go[base + e * s.inner];
          for (std::size_t e = 0; e < s.extent; ++e) {
            const std::size_t k = base + e * s.inner;
            ga[k] += go[k] - std::exp(y[k]) * total;
          }
        }
    });
  }
  return out;
}

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, std::size_t groups, T eps) {
  detail::require_defined("group_norm", x);
  detail::require_defined("group_norm", gamma);
  detail::require_defined("group_norm", beta);
  if (x.rank() != 4) throw_invalid("group_norm: expected NCHW input");
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t hw = x.dim(2) * x.dim(3);
  if (groups == 0 || c % groups != 0)
    throw_invalid("group_norm: " + std::to_string(groups) +
                  " groups do not divide " + std::to_string(c) + " channels");
  if (gamma.shape() != Shape{c}) throw_shape_mismatch("group_norm", x.shape(), gamma.shape());
  if (beta.shape() != Shape{c}) throw_shape_mismatch("group_norm", x.shape(), beta.shape());
  const std::size_t cpg = c / groups;
  const std::size_t group_size = cpg * hw;
  // Per (sample, group): mean and inverse std, kept for backward.
  auto stats = std::make_shared<std::vector<T>>(2 * n * groups);
  Tensor<T> out = detail::make_tensor<T>(x.shape());
  const T* xv = x.data().data();
  T* ov = out.data().data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t gi = 0; gi < groups; ++gi) {
      const std::size_t base = (b * c + gi * cpg) * hw;
      T mu = 0;
      for (std::size_t i = 0; i < group_size; ++i) mu += xv[base + i];
      mu /= static_cast<T>(group_size);
      T var = 0;
      for (std::size_t i = 0; i < group_size; ++i) {
        const T d = xv[base + i] - mu;
        var += d * d;
      }
      var /= static_cast<T>(group_size);
      const T inv = T(1) / std::sqrt(var + eps);
      (*stats)[2 * (b * groups + gi)] = mu;
      (*stats)[2 * (b * groups + gi) + 1] = inv;
      for (std::size_t ch = 0; ch < cpg; ++ch) {
        const std::size_t cc = gi * cpg + ch;
        const T ga = gamma.data()[cc], be = beta.data()[cc];
        for (std::size_t p = 0; p < hw; ++p) {
          const std::size_t k = base + ch * hw + p;
          ov[k] = (xv[k] - mu) * inv * ga + be;
        }
      }
    }
  }
  detail::check_finite("group_norm", out);
  if (auto* g = detail::tracking_graph<T>({&x, &gamma, &beta})) {
    DataPtr<T> px = x.shared(), pg = gamma.shared(), pb = beta.shared(),
               po = out.shared();
    g->record("group_norm", {px, pg, pb}, po,
              [px, pg, pb, po, stats, n, c, hw, groups, cpg, group_size] {
                T* gx = detail::grad_if_needed(px);
                T* gg = detail::grad_if_needed(pg);
                T* gb = detail::grad_if_needed(pb);
                const T* xv = px->value.data();
                const T* go = po->grad.data();
                for (std::size_t b = 0; b < n; ++b) {
                  for (std::size_t gi = 0; gi < groups; ++gi) {
                    const std::size_t base = (b * c + gi * cpg) * hw;
                    const T mu = (*stats)[2 * (b * groups + gi)];
                    const T inv = (*stats)[2 * (b * groups + gi) + 1];
                    // dxhat = go * gamma; dx = inv * (dxhat - mean(dxhat)
                    //        - xhat * mean(dxhat * xhat)).
                    T sum_d = 0, sum_dx = 0;
                    for (std::size_t ch = 0; ch < cpg; ++ch) {
                      const std::size_t cc = gi * cpg + ch;
                      const T gam = pg->value[cc];
                      for (std::size_t p = 0; p < hw; ++p) {
                        const std::size_t k = base + ch * hw + p;
                        const T xhat = (xv[k] - mu) * inv;
                        const T d = go[k] * gam;
                        sum_d += d;
                        sum_dx += d * xhat;
                        if (gg) gg[cc] += go[k] * xhat;
                        if (gb) gb[cc] += go[k];
                      }
                    }
                    if (!gx) continue;
                    const T m = static_cast<T>(group_size);
                    for (std::size_t ch = 0; ch < cpg; ++ch) {
                      const T gam = pg->value[gi * cpg + ch];
                      for (std::size_t p = 0; p < hw; ++p) {
                        const std::size_t k = base + ch * hw + p;
                        const T xhat = (xv[k] - mu) * inv;
                        gx[k] += inv * (go[k] * gam - sum_d / m -
                                        xhat * sum_dx / m);
                      }
                    }
                  }
                }
              });
  }
  return out;
}

#define SISTA_INSTANTIATE(T)                                                 \
  template Tensor<T> sum(const Tensor<T>&);                                  \
  template Tensor<T> mean(const Tensor<T>&);                                 \
  template Tensor<T> l1_norm(const Tensor<T>&);                              \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                 \
  template Tensor<T> log_softmax(const Tensor<T>&, std::size_t);             \
  template Tensor<T> group_norm(const Tensor<T>&, const Tensor<T>&,          \
                                const Tensor<T>&, std::size_t, T);

SISTA_INSTANTIATE(float)
SISTA_INSTANTIATE(double)
#undef SISTA_INSTANTIATE

}  // namespace sista::tensor::ops
