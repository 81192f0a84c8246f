#include <algorithm>

#include "ops_common.hpp"
#include "sista/tensor/ops.hpp"

namespace sista::tensor::ops {

using detail::DataPtr;

namespace {

struct ConvGeometry {
  std::size_t batch, in_ch, height, width;
  std::size_t out_ch, kernel, stride, padding;
  std::size_t out_h, out_w;

  std::size_t patch() const { return in_ch * kernel * kernel; }
  std::size_t positions() const { return out_h * out_w; }
  bool pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }
};

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t s,
                            std::size_t p) {
  return (in + 2 * p - k) / s + 1;
}

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t k = g.kernel;
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    const T* xc = x + c * g.height * g.width;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = col + ((c * k + ky) * k + kx) * g.positions();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) -
                          static_cast<long>(g.padding);
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<long>(g.height)) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) -
                            static_cast<long>(g.padding);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(g.width))
                          ? T(0)
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* dx) {
  const std::size_t k = g.kernel;
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    T* dxc = dx + c * g.height * g.width;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = col + ((c * k + ky) * k + kx) * g.positions();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) -
                          static_cast<long>(g.padding);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          T* dst = dxc + static_cast<std::size_t>(iy) * g.width;
          const T* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) -
                            static_cast<long>(g.padding);
            if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
            dst[static_cast<std::size_t>(ix)] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
ConvGeometry conv_geometry(const std::string& op, const Tensor<T>& x,
                           const Tensor<T>& w, const Tensor<T>& bias,
                           Conv2dAttrs attrs, bool depthwise) {
  detail::require_defined(op, x);
  detail::require_defined(op, w);
  if (x.rank() != 4) throw_shape_mismatch(op, x.shape(), w.shape());
  if (w.rank() != 4 || w.dim(2) != w.dim(3))
    throw_shape_mismatch(op, x.shape(), w.shape());
  if (attrs.stride == 0) throw_invalid(op + ": stride must be >= 1");
  ConvGeometry g{};
  g.batch = x.dim(0);
  g.in_ch = x.dim(1);
  g.height = x.dim(2);
  g.width = x.dim(3);
  g.out_ch = w.dim(0);
  g.kernel = w.dim(2);
  g.stride = attrs.stride;
  g.padding = attrs.padding;
  const bool channels_ok =
      depthwise ? (w.dim(1) == 1 && w.dim(0) == g.in_ch) : w.dim(1) == g.in_ch;
  if (!channels_ok) throw_shape_mismatch(op, x.shape(), w.shape());
  if (g.height + 2 * g.padding < g.kernel || g.width + 2 * g.padding < g.kernel)
    throw_shape_mismatch(op, x.shape(), w.shape());
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.out_ch))
    throw_shape_mismatch(op, w.shape(), bias.shape());
  g.out_h = conv_out_extent(g.height, g.kernel, g.stride, g.padding);
  g.out_w = conv_out_extent(g.width, g.kernel, g.stride, g.padding);
  return g;
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_defined("matmul", a);
  detail::require_defined("matmul", b);
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw_shape_mismatch("matmul", a.shape(), b.shape());
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out = detail::make_tensor<T>({m, n});
  detail::gemm<T>(false, false, m, n, k, T(1), a.data().data(), k,
                  b.data().data(), n, T(0), out.data().data(), n);
  detail::check_finite("matmul", out);
  if (auto* g = detail::tracking_graph<T>({&a, &b})) {
    DataPtr<T> pa = a.shared(), pb = b.shared(), po = out.shared();
    g->record("matmul", {pa, pb}, po, [pa, pb, po, m, k, n] {
      const T* go = po->grad.data();
      if (T* ga = detail::grad_if_needed(pa))  // dA = dC * B^T
        detail::gemm<T>(false, true, m, k, n, T(1), go, n, pb->value.data(),
                        n, T(1), ga, k);
      if (T* gb = detail::grad_if_needed(pb))  // dB = A^T * dC
        detail::gemm<T>(true, false, k, n, m, T(1), pa->value.data(), k, go,
                        n, T(1), gb, n);
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias, Conv2dAttrs attrs) {
  const ConvGeometry g = conv_geometry("conv2d", x, weight, bias, attrs, false);
  Tensor<T> out =
      detail::make_tensor<T>({g.batch, g.out_ch, g.out_h, g.out_w});
  const std::size_t in_size = g.in_ch * g.height * g.width;
  const std::size_t out_size = g.out_ch * g.positions();
  std::vector<T> col(g.pointwise() ? 0 : g.patch() * g.positions());
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* xn = x.data().data() + n * in_size;
    T* on = out.data().data() + n * out_size;
    const T* cols = xn;
    if (!g.pointwise()) {
      im2col(xn, g, col.data());
      cols = col.data();
    }
    if (bias.defined()) {
      for (std::size_t o = 0; o < g.out_ch; ++o)
        std::fill(on + o * g.positions(), on + (o + 1) * g.positions(),
                  bias.data()[o]);
    }
    detail::gemm<T>(false, false, g.out_ch, g.positions(), g.patch(), T(1),
                    weight.data().data(), g.patch(), cols, g.positions(),
                    bias.defined() ? T(1) : T(0), on, g.positions());
  }
  detail::check_finite("conv2d", out);
  if (auto* gr = detail::tracking_graph<T>({&x, &weight, &bias})) {
    DataPtr<T> px = x.shared(), pw = weight.shared(), po = out.shared();
    DataPtr<T> pb = bias.defined() ? bias.shared() : nullptr;
    std::vector<DataPtr<T>> inputs{px, pw};
    if (pb) inputs.push_back(pb);
    gr->record("conv2d", std::move(inputs), po,
               [g, px, pw, pb, po, in_size, out_size] {
                 T* gx = detail::grad_if_needed(px);
                 T* gw = detail::grad_if_needed(pw);
                 T* gb = detail::grad_if_needed(pb);
                 std::vector<T> col(g.pointwise() ? 0
                                                  : g.patch() * g.positions());
                 std::vector<T> dcol(gx && !g.pointwise() ? col.size() : 0);
                 for (std::size_t n = 0; n < g.batch; ++n) {
                   const T* go = po->grad.data() + n * out_size;
                   const T* xn = px->value.data() + n * in_size;
                   if (gb) {
                     for (std::size_t o = 0; o < g.out_ch; ++o) {
                       T acc = 0;
                       for (std::size_t p = 0; p < g.positions(); ++p)
                         acc += go[o * g.positions() + p];
                       gb[o] += acc;
                     }
                   }
                   const T* cols = xn;
                   if (gw) {
                     if (!g.pointwise()) {
                       im2col(xn, g, col.data());
                       cols = col.data();
                     }
                     detail::gemm<T>(false, true, g.out_ch, g.patch(),
                                     g.positions(), T(1), go, g.positions(),
                                     cols, g.positions(), T(1), gw,
                                     g.patch());
                   }
                   if (gx) {
                     if (g.pointwise()) {
                       detail::gemm<T>(true, false, g.patch(), g.positions(),
                                       g.out_ch, T(1), pw->value.data(),
                                       g.patch(), go, g.positions(), T(1),
                                       gx + n * in_size, g.positions());
                     } else {
                       detail::gemm<T>(true, false, g.patch(), g.positions(),
                                       g.out_ch, T(1), pw->value.data(),
                                       g.patch(), go, g.positions(), T(0),
                                       dcol.data(), g.positions());
                       col2im_add(dcol.data(), g, gx + n * in_size);
                     }
                   }
                 }
               });
  }
  return out;
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                           const Tensor<T>& bias, Conv2dAttrs attrs) {
  const ConvGeometry g =
      conv_geometry("depthwise_conv2d", x, weight, bias, attrs, true);
  Tensor<T> out = detail::make_tensor<T>({g.batch, g.in_ch, g.out_h, g.out_w});
  const std::size_t k = g.kernel;
  auto for_each_tap = [g, k](auto&& fn) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t c = 0; c < g.in_ch; ++c) {
        const std::size_t in_base = (n * g.in_ch + c) * g.height * g.width;
        const std::size_t out_base = (n * g.in_ch + c) * g.positions();
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t widx = (c * k + ky) * k + kx;
            for (std::size_t oy = 0; oy < g.out_h; ++oy) {
              const long iy = static_cast<long>(oy * g.stride + ky) -
                              static_cast<long>(g.padding);
              if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
              for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                const long ix = static_cast<long>(ox * g.stride + kx) -
                                static_cast<long>(g.padding);
                if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
                fn(in_base + static_cast<std::size_t>(iy) * g.width +
                       static_cast<std::size_t>(ix),
                   out_base + oy * g.out_w + ox, widx);
              }
            }
          }
        }
      }
    }
  };
  {
    const T* xv = x.data().data();
    const T* wv = weight.data().data();
    T* ov = out.data().data();
    if (bias.defined()) {
      for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t c = 0; c < g.in_ch; ++c)
          std::fill(ov + (n * g.in_ch + c) * g.positions(),
                    ov + (n * g.in_ch + c + 1) * g.positions(),
                    bias.data()[c]);
    }
    for_each_tap([&](std::size_t xi, std::size_t oi, std::size_t wi) {
      ov[oi] += wv[wi] * xv[xi];
    });
  }
  detail::check_finite("depthwise_conv2d", out);
  if (auto* gr = detail::tracking_graph<T>({&x, &weight, &bias})) {
    DataPtr<T> px = x.shared(), pw = weight.shared(), po = out.shared();
    DataPtr<T> pb = bias.defined() ? bias.shared() : nullptr;
    std::vector<DataPtr<T>> inputs{px, pw};
    if (pb) inputs.push_back(pb);
    gr->record("depthwise_conv2d", std::move(inputs), po,
               [g, px, pw, pb, po, for_each_tap] {
                 T* gx = detail::grad_if_needed(px);
                 T* gw = detail::grad_if_needed(pw);
                 T* gb = detail::grad_if_needed(pb);
                 const T* go = po->grad.data();
                 const T* xv = px->value.data();
                 const T* wv = pw->value.data();
                 if (gb) {
                   for (std::size_t n = 0; n < g.batch; ++n)
                     for (std::size_t c = 0; c < g.in_ch; ++c)
                       for (std::size_t p = 0; p < g.positions(); ++p)
                         gb[c] += go[(n * g.in_ch + c) * g.positions() + p];
                 }
                 if (gx || gw) {
                   for_each_tap(
                       [&](std::size_t xi, std::size_t oi, std::size_t wi) {
                         if (gx) gx[xi] += wv[wi] * go[oi];
                         if (gw) gw[wi] += xv[xi] * go[oi];
                       });
                 }
               });
  }
  return out;
}

#define SISTA_INSTANTIATE(T)                                                 \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&,              \
                            const Tensor<T>&, Conv2dAttrs);                  \
  template Tensor<T> depthwise_conv2d(const Tensor<T>&, const Tensor<T>&,    \
                                      const Tensor<T>&, Conv2dAttrs);

SISTA_INSTANTIATE(float)
SISTA_INSTANTIATE(double)
#undef SISTA_INSTANTIATE

}  // namespace sista::tensor::ops
