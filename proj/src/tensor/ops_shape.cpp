#include <algorithm>
#include <cmath>
#include <numeric>

#include "ops_common.hpp"
#include "sista/tensor/ops.hpp"

namespace sista::tensor::ops {

using detail::DataPtr;

namespace {

// out[i] = in[source[i]]; covers every pure data-movement primitive.
template <typename T>
Tensor<T> gather(const char* op, const Tensor<T>& a, Shape out_shape,
                 std::shared_ptr<const std::vector<std::size_t>> source) {
  Tensor<T> out = detail::make_tensor<T>(std::move(out_shape));
  const auto av = a.data();
  auto ov = out.data();
  const auto& src = *source;
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[src[i]];
  if (auto* g = detail::tracking_graph<T>({&a})) {
    DataPtr<T> pa = a.shared(), po = out.shared();
    g->record(op, {pa}, po, [pa, po, source] {
      T* ga = detail::grad_if_needed(pa);
      if (!ga) return;
      const auto& go = po->grad;
      const auto& src = *source;
      for (std::size_t i = 0; i < go.size(); ++i) ga[src[i]] += go[i];
    });
  }
  return out;
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

struct AxisSplit {
  std::size_t outer, extent, inner;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

template <typename T>
Tensor<T> transpose(const Tensor<T>& a, const std::vector<std::size_t>& perm) {
  detail::require_defined("transpose", a);
  const Shape& in = a.shape();
  if (perm.size() != in.size()) throw_shape_mismatch("transpose", in, perm);
  std::vector<std::size_t> seen(perm);
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != i) throw_shape_mismatch("transpose", in, perm);
  }
  Shape out_shape(in.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out_shape[i] = in[perm[i]];
  const auto in_strides = row_major_strides(in);
  auto source = std::make_shared<std::vector<std::size_t>>(a.numel());
  std::vector<std::size_t> idx(out_shape.size(), 0);
  std::size_t off = 0;
  for (std::size_t flat = 0; flat < source->size(); ++flat) {
    (*source)[flat] = off;
    for (std::size_t ax = out_shape.size(); ax-- > 0;) {
      ++idx[ax];
      off += in_strides[perm[ax]];
      if (idx[ax] < out_shape[ax]) break;
      off -= in_strides[perm[ax]] * idx[ax];
      idx[ax] = 0;
    }
  }
  return gather<T>("transpose", a, std::move(out_shape), std::move(source));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  detail::require_defined("reshape", a);
  if (numel_of(shape) != a.numel())
    throw_shape_mismatch("reshape", a.shape(), shape);
  Tensor<T> out = Tensor<T>::from(std::move(shape),
                                  std::vector<T>(a.data().begin(),
                                                 a.data().end()));
  if (auto* g = detail::tracking_graph<T>({&a})) {
    DataPtr<T> pa = a.shared(), po = out.shared();
    g->record("reshape", {pa}, po, [pa, po] {
      T* ga = detail::grad_if_needed(pa);
      if (!ga) return;
      const auto& go = po->grad;
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw_invalid("concat: no inputs");
  for (const auto& p : parts) detail::require_defined("concat", p);
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw_invalid("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      ok = i == axis || s[i] == first[i];
    if (!ok) throw_shape_mismatch("concat", first, s);
    out_shape[axis] += s[axis];
  }
  const AxisSplit os = split_at(out_shape, axis);
  Tensor<T> out = detail::make_tensor<T>(out_shape);
  std::vector<std::size_t> starts;
  std::size_t start = 0;
  for (const auto& p : parts) {
    starts.push_back(start);
    const std::size_t ext = p.shape()[axis];
    const auto pv = p.data();
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(pv.begin() + o * ext * os.inner, ext * os.inner,
                  out.data().begin() + (o * os.extent + start) * os.inner);
    }
    start += ext;
  }
  if (auto* g = detail::tracking_graph<T>(parts)) {
    std::vector<DataPtr<T>> inputs;
    for (const auto& p : parts) inputs.push_back(p.shared());
    DataPtr<T> po = out.shared();
    g->record("concat", inputs, po, [inputs, po, os, starts, axis] {
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        T* gp = detail::grad_if_needed(inputs[k]);
        if (!gp) continue;
        const std::size_t ext = inputs[k]->shape[axis];
        for (std::size_t o = 0; o < os.outer; ++o) {
          const T* src = po->grad.data() + (o * os.extent + starts[k]) * os.inner;
          T* dst = gp + o * ext * os.inner;
          for (std::size_t i = 0; i < ext * os.inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start,
                std::size_t end) {
  detail::require_defined("slice", a);
  if (axis >= a.rank() || start >= end || end > a.dim(axis)) {
    throw Error(ErrorCode::kShapeMismatch,
                "slice: range [" + std::to_string(start) + ", " +
                    std::to_string(end) + ") on axis " + std::to_string(axis) +
                    " invalid for shape " + shape_to_string(a.shape()));
  }
  const AxisSplit s = split_at(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = end - start;
  auto source = std::make_shared<std::vector<std::size_t>>();
  source->reserve(numel_of(out_shape));
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = start; e < end; ++e)
      for (std::size_t i = 0; i < s.inner; ++i)
        source->push_back((o * s.extent + e) * s.inner + i);
  return gather<T>("slice", a, std::move(out_shape), std::move(source));
}

template <typename T>
Tensor<T> pad2d(const Tensor<T>& x, std::size_t bottom, std::size_t right) {
  detail::require_defined("pad2d", x);
  if (x.rank() != 4) throw_invalid("pad2d: expected NCHW input");
  if (bottom == 0 && right == 0) return x;
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2), w = x.dim(3);
  const std::size_t ph = h + bottom, pw = w + right;
  Tensor<T> out = detail::make_tensor<T>({x.dim(0), x.dim(1), ph, pw});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(x.data().begin() + (p * h + y) * w, w,
                  out.data().begin() + (p * ph + y) * pw);
  if (auto* g = detail::tracking_graph<T>({&x})) {
    DataPtr<T> px = x.shared(), po = out.shared();
    g->record("pad2d", {px}, po, [px, po, planes, h, w, ph, pw] {
      T* gx = detail::grad_if_needed(px);
      if (!gx) return;
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t c = 0; c < w; ++c)
            gx[(p * h + y) * w + c] += po->grad[(p * ph + y) * pw + c];
    });
  }
  return out;
}

namespace {

struct LerpAxis {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

LerpAxis lerp_axis(std::size_t in, std::size_t factor) {
  LerpAxis a;
  const std::size_t out = in * factor;
  a.lo.resize(out);
  a.hi.resize(out);
  a.frac.resize(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) -
                 0.5;
    if (src < 0) src = 0;
    std::size_t lo = static_cast<std::size_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    a.lo[o] = lo;
    a.hi[o] = std::min(lo + 1, in - 1);
    a.frac[o] = src - static_cast<double>(lo);
  }
  return a;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, std::size_t factor) {
  detail::require_defined("bilinear_upsample", x);
  if (x.rank() != 4) throw_invalid("bilinear_upsample: expected NCHW input");
  if (factor == 0) throw_invalid("bilinear_upsample: factor must be >= 1");
  if (factor == 1) return x;
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h * factor, ow = w * factor;
  auto ay = std::make_shared<LerpAxis>(lerp_axis(h, factor));
  auto ax = std::make_shared<LerpAxis>(lerp_axis(w, factor));
  Tensor<T> out = detail::make_tensor<T>({x.dim(0), x.dim(1), oh, ow});
  const T* xv = x.data().data();
  T* ov = out.data().data();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xv + p * h * w;
    T* dst = ov + p * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      const T fy = static_cast<T>(ay->frac[y]);
      const T* r0 = src + ay->lo[y] * w;
      const T* r1 = src + ay->hi[y] * w;
      for (std::size_t c = 0; c < ow; ++c) {
        const T fx = static_cast<T>(ax->frac[c]);
        const T top = r0[ax->lo[c]] * (1 - fx) + r0[ax->hi[c]] * fx;
        const T bot = r1[ax->lo[c]] * (1 - fx) + r1[ax->hi[c]] * fx;
        dst[y * ow + c] = top * (1 - fy) + bot * fy;
      }
    }
  }
  if (auto* g = detail::tracking_graph<T>({&x})) {
    DataPtr<T> px = x.shared(), po = out.shared();
    g->record("bilinear_upsample", {px}, po,
              [px, po, ay, ax, planes, h, w, oh, ow] {
                T* gx = detail::grad_if_needed(px);
                if (!gx) return;
                for (std::size_t p = 0; p < planes; ++p) {
                  T* dst = gx + p * h * w;
                  const T* go = po->grad.data() + p * oh * ow;
                  for (std::size_t y = 0; y < oh; ++y) {
                    const T fy = static_cast<T>(ay->frac[y]);
                    T* r0 = dst + ay->lo[y] * w;
                    T* r1 = dst + ay->hi[y] * w;
                    for (std::size_t c = 0; c < ow; ++c) {
                      const T fx = static_cast<T>(ax->frac[c]);
                      const T gv = go[y * ow + c];
                      r0[ax->lo[c]] += gv * (1 - fy) * (1 - fx);
                      r0[ax->hi[c]] += gv * (1 - fy) * fx;
                      r1[ax->lo[c]] += gv * fy * (1 - fx);
                      r1[ax->hi[c]] += gv * fy * fx;
                    }
                  }
                }
              });
  }
  return out;
}

template <typename T>
Tensor<T> avg_pool(const Tensor<T>& x, std::size_t s) {
  detail::require_defined("avg_pool", x);
  if (x.rank() != 4 || s == 0 || x.dim(2) % s != 0 || x.dim(3) % s != 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "avg_pool: stride " + std::to_string(s) +
                    " does not tile shape " + shape_to_string(x.shape()));
  }
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2), w = x.dim(3), oh = h / s, ow = w / s;
  const T scale = T(1) / static_cast<T>(s * s);
  Tensor<T> out = detail::make_tensor<T>({x.dim(0), x.dim(1), oh, ow});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t c = 0; c < w; ++c)
        out.data()[(p * oh + y / s) * ow + c / s] +=
            x.data()[(p * h + y) * w + c] * scale;
  if (auto* g = detail::tracking_graph<T>({&x})) {
    DataPtr<T> px = x.shared(), po = out.shared();
    g->record("avg_pool", {px}, po, [px, po, planes, h, w, oh, ow, s, scale] {
      T* gx = detail::grad_if_needed(px);
      if (!gx) return;
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t c = 0; c < w; ++c)
            gx[(p * h + y) * w + c] +=
                po->grad[(p * oh + y / s) * ow + c / s] * scale;
    });
  }
  return out;
}

template <typename T>
Tensor<T> window_partition(const Tensor<T>& x, std::size_t window) {
  detail::require_defined("window_partition", x);
  if (x.rank() != 4 || window == 0 || x.dim(2) % window != 0 ||
      x.dim(3) % window != 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "window_partition: window " + std::to_string(window) +
                    " does not tile shape " + shape_to_string(x.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t nh = h / window, nw = w / window;
  auto source = std::make_shared<std::vector<std::size_t>>();
  source->reserve(x.numel());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < nh; ++i)
      for (std::size_t j = 0; j < nw; ++j)
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t y = 0; y < window; ++y)
            for (std::size_t xx = 0; xx < window; ++xx)
              source->push_back(((b * c + ch) * h + i * window + y) * w +
                                j * window + xx);
  return gather<T>("window_partition", x, {n * nh * nw, c, window, window},
                   std::move(source));
}

template <typename T>
Tensor<T> window_reverse(const Tensor<T>& windows, std::size_t batch,
                         std::size_t height, std::size_t width) {
  detail::require_defined("window_reverse", windows);
  if (windows.rank() != 4 || windows.dim(2) != windows.dim(3) ||
      windows.dim(2) == 0 || height % windows.dim(2) != 0 ||
      width % windows.dim(2) != 0 ||
      windows.dim(0) != batch * (height / windows.dim(2)) *
                            (width / windows.dim(2))) {
    throw Error(ErrorCode::kShapeMismatch,
                "window_reverse: windows " + shape_to_string(windows.shape()) +
                    " do not tile " + std::to_string(height) + "x" +
                    std::to_string(width));
  }
  const std::size_t window = windows.dim(2), c = windows.dim(1);
  const std::size_t nh = height / window, nw = width / window;
  auto source = std::make_shared<std::vector<std::size_t>>(windows.numel());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t xx = 0; xx < width; ++xx) {
          const std::size_t win = (b * nh + y / window) * nw + xx / window;
          (*source)[((b * c + ch) * height + y) * width + xx] =
              ((win * c + ch) * window + y % window) * window + xx % window;
        }
  return gather<T>("window_reverse", windows, {batch, c, height, width},
                   std::move(source));
}

#define SISTA_INSTANTIATE(T)                                                  \
  template Tensor<T> transpose(const Tensor<T>&,                              \
                               const std::vector<std::size_t>&);              \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                        \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);      \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t,        \
                           std::size_t);                                      \
  template Tensor<T> pad2d(const Tensor<T>&, std::size_t, std::size_t);       \
  template Tensor<T> bilinear_upsample(const Tensor<T>&, std::size_t);        \
  template Tensor<T> avg_pool(const Tensor<T>&, std::size_t);                 \
  template Tensor<T> window_partition(const Tensor<T>&, std::size_t);         \
  template Tensor<T> window_reverse(const Tensor<T>&, std::size_t,            \
                                    std::size_t, std::size_t);

SISTA_INSTANTIATE(float)
SISTA_INSTANTIATE(double)
#undef SISTA_INSTANTIATE

}  // namespace sista::tensor::ops
