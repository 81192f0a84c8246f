#include <cmath>
#include <numeric>

#include "ops_common.hpp"
#include "scan_kernel.hpp"
#include "sista/tensor/ops.hpp"

namespace sista::tensor::ops {

using detail::DataPtr;

namespace {

struct ScanDims {
  std::size_t batch, channels, length, state;
};

template <typename T>
ScanDims scan_dims(const Tensor<T>& x, const Tensor<T>& delta,
                   const Tensor<T>& A, const Tensor<T>& B, const Tensor<T>& C,
                   const Tensor<T>& skip) {
  const char* op = "selective_scan";
  for (const Tensor<T>* t : {&x, &delta, &A, &B, &C, &skip})
    detail::require_defined(op, *t);
  if (x.rank() != 3) throw_invalid("selective_scan: x must be [N, D, L]");
  ScanDims d{x.dim(0), x.dim(1), x.dim(2), 0};
  if (delta.shape() != x.shape()) throw_shape_mismatch(op, x.shape(), delta.shape());
  if (A.rank() != 2 || A.dim(0) != d.channels)
    throw_shape_mismatch(op, x.shape(), A.shape());
  d.state = A.dim(1);
  const Shape bc{d.batch, d.state, d.length};
  if (B.shape() != bc) throw_shape_mismatch(op, bc, B.shape());
  if (C.shape() != bc) throw_shape_mismatch(op, bc, C.shape());
  if (skip.shape() != Shape{d.channels})
    throw_shape_mismatch(op, x.shape(), skip.shape());
  return d;
}

template <typename T>
void gather_bc(const T* src, std::size_t n, std::size_t S, std::size_t L,
               const std::vector<std::size_t>& visit, std::vector<T>& dst) {
  dst.resize(L * S);
  const T* base = src + n * S * L;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t t = 0; t < L; ++t) dst[t * S + s] = base[s * L + visit[t]];
}

template <typename T>
void scatter_bc(const std::vector<T>& src, std::size_t n, std::size_t S,
                std::size_t L, const std::vector<std::size_t>& visit, T* dst) {
  if (!dst) return;
  T* base = dst + n * S * L;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t t = 0; t < L; ++t) base[s * L + visit[t]] += src[t * S + s];
}

}  // namespace

template <typename T>
Tensor<T> selective_scan(const Tensor<T>& x, const Tensor<T>& delta,
                         const Tensor<T>& A, const Tensor<T>& B,
                         const Tensor<T>& C, const Tensor<T>& skip,
                         std::span<const std::size_t> order) {
  const ScanDims d = scan_dims(x, delta, A, B, C, skip);
  auto visit = std::make_shared<std::vector<std::size_t>>();
  if (order.empty()) {
    visit->resize(d.length);
    std::iota(visit->begin(), visit->end(), std::size_t{0});
  } else {
    if (order.size() != d.length)
      throw_invalid("selective_scan: order length " +
                    std::to_string(order.size()) + " != sequence length " +
                    std::to_string(d.length));
    visit->assign(order.begin(), order.end());
    std::vector<bool> seen(d.length, false);
    for (std::size_t p : *visit) {
      if (p >= d.length || seen[p])
        throw_invalid("selective_scan: order is not a permutation");
      seen[p] = true;
    }
  }

  Tensor<T> out = detail::make_tensor<T>(x.shape());
  const std::size_t L = d.length, S = d.state;
  const T* xv = x.data().data();
  const T* dv = delta.data().data();
  const T* av = A.data().data();
  const T* sv = skip.data().data();
  T* yv = out.data().data();
  std::vector<T> bt, ct, u(L), dt(L), y(L), h(S), decay(L * S);
  for (std::size_t n = 0; n < d.batch; ++n) {
    gather_bc(B.data().data(), n, S, L, *visit, bt);
    gather_bc(C.data().data(), n, S, L, *visit, ct);
    for (std::size_t ch = 0; ch < d.channels; ++ch) {
      const std::size_t row = (n * d.channels + ch) * L;
      for (std::size_t t = 0; t < L; ++t) {
        u[t] = xv[row + (*visit)[t]];
        dt[t] = dv[row + (*visit)[t]];
      }
      detail::scan_decay(dt.data(), av + ch * S, L, S, decay.data());
      detail::scan_forward_row(u.data(), dt.data(), decay.data(), bt.data(),
                               ct.data(), sv[ch], L, S, y.data(), h.data(),
                               static_cast<T*>(nullptr));
      for (std::size_t t = 0; t < L; ++t) yv[row + (*visit)[t]] = y[t];
    }
  }
  detail::check_finite("selective_scan", out);

  if (auto* g = detail::tracking_graph<T>({&x, &delta, &A, &B, &C, &skip})) {
    DataPtr<T> px = x.shared(), pd = delta.shared(), pa = A.shared(),
               pb = B.shared(), pc = C.shared(), ps = skip.shared(),
               po = out.shared();
    g->record("selective_scan", {px, pd, pa, pb, pc, ps}, po,
              [d, visit, px, pd, pa, pb, pc, ps, po] {
                T* gx = detail::grad_if_needed(px);
                T* gd = detail::grad_if_needed(pd);
                T* ga = detail::grad_if_needed(pa);
                T* gb = detail::grad_if_needed(pb);
                T* gc = detail::grad_if_needed(pc);
                T* gs = detail::grad_if_needed(ps);
                const T* xv = px->value.data();
                const T* dv = pd->value.data();
                const T* av = pa->value.data();
                const T* sv = ps->value.data();
                const T* go = po->grad.data();
                const std::size_t L = d.length, S = d.state;
                const auto& vis = *visit;
                std::vector<T> bt, ct, u(L), dt(L), gy(L), h(S), carry(S);
                std::vector<T> decay(L * S), hist((L + 1) * S);
                std::vector<T> gu(L), gdt(L), ga_row(S);
                std::vector<T> gbt(L * S), gct(L * S);
                for (std::size_t n = 0; n < d.batch; ++n) {
                  gather_bc(pb->value.data(), n, S, L, vis, bt);
                  gather_bc(pc->value.data(), n, S, L, vis, ct);
                  std::fill(gbt.begin(), gbt.end(), T(0));
                  std::fill(gct.begin(), gct.end(), T(0));
                  for (std::size_t ch = 0; ch < d.channels; ++ch) {
                    const std::size_t row = (n * d.channels + ch) * L;
                    for (std::size_t t = 0; t < L; ++t) {
                      u[t] = xv[row + vis[t]];
                      dt[t] = dv[row + vis[t]];
                      gy[t] = go[row + vis[t]];
                    }
                    const T* a_row = av + ch * S;
                    detail::scan_decay(dt.data(), a_row, L, S, decay.data());
                    detail::scan_forward_row(u.data(), dt.data(), decay.data(),
                                             bt.data(), ct.data(), sv[ch], L,
                                             S, gu.data(), h.data(),
                                             hist.data());
                    std::fill(ga_row.begin(), ga_row.end(), T(0));
                    T gskip = 0;
                    detail::scan_backward_row(
                        u.data(), dt.data(), a_row, decay.data(), hist.data(),
                        bt.data(), ct.data(), gy.data(), sv[ch], L, S,
                        gu.data(), gdt.data(), ga_row.data(), gbt.data(),
                        gct.data(), carry.data(), &gskip);
                    if (gs) gs[ch] += gskip;
                    if (ga)
                      for (std::size_t s = 0; s < S; ++s)
                        ga[ch * S + s] += ga_row[s];
                    for (std::size_t t = 0; t < L; ++t) {
                      if (gx) gx[row + vis[t]] += gu[t];
                      if (gd) gd[row + vis[t]] += gdt[t];
                    }
                  }
                  scatter_bc(gbt, n, S, L, vis, gb);
                  scatter_bc(gct, n, S, L, vis, gc);
                }
              });
  }
  return out;
}

template Tensor<float> selective_scan(const Tensor<float>&,
                                      const Tensor<float>&,
                                      const Tensor<float>&,
                                      const Tensor<float>&,
                                      const Tensor<float>&,
                                      const Tensor<float>&,
                                      std::span<const std::size_t>);
template Tensor<double> selective_scan(const Tensor<double>&,
                                       const Tensor<double>&,
                                       const Tensor<double>&,
                                       const Tensor<double>&,
                                       const Tensor<double>&,
                                       const Tensor<double>&,
                                       std::span<const std::size_t>);

}  // namespace sista::tensor::ops
