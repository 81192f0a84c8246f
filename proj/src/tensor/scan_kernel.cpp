#include "scan_kernel.hpp"

#include <cmath>

namespace sista::tensor::detail {

template <typename T>
void scan_decay(const T* dt, const T* a, std::size_t L, std::size_t S,
                T* decay) {
  for (std::size_t t = 0; t < L; ++t) {
    const T d = dt[t];
    T* row = decay + t * S;
    for (std::size_t s = 0; s < S; ++s) row[s] = std::exp(d * a[s]);
  }
}

template <typename T>
void scan_forward_row(const T* u, const T* dt, const T* decay, const T* bt,
                      const T* ct, T skip, std::size_t L, std::size_t S, T* y,
                      T* h, T* hist) {
  for (std::size_t s = 0; s < S; ++s) h[s] = 0;
  if (hist)
    for (std::size_t s = 0; s < S; ++s) hist[s] = 0;
  for (std::size_t t = 0; t < L; ++t) {
    const T du = dt[t] * u[t];
    const T* e = decay + t * S;
    const T* b = bt + t * S;
    const T* c = ct + t * S;
    T acc = 0;
    for (std::size_t s = 0; s < S; ++s) {
      h[s] = e[s] * h[s] + du * b[s];
      acc += c[s] * h[s];
    }
    y[t] = acc + skip * u[t];
    if (hist) {
      T* out = hist + (t + 1) * S;
      for (std::size_t s = 0; s < S; ++s) out[s] = h[s];
    }
  }
}

template <typename T>
void scan_backward_row(const T* u, const T* dt, const T* a, const T* decay,
                       const T* hist, const T* bt, const T* ct, const T* gy,
                       T skip, std::size_t L, std::size_t S, T* gu, T* gdt,
                       T* ga, T* gbt, T* gct, T* carry, T* gskip) {
  for (std::size_t s = 0; s < S; ++s) carry[s] = 0;
  T gs = 0;
  for (std::size_t t = L; t-- > 0;) {
    const T g = gy[t];
    const T d = dt[t];
    const T x = u[t];
    const T* e = decay + t * S;
    const T* b = bt + t * S;
    const T* c = ct + t * S;
    const T* h_t = hist + (t + 1) * S;
    const T* h_prev = hist + t * S;
    T* gb = gbt + t * S;
    T* gc = gct + t * S;
    gs += g * x;
    T acc_u = 0, acc_dt = 0;
    for (std::size_t s = 0; s < S; ++s) {
      gc[s] += g * h_t[s];
      const T gh = carry[s] + g * c[s];
      const T g_decay = gh * h_prev[s] * e[s];
      acc_dt += g_decay * a[s] + gh * b[s] * x;
      ga[s] += g_decay * d;
      gb[s] += gh * d * x;
      acc_u += gh * b[s];
      carry[s] = gh * e[s];
    }
    gu[t] = g * skip + acc_u * d;
    gdt[t] = acc_dt;
  }
  *gskip += gs;
}

#define SISTA_SCAN_INSTANTIATE(T)                                             \
  template void scan_decay<T>(const T*, const T*, std::size_t, std::size_t,   \
                              T*);                                            \
  template void scan_forward_row<T>(const T*, const T*, const T*, const T*,   \
                                    const T*, T, std::size_t, std::size_t,    \
                                    T*, T*, T*);                              \
  template void scan_backward_row<T>(                                         \
      const T*, const T*, const T*, const T*, const T*, const T*, const T*,   \
      const T*, T, std::size_t, std::size_t, T*, T*, T*, T*, T*, T*, T*);

SISTA_SCAN_INSTANTIATE(float)
SISTA_SCAN_INSTANTIATE(double)

}  // namespace sista::tensor::detail
