#pragma once

#include <cstddef>

// Row kernels for selective_scan. Every array is indexed in visit order:
// u[t], dt[t], bt[t * S + s], ct[t * S + s]. Built with fast-math, so callers
// check finiteness on the results.
namespace sista::tensor::detail {

template <typename T>
void scan_decay(const T* dt, const T* a, std::size_t L, std::size_t S,
                T* decay);

template <typename T>
void scan_forward_row(const T* u, const T* dt, const T* decay, const T* bt,
                      const T* ct, T skip, std::size_t L, std::size_t S, T* y,
                      T* h, T* hist);

template <typename T>
void scan_backward_row(const T* u, const T* dt, const T* a, const T* decay,
                       const T* hist, const T* bt, const T* ct, const T* gy,
                       T skip, std::size_t L, std::size_t S, T* gu, T* gdt,
                       T* ga, T* gbt, T* gct, T* carry, T* gskip);

}  // namespace sista::tensor::detail
