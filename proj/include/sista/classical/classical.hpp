#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sista/forward/measurement.hpp"
#include "sista/io/image.hpp"

namespace sista::classical {

// Orthonormal 2-D DCT-II and its inverse over a row-major H x W grid.
std::vector<double> dct2(std::span<const double> img, std::size_t height,
                         std::size_t width);
std::vector<double> idct2(std::span<const double> coeffs, std::size_t height,
                          std::size_t width);

// Differential ghost imaging, before normalization:
//   G(p) = <B I(p)> - (<B> / <R>) <R I(p)>,   R_r = sum_p I_r(p).
std::vector<double> dgi_raw(const forward::MeasurementMatrix& m,
                            std::span<const double> y);

// dgi_raw followed by min-max normalization to [0, 1]. Throws kDegenerate
// ("degenerate ensemble") when the raw estimate has zero range.
io::Image dgi_reconstruct(const forward::MeasurementMatrix& m,
                          std::span<const double> y);

enum class Transform { kIdentity, kDct2 };

struct IstaConfig {
  double step_size = 0.0;  // <= 0 selects 0.9 / L
  double reg_weight = 1e-3;
  Transform transform = Transform::kDct2;
  std::size_t max_iters = 500;
  double tol = 1e-6;
  bool clip_output = true;
  // Skip the eta <= 1/L guard; the divergence check still applies.
  bool allow_large_step = false;
};

struct IstaResult {
  io::Image image;                  // clipped to [0, 1] when clip_output
  std::vector<double> solution;     // unclipped pixel-domain iterate
  std::size_t iterations = 0;
  double lipschitz = 0.0;           // power-iteration estimate of ||Phi||^2
  double step_size = 0.0;
  std::vector<double> residual_history;   // ||Phi x^k - y||_2
  std::vector<double> objective_history;  // 0.5||Phi x - y||^2 + lambda||Psi x||_1
  bool objective_monotone = true;
};

// Largest eigenvalue of Phi^T Phi by power iteration.
double estimate_lipschitz(const forward::MeasurementMatrix& m,
                          std::size_t iterations = 50,
                          std::uint64_t seed = 0x5eed);

// Scalar soft threshold sgn(z) max(|z| - t, 0).
double soft_threshold(double z, double t);

IstaResult ista_reconstruct(const forward::MeasurementMatrix& m,
                            std::span<const double> y, const IstaConfig& cfg);

}  // namespace sista::classical
