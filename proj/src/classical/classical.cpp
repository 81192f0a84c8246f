#include "sista/classical/classical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sista/error.hpp"

namespace sista::classical {

namespace {

// Row k holds the k-th orthonormal DCT-II basis vector of length n.
std::vector<double> dct_matrix(std::size_t n) {
  std::vector<double> d(n * n);
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = k == 0 ? std::sqrt(1.0 / nn) : std::sqrt(2.0 / nn);
    for (std::size_t i = 0; i < n; ++i)
      d[k * n + i] = a * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * nn));
  }
  return d;
}

// out = L * X * R^T with L: h x h, R: w x w (transposed when `inverse`).
std::vector<double> separable(std::span<const double> x, std::size_t h,
                              std::size_t w, bool inverse) {
  if (x.size() != h * w)
    throw Error(ErrorCode::kShapeMismatch, "dct2: buffer size does not match " +
                                               std::to_string(h) + "x" + std::to_string(w));
  const auto dh = dct_matrix(h), dw = dct_matrix(w);
  std::vector<double> tmp(h * w, 0.0), out(h * w, 0.0);
  // rows
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t k = 0; k < w; ++k) {
      double acc = 0;
      for (std::size_t i = 0; i < w; ++i)
        acc += (inverse ? dw[i * w + k] : dw[k * w + i]) * x[y * w + i];
      tmp[y * w + k] = acc;
    }
  // columns
  for (std::size_t k = 0; k < h; ++k)
    for (std::size_t i = 0; i < h; ++i) {
      const double c = inverse ? dh[i * h + k] : dh[k * h + i];
      if (c == 0.0) continue;
      for (std::size_t x2 = 0; x2 < w; ++x2) out[k * w + x2] += c * tmp[i * w + x2];
    }
  return out;
}

void apply_phi(const forward::MeasurementMatrix& m, std::span<const double> x,
               std::vector<double>& out) {
  out.assign(m.n_meas, 0.0);
  for (std::size_t r = 0; r < m.n_meas; ++r) {
    const auto row = m.row(r);
    double acc = 0;
    for (std::size_t p = 0; p < row.size(); ++p) acc += row[p] * x[p];
    out[r] = acc;
  }
}

void apply_phi_t(const forward::MeasurementMatrix& m, std::span<const double> v,
                 std::vector<double>& out) {
  out.assign(m.n_pix(), 0.0);
  for (std::size_t r = 0; r < m.n_meas; ++r) {
    const auto row = m.row(r);
    const double s = v[r];
    if (s == 0.0) continue;
    for (std::size_t p = 0; p < row.size(); ++p) out[p] += row[p] * s;
  }
}

double norm2(std::span<const double> v) {
  double acc = 0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

void check_inputs(const forward::MeasurementMatrix& m, std::span<const double> y,
                  const char* op) {
  if (m.patterns.size() != m.n_meas * m.n_pix())
    throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": pattern buffer size mismatch");
  if (y.size() != m.n_meas)
    throw Error(ErrorCode::kShapeMismatch,
                std::string(op) + ": " + std::to_string(y.size()) +
                    " measurements for " + std::to_string(m.n_meas) + " patterns");
  for (double v : y)
    if (!std::isfinite(v))
      throw Error(ErrorCode::kNonFinite, std::string(op) + ": non-finite measurement");
}

}  // namespace

std::vector<double> dct2(std::span<const double> img, std::size_t height,
                         std::size_t width) {
  return separable(img, height, width, false);
}

std::vector<double> idct2(std::span<const double> coeffs, std::size_t height,
                          std::size_t width) {
  return separable(coeffs, height, width, true);
}

std::vector<double> dgi_raw(const forward::MeasurementMatrix& m,
                            std::span<const double> y) {
  check_inputs(m, y, "dgi");
  if (m.n_meas < 2) throw_invalid("dgi: need at least 2 measurements");
  const std::size_t np = m.n_pix();
  const double inv_n = 1.0 / static_cast<double>(m.n_meas);
  std::vector<double> bi(np, 0.0), ri(np, 0.0);
  double b_mean = 0, r_mean = 0;
  for (std::size_t r = 0; r < m.n_meas; ++r) {
    const auto row = m.row(r);
    double total = 0;
    for (double v : row) total += v;
    b_mean += y[r];
    r_mean += total;
    for (std::size_t p = 0; p < np; ++p) {
      bi[p] += y[r] * row[p];
      ri[p] += total * row[p];
    }
  }
  b_mean *= inv_n;
  r_mean *= inv_n;
  if (r_mean == 0.0)
    throw Error(ErrorCode::kDegenerate, "dgi: degenerate ensemble (all patterns dark)");
  std::vector<double> g(np);
  const double ratio = b_mean / r_mean;
  for (std::size_t p = 0; p < np; ++p) g[p] = bi[p] * inv_n - ratio * ri[p] * inv_n;
  return g;
}

io::Image dgi_reconstruct(const forward::MeasurementMatrix& m,
                          std::span<const double> y) {
  const auto g = dgi_raw(m, y);
  const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
  const double range = *hi - *lo;
  double scale = 0;
  for (double v : g) scale = std::max(scale, std::abs(v));
  // Exact cancellation still leaves rounding noise; treat a range that is
  // negligible against the correlation magnitudes as zero.
  double ref = 0;
  for (double v : y) ref = std::max(ref, std::abs(v));
  if (range <= 1e-12 * std::max(scale, ref))
    throw Error(ErrorCode::kDegenerate,
                "dgi: degenerate ensemble (differential estimate is constant)");
  io::Image img(m.height, m.width);
  for (std::size_t p = 0; p < g.size(); ++p) img.pixels[p] = (g[p] - *lo) / range;
  return img;
}

double soft_threshold(double z, double t) {
  const double mag = std::abs(z) - t;
  if (mag <= 0) return 0.0;
  return z > 0 ? mag : -mag;
}

double estimate_lipschitz(const forward::MeasurementMatrix& m,
                          std::size_t iterations, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> v(m.n_pix()), mv, w;
  for (double& x : v) x = u(rng);
  double n = norm2(v);
  for (double& x : v) x /= n;
  double lambda = 0;
  for (std::size_t it = 0; it < iterations; ++it) {
    apply_phi(m, v, mv);
    apply_phi_t(m, mv, w);
    double dot = 0;
    for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * w[i];
    lambda = dot;
    n = norm2(w);
    if (n == 0) return 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = w[i] / n;
  }
  return lambda;
}

IstaResult ista_reconstruct(const forward::MeasurementMatrix& m,
                            std::span<const double> y, const IstaConfig& cfg) {
  check_inputs(m, y, "ista");
  if (cfg.reg_weight < 0) throw_invalid("ista: reg_weight must be >= 0");
  if (cfg.tol < 0) throw_invalid("ista: tol must be >= 0");
  IstaResult res;
  res.lipschitz = estimate_lipschitz(m);
  if (!(res.lipschitz > 0))
    throw Error(ErrorCode::kDegenerate, "ista: measurement operator is zero");
  res.step_size = cfg.step_size > 0 ? cfg.step_size : 0.9 / res.lipschitz;
  if (!cfg.allow_large_step && res.step_size > (1.0 + 1e-9) / res.lipschitz)
    throw_invalid("ista: step size " + std::to_string(res.step_size) +
                  " exceeds 1/L = " + std::to_string(1.0 / res.lipschitz));

  const std::size_t h = m.height, w = m.width, np = m.n_pix();
  const bool dct = cfg.transform == Transform::kDct2;
  auto to_coeff = [&](const std::vector<double>& x) {
    return dct ? dct2(x, h, w) : x;
  };
  auto from_coeff = [&](const std::vector<double>& c) {
    return dct ? idct2(c, h, w) : c;
  };
  auto objective = [&](const std::vector<double>& resid, const std::vector<double>& c) {
    double l1 = 0;
    for (double v : c) l1 += std::abs(v);
    const double r = norm2(resid);
    return 0.5 * r * r + cfg.reg_weight * l1;
  };

  std::vector<double> x(np, 0.0), c(np, 0.0), r, grad;
  apply_phi(m, x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  const double initial_residual = norm2(r);
  double prev_obj = objective(r, c);
  const double thresh = cfg.reg_weight * res.step_size;

  for (std::size_t k = 0; k < cfg.max_iters; ++k) {
    apply_phi_t(m, r, grad);
    std::vector<double> z(np);
    for (std::size_t p = 0; p < np; ++p) z[p] = x[p] - res.step_size * grad[p];
    std::vector<double> zc = to_coeff(z);
    for (double& v : zc) v = soft_threshold(v, thresh);
    std::vector<double> next = from_coeff(zc);

    double diff = 0, base = 0;
    for (std::size_t p = 0; p < np; ++p) {
      diff += (next[p] - x[p]) * (next[p] - x[p]);
      base += x[p] * x[p];
    }
    x = std::move(next);
    c = std::move(zc);
    apply_phi(m, x, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
    const double resid = norm2(r);
    if (!std::isfinite(resid) || resid > 10.0 * initial_residual + 1e-300) {
      throw Error(ErrorCode::kDivergence,
                  "ista: diverged at iteration " + std::to_string(k + 1) +
                      " (residual " + std::to_string(resid) + " vs initial " +
                      std::to_string(initial_residual) +
                      "); use a smaller step size");
    }
    const double obj = objective(r, c);
    if (obj > prev_obj + 1e-12 * std::max(1.0, std::abs(prev_obj)))
      res.objective_monotone = false;
    prev_obj = obj;
    res.residual_history.push_back(resid);
    res.objective_history.push_back(obj);
    res.iterations = k + 1;
    if (cfg.tol > 0) {
      if (base == 0 ? diff == 0 : std::sqrt(diff / base) < cfg.tol) break;
    }
  }

  res.solution = x;
  res.image = io::Image(h, w);
  for (std::size_t p = 0; p < np; ++p)
    res.image.pixels[p] = cfg.clip_output ? std::clamp(x[p], 0.0, 1.0) : x[p];
  return res;
}

}  // namespace sista::classical
