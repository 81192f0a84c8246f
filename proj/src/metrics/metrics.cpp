#include "sista/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "sista/error.hpp"

namespace sista::metrics {

namespace {

void require_same(const io::Image& a, const io::Image& b, const char* op) {
  if (a.height != b.height || a.width != b.width || a.size() != a.height * a.width ||
      b.size() != b.height * b.width) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(op) + ": image sizes differ (" + std::to_string(a.height) +
                    "x" + std::to_string(a.width) + " vs " + std::to_string(b.height) +
                    "x" + std::to_string(b.width) + ")");
  }
  if (a.size() == 0) throw_invalid(std::string(op) + ": empty image");
}

constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);

double ssim_from_moments(double mu_a, double mu_b, double var_a, double var_b,
                         double cov) {
  return ((2 * mu_a * mu_b + kC1) * (2 * cov + kC2)) /
         ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
}

template <typename Pick>
io::Image window3(const io::Image& img, Pick pick) {
  io::Image out(img.height, img.width);
  const auto h = static_cast<long>(img.height), w = static_cast<long>(img.width);
  std::vector<double> vals;
  vals.reserve(9);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      vals.clear();
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          const long yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w) vals.push_back(img.at(yy, xx));
        }
      out.at(y, x) = pick(vals);
    }
  return out;
}

}  // namespace

PsnrResult psnr(const io::Image& a, const io::Image& b, double peak) {
  require_same(a, b, "psnr");
  if (!(peak > 0)) throw_invalid("psnr: peak must be > 0");
  double mse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0) return {std::numeric_limits<double>::infinity(), true};
  return {10.0 * std::log10(peak * peak / mse), false};
}

SsimResult ssim(const io::Image& a, const io::Image& b) {
  require_same(a, b, "ssim");
  constexpr int kWin = 11;
  const std::size_t h = a.height, w = a.width;
  if (h < kWin || w < kWin) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ma += a.pixels[i];
      mb += b.pixels[i];
    }
    ma /= n;
    mb /= n;
    double va = 0, vb = 0, cv = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      va += (a.pixels[i] - ma) * (a.pixels[i] - ma);
      vb += (b.pixels[i] - mb) * (b.pixels[i] - mb);
      cv += (a.pixels[i] - ma) * (b.pixels[i] - mb);
    }
    return {ssim_from_moments(ma, mb, va / n, vb / n, cv / n), true};
  }
  double taps[kWin];
  double total = 0;
  for (int k = 0; k < kWin; ++k) {
    const double d = k - kWin / 2;
    taps[k] = std::exp(-d * d / (2 * 1.5 * 1.5));
    total += taps[k];
  }
  for (double& t : taps) t /= total;
  double acc = 0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + kWin <= h; ++y)
    for (std::size_t x = 0; x + kWin <= w; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const double wt = taps[i] * taps[j];
          const double va = a.at(y + i, x + j), vb = b.at(y + i, x + j);
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      acc += ssim_from_moments(ma, mb, saa - ma * ma, sbb - mb * mb, sab - ma * mb);
      ++count;
    }
  return {acc / static_cast<double>(count), false};
}

double cnr(const io::Image& img, const Mask& target, const Mask& background) {
  if (target.size() != img.size() || background.size() != img.size())
    throw Error(ErrorCode::kShapeMismatch, "cnr: mask size does not match image");
  double st = 0, sb = 0;
  std::size_t nt = 0, nb = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (target[i] && background[i]) throw_invalid("cnr: target and background masks overlap");
    if (target[i]) {
      st += img.pixels[i];
      ++nt;
    } else if (background[i]) {
      sb += img.pixels[i];
      ++nb;
    }
  }
  if (nt == 0 || nb == 0) throw_invalid("cnr: target and background masks must be nonempty");
  const double mt = st / nt, mb = sb / nb;
  double var = 0;
  for (std::size_t i = 0; i < img.size(); ++i)
    if (background[i]) var += (img.pixels[i] - mb) * (img.pixels[i] - mb);
  var /= static_cast<double>(nb);
  const double sd = std::sqrt(var);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mb))))
    throw Error(ErrorCode::kDegenerate, "cnr: degenerate background (zero variance)");
  return (mt - mb) / sd;
}

std::pair<Mask, Mask> masks_from_reference(const io::Image& ref, double threshold) {
  Mask t(ref.size()), b(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    t[i] = ref.pixels[i] >= threshold;
    b[i] = !t[i];
  }
  return {t, b};
}

double otsu_threshold(const io::Image& img) {
  constexpr int kBins = 256;
  std::vector<double> hist(kBins, 0.0);
  for (double v : img.pixels) {
    const int bin = std::clamp(static_cast<int>(std::clamp(v, 0.0, 1.0) * kBins), 0, kBins - 1);
    hist[bin] += 1;
  }
  const double n = static_cast<double>(img.size());
  double sum_all = 0;
  for (int i = 0; i < kBins; ++i) sum_all += i * hist[i];
  double w0 = 0, sum0 = 0, best = -1;
  int best_bin = 0;
  for (int t = 0; t < kBins - 1; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = n - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = t;
    }
  }
  return static_cast<double>(best_bin + 1) / kBins;
}

io::Image tv_denoise(const io::Image& f, double weight, std::size_t iters) {
  if (weight < 0) throw_invalid("tv_denoise: weight must be >= 0");
  if (weight == 0 || iters == 0) return f;
  const std::size_t h = f.height, w = f.width, n = f.size();
  std::vector<double> px(n, 0.0), py(n, 0.0), div(n, 0.0);
  constexpr double tau = 0.125;
  io::Image u = f;
  for (std::size_t it = 0; it < iters; ++it) {
    // div p (adjoint of forward differences)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t i = y * w + x;
        double d = 0;
        if (x + 1 < w) d += px[i];
        if (x > 0) d -= px[i - 1];
        if (y + 1 < h) d += py[i];
        if (y > 0) d -= py[i - w];
        div[i] = d;
      }
    for (std::size_t i = 0; i < n; ++i) u.pixels[i] = f.pixels[i] - weight * div[i];
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t i = y * w + x;
        const double gx = x + 1 < w ? (u.pixels[i + 1] - u.pixels[i]) / weight : 0.0;
        const double gy = y + 1 < h ? (u.pixels[i + w] - u.pixels[i]) / weight : 0.0;
        const double norm = 1.0 + tau * std::hypot(gx, gy);
        px[i] = (px[i] - tau * gx) / norm;
        py[i] = (py[i] - tau * gy) / norm;
      }
  }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      double d = 0;
      if (x + 1 < w) d += px[i];
      if (x > 0) d -= px[i - 1];
      if (y + 1 < h) d += py[i];
      if (y > 0) d -= py[i - w];
      u.pixels[i] = f.pixels[i] - weight * d;
    }
  return u;
}

io::Image median3(const io::Image& img) {
  return window3(img, [](std::vector<double>& v) {
    const auto mid = v.begin() + static_cast<long>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
  });
}

io::Image erode3(const io::Image& img) {
  return window3(img, [](std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); });
}

io::Image dilate3(const io::Image& img) {
  return window3(img, [](std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); });
}

io::Image open3(const io::Image& img) { return dilate3(erode3(img)); }
io::Image close3(const io::Image& img) { return erode3(dilate3(img)); }

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw_invalid("percentile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

PseudoGtResult pseudo_gt(const io::Image& raw, const PseudoGtOptions& opts) {
  if (raw.size() == 0 || raw.size() != raw.height * raw.width)
    throw_invalid("pseudo_gt: empty or inconsistent image");
  PseudoGtResult res;
  const double bg = percentile(raw.pixels, opts.background_percentile);
  io::Image img = raw;
  for (double& v : img.pixels) v = std::max(0.0, v - bg);
  img = tv_denoise(img, opts.tv_weight, opts.tv_iters);
  img = median3(img);
  img = close3(open3(img));
  const auto [lo, hi] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  const double mn = *lo, range = *hi - *lo;
  if (!(range > 1e-12)) {
    res.degenerate = true;
    res.image = io::Image(raw.height, raw.width, 0.0);
    return res;
  }
  for (double& v : img.pixels) v = (v - mn) / range;
  res.image = std::move(img);
  return res;
}

const char* const kMetricCsvHeader = "scene,method,ratio,psnr_db,ssim,cnr,seed,against";

std::string metric_csv_row(const MetricReport& r) {
  auto num = [](double v) {
    if (std::isinf(v)) return std::string(v > 0 ? "inf" : "-inf");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  return r.scene + "," + r.method + "," + num(r.ratio) + "," + num(r.psnr.db) + "," +
         num(r.ssim.value) + "," + (r.has_cnr ? num(r.cnr) : std::string()) + "," +
         std::to_string(r.seed) + "," + r.against;
}

void append_metric_row(const std::filesystem::path& path, const MetricReport& r) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, "cannot append to '" + path.string() + "'");
  if (fresh) out << kMetricCsvHeader << "\n";
  out << metric_csv_row(r) << "\n";
}

}  // namespace sista::metrics
