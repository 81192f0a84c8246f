#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sista/io/image.hpp"

namespace sista::metrics {

struct PsnrResult {
  double db = 0.0;         // +inf when identical
  bool identical = false;  // MSE == 0
};

PsnrResult psnr(const io::Image& a, const io::Image& b, double peak = 1.0);

struct SsimResult {
  double value = 0.0;
  bool global_fallback = false;  // image smaller than the 11x11 window
};

// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// peak 1, evaluated on the valid region.
SsimResult ssim(const io::Image& a, const io::Image& b);

using Mask = std::vector<std::uint8_t>;

// (mean_target - mean_background) / std_background (population std).
double cnr(const io::Image& img, const Mask& target, const Mask& background);

// Masks from a reference: target = ref >= threshold, background = the rest.
std::pair<Mask, Mask> masks_from_reference(const io::Image& ref, double threshold);

// Otsu threshold over 256 bins in [0, 1]; returns the bin upper edge.
double otsu_threshold(const io::Image& img);

struct PseudoGtOptions {
  double background_percentile = 0.10;
  double tv_weight = 0.02;
  std::size_t tv_iters = 200;
};

struct PseudoGtResult {
  io::Image image;
  bool degenerate = false;  // constant after background subtraction
};

// Chambolle projection algorithm for min_u 0.5||u - f||^2 + weight TV(u).
io::Image tv_denoise(const io::Image& f, double weight, std::size_t iters);
io::Image median3(const io::Image& img);
io::Image erode3(const io::Image& img);
io::Image dilate3(const io::Image& img);
io::Image open3(const io::Image& img);
io::Image close3(const io::Image& img);
double percentile(std::vector<double> values, double q);

PseudoGtResult pseudo_gt(const io::Image& raw, const PseudoGtOptions& opts = {});

struct MetricReport {
  std::string scene;
  std::string method;
  double ratio = 0.0;
  PsnrResult psnr;
  SsimResult ssim;
  double cnr = 0.0;
  bool has_cnr = false;
  std::uint64_t seed = 0;
  std::string against = "ground-truth";  // or "pseudo-gt"
};

extern const char* const kMetricCsvHeader;
std::string metric_csv_row(const MetricReport& r);
// Appends one row, writing the header first when the file is new or empty.
void append_metric_row(const std::filesystem::path& path, const MetricReport& r);

}  // namespace sista::metrics
