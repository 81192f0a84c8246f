#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "sista/arch/model.hpp"
#include "sista/error.hpp"
#include "sista/forward/measurement.hpp"
#include "sista/io/image.hpp"

namespace sista::train {

using tensor::Tensor;

struct LossWeights {
  double fidelity = 10.0;
  double sparsity = 0.1;
  double proximal = 1.0;

  void validate() const;
};

// (1/N_M) ||M o_f - y||^2. m is [N_M, N_P], o_f any shape with N_P elements,
// y is [N_M, 1].
template <typename T>
Tensor<T> loss_fidelity(const Tensor<T>& o_f, const Tensor<T>& m,
                        const Tensor<T>& y);

// Mean absolute value.
template <typename T>
Tensor<T> loss_sparsity(const Tensor<T>& feat);

// sum_i p_i (log p_i - log_q_i); entries with p_i == 0 contribute 0.
// p is a constant distribution.
template <typename T>
Tensor<T> kl_divergence(const std::vector<T>& p, const Tensor<T>& log_q);

// KL(softmax(y) || softmax(M o_p)).
template <typename T>
Tensor<T> loss_proximal(const Tensor<T>& o_p, const Tensor<T>& m,
                        const Tensor<T>& y);

std::vector<double> softmax(const std::vector<double>& v);

struct TrainConfig {
  arch::BlockHyper hyper;
  arch::ModelVariant variant;
  arch::ThresholdBounds bounds;
  LossWeights weights;
  std::size_t max_iters = 2000;
  double lr_max = 1e-4;
  double lr_min = 1e-5;
  double alpha_init = 0.1;
  std::uint64_t init_seed = 1;
  std::uint64_t input_seed = 2;  // fixed DIP input noise I
  // Standardize y (zero mean, unit variance); the patterns are centred and
  // scaled alike so that M x = y still holds.
  bool normalize_y = false;
  double clip_norm = 10.0;  // global l2 clip, f32 only; <= 0 disables
  std::size_t snapshot_every = 0;

  void validate() const;
};

// Valid ablation tags: full, a..g.
std::vector<std::string> ablation_tags();
TrainConfig apply_ablation(TrainConfig config, std::string_view tag);

struct IterationRecord {
  std::size_t iteration = 0;
  double fidelity = 0;
  double sparsity = 0;
  double proximal = 0;
  double total = 0;
  double lambda = 0;
  double lr = 0;
};

struct Snapshot {
  std::size_t iteration = 0;
  io::Image proximal;
};

struct TrainReport {
  std::vector<IterationRecord> records;
  double wall_seconds = 0;
  io::Image fidelity_image;  // O_F
  io::Image proximal_image;  // O_P, the reconstruction
  std::vector<Snapshot> snapshots;
};

inline constexpr const char* kTrainCsvHeader =
    "iteration,loss_fidelity,loss_sparsity,loss_proximal,loss_total,lambda,lr";

std::string train_csv(const TrainReport& report);
void write_train_csv(const std::filesystem::path& path,
                     const TrainReport& report);

// Raised when a loss or gradient turns non-finite. Carries the records of
// every finite iteration before the failure.
class TrainAborted : public Error {
 public:
  TrainAborted(std::size_t iteration, const std::string& reason,
               TrainReport last_finite);

  std::size_t iteration() const noexcept { return iteration_; }
  const TrainReport& last_finite() const noexcept { return report_; }

 private:
  std::size_t iteration_;
  TrainReport report_;
};

template <typename T>
struct TrainResult {
  TrainReport report;
  std::unique_ptr<arch::SistaModel<T>> model;
};

template <typename T>
TrainResult<T> train(const forward::MeasurementMatrix& m,
                     const std::vector<double>& y, const TrainConfig& config);

}  // namespace sista::train
