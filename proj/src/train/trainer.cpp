#include "sista/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <type_traits>

#include "sista/tensor/graph.hpp"
#include "sista/tensor/ops.hpp"
#include "sista/tensor/optim.hpp"

namespace sista::train {

namespace ops = tensor::ops;

void LossWeights::validate() const {
  for (double w : {fidelity, sparsity, proximal})
    if (!(w >= 0) || !std::isfinite(w))
      throw_invalid("loss weights must be finite and >= 0");
  if (fidelity == 0 && sparsity == 0 && proximal == 0)
    throw_invalid("loss weights must not all be zero");
}

void TrainConfig::validate() const {
  hyper.validate();
  bounds.validate();
  weights.validate();
  if (max_iters == 0) throw_invalid("max_iters must be >= 1");
  if (!(lr_max > 0) || !(lr_min >= 0) || lr_min > lr_max)
    throw_invalid("learning rates need 0 <= lr_min <= lr_max, lr_max > 0");
  if (!std::isfinite(alpha_init)) throw_invalid("alpha_init must be finite");
}

template <typename T>
Tensor<T> loss_fidelity(const Tensor<T>& o_f, const Tensor<T>& m,
                        const Tensor<T>& y) {
  if (m.rank() != 2 || o_f.numel() != m.dim(1))
    throw_shape_mismatch("loss_fidelity", m.shape(), o_f.shape());
  if (y.shape() != tensor::Shape{m.dim(0), 1})
    throw_shape_mismatch("loss_fidelity", {m.dim(0), 1}, y.shape());
  Tensor<T> pred = ops::matmul(m, ops::reshape(o_f, {m.dim(1), 1}));
  Tensor<T> r = ops::sub(pred, y);
  return ops::mean(ops::mul(r, r));
}

template <typename T>
Tensor<T> loss_sparsity(const Tensor<T>& feat) {
  return ops::mean(ops::abs(feat));
}

template <typename T>
Tensor<T> kl_divergence(const std::vector<T>& p, const Tensor<T>& log_q) {
  if (p.size() != log_q.numel())
    throw_shape_mismatch("kl_divergence", {p.size()}, log_q.shape());
  T entropy_term = 0;
  for (T pi : p)
    if (pi > 0) entropy_term += pi * std::log(pi);
  Tensor<T> pt = Tensor<T>::from(log_q.shape(), p);
  Tensor<T> cross = ops::sum(ops::mul(pt, log_q));
  return ops::add_scalar(ops::mul_scalar(cross, T(-1)), entropy_term);
}

std::vector<double> softmax(const std::vector<double>& v) {
  if (v.empty()) return {};
  const double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double z = 0;
  for (std::size_t i = 0; i < v.size(); ++i) z += out[i] = std::exp(v[i] - mx);
  for (double& o : out) o /= z;
  return out;
}

template <typename T>
Tensor<T> loss_proximal(const Tensor<T>& o_p, const Tensor<T>& m,
                        const Tensor<T>& y) {
  if (m.rank() != 2 || o_p.numel() != m.dim(1))
    throw_shape_mismatch("loss_proximal", m.shape(), o_p.shape());
  if (m.dim(0) < 2) throw_invalid("loss_proximal needs at least 2 measurements");
  std::vector<double> yd(y.data().begin(), y.data().end());
  const std::vector<double> pd = softmax(yd);
  const std::vector<T> p(pd.begin(), pd.end());
  Tensor<T> pred = ops::matmul(m, ops::reshape(o_p, {m.dim(1), 1}));
  Tensor<T> log_q = ops::log_softmax(ops::reshape(pred, {1, m.dim(0)}), 1);
  return kl_divergence(p, log_q);
}

std::vector<std::string> ablation_tags() {
  return {"full", "a", "b", "c", "d", "e", "f", "g"};
}

TrainConfig apply_ablation(TrainConfig config, std::string_view tag) {
  if (tag == "full") return config;
  if (tag == "a") {
    config.variant.proximal = false;
    config.weights.sparsity = 0;
  } else if (tag == "b") {
    config.variant.latent_wmb = false;
  } else if (tag == "c") {
    config.variant.res2mm_fidelity = false;
  } else if (tag == "d") {
    config.variant.local_windows = false;
  } else if (tag == "e") {
    config.weights.fidelity = 0;
  } else if (tag == "f") {
    config.weights.sparsity = 0;
  } else if (tag == "g") {
    config.weights.fidelity = 0;
    config.weights.sparsity = 0;
  } else {
    std::string valid;
    for (const auto& t : ablation_tags()) valid += (valid.empty() ? "" : ", ") + t;
    throw_invalid("unknown ablation tag '" + std::string(tag) +
                  "' (valid: " + valid + ")");
  }
  return config;
}

std::string train_csv(const TrainReport& report) {
  std::ostringstream os;
  os << kTrainCsvHeader << '\n';
  char buf[256];
  for (const auto& r : report.records) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.iteration, r.fidelity, r.sparsity, r.proximal, r.total,
                  r.lambda, r.lr);
    os << buf;
  }
  return os.str();
}

void write_train_csv(const std::filesystem::path& path,
                     const TrainReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << train_csv(report);
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

TrainAborted::TrainAborted(std::size_t iteration, const std::string& reason,
                           TrainReport last_finite)
    : Error(ErrorCode::kNonFinite, "training aborted at iteration " +
                                       std::to_string(iteration) + ": " +
                                       reason),
      iteration_(iteration),
      report_(std::move(last_finite)) {}

namespace {

template <typename T>
io::Image to_image(const Tensor<T>& t, std::size_t h, std::size_t w) {
  io::Image img(h, w);
  for (std::size_t i = 0; i < h * w; ++i) img.pixels[i] = static_cast<double>(t.at(i));
  return img;
}

template <typename T>
bool grads_finite(const std::vector<Tensor<T>>& params) {
  for (const auto& p : params)
    for (T g : p.grad())
      if (!std::isfinite(g)) return false;
  return true;
}

template <typename T>
void clip_grads(std::vector<Tensor<T>>& params, double max_norm) {
  double sq = 0;
  for (const auto& p : params)
    for (T g : p.grad()) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const T scale = static_cast<T>(max_norm / norm);
  for (auto& p : params)
    for (T& g : p.mutable_grad()) g *= scale;
}

}  // namespace

template <typename T>
TrainResult<T> train(const forward::MeasurementMatrix& m,
                     const std::vector<double>& y, const TrainConfig& config) {
  config.validate();
  if (y.size() != m.n_meas)
    throw_invalid("measurement count " + std::to_string(y.size()) +
                  " does not match " + std::to_string(m.n_meas) + " patterns");
  if (m.n_meas < 2) throw_invalid("training needs at least 2 measurements");
  const std::size_t h = m.height, w = m.width, np = m.n_pix();

  std::vector<double> mean_pattern(np, 0.0);
  double mean_y = 0.0, scale = 1.0;
  if (config.normalize_y) {
    for (std::size_t r = 0; r < m.n_meas; ++r) {
      const auto row = m.row(r);
      for (std::size_t p = 0; p < np; ++p) mean_pattern[p] += row[p];
      mean_y += y[r];
    }
    for (double& v : mean_pattern) v /= static_cast<double>(m.n_meas);
    mean_y /= static_cast<double>(m.n_meas);
    double var = 0.0;
    for (double v : y) var += (v - mean_y) * (v - mean_y);
    var /= static_cast<double>(m.n_meas);
    if (!(var > 0))
      throw Error(ErrorCode::kDegenerate, "normalize_y: measurements are constant");
    scale = 1.0 / std::sqrt(var);
  }
  std::vector<T> mv(m.patterns.size()), yv(y.size());
  for (std::size_t i = 0; i < mv.size(); ++i)
    mv[i] = static_cast<T>((m.patterns[i] - mean_pattern[i % np]) * scale);
  for (std::size_t i = 0; i < yv.size(); ++i)
    yv[i] = static_cast<T>((y[i] - mean_y) * scale);
  const Tensor<T> mt = Tensor<T>::from({m.n_meas, np}, std::move(mv));
  const Tensor<T> yt = Tensor<T>::from({m.n_meas, 1}, std::move(yv));

  TrainResult<T> result;
  result.model = std::make_unique<arch::SistaModel<T>>(
      config.hyper, config.variant, config.bounds, config.init_seed,
      config.alpha_init);
  auto& model = *result.model;
  const Tensor<T> input = arch::make_input_noise<T>(h, w, config.input_seed);
  std::vector<Tensor<T>> params = model.params().tensors();
  tensor::AdamState<T> adam;
  const LossWeights& lw = config.weights;
  TrainReport& report = result.report;
  const auto t0 = std::chrono::steady_clock::now();

  for (std::size_t it = 0; it < config.max_iters; ++it) {
    IterationRecord rec;
    rec.iteration = it;
    rec.lr = tensor::cosine_lr(it, config.max_iters, config.lr_max, config.lr_min);
    try {
      tensor::Graph<T> graph;
      {
        tensor::GraphScope<T> scope(graph);
        arch::ModelOutputs<T> out = model.forward(input);
        Tensor<T> lf = loss_fidelity(out.fidelity, mt, yt);
        Tensor<T> lp = loss_proximal(out.proximal, mt, yt);
        Tensor<T> ls = out.sparse.defined() ? loss_sparsity(out.sparse)
                                            : Tensor<T>::scalar(T(0));
        Tensor<T> total = Tensor<T>::scalar(T(0));
        if (lw.fidelity > 0)
          total = ops::add(total, ops::mul_scalar(lf, static_cast<T>(lw.fidelity)));
        if (lw.sparsity > 0 && out.sparse.defined())
          total = ops::add(total, ops::mul_scalar(ls, static_cast<T>(lw.sparsity)));
        if (lw.proximal > 0)
          total = ops::add(total, ops::mul_scalar(lp, static_cast<T>(lw.proximal)));
        rec.fidelity = static_cast<double>(lf.item());
        rec.sparsity = static_cast<double>(ls.item());
        rec.proximal = static_cast<double>(lp.item());
        rec.total = static_cast<double>(total.item());
        rec.lambda = out.lambda.defined() ? static_cast<double>(out.lambda.item()) : 0.0;
        if (!std::isfinite(rec.total))
          throw TrainAborted(it, "non-finite loss", report);
        model.params().zero_grad();
        graph.backward(total);
      }
      if (!grads_finite(params)) throw TrainAborted(it, "non-finite gradient", report);
      if constexpr (std::is_same_v<T, float>) {
        if (config.clip_norm > 0) clip_grads(params, config.clip_norm);
      }
      adam.lr = rec.lr;
      tensor::adam_step(adam, params);
    } catch (const TrainAborted&) {
      throw;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFinite) throw;
      throw TrainAborted(it, e.what(), report);
    }
    report.records.push_back(rec);
    if (config.snapshot_every > 0 && (it + 1) % config.snapshot_every == 0) {
      tensor::NoGradScope<T> ng;
      report.snapshots.push_back({it + 1, to_image(model.forward(input).proximal, h, w)});
    }
  }

  {
    tensor::NoGradScope<T> ng;
    arch::ModelOutputs<T> out = model.forward(input);
    report.fidelity_image = to_image(out.fidelity, h, w);
    report.proximal_image = to_image(out.proximal, h, w);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

#define SISTA_TRAIN_INSTANTIATE(T)                                            \
  template Tensor<T> loss_fidelity(const Tensor<T>&, const Tensor<T>&,        \
                                   const Tensor<T>&);                         \
  template Tensor<T> loss_sparsity(const Tensor<T>&);                         \
  template Tensor<T> kl_divergence(const std::vector<T>&, const Tensor<T>&);  \
  template Tensor<T> loss_proximal(const Tensor<T>&, const Tensor<T>&,        \
                                   const Tensor<T>&);                         \
  template TrainResult<T> train<T>(const forward::MeasurementMatrix&,         \
                                   const std::vector<double>&,                \
                                   const TrainConfig&);

SISTA_TRAIN_INSTANTIATE(float)
SISTA_TRAIN_INSTANTIATE(double)

}  // namespace sista::train
