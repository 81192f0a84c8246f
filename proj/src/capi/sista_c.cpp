#include "sista/sista.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <variant>

#include <json.hpp>

#include "sista/arch/checkpoint.hpp"
#include "sista/classical/classical.hpp"
#include "sista/error.hpp"
#include "sista/forward/measurement.hpp"
#include "sista/io/image.hpp"
#include "sista/io/scenes.hpp"
#include "sista/metrics/metrics.hpp"
#include "sista/train/trainer.hpp"

using json = nlohmann::json;

struct sista_image {
  sista::io::Image img;
};

struct sista_measurements {
  sista::forward::MeasurementMatrix matrix;
  sista::forward::MeasurementVector y;
};

struct sista_recon {
  std::string method;
  sista::io::Image recon;
  sista::io::Image fidelity;
  bool has_fidelity = false;
  std::string csv;
  std::string config;
  double wall_seconds = 0;
  std::size_t iterations = 0;
  std::vector<sista::train::Snapshot> snapshots;
  std::vector<sista::arch::Blob> blobs;
};

namespace {

thread_local std::string g_last_error;

sista_status to_status(sista::ErrorCode code) {
  switch (code) {
    case sista::ErrorCode::kOk: return SISTA_OK;
    case sista::ErrorCode::kInvalidArgument: return SISTA_ERR_INVALID_ARGUMENT;
    case sista::ErrorCode::kShapeMismatch: return SISTA_ERR_SHAPE_MISMATCH;
    case sista::ErrorCode::kNonFinite: return SISTA_ERR_NON_FINITE;
    case sista::ErrorCode::kFormat: return SISTA_ERR_FORMAT;
    case sista::ErrorCode::kDegenerate: return SISTA_ERR_DEGENERATE;
    case sista::ErrorCode::kDivergence: return SISTA_ERR_DIVERGENCE;
    case sista::ErrorCode::kIo: return SISTA_ERR_IO;
    case sista::ErrorCode::kState: return SISTA_ERR_STATE;
  }
  return SISTA_ERR_INTERNAL;
}

template <typename F>
sista_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return SISTA_OK;
  } catch (const sista::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const json::exception& e) {
    g_last_error = std::string("config: ") + e.what();
    return SISTA_ERR_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SISTA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SISTA_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) sista::throw_invalid(std::string(what) + " is null");
}

json parse_config(const char* text) {
  if (!text || !*text) return json::object();
  json j = json::parse(text);
  if (!j.is_object()) sista::throw_invalid("config must be a JSON object");
  return j;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) sista::throw_invalid("unknown " + where + " key '" + k + "'");
  }
}

template <typename V>
void take(const json& j, const char* key, V& out) {
  if (j.contains(key)) out = j.at(key).get<V>();
}

sista::classical::IstaConfig ista_config(const json& j, json& resolved) {
  check_keys(j, {"step_size", "reg_weight", "transform", "max_iters", "tol"}, "ista");
  sista::classical::IstaConfig c;
  take(j, "step_size", c.step_size);
  take(j, "reg_weight", c.reg_weight);
  take(j, "max_iters", c.max_iters);
  take(j, "tol", c.tol);
  std::string transform = "dct2";
  take(j, "transform", transform);
  if (transform == "dct2") c.transform = sista::classical::Transform::kDct2;
  else if (transform == "identity") c.transform = sista::classical::Transform::kIdentity;
  else sista::throw_invalid("unknown transform '" + transform + "' (dct2 or identity)");
  resolved = {{"step_size", c.step_size}, {"reg_weight", c.reg_weight},
              {"transform", transform}, {"max_iters", c.max_iters}, {"tol", c.tol}};
  return c;
}

struct SistaSettings {
  sista::train::TrainConfig train;
  std::string precision = "f32";
  std::string ablation = "full";
};

SistaSettings sista_config(const json& j, json& resolved) {
  check_keys(j, {"precision", "ablation", "max_iters", "lr_max", "lr_min", "alpha_init",
                 "init_seed", "input_seed", "normalize_y", "clip_norm", "snapshot_every",
                 "weights", "hyper", "bounds", "adam"},
             "sista");
  if (j.contains("adam") &&
      j.at("adam") != json{{"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}})
    sista::throw_invalid("adam settings are fixed at beta1 0.9, beta2 0.999, eps 1e-8");
  SistaSettings s;
  auto& c = s.train;
  take(j, "precision", s.precision);
  if (s.precision != "f32" && s.precision != "f64")
    sista::throw_invalid("precision must be f32 or f64");
  take(j, "ablation", s.ablation);
  take(j, "max_iters", c.max_iters);
  take(j, "lr_max", c.lr_max);
  take(j, "lr_min", c.lr_min);
  take(j, "alpha_init", c.alpha_init);
  take(j, "init_seed", c.init_seed);
  take(j, "input_seed", c.input_seed);
  take(j, "normalize_y", c.normalize_y);
  take(j, "clip_norm", c.clip_norm);
  take(j, "snapshot_every", c.snapshot_every);
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    check_keys(w, {"fidelity", "sparsity", "proximal"}, "weights");
    take(w, "fidelity", c.weights.fidelity);
    take(w, "sparsity", c.weights.sparsity);
    take(w, "proximal", c.weights.proximal);
  }
  if (j.contains("hyper")) {
    const json& h = j.at("hyper");
    check_keys(h, {"base_channels", "n_mamcnn", "window_size", "state_dim",
                   "encoder_downscale", "res_depth", "latent_multiplier", "branch_pool"},
               "hyper");
    take(h, "base_channels", c.hyper.base_channels);
    take(h, "n_mamcnn", c.hyper.n_mamcnn);
    take(h, "window_size", c.hyper.window_size);
    take(h, "state_dim", c.hyper.state_dim);
    take(h, "encoder_downscale", c.hyper.encoder_downscale);
    take(h, "res_depth", c.hyper.res_depth);
    take(h, "latent_multiplier", c.hyper.latent_multiplier);
    take(h, "branch_pool", c.hyper.branch_pool);
  }
  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    check_keys(b, {"lambda_min", "lambda_max", "beta"}, "bounds");
    take(b, "lambda_min", c.bounds.lambda_min);
    take(b, "lambda_max", c.bounds.lambda_max);
    take(b, "beta", c.bounds.beta);
  }
  resolved = {
      {"precision", s.precision},
      {"ablation", s.ablation},
      {"max_iters", c.max_iters},
      {"lr_max", c.lr_max},
      {"lr_min", c.lr_min},
      {"alpha_init", c.alpha_init},
      {"init_seed", c.init_seed},
      {"input_seed", c.input_seed},
      {"normalize_y", c.normalize_y},
      {"clip_norm", c.clip_norm},
      {"snapshot_every", c.snapshot_every},
      {"adam", {{"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}}},
      {"weights",
       {{"fidelity", c.weights.fidelity},
        {"sparsity", c.weights.sparsity},
        {"proximal", c.weights.proximal}}},
      {"hyper",
       {{"base_channels", c.hyper.base_channels},
        {"n_mamcnn", c.hyper.n_mamcnn},
        {"window_size", c.hyper.window_size},
        {"state_dim", c.hyper.state_dim},
        {"encoder_downscale", c.hyper.encoder_downscale},
        {"res_depth", c.hyper.res_depth},
        {"latent_multiplier", c.hyper.latent_multiplier},
        {"branch_pool", c.hyper.branch_pool}}},
      {"bounds",
       {{"lambda_min", c.bounds.lambda_min},
        {"lambda_max", c.bounds.lambda_max},
        {"beta", c.bounds.beta}}},
  };
  c = sista::train::apply_ablation(c, s.ablation);
  return s;
}

template <typename T>
void run_sista(const sista_measurements& m, const SistaSettings& s, sista_recon& r) {
  auto result = sista::train::train<T>(m.matrix, m.y.values, s.train);
  r.recon = result.report.proximal_image;
  r.fidelity = result.report.fidelity_image;
  r.has_fidelity = true;
  r.csv = sista::train::train_csv(result.report);
  r.wall_seconds = result.report.wall_seconds;
  r.iterations = result.report.records.size();
  r.snapshots = std::move(result.report.snapshots);
  r.blobs = sista::arch::params_to_blobs(result.model->params());
}

sista_image* new_image(sista::io::Image img) {
  return new sista_image{std::move(img)};
}

}  // namespace

extern "C" {

const char* sista_version(void) { return "1.0.0"; }

const char* sista_status_name(sista_status status) {
  switch (status) {
    case SISTA_OK: return "ok";
    case SISTA_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SISTA_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case SISTA_ERR_NON_FINITE: return "non-finite value";
    case SISTA_ERR_FORMAT: return "format error";
    case SISTA_ERR_DEGENERATE: return "degenerate input";
    case SISTA_ERR_DIVERGENCE: return "divergence";
    case SISTA_ERR_IO: return "i/o error";
    case SISTA_ERR_STATE: return "invalid state";
    case SISTA_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* sista_last_error(void) { return g_last_error.c_str(); }

sista_status sista_image_create(size_t height, size_t width, const double* pixels,
                                sista_image** out) {
  return guarded([&] {
    require(out, "out");
    if (height == 0 || width == 0) sista::throw_invalid("image must be non-empty");
    sista::io::Image img(height, width);
    if (pixels) img.pixels.assign(pixels, pixels + height * width);
    *out = new_image(std::move(img));
  });
}

sista_status sista_image_read_pgm(const char* path, sista_image** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new_image(sista::io::read_pgm(path));
  });
}

sista_status sista_image_write_pgm(const sista_image* image, const char* path) {
  return guarded([&] {
    require(image, "image");
    require(path, "path");
    sista::io::write_pgm(path, image->img);
  });
}

sista_status sista_image_builtin(const char* name, size_t size, sista_image** out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    *out = new_image(sista::io::builtin_scene(name, size));
  });
}

sista_status sista_image_montage(const sista_image* const* images, size_t count,
                                 size_t columns, sista_image** out) {
  return guarded([&] {
    require(images, "images");
    require(out, "out");
    if (count == 0 || columns == 0) sista::throw_invalid("montage needs images and columns");
    std::size_t th = 0, tw = 0;
    for (std::size_t i = 0; i < count; ++i) {
      require(images[i], "montage image");
      th = std::max(th, images[i]->img.height);
      tw = std::max(tw, images[i]->img.width);
    }
    const std::size_t gap = 2, cols = std::min(columns, count);
    const std::size_t rows = (count + cols - 1) / cols;
    sista::io::Image m(rows * th + (rows + 1) * gap, cols * tw + (cols + 1) * gap, 1.0);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& src = images[i]->img;
      const std::size_t oy = gap + (i / cols) * (th + gap), ox = gap + (i % cols) * (tw + gap);
      for (std::size_t y = 0; y < src.height; ++y)
        for (std::size_t x = 0; x < src.width; ++x) m.at(oy + y, ox + x) = src.at(y, x);
    }
    *out = new_image(std::move(m));
  });
}

size_t sista_image_height(const sista_image* image) { return image ? image->img.height : 0; }
size_t sista_image_width(const sista_image* image) { return image ? image->img.width : 0; }
const double* sista_image_pixels(const sista_image* image) {
  return image ? image->img.pixels.data() : nullptr;
}
void sista_image_free(sista_image* image) { delete image; }

sista_status sista_measurements_for_ratio(double ratio, size_t height, size_t width,
                                          size_t* n_meas) {
  return guarded([&] {
    require(n_meas, "n_meas");
    if (!(ratio > 0) || ratio > 1) sista::throw_invalid("ratio must lie in (0, 1]");
    *n_meas = sista::forward::measurements_for_ratio(ratio, height, width);
  });
}

sista_status sista_simulate(const sista_image* scene, const char* pattern_kind, size_t n_meas,
                            uint64_t pattern_seed, const sista_noise* noise,
                            sista_measurements** out) {
  return guarded([&] {
    require(scene, "scene");
    require(pattern_kind, "pattern_kind");
    require(out, "out");
    auto m = std::make_unique<sista_measurements>();
    m->matrix = sista::forward::make_patterns(sista::forward::parse_pattern_kind(pattern_kind),
                                              n_meas, scene->img.height, scene->img.width,
                                              pattern_seed);
    sista::forward::NoiseSpec spec;
    if (noise) spec = {noise->gaussian_sigma, noise->poisson_scale, noise->seed};
    m->y = sista::forward::measure(m->matrix, scene->img.pixels, spec);
    *out = m.release();
  });
}

sista_status sista_measurements_save(const sista_measurements* m, const char* path) {
  return guarded([&] {
    require(m, "measurements");
    require(path, "path");
    sista::forward::save_measurements(path, m->matrix, m->y);
  });
}

sista_status sista_measurements_load(const char* path, sista_measurements** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto data = sista::forward::load_measurements(path);
    *out = new sista_measurements{std::move(data.matrix), std::move(data.measurements)};
  });
}

size_t sista_measurements_count(const sista_measurements* m) { return m ? m->matrix.n_meas : 0; }
size_t sista_measurements_height(const sista_measurements* m) { return m ? m->matrix.height : 0; }
size_t sista_measurements_width(const sista_measurements* m) { return m ? m->matrix.width : 0; }
const double* sista_measurements_values(const sista_measurements* m) {
  return m ? m->y.values.data() : nullptr;
}
const char* sista_measurements_kind(const sista_measurements* m) {
  return m ? sista::forward::pattern_kind_name(m->matrix.kind).data() : "";
}
uint64_t sista_measurements_pattern_seed(const sista_measurements* m) {
  return m ? m->matrix.seed : 0;
}
void sista_measurements_free(sista_measurements* m) { delete m; }

sista_status sista_reconstruct(const sista_measurements* m, const char* method,
                               const char* config_json, sista_recon** out) {
  return guarded([&] {
    require(m, "measurements");
    require(method, "method");
    require(out, "out");
    const json cfg = parse_config(config_json);
    auto r = std::make_unique<sista_recon>();
    r->method = method;
    json resolved;
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    if (r->method == "dgi") {
      check_keys(cfg, {}, "dgi");
      resolved = json::object();
      r->recon = sista::classical::dgi_reconstruct(m->matrix, m->y.values);
      r->wall_seconds = elapsed();
    } else if (r->method == "ista") {
      const auto c = ista_config(cfg, resolved);
      const auto res = sista::classical::ista_reconstruct(m->matrix, m->y.values, c);
      r->recon = res.image;
      r->iterations = res.iterations;
      std::ostringstream os;
      os << "iteration,residual,objective\n";
      char buf[96];
      for (std::size_t i = 0; i < res.residual_history.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, res.residual_history[i],
                      res.objective_history[i]);
        os << buf;
      }
      r->csv = os.str();
      r->wall_seconds = elapsed();
    } else if (r->method == "sista") {
      const auto s = sista_config(cfg, resolved);
      if (s.precision == "f64") run_sista<double>(*m, s, *r);
      else run_sista<float>(*m, s, *r);
    } else {
      sista::throw_invalid("unknown method '" + r->method + "' (dgi, ista or sista)");
    }
    r->config = json{{"method", r->method}, {"settings", resolved}}.dump(2);
    *out = r.release();
  });
}

sista_status sista_recon_image(const sista_recon* r, const char* which, sista_image** out) {
  return guarded([&] {
    require(r, "recon");
    require(which, "which");
    require(out, "out");
    const std::string w = which;
    if (w == "recon") {
      *out = new_image(r->recon);
    } else if (w == "fidelity") {
      if (!r->has_fidelity)
        throw sista::Error(sista::ErrorCode::kState, "no fidelity image for " + r->method);
      *out = new_image(r->fidelity);
    } else {
      sista::throw_invalid("unknown image '" + w + "' (recon or fidelity)");
    }
  });
}

const char* sista_recon_csv(const sista_recon* r) { return r ? r->csv.c_str() : ""; }
const char* sista_recon_config(const sista_recon* r) { return r ? r->config.c_str() : ""; }
double sista_recon_wall_seconds(const sista_recon* r) { return r ? r->wall_seconds : 0; }
size_t sista_recon_iterations(const sista_recon* r) { return r ? r->iterations : 0; }
size_t sista_recon_snapshot_count(const sista_recon* r) { return r ? r->snapshots.size() : 0; }

sista_status sista_recon_snapshot(const sista_recon* r, size_t index, size_t* iteration,
                                  sista_image** out) {
  return guarded([&] {
    require(r, "recon");
    require(out, "out");
    if (index >= r->snapshots.size()) sista::throw_invalid("snapshot index out of range");
    if (iteration) *iteration = r->snapshots[index].iteration;
    *out = new_image(r->snapshots[index].proximal);
  });
}

sista_status sista_recon_save_checkpoint(const sista_recon* r, const char* path,
                                         const char* extra_json) {
  return guarded([&] {
    require(r, "recon");
    require(path, "path");
    if (r->method != "sista")
      throw sista::Error(sista::ErrorCode::kState, "only sista runs have checkpoints");
    json header = json::parse(r->config);
    if (extra_json && *extra_json) {
      json extra = json::parse(extra_json);
      if (!extra.is_object()) sista::throw_invalid("extra must be a JSON object");
      header["extra"] = std::move(extra);
    }
    sista::arch::Checkpoint ck;
    ck.header_json = header.dump();
    ck.blobs = r->blobs;
    sista::arch::save_checkpoint(path, ck);
  });
}

void sista_recon_free(sista_recon* r) { delete r; }

sista_status sista_psnr(const sista_image* a, const sista_image* ref, double* db,
                        int* identical) {
  return guarded([&] {
    require(a, "image");
    require(ref, "reference");
    require(db, "db");
    const auto p = sista::metrics::psnr(a->img, ref->img);
    *db = p.db;
    if (identical) *identical = p.identical ? 1 : 0;
  });
}

sista_status sista_ssim(const sista_image* a, const sista_image* ref, double* value) {
  return guarded([&] {
    require(a, "image");
    require(ref, "reference");
    require(value, "value");
    *value = sista::metrics::ssim(a->img, ref->img).value;
  });
}

sista_status sista_cnr(const sista_image* image, const sista_image* mask_ref, double threshold,
                       double* value) {
  return guarded([&] {
    require(image, "image");
    require(mask_ref, "mask reference");
    require(value, "value");
    const double t = threshold < 0 ? sista::metrics::otsu_threshold(mask_ref->img) : threshold;
    const auto [target, background] = sista::metrics::masks_from_reference(mask_ref->img, t);
    *value = sista::metrics::cnr(image->img, target, background);
  });
}

sista_status sista_pseudo_gt(const sista_image* raw, sista_image** out) {
  return guarded([&] {
    require(raw, "image");
    require(out, "out");
    *out = new_image(sista::metrics::pseudo_gt(raw->img).image);
  });
}

const char* sista_metric_csv_header(void) { return sista::metrics::kMetricCsvHeader; }

sista_status sista_metric_append(const char* path, const sista_metric_row* row) {
  return guarded([&] {
    require(path, "path");
    require(row, "row");
    sista::metrics::MetricReport r;
    r.scene = row->scene ? row->scene : "";
    r.method = row->method ? row->method : "";
    r.ratio = row->ratio;
    r.psnr.db = row->psnr_db;
    r.psnr.identical = std::isinf(row->psnr_db);
    r.ssim.value = row->ssim;
    r.has_cnr = row->has_cnr != 0;
    r.cnr = row->cnr;
    r.seed = row->seed;
    r.against = row->against ? row->against : "ground-truth";
    sista::metrics::append_metric_row(path, r);
  });
}

}  // extern "C"
