#ifndef SISTA_SISTA_H
#define SISTA_SISTA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SISTA_API __declspec(dllexport)
#else
#define SISTA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sista_status {
  SISTA_OK = 0,
  SISTA_ERR_INVALID_ARGUMENT = 1,
  SISTA_ERR_SHAPE_MISMATCH = 2,
  SISTA_ERR_NON_FINITE = 3,
  SISTA_ERR_FORMAT = 4,
  SISTA_ERR_DEGENERATE = 5,
  SISTA_ERR_DIVERGENCE = 6,
  SISTA_ERR_IO = 7,
  SISTA_ERR_STATE = 8,
  SISTA_ERR_INTERNAL = 99
} sista_status;

SISTA_API const char* sista_version(void);
SISTA_API const char* sista_status_name(sista_status status);
/* Message of the last failed call on this thread ("" if none). */
SISTA_API const char* sista_last_error(void);

/* ---- images: row-major doubles, nominally in [0, 1] ---- */

typedef struct sista_image sista_image;

/* pixels may be NULL for an all-zero image. */
SISTA_API sista_status sista_image_create(size_t height, size_t width,
                                          const double* pixels, sista_image** out);
SISTA_API sista_status sista_image_read_pgm(const char* path, sista_image** out);
SISTA_API sista_status sista_image_write_pgm(const sista_image* image, const char* path);
/* glyph, texture or stripes at size x size. */
SISTA_API sista_status sista_image_builtin(const char* name, size_t size, sista_image** out);
/* Tiles images left to right, `columns` per row, with a 2 px white gutter
 * around and between tiles. */
SISTA_API sista_status sista_image_montage(const sista_image* const* images, size_t count,
                                           size_t columns, sista_image** out);
SISTA_API size_t sista_image_height(const sista_image* image);
SISTA_API size_t sista_image_width(const sista_image* image);
SISTA_API const double* sista_image_pixels(const sista_image* image);
SISTA_API void sista_image_free(sista_image* image);

/* ---- measurements (patterns + bucket values) ---- */

typedef struct sista_measurements sista_measurements;

typedef struct sista_noise {
  double gaussian_sigma; /* fraction of the mean noiseless signal */
  double poisson_scale;  /* photons per unit intensity, 0 = off */
  uint64_t seed;
} sista_noise;

SISTA_API sista_status sista_measurements_for_ratio(double ratio, size_t height,
                                                    size_t width, size_t* n_meas);
/* pattern_kind: bernoulli, gaussian-speckle or hadamard-subset. noise may be NULL. */
SISTA_API sista_status sista_simulate(const sista_image* scene, const char* pattern_kind,
                                      size_t n_meas, uint64_t pattern_seed,
                                      const sista_noise* noise, sista_measurements** out);
SISTA_API sista_status sista_measurements_save(const sista_measurements* m, const char* path);
SISTA_API sista_status sista_measurements_load(const char* path, sista_measurements** out);
SISTA_API size_t sista_measurements_count(const sista_measurements* m);
SISTA_API size_t sista_measurements_height(const sista_measurements* m);
SISTA_API size_t sista_measurements_width(const sista_measurements* m);
SISTA_API const double* sista_measurements_values(const sista_measurements* m);
SISTA_API const char* sista_measurements_kind(const sista_measurements* m);
SISTA_API uint64_t sista_measurements_pattern_seed(const sista_measurements* m);
SISTA_API void sista_measurements_free(sista_measurements* m);

/* ---- reconstruction ----
 * method: dgi, ista or sista. config_json may be NULL or "{}" for defaults.
 * ista keys: step_size, reg_weight, transform (dct2|identity), max_iters, tol.
 * sista keys: precision (f32|f64), ablation (full|a..g), max_iters, lr_max,
 *   lr_min, alpha_init, init_seed, input_seed, normalize_y, clip_norm,
 *   snapshot_every, weights {fidelity, sparsity, proximal},
 *   hyper {base_channels, n_mamcnn, window_size, state_dim, encoder_downscale,
 *   res_depth, latent_multiplier, branch_pool},
 *   bounds {lambda_min, lambda_max, beta}. Unknown keys are an error. */

typedef struct sista_recon sista_recon;

SISTA_API sista_status sista_reconstruct(const sista_measurements* m, const char* method,
                                         const char* config_json, sista_recon** out);
/* which: "recon" (all methods) or "fidelity" (sista only). */
SISTA_API sista_status sista_recon_image(const sista_recon* r, const char* which,
                                         sista_image** out);
/* sista: per-iteration training CSV; ista: iteration,residual,objective CSV;
 * dgi: empty string. Owned by the handle. */
SISTA_API const char* sista_recon_csv(const sista_recon* r);
/* Resolved configuration as JSON. Owned by the handle. */
SISTA_API const char* sista_recon_config(const sista_recon* r);
SISTA_API double sista_recon_wall_seconds(const sista_recon* r);
SISTA_API size_t sista_recon_iterations(const sista_recon* r);
SISTA_API size_t sista_recon_snapshot_count(const sista_recon* r);
SISTA_API sista_status sista_recon_snapshot(const sista_recon* r, size_t index,
                                            size_t* iteration, sista_image** out);
/* sista only; the header holds the resolved config and the extra JSON object
 * given (may be NULL). */
SISTA_API sista_status sista_recon_save_checkpoint(const sista_recon* r, const char* path,
                                                   const char* extra_json);
SISTA_API void sista_recon_free(sista_recon* r);

/* ---- metrics ---- */

SISTA_API sista_status sista_psnr(const sista_image* a, const sista_image* ref,
                                  double* db, int* identical);
SISTA_API sista_status sista_ssim(const sista_image* a, const sista_image* ref, double* value);
/* Target/background masks come from thresholding `mask_ref` (Otsu when
 * threshold < 0). */
SISTA_API sista_status sista_cnr(const sista_image* image, const sista_image* mask_ref,
                                 double threshold, double* value);
SISTA_API sista_status sista_pseudo_gt(const sista_image* raw, sista_image** out);

typedef struct sista_metric_row {
  const char* scene;
  const char* method;
  double ratio;
  double psnr_db; /* +inf for identical images */
  double ssim;
  int has_cnr;
  double cnr;
  uint64_t seed;
  const char* against; /* ground-truth or pseudo-gt */
} sista_metric_row;

SISTA_API const char* sista_metric_csv_header(void);
/* Appends one row, writing the header first if the file is new or empty. */
SISTA_API sista_status sista_metric_append(const char* path, const sista_metric_row* row);

#ifdef __cplusplus
}
#endif

#endif
