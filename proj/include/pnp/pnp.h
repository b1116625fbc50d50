/* C interface to the plug-and-play restoration library.
 *
 * All objects are opaque handles owned by the caller and released with the matching
 * *_destroy function. Functions that can fail return a pnp_status; on failure the
 * message is available from pnp_last_error() on the same thread until the next call.
 * Strings returned through char** are released with pnp_string_free. Handle and string
 * outputs are set to NULL when a call fails.
 */
#ifndef PNP_PNP_H
#define PNP_PNP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define PNP_API __declspec(dllexport)
#else
#  define PNP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pnp_status {
  PNP_OK = 0,
  PNP_ERR_INVALID_ARGUMENT = 1,
  PNP_ERR_SHAPE = 2,
  PNP_ERR_IO = 3,
  PNP_ERR_FORMAT = 4,
  PNP_ERR_NUMERICAL = 5,
  PNP_ERR_INTERNAL = 6
} pnp_status;

typedef struct pnp_image pnp_image;
typedef struct pnp_denoiser pnp_denoiser;
typedef struct pnp_problem pnp_problem;
typedef struct pnp_report pnp_report;

PNP_API const char* pnp_version(void);
PNP_API const char* pnp_last_error(void);
PNP_API const char* pnp_status_name(pnp_status status);
PNP_API void pnp_string_free(char* s);

/* Caps internal parallelism. Results are identical for every thread count. */
PNP_API void pnp_set_num_threads(int n);
PNP_API int pnp_num_threads(void);

/* ---- images (planar doubles, nominal range [0,1]) ---- */

/* data may be NULL for a zero image; otherwise width*height*channels planar samples. */
PNP_API pnp_status pnp_image_create(int width, int height, int channels, const double* data, pnp_image** out);
/* PGM (P5), PPM (P6), 8/16-bit, or PFM; detected from the magic number. */
PNP_API pnp_status pnp_image_read(const char* path, pnp_image** out);
/* Format from the extension (.pgm, .ppm, .pfm); bit_depth 8 or 16 for PNM. */
PNP_API pnp_status pnp_image_write(const pnp_image* img, const char* path, int bit_depth);
/* kind: "cartoon", "gradients", "chart" or "color" (3 channels). */
PNP_API pnp_status pnp_image_synth(const char* kind, int width, int height, int channels, uint64_t seed,
                                   pnp_image** out);
PNP_API pnp_status pnp_image_add_noise(const pnp_image* img, double sigma, uint64_t seed, pnp_image** out);
PNP_API void pnp_image_destroy(pnp_image* img);
PNP_API int pnp_image_width(const pnp_image* img);
PNP_API int pnp_image_height(const pnp_image* img);
PNP_API int pnp_image_channels(const pnp_image* img);
PNP_API const double* pnp_image_data(const pnp_image* img);
/* PSNR (peak 1) after removing `crop` pixels on every side; +inf for identical images. */
PNP_API pnp_status pnp_image_psnr(const pnp_image* a, const pnp_image* b, int crop, double* out);

/* ---- denoisers ---- */

typedef enum pnp_denoiser_kind {
  PNP_DENOISER_IDENTITY = 0,
  PNP_DENOISER_GAUSSIAN = 1,
  PNP_DENOISER_NLM = 2,
  PNP_DENOISER_TV = 3,
  PNP_DENOISER_CNN = 4
} pnp_denoiser_kind;

typedef struct pnp_denoiser_params {
  pnp_denoiser_kind kind;
  double gaussian_std;
  int nlm_patch_radius;
  int nlm_search_radius;
  double nlm_h;
  double nlm_sigma;
  double tv_lambda;
  int tv_inner_iters;
  double tv_inner_tol;
  const char* cnn_weights_path;
} pnp_denoiser_params;

PNP_API void pnp_denoiser_params_default(pnp_denoiser_params* params);
PNP_API pnp_status pnp_denoiser_create(const pnp_denoiser_params* params, pnp_denoiser** out);
PNP_API pnp_status pnp_denoiser_apply(const pnp_denoiser* denoiser, const pnp_image* in, pnp_image** out);
PNP_API void pnp_denoiser_destroy(pnp_denoiser* denoiser);

/* ---- problems ---- */

/* Blur `clean` with the kernel spec ("gaussian:1.6", "box:5", "motion:9:30", "delta",
 * "file:<path>") and add Gaussian noise; `clean` becomes the scoring reference. */
PNP_API pnp_status pnp_problem_deconv(const pnp_image* clean, const char* kernel_spec, double sigma, uint64_t seed,
                                      int crop, const char* name, pnp_problem** out);
/* Deconvolution of an already degraded observation; no reference. */
PNP_API pnp_status pnp_problem_deconv_observed(const pnp_image* observed, const char* kernel_spec,
                                               pnp_problem** out);
/* Noise-free Bayer mosaic of a 3-channel `clean` image; pattern such as "RGGB". */
PNP_API pnp_status pnp_problem_demosaick(const pnp_image* clean, const char* pattern, int crop, const char* name,
                                         pnp_problem** out);
/* Demosaicking of a given 1-channel mosaic; no reference. */
PNP_API pnp_status pnp_problem_demosaick_observed(const pnp_image* mosaic, const char* pattern, pnp_problem** out);
PNP_API int pnp_problem_has_reference(const pnp_problem* problem);
/* Copies of the degraded view (clamped observation or bilinear demosaick) and the reference. */
PNP_API pnp_status pnp_problem_degraded(const pnp_problem* problem, pnp_image** out);
PNP_API pnp_status pnp_problem_reference(const pnp_problem* problem, pnp_image** out);
PNP_API void pnp_problem_destroy(pnp_problem* problem);

/* ---- schemes ---- */

typedef enum pnp_scheme {
  PNP_SCHEME_PG = 0,
  PNP_SCHEME_ADMM = 1,
  PNP_SCHEME_PDHG1 = 2,
  PNP_SCHEME_PDHG2 = 3,
  PNP_SCHEME_STACKED = 4
} pnp_scheme;

typedef struct pnp_scheme_config {
  pnp_scheme scheme;
  double tau; /* <= 0 selects the default step for the scheme */
  double gamma;
  double theta;
  double alpha;
  double beta_tv;
  double beta_cross;
  int max_iters;
  double tol;
} pnp_scheme_config;

typedef enum pnp_stop_reason { PNP_STOP_TOL = 0, PNP_STOP_MAX_ITERS = 1, PNP_STOP_NONFINITE = 2 } pnp_stop_reason;

/* stacked scheme, gamma 1, default tau, theta 1, alpha 1, betas 0, 30 iterations, tol 1e-6 */
PNP_API void pnp_scheme_config_default(pnp_scheme_config* cfg);
/* Parses "pg", "admm", "pdhg1", "pdhg2", "stacked". */
PNP_API pnp_status pnp_scheme_parse(const char* name, pnp_scheme* out);

/* Runs the scheme from the problem's starting image. A divergent run is not an error:
 * it returns PNP_OK with stop reason PNP_STOP_NONFINITE. */
PNP_API pnp_status pnp_solve(const pnp_problem* problem, const pnp_scheme_config* cfg, const pnp_denoiser* denoiser,
                             int track_fixed_point_residual, pnp_report** out);
PNP_API pnp_status pnp_report_image(const pnp_report* report, pnp_image** out);
PNP_API int pnp_report_iterations(const pnp_report* report);
PNP_API pnp_stop_reason pnp_report_stop_reason(const pnp_report* report);
PNP_API int pnp_report_step_condition_violated(const pnp_report* report);
/* Effective tau after defaults were applied. */
PNP_API double pnp_report_tau(const pnp_report* report);
/* Crop-scored PSNR of the clamped result against the reference; NaN without one. */
PNP_API double pnp_report_psnr(const pnp_report* report);
PNP_API pnp_status pnp_report_history_csv(const pnp_report* report, char** out);
PNP_API void pnp_report_destroy(pnp_report* report);

/* ||u - G(u - t A^T grad H_f(A u))|| / ||u||. t <= 0 uses the scheme's convention
 * (tau for PG, 1/gamma otherwise); cfg->tau <= 0 resolves to the default step first. */
PNP_API pnp_status pnp_fixed_point_residual(const pnp_problem* problem, const pnp_scheme_config* cfg,
                                            const pnp_denoiser* denoiser, const pnp_image* u, double t,
                                            double* out);

/* Starts the scheme at u with the auxiliary variables that make a fixed point of the shared
 * equation a fixed point of the scheme, runs `iters` iterations and reports the largest
 * relative change ||u^{k+1} - u^k|| / ||u^k||. */
PNP_API pnp_status pnp_fixed_point_drift(const pnp_problem* problem, const pnp_scheme_config* cfg,
                                         const pnp_denoiser* denoiser, const pnp_image* u, int iters,
                                         double* max_change);

/* ---- experiments ---- */

typedef struct pnp_grid_best {
  double alpha;
  double beta_tv;
  double beta_cross;
  double mean_psnr;
} pnp_grid_best;

/* Exhaustive search over alpha x beta_tv x beta_cross (empty beta lists mean {0}). All problems
 * need a reference. csv_out receives the full table. */
PNP_API pnp_status pnp_grid_search(const pnp_problem* const* problems, size_t n_problems, const double* alphas,
                                   size_t n_alphas, const double* beta_tv, size_t n_beta_tv,
                                   const double* beta_cross, size_t n_beta_cross, const pnp_scheme_config* cfg,
                                   const pnp_denoiser* denoiser, pnp_grid_best* best, char** csv_out);

/* Best alpha per sigma with a TV-prox denoiser of strength sigma^2, plus the fit alpha = p sigma^2. */
PNP_API pnp_status pnp_alpha_sigma_sweep(const pnp_problem* problem, const double* sigmas, size_t n_sigmas,
                                         const double* alphas, size_t n_alphas, const pnp_scheme_config* cfg,
                                         int tv_inner_iters, double tv_inner_tol, double* fit_p,
                                         double* r_squared, char** csv_out);

/* Per-image PSNR table (degraded, restored and per-channel columns) with an average row. */
PNP_API pnp_status pnp_psnr_table(const pnp_problem* const* problems, const pnp_image* const* results, size_t n,
                                  char** text_out, char** csv_out);

/* ---- CNN weights ---- */

/* Layer table of a PNPW weights file. */
PNP_API pnp_status pnp_weights_info(const char* path, char** out);

#ifdef __cplusplus
}
#endif

#endif /* PNP_PNP_H */
