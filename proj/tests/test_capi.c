/* Exercises the shared library through the C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "pnp/pnp.h"

static int failures = 0;

#define EXPECT(cond)                                                 \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                    \
    }                                                                \
  } while (0)

#define OK(call) EXPECT((call) == PNP_OK)

static void images(void) {
  double px[6] = {0.0, 0.5, 1.0, 0.25, 0.75, 0.125};
  pnp_image* img = NULL;
  OK(pnp_image_create(3, 2, 1, px, &img));
  EXPECT(pnp_image_width(img) == 3 && pnp_image_height(img) == 2 && pnp_image_channels(img) == 1);
  EXPECT(pnp_image_data(img)[4] == 0.75);

  pnp_image* zeros = NULL;
  OK(pnp_image_create(3, 2, 1, NULL, &zeros));
  EXPECT(pnp_image_data(zeros)[0] == 0.0);
  double p = 0.0;
  OK(pnp_image_psnr(img, img, 0, &p));
  EXPECT(isinf(p));
  OK(pnp_image_psnr(img, zeros, 0, &p));
  EXPECT(p > 0.0 && isfinite(p));

  pnp_image* bad = (pnp_image*)0x1;
  EXPECT(pnp_image_create(0, 2, 1, NULL, &bad) == PNP_ERR_INVALID_ARGUMENT);
  EXPECT(bad == NULL);
  EXPECT(strlen(pnp_last_error()) > 0);
  EXPECT(pnp_image_psnr(img, NULL, 0, &p) == PNP_ERR_INVALID_ARGUMENT);

  pnp_image* read = NULL;
  EXPECT(pnp_image_read("/nonexistent/x.pgm", &read) == PNP_ERR_IO);
  EXPECT(strstr(pnp_last_error(), "/nonexistent/x.pgm") != NULL);
  EXPECT(pnp_image_write(img, "/tmp/pnp_capi.png", 8) == PNP_ERR_FORMAT);
  OK(pnp_image_write(img, "/tmp/pnp_capi.pgm", 8));
  OK(pnp_image_read("/tmp/pnp_capi.pgm", &read));
  EXPECT(pnp_image_data(read)[1] == 128.0 / 255.0);

  pnp_image* noisy = NULL;
  pnp_image* noisy2 = NULL;
  OK(pnp_image_add_noise(img, 0.1, 7, &noisy));
  OK(pnp_image_add_noise(img, 0.1, 7, &noisy2));
  EXPECT(memcmp(pnp_image_data(noisy), pnp_image_data(noisy2), 6 * sizeof(double)) == 0);

  pnp_image_destroy(img);
  pnp_image_destroy(zeros);
  pnp_image_destroy(read);
  pnp_image_destroy(noisy);
  pnp_image_destroy(noisy2);
  pnp_image_destroy(NULL);
}

static void restore(void) {
  pnp_image* clean = NULL;
  OK(pnp_image_synth("cartoon", 48, 48, 1, 3, &clean));
  pnp_problem* prob = NULL;
  OK(pnp_problem_deconv(clean, "gaussian:1.6", 0.02, 4, 12, "c", &prob));
  EXPECT(pnp_problem_has_reference(prob) == 1);
  pnp_problem* rejected = NULL;
  EXPECT(pnp_problem_deconv(clean, "gaussian", 0.02, 4, 12, "c", &rejected) == PNP_ERR_INVALID_ARGUMENT);
  EXPECT(rejected == NULL);

  pnp_denoiser_params dp;
  pnp_denoiser_params_default(&dp);
  EXPECT(dp.kind == PNP_DENOISER_NLM);
  pnp_denoiser* g = NULL;
  OK(pnp_denoiser_create(&dp, &g));

  pnp_scheme_config cfg;
  pnp_scheme_config_default(&cfg);
  EXPECT(cfg.scheme == PNP_SCHEME_STACKED && cfg.max_iters == 30);
  OK(pnp_scheme_parse("pdhg2", &cfg.scheme));
  EXPECT(pnp_scheme_parse("nope", &cfg.scheme) == PNP_ERR_INVALID_ARGUMENT);
  cfg.alpha = 64.0;

  pnp_report* rep = NULL;
  OK(pnp_solve(prob, &cfg, g, 1, &rep));
  EXPECT(pnp_report_iterations(rep) >= 1 && pnp_report_iterations(rep) <= 30);
  EXPECT(pnp_report_tau(rep) > 0.0);
  EXPECT(!pnp_report_step_condition_violated(rep));

  pnp_image* degraded = NULL;
  OK(pnp_problem_degraded(prob, &degraded));
  double before = 0.0;
  OK(pnp_image_psnr(degraded, clean, 12, &before));
  EXPECT(pnp_report_psnr(rep) > before);

  char* csv = NULL;
  OK(pnp_report_history_csv(rep, &csv));
  EXPECT(strncmp(csv, "k,rel_change,data_energy,fixed_point_residual,psnr_vs_reference\n", 63) == 0);
  pnp_string_free(csv);

  pnp_image* u = NULL;
  OK(pnp_report_image(rep, &u));
  double r = 0.0;
  OK(pnp_fixed_point_residual(prob, &cfg, g, u, 0.0, &r));
  EXPECT(r > 0.0 && isfinite(r));

  /* divergence is a result, not an error */
  pnp_scheme_config wild = cfg;
  wild.scheme = PNP_SCHEME_PG;
  wild.tau = 1.0;
  wild.alpha = 1e12;
  wild.max_iters = 500;
  pnp_denoiser_params idp;
  pnp_denoiser_params_default(&idp);
  idp.kind = PNP_DENOISER_IDENTITY;
  pnp_denoiser* id = NULL;
  OK(pnp_denoiser_create(&idp, &id));
  pnp_report* boom = NULL;
  OK(pnp_solve(prob, &wild, id, 0, &boom));
  EXPECT(pnp_report_stop_reason(boom) == PNP_STOP_NONFINITE);
  EXPECT(pnp_report_step_condition_violated(boom));

  /* grid search and table */
  const pnp_problem* probs[1] = {prob};
  const double alphas[3] = {16.0, 64.0, 256.0};
  pnp_grid_best best;
  char* table = NULL;
  cfg.max_iters = 5;
  OK(pnp_grid_search(probs, 1, alphas, 3, NULL, 0, NULL, 0, &cfg, g, &best, &table));
  EXPECT(strncmp(table, "alpha,beta_tv,beta_cross,mean_psnr,diverged,c\n", 46) == 0);
  EXPECT(best.alpha == 16.0 || best.alpha == 64.0 || best.alpha == 256.0);
  pnp_string_free(table);

  const pnp_image* results[1] = {u};
  char* text = NULL;
  OK(pnp_psnr_table(probs, results, 1, &text, &csv));
  EXPECT(strstr(text, "average") != NULL);
  pnp_string_free(text);
  pnp_string_free(csv);

  pnp_problem* observed = NULL;
  OK(pnp_problem_deconv_observed(degraded, "gaussian:1.6", &observed));
  EXPECT(pnp_problem_has_reference(observed) == 0);
  pnp_image* none = NULL;
  EXPECT(pnp_problem_reference(observed, &none) == PNP_ERR_INVALID_ARGUMENT);
  const pnp_problem* obs[1] = {observed};
  EXPECT(pnp_grid_search(obs, 1, alphas, 3, NULL, 0, NULL, 0, &cfg, g, &best, NULL) == PNP_ERR_INVALID_ARGUMENT);

  pnp_image* gray = NULL;
  OK(pnp_image_synth("cartoon", 16, 16, 1, 1, &gray));
  pnp_problem* dm = NULL;
  EXPECT(pnp_problem_demosaick(gray, "RGGB", 5, "g", &dm) == PNP_ERR_SHAPE);

  pnp_report_destroy(rep);
  pnp_report_destroy(boom);
  pnp_image_destroy(u);
  pnp_image_destroy(degraded);
  pnp_image_destroy(gray);
  pnp_image_destroy(clean);
  pnp_problem_destroy(prob);
  pnp_problem_destroy(observed);
  pnp_denoiser_destroy(g);
  pnp_denoiser_destroy(id);
}

static void misc(void) {
  EXPECT(strlen(pnp_version()) > 0);
  EXPECT(strcmp(pnp_status_name(PNP_ERR_FORMAT), pnp_status_name(PNP_OK)) != 0);
  pnp_set_num_threads(3);
  EXPECT(pnp_num_threads() == 3);
  pnp_set_num_threads(1);
  char* info = NULL;
  EXPECT(pnp_weights_info("/nonexistent.pnpw", &info) == PNP_ERR_IO);
  FILE* f = fopen("/tmp/pnp_capi_bad.pnpw", "wb");
  fputs("NOPE", f);
  fclose(f);
  EXPECT(pnp_weights_info("/tmp/pnp_capi_bad.pnpw", &info) == PNP_ERR_FORMAT);

  pnp_denoiser_params dp;
  pnp_denoiser_params_default(&dp);
  dp.kind = PNP_DENOISER_CNN;
  dp.cnn_weights_path = NULL;
  pnp_denoiser* g = NULL;
  EXPECT(pnp_denoiser_create(&dp, &g) == PNP_ERR_INVALID_ARGUMENT);
  dp.kind = PNP_DENOISER_GAUSSIAN;
  dp.gaussian_std = -1.0;
  EXPECT(pnp_denoiser_create(&dp, &g) == PNP_ERR_INVALID_ARGUMENT);
}

int main(void) {
  images();
  restore();
  misc();
  if (failures) {
    fprintf(stderr, "%d failure(s)\n", failures);
    return 1;
  }
  puts("c api ok");
  return 0;
}
