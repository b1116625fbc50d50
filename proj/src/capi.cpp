#include "pnp/pnp.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "pnp/cnn.hpp"
#include "pnp/denoisers.hpp"
#include "pnp/error.hpp"
#include "pnp/harness.hpp"
#include "pnp/image_io.hpp"
#include "pnp/parallel.hpp"
#include "pnp/schemes.hpp"

struct pnp_image {
  pnp::Image img;
};

struct pnp_denoiser {
  pnp::Denoiser d;
};

struct pnp_problem {
  pnp::Problem p;
  bool has_reference;
};

struct pnp_report {
  pnp::RunReport r;
  double tau;
  double psnr;
};

namespace {

thread_local std::string g_last_error;

pnp_status status_of(pnp::ErrorKind k) {
  switch (k) {
    case pnp::ErrorKind::InvalidArgument: return PNP_ERR_INVALID_ARGUMENT;
    case pnp::ErrorKind::ShapeMismatch: return PNP_ERR_SHAPE;
    case pnp::ErrorKind::Io: return PNP_ERR_IO;
    case pnp::ErrorKind::Format: return PNP_ERR_FORMAT;
    case pnp::ErrorKind::Numerical: return PNP_ERR_NUMERICAL;
  }
  return PNP_ERR_INTERNAL;
}

template <class F>
pnp_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return PNP_OK;
  } catch (const pnp::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PNP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PNP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return PNP_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) pnp::fail(pnp::ErrorKind::InvalidArgument, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

pnp_image* wrap(pnp::Image img) { return new pnp_image{std::move(img)}; }

pnp::Scheme to_scheme(pnp_scheme s) {
  switch (s) {
    case PNP_SCHEME_PG: return pnp::Scheme::PG;
    case PNP_SCHEME_ADMM: return pnp::Scheme::ADMM;
    case PNP_SCHEME_PDHG1: return pnp::Scheme::PDHG1;
    case PNP_SCHEME_PDHG2: return pnp::Scheme::PDHG2;
    case PNP_SCHEME_STACKED: return pnp::Scheme::StackedPDHG;
  }
  pnp::fail(pnp::ErrorKind::InvalidArgument, "unknown scheme " + std::to_string(static_cast<int>(s)));
}

// Scheme template around the problem's data term (alpha is set per solve).
pnp::SchemeConfig make_template(const pnp_problem* p, const pnp_scheme_config* c, const pnp_denoiser* d) {
  need(p, "problem");
  need(c, "config");
  need(d, "denoiser");
  pnp::require(c->max_iters >= 0, pnp::ErrorKind::InvalidArgument, "max_iters must be >= 0");
  pnp::require(c->gamma > 0.0, pnp::ErrorKind::InvalidArgument, "gamma must be > 0");
  pnp::SchemeConfig cfg(to_scheme(c->scheme), p->p.data, d->d);
  cfg.tau = c->tau;
  cfg.gamma = c->gamma;
  cfg.theta = c->theta;
  cfg.beta_tv = c->beta_tv;
  cfg.beta_cross = c->beta_cross;
  cfg.max_iters = c->max_iters;
  cfg.tol = c->tol;
  return cfg;
}

pnp::SchemeConfig resolved(const pnp_problem* p, const pnp_scheme_config* c, const pnp_denoiser* d) {
  pnp::SchemeConfig cfg = make_template(p, c, d);
  cfg.data = p->p.data.with_alpha(c->alpha);
  if (cfg.tau <= 0.0) cfg = pnp::with_default_steps(std::move(cfg));
  return cfg;
}

std::vector<double> as_vector(const double* v, size_t n, const char* what) {
  if (n == 0) return {};
  need(v, what);
  return std::vector<double>(v, v + n);
}

std::vector<pnp::Problem> collect(const pnp_problem* const* problems, size_t n, bool need_reference) {
  need(problems, "problems");
  std::vector<pnp::Problem> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    need(problems[i], "problem");
    pnp::require(!need_reference || problems[i]->has_reference, pnp::ErrorKind::InvalidArgument,
                 "problem '" + problems[i]->p.name + "' has no reference image");
    out.push_back(problems[i]->p);
  }
  return out;
}

}  // namespace

extern "C" {

const char* pnp_version(void) { return "1.0.0"; }

const char* pnp_last_error(void) { return g_last_error.c_str(); }

const char* pnp_status_name(pnp_status status) {
  switch (status) {
    case PNP_OK: return "ok";
    case PNP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PNP_ERR_SHAPE: return "shape mismatch";
    case PNP_ERR_IO: return "i/o error";
    case PNP_ERR_FORMAT: return "format error";
    case PNP_ERR_NUMERICAL: return "numerical failure";
    case PNP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void pnp_string_free(char* s) { std::free(s); }

void pnp_set_num_threads(int n) { pnp::set_num_threads(n); }
int pnp_num_threads(void) { return pnp::num_threads(); }

// images

pnp_status pnp_image_create(int width, int height, int channels, const double* data, pnp_image** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(out, "out");
    pnp::Image img(width, height, channels);
    if (data) std::memcpy(img.data().data(), data, img.size() * sizeof(double));
    *out = wrap(std::move(img));
  });
}

pnp_status pnp_image_read(const char* path, pnp_image** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(path, "path");
    need(out, "out");
    *out = wrap(pnp::read_image(path));
  });
}

pnp_status pnp_image_write(const pnp_image* img, const char* path, int bit_depth) {
  return guarded([&] {
    need(img, "image");
    need(path, "path");
    pnp::write_image(path, img->img, bit_depth);
  });
}

pnp_status pnp_image_synth(const char* kind, int width, int height, int channels, uint64_t seed, pnp_image** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(kind, "kind");
    need(out, "out");
    *out = wrap(pnp::synth_image(kind, width, height, channels, pnp::RngSeed{seed}));
  });
}

pnp_status pnp_image_add_noise(const pnp_image* img, double sigma, uint64_t seed, pnp_image** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(img, "image");
    need(out, "out");
    pnp::require(sigma >= 0.0 && std::isfinite(sigma), pnp::ErrorKind::InvalidArgument, "noise sigma must be >= 0");
    *out = wrap(pnp::add_gaussian_noise(img->img, sigma, pnp::RngSeed{seed}));
  });
}

void pnp_image_destroy(pnp_image* img) { delete img; }
int pnp_image_width(const pnp_image* img) { return img ? img->img.width() : 0; }
int pnp_image_height(const pnp_image* img) { return img ? img->img.height() : 0; }
int pnp_image_channels(const pnp_image* img) { return img ? img->img.channels() : 0; }
const double* pnp_image_data(const pnp_image* img) { return img ? img->img.data().data() : nullptr; }

pnp_status pnp_image_psnr(const pnp_image* a, const pnp_image* b, int crop, double* out) {
  return guarded([&] {
    need(a, "image a");
    need(b, "image b");
    need(out, "out");
    *out = pnp::psnr_cropped(a->img, b->img, crop);
  });
}

// denoisers

void pnp_denoiser_params_default(pnp_denoiser_params* params) {
  if (!params) return;
  const pnp::NlmParams nlm;
  const pnp::TvProxParams tv;
  params->kind = PNP_DENOISER_NLM;
  params->gaussian_std = 1.0;
  params->nlm_patch_radius = nlm.patch_radius;
  params->nlm_search_radius = nlm.search_radius;
  params->nlm_h = nlm.h;
  params->nlm_sigma = nlm.sigma;
  params->tv_lambda = 0.01;
  params->tv_inner_iters = tv.inner_iters;
  params->tv_inner_tol = tv.inner_tol;
  params->cnn_weights_path = nullptr;
}

pnp_status pnp_denoiser_create(const pnp_denoiser_params* params, pnp_denoiser** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(params, "params");
    need(out, "out");
    pnp::Denoiser d;
    switch (params->kind) {
      case PNP_DENOISER_IDENTITY: d = pnp::Denoiser::identity(); break;
      case PNP_DENOISER_GAUSSIAN: d = pnp::Denoiser::gaussian(params->gaussian_std); break;
      case PNP_DENOISER_NLM:
        d = pnp::Denoiser::nlm(
            {params->nlm_patch_radius, params->nlm_search_radius, params->nlm_h, params->nlm_sigma});
        break;
      case PNP_DENOISER_TV:
        d = pnp::Denoiser::tv_prox(params->tv_lambda, params->tv_inner_iters, params->tv_inner_tol);
        break;
      case PNP_DENOISER_CNN:
        pnp::require(params->cnn_weights_path && *params->cnn_weights_path, pnp::ErrorKind::InvalidArgument,
                     "cnn denoiser needs a weights file");
        d = pnp::Denoiser::cnn(pnp::load_model(params->cnn_weights_path));
        break;
      default: pnp::fail(pnp::ErrorKind::InvalidArgument, "unknown denoiser kind");
    }
    *out = new pnp_denoiser{std::move(d)};
  });
}

pnp_status pnp_denoiser_apply(const pnp_denoiser* denoiser, const pnp_image* in, pnp_image** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(denoiser, "denoiser");
    need(in, "image");
    need(out, "out");
    *out = wrap(denoiser->d.apply(in->img));
  });
}

void pnp_denoiser_destroy(pnp_denoiser* denoiser) { delete denoiser; }

// problems

pnp_status pnp_problem_deconv(const pnp_image* clean, const char* kernel_spec, double sigma, uint64_t seed, int crop,
                              const char* name, pnp_problem** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(clean, "image");
    need(kernel_spec, "kernel spec");
    need(out, "out");
    pnp::DeconvExperiment e{kernel_spec, sigma, crop};
    *out = new pnp_problem{pnp::build_deconv(e, clean->img, pnp::RngSeed{seed}, name ? name : "deconv"), true};
  });
}

pnp_status pnp_problem_deconv_observed(const pnp_image* observed, const char* kernel_spec, pnp_problem** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(observed, "image");
    need(kernel_spec, "kernel spec");
    need(out, "out");
    const pnp::ConvKernel k = pnp::parse_kernel_spec(kernel_spec);
    pnp::Image start = pnp::clamp01(observed->img);
    pnp::Problem p{"observed", pnp::DataTerm(pnp::CircularConvOp{k}, observed->img, 1.0), pnp::Image(), start,
                   start, 0};
    *out = new pnp_problem{std::move(p), false};
  });
}

pnp_status pnp_problem_demosaick(const pnp_image* clean, const char* pattern, int crop, const char* name,
                                 pnp_problem** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(clean, "image");
    need(pattern, "pattern");
    need(out, "out");
    pnp::DemosaickExperiment e{pnp::BayerPattern::parse(pattern), crop};
    *out = new pnp_problem{pnp::build_demosaick(e, clean->img, name ? name : "demosaick"), true};
  });
}

pnp_status pnp_problem_demosaick_observed(const pnp_image* mosaic, const char* pattern, pnp_problem** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(mosaic, "image");
    need(pattern, "pattern");
    need(out, "out");
    const pnp::BayerPattern bp = pnp::BayerPattern::parse(pattern);
    pnp::Image start = pnp::bilinear_demosaick(mosaic->img, bp);
    pnp::Problem p{"observed", pnp::DataTerm(pnp::BayerMaskOp{bp}, mosaic->img, 1.0), pnp::Image(), start, start,
                   0};
    *out = new pnp_problem{std::move(p), false};
  });
}

int pnp_problem_has_reference(const pnp_problem* problem) { return problem && problem->has_reference ? 1 : 0; }

pnp_status pnp_problem_degraded(const pnp_problem* problem, pnp_image** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(problem, "problem");
    need(out, "out");
    *out = wrap(problem->p.degraded);
  });
}

pnp_status pnp_problem_reference(const pnp_problem* problem, pnp_image** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(problem, "problem");
    need(out, "out");
    pnp::require(problem->has_reference, pnp::ErrorKind::InvalidArgument, "problem has no reference image");
    *out = wrap(problem->p.clean);
  });
}

void pnp_problem_destroy(pnp_problem* problem) { delete problem; }

// schemes

void pnp_scheme_config_default(pnp_scheme_config* cfg) {
  if (!cfg) return;
  cfg->scheme = PNP_SCHEME_STACKED;
  cfg->tau = 0.0;
  cfg->gamma = 1.0;
  cfg->theta = 1.0;
  cfg->alpha = 1.0;
  cfg->beta_tv = 0.0;
  cfg->beta_cross = 0.0;
  cfg->max_iters = 30;
  cfg->tol = 1e-6;
}

pnp_status pnp_scheme_parse(const char* name, pnp_scheme* out) {
  return guarded([&] {
    need(name, "name");
    need(out, "out");
    switch (pnp::parse_scheme(name)) {
      case pnp::Scheme::PG: *out = PNP_SCHEME_PG; break;
      case pnp::Scheme::ADMM: *out = PNP_SCHEME_ADMM; break;
      case pnp::Scheme::PDHG1: *out = PNP_SCHEME_PDHG1; break;
      case pnp::Scheme::PDHG2: *out = PNP_SCHEME_PDHG2; break;
      case pnp::Scheme::StackedPDHG: *out = PNP_SCHEME_STACKED; break;
    }
  });
}

pnp_status pnp_solve(const pnp_problem* problem, const pnp_scheme_config* cfg, const pnp_denoiser* denoiser,
                     int track_fixed_point_residual, pnp_report** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(out, "out");
    const pnp::SchemeConfig c = resolved(problem, cfg, denoiser);
    pnp::RunOptions opts;
    opts.track_fixed_point_residual = track_fixed_point_residual != 0;
    if (problem->has_reference) {
      opts.reference = problem->p.clean;
      opts.psnr_border = problem->p.crop;
    }
    auto rep = std::make_unique<pnp_report>();
    rep->r = pnp::run(c, problem->p.u0, opts);
    rep->tau = c.tau;
    rep->psnr = problem->has_reference ? pnp::score(problem->p, rep->r.u) : std::numeric_limits<double>::quiet_NaN();
    *out = rep.release();
  });
}

pnp_status pnp_report_image(const pnp_report* report, pnp_image** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(report, "report");
    need(out, "out");
    *out = wrap(report->r.u);
  });
}

int pnp_report_iterations(const pnp_report* report) { return report ? report->r.iterations : 0; }

pnp_stop_reason pnp_report_stop_reason(const pnp_report* report) {
  if (!report) return PNP_STOP_NONFINITE;
  switch (report->r.stop) {
    case pnp::StopReason::Tolerance: return PNP_STOP_TOL;
    case pnp::StopReason::MaxIters: return PNP_STOP_MAX_ITERS;
    case pnp::StopReason::NonFinite: return PNP_STOP_NONFINITE;
  }
  return PNP_STOP_NONFINITE;
}

int pnp_report_step_condition_violated(const pnp_report* report) {
  return report && report->r.step_condition_violated ? 1 : 0;
}

double pnp_report_tau(const pnp_report* report) {
  return report ? report->tau : std::numeric_limits<double>::quiet_NaN();
}

double pnp_report_psnr(const pnp_report* report) {
  return report ? report->psnr : std::numeric_limits<double>::quiet_NaN();
}

pnp_status pnp_report_history_csv(const pnp_report* report, char** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(report, "report");
    need(out, "out");
    *out = dup_string(pnp::history_csv(report->r.history));
  });
}

void pnp_report_destroy(pnp_report* report) { delete report; }

pnp_status pnp_fixed_point_residual(const pnp_problem* problem, const pnp_scheme_config* cfg,
                                    const pnp_denoiser* denoiser, const pnp_image* u, double t, double* out) {
  return guarded([&] {
    need(u, "image");
    need(out, "out");
    const pnp::SchemeConfig c = resolved(problem, cfg, denoiser);
    *out = t > 0.0 ? pnp::fixed_point_residual(c, u->img, t) : pnp::fixed_point_residual(c, u->img);
  });
}

pnp_status pnp_fixed_point_drift(const pnp_problem* problem, const pnp_scheme_config* cfg,
                                 const pnp_denoiser* denoiser, const pnp_image* u, int iters, double* max_change) {
  return guarded([&] {
    need(u, "image");
    need(max_change, "out");
    pnp::require(iters >= 0, pnp::ErrorKind::InvalidArgument, "iteration count must be >= 0");
    const pnp::SchemeConfig c = resolved(problem, cfg, denoiser);
    pnp::SchemeState st = pnp::fixed_point_state(c, u->img);
    double worst = 0.0;
    for (int k = 0; k < iters; ++k) {
      const pnp::Image prev = st.u;
      pnp::step(c, st);
      pnp::require(st.u.all_finite(), pnp::ErrorKind::Numerical, "iterate became non-finite");
      worst = std::max(worst, pnp::relative_distance(st.u, prev));
    }
    *max_change = worst;
  });
}

// experiments

pnp_status pnp_grid_search(const pnp_problem* const* problems, size_t n_problems, const double* alphas,
                           size_t n_alphas, const double* beta_tv, size_t n_beta_tv, const double* beta_cross,
                           size_t n_beta_cross, const pnp_scheme_config* cfg, const pnp_denoiser* denoiser,
                           pnp_grid_best* best, char** csv_out) {
  return guarded([&] {
    if (csv_out) *csv_out = nullptr;
    std::vector<pnp::Problem> ps = collect(problems, n_problems, true);
    pnp::require(!ps.empty(), pnp::ErrorKind::InvalidArgument, "grid search needs at least one problem");
    pnp::GridSearchSpec spec;
    spec.alphas = as_vector(alphas, n_alphas, "alphas");
    if (n_beta_tv) spec.beta_tv = as_vector(beta_tv, n_beta_tv, "beta_tv");
    if (n_beta_cross) spec.beta_cross = as_vector(beta_cross, n_beta_cross, "beta_cross");
    const pnp::SchemeConfig tmpl = make_template(problems[0], cfg, denoiser);
    const pnp::GridSearchResult r = pnp::grid_search(spec, ps, tmpl);
    if (best) {
      const pnp::GridCell& b = r.best_cell();
      *best = pnp_grid_best{b.alpha, b.beta_tv, b.beta_cross, b.mean_psnr};
    }
    if (csv_out) *csv_out = dup_string(pnp::grid_search_csv(r, ps));
  });
}

pnp_status pnp_alpha_sigma_sweep(const pnp_problem* problem, const double* sigmas, size_t n_sigmas,
                                 const double* alphas, size_t n_alphas, const pnp_scheme_config* cfg,
                                 int tv_inner_iters, double tv_inner_tol, double* fit_p, double* r_squared,
                                 char** csv_out) {
  return guarded([&] {
    if (csv_out) *csv_out = nullptr;
    need(problem, "problem");
    pnp::require(problem->has_reference, pnp::ErrorKind::InvalidArgument, "problem has no reference image");
    pnp::SchemeConfig tmpl(to_scheme(cfg ? cfg->scheme : PNP_SCHEME_PG), problem->p.data,
                           pnp::Denoiser::tv_prox(0.0, tv_inner_iters, tv_inner_tol));
    need(cfg, "config");
    tmpl.tau = cfg->tau;
    tmpl.gamma = cfg->gamma;
    tmpl.theta = cfg->theta;
    tmpl.beta_tv = cfg->beta_tv;
    tmpl.beta_cross = cfg->beta_cross;
    tmpl.max_iters = cfg->max_iters;
    tmpl.tol = cfg->tol;
    const pnp::AlphaSigmaResult r = pnp::alpha_sigma_sweep(as_vector(sigmas, n_sigmas, "sigmas"), problem->p,
                                                           as_vector(alphas, n_alphas, "alphas"), tmpl);
    if (fit_p) *fit_p = r.fit_p;
    if (r_squared) *r_squared = r.r_squared;
    if (csv_out) *csv_out = dup_string(pnp::alpha_sigma_csv(r));
  });
}

pnp_status pnp_psnr_table(const pnp_problem* const* problems, const pnp_image* const* results, size_t n,
                          char** text_out, char** csv_out) {
  return guarded([&] {
    if (text_out) *text_out = nullptr;
    if (csv_out) *csv_out = nullptr;
    std::vector<pnp::Problem> ps = collect(problems, n, true);
    need(results, "results");
    std::vector<pnp::Image> rs;
    for (size_t i = 0; i < n; ++i) {
      need(results[i], "result");
      rs.push_back(results[i]->img);
    }
    const pnp::PsnrTable t = pnp::psnr_table(ps, rs);
    if (text_out) *text_out = dup_string(t.to_text());
    if (csv_out) *csv_out = dup_string(t.to_csv());
  });
}

pnp_status pnp_weights_info(const char* path, char** out) {
  return guarded([&] {
    if (out) *out = nullptr;
    need(path, "path");
    need(out, "out");
    *out = dup_string(pnp::describe_model(pnp::load_model(path)));
  });
}

}  // extern "C"
