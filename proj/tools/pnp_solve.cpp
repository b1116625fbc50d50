// pnp-solve: command-line front end over the C API.
//
// Exit codes: 0 ok, 1 usage, 2 i/o or format, 3 numerical failure.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "pnp/pnp.h"

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kNumerical = 3 };

struct Failure {
  int code;
  std::string message;
};

int exit_code(pnp_status s) {
  switch (s) {
    case PNP_OK: return kOk;
    case PNP_ERR_IO:
    case PNP_ERR_FORMAT: return kIo;
    case PNP_ERR_NUMERICAL: return kNumerical;
    default: return kUsage;
  }
}

void check(pnp_status s) {
  if (s != PNP_OK) throw Failure{exit_code(s), pnp_last_error()};
}

// RAII wrappers around the opaque handles.
struct ImageDel {
  void operator()(pnp_image* p) const { pnp_image_destroy(p); }
};
struct DenoiserDel {
  void operator()(pnp_denoiser* p) const { pnp_denoiser_destroy(p); }
};
struct ProblemDel {
  void operator()(pnp_problem* p) const { pnp_problem_destroy(p); }
};
struct ReportDel {
  void operator()(pnp_report* p) const { pnp_report_destroy(p); }
};
using ImagePtr = std::unique_ptr<pnp_image, ImageDel>;
using DenoiserPtr = std::unique_ptr<pnp_denoiser, DenoiserDel>;
using ProblemPtr = std::unique_ptr<pnp_problem, ProblemDel>;
using ReportPtr = std::unique_ptr<pnp_report, ReportDel>;

std::string take_string(char* s) {
  std::string out = s ? s : "";
  pnp_string_free(s);
  return out;
}

ImagePtr read_image(const std::string& path) {
  pnp_image* img = nullptr;
  check(pnp_image_read(path.c_str(), &img));
  return ImagePtr(img);
}

void write_image(const pnp_image* img, const std::string& path, int bit_depth) {
  check(pnp_image_write(img, path.c_str(), bit_depth));
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{kIo, "cannot open " + path + " for writing"};
  out << text;
  if (!out) throw Failure{kIo, "failed writing " + path};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string fmt_e(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// ---- shared option groups -------------------------------------------------

struct Common {
  std::string config;
  int threads = 0;
  std::uint64_t seed = 0;
  bool verbose = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Read key = value defaults from a file (flags win)");
  app->add_option("--threads", c.threads, "Worker threads, 0 = all cores")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  app->add_option("--seed", c.seed, "Seed for noise and synthetic scenes")->capture_default_str();
  app->add_flag("-v,--verbose", c.verbose, "Log every iteration to stderr");
}

// Fills options the command line left unset from a flat "key = value" file.
void apply_config(CLI::App* app, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw Failure{kIo, "cannot open config file " + path};
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::ParseError& e) {
    throw Failure{kIo, "bad config file " + path + ": " + e.what()};
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (item.name == "config") throw Failure{kUsage, path + ": config files cannot include other config files"};
    CLI::Option* opt = app->get_option_no_throw("--" + item.name);
    if (!opt) throw Failure{kUsage, path + ": unknown key '" + item.name + "' for " + app->get_name()};
    if (opt->count() > 0) continue;
    try {
      for (const auto& v : item.inputs) opt->add_result(v);
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw Failure{kUsage, path + ": " + item.name + ": " + e.what()};
    }
  }
}

void apply_common(CLI::App* app, const Common& c) {
  apply_config(app, c.config);
  pnp_set_num_threads(c.threads > 0 ? c.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
}

struct DenoiserOpts {
  std::string kind = "nlm";
  double gaussian_std = 1.0;
  int nlm_patch = 1;
  int nlm_search = 5;
  double nlm_h = 0.1;
  double nlm_sigma = 0.0;
  double tv_lambda = 0.01;
  int tv_iters = 500;
  double tv_tol = 1e-8;
  std::string weights;
};

void add_denoiser(CLI::App* app, DenoiserOpts& d) {
  app->add_option("--denoiser", d.kind, "Denoiser: identity, gaussian, nlm, tv, cnn")
      ->capture_default_str()
      ->check(CLI::IsMember({"identity", "gaussian", "nlm", "tv", "cnn"}));
  app->add_option("--gaussian-std", d.gaussian_std, "Gaussian smoothing std (pixels)")->capture_default_str();
  app->add_option("--nlm-patch", d.nlm_patch, "NLM patch radius")->capture_default_str();
  app->add_option("--nlm-search", d.nlm_search, "NLM search radius")->capture_default_str();
  app->add_option("--nlm-h", d.nlm_h, "NLM filtering strength")->capture_default_str();
  app->add_option("--nlm-sigma", d.nlm_sigma, "NLM noise level subtracted from patch distances")
      ->capture_default_str();
  app->add_option("--tv-lambda", d.tv_lambda, "TV prox strength")->capture_default_str();
  app->add_option("--tv-iters", d.tv_iters, "TV prox inner iterations")->capture_default_str();
  app->add_option("--tv-tol", d.tv_tol, "TV prox inner tolerance")->capture_default_str();
  app->add_option("--weights", d.weights, "PNPW weights file for the cnn denoiser");
}

DenoiserPtr make_denoiser(const DenoiserOpts& d) {
  pnp_denoiser_params p;
  pnp_denoiser_params_default(&p);
  if (d.kind == "identity") p.kind = PNP_DENOISER_IDENTITY;
  else if (d.kind == "gaussian") p.kind = PNP_DENOISER_GAUSSIAN;
  else if (d.kind == "nlm") p.kind = PNP_DENOISER_NLM;
  else if (d.kind == "tv") p.kind = PNP_DENOISER_TV;
  else p.kind = PNP_DENOISER_CNN;
  if (p.kind == PNP_DENOISER_CNN && d.weights.empty()) throw Failure{kUsage, "--denoiser cnn requires --weights"};
  if (p.kind != PNP_DENOISER_CNN && !d.weights.empty())
    throw Failure{kUsage, "--weights conflicts with --denoiser " + d.kind + " (only cnn reads weights)"};
  p.gaussian_std = d.gaussian_std;
  p.nlm_patch_radius = d.nlm_patch;
  p.nlm_search_radius = d.nlm_search;
  p.nlm_h = d.nlm_h;
  p.nlm_sigma = d.nlm_sigma;
  p.tv_lambda = d.tv_lambda;
  p.tv_inner_iters = d.tv_iters;
  p.tv_inner_tol = d.tv_tol;
  p.cnn_weights_path = d.weights.empty() ? nullptr : d.weights.c_str();
  pnp_denoiser* out = nullptr;
  check(pnp_denoiser_create(&p, &out));
  return DenoiserPtr(out);
}

struct SchemeOpts {
  std::string scheme = "stacked";
  double tau = 0.0;
  double gamma = 1.0;
  double theta = 1.0;
  double alpha = 1.0;
  double beta_tv = 0.0;
  double beta_cross = 0.0;
  int max_iters = 30;
  double tol = 1e-6;
};

void add_scheme(CLI::App* app, SchemeOpts& s, bool with_weights) {
  app->add_option("--scheme", s.scheme, "Scheme: pg, admm, pdhg1, pdhg2, stacked")
      ->capture_default_str()
      ->check(CLI::IsMember({"pg", "admm", "pdhg1", "pdhg2", "stacked"}));
  app->add_option("--tau", s.tau, "Primal step, 0 = scheme default")->capture_default_str();
  app->add_option("--gamma", s.gamma, "Dual step")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--theta", s.theta, "PDHG extrapolation")->capture_default_str();
  if (with_weights) {
    app->add_option("--alpha", s.alpha, "Data fidelity weight")->capture_default_str();
    app->add_option("--beta-tv", s.beta_tv, "TV prior weight (stacked only)")->capture_default_str();
    app->add_option("--beta-cross", s.beta_cross, "Cross-channel prior weight (stacked only)")
        ->capture_default_str();
  }
  app->add_option("--max-iters", s.max_iters, "Iteration cap")->capture_default_str();
  app->add_option("--tol", s.tol, "Stop on relative change below this")->capture_default_str();
}

pnp_scheme_config make_config(const SchemeOpts& s) {
  pnp_scheme_config c;
  pnp_scheme_config_default(&c);
  check(pnp_scheme_parse(s.scheme.c_str(), &c.scheme));
  c.tau = s.tau;
  c.gamma = s.gamma;
  c.theta = s.theta;
  c.alpha = s.alpha;
  c.beta_tv = s.beta_tv;
  c.beta_cross = s.beta_cross;
  c.max_iters = s.max_iters;
  c.tol = s.tol;
  if ((s.beta_tv != 0.0 || s.beta_cross != 0.0) && c.scheme != PNP_SCHEME_STACKED)
    throw Failure{kUsage, "--beta-tv/--beta-cross conflict with --scheme " + s.scheme + " (stacked only)"};
  return c;
}

// Runs a problem and writes the requested outputs.
int solve_and_report(const pnp_problem* problem, const pnp_scheme_config& cfg, const pnp_denoiser* den,
                     const Common& common, const std::string& out_path, int bit_depth,
                     const std::string& history_path, int crop) {
  pnp_report* raw = nullptr;
  check(pnp_solve(problem, &cfg, den, 0, &raw));
  ReportPtr rep(raw);
  const std::string history = take_string([&] {
    char* s = nullptr;
    check(pnp_report_history_csv(rep.get(), &s));
    return s;
  }());
  if (common.verbose) std::cerr << history;
  if (!history_path.empty()) write_text(history_path, history);

  const pnp_stop_reason stop = pnp_report_stop_reason(rep.get());
  if (pnp_report_step_condition_violated(rep.get()))
    std::cerr << "warning: step sizes violate the convergence condition\n";

  pnp_image* u = nullptr;
  check(pnp_report_image(rep.get(), &u));
  ImagePtr result(u);
  if (!out_path.empty()) write_image(result.get(), out_path, bit_depth);

  std::cout << "iterations: " << pnp_report_iterations(rep.get()) << "\n";
  std::cout << "stop: "
            << (stop == PNP_STOP_TOL ? "tolerance" : stop == PNP_STOP_MAX_ITERS ? "max-iters" : "nonfinite")
            << "\n";
  std::cout << "tau: " << pnp_report_tau(rep.get()) << "\n";
  if (pnp_problem_has_reference(problem)) {
    pnp_image* d = nullptr;
    pnp_image* r = nullptr;
    check(pnp_problem_degraded(problem, &d));
    ImagePtr degraded(d);
    check(pnp_problem_reference(problem, &r));
    ImagePtr ref(r);
    double before = 0.0;
    check(pnp_image_psnr(degraded.get(), ref.get(), crop, &before));
    std::cout << "psnr degraded: " << fmt(before) << " dB\n";
    std::cout << "psnr restored: " << fmt(pnp_report_psnr(rep.get())) << " dB\n";
  }
  if (stop == PNP_STOP_NONFINITE) {
    std::cerr << "error: iterates became non-finite; wrote the last finite iterate\n";
    return kNumerical;
  }
  return kOk;
}

std::vector<ProblemPtr> synth_or_read_problems(const std::vector<std::string>& inputs, const std::string& task,
                                               const std::string& synth_kind, int size, int count,
                                               const std::string& kernel, double sigma, const std::string& pattern,
                                               int crop, std::uint64_t seed) {
  std::vector<ImagePtr> truths;
  std::vector<std::string> names;
  if (inputs.empty()) {
    const bool color = task == "demosaick";
    const std::string kind = color && synth_kind == "cartoon" ? "color" : synth_kind;
    for (int i = 0; i < count; ++i) {
      pnp_image* img = nullptr;
      check(pnp_image_synth(kind.c_str(), size, size, color ? 3 : 1, seed + static_cast<std::uint64_t>(i), &img));
      truths.emplace_back(img);
      names.push_back(kind + "_" + std::to_string(i));
    }
  } else {
    for (const auto& path : inputs) {
      truths.push_back(read_image(path));
      names.push_back(path);
    }
  }
  std::vector<ProblemPtr> problems;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    pnp_problem* p = nullptr;
    if (task == "deconv")
      check(pnp_problem_deconv(truths[i].get(), kernel.c_str(), sigma, seed + 1000 + i, crop, names[i].c_str(), &p));
    else
      check(pnp_problem_demosaick(truths[i].get(), pattern.c_str(), crop, names[i].c_str(), &p));
    problems.emplace_back(p);
  }
  return problems;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plug-and-play image restoration"};
  app.name("pnp-solve");
  app.require_subcommand(1);
  app.fallthrough(false);

  // denoise
  Common dn_common;
  DenoiserOpts dn_den;
  std::string dn_in, dn_out, dn_reference, dn_noisy_out;
  double dn_sigma = 0.0;
  int dn_depth = 8;
  auto* dn = app.add_subcommand("denoise", "Apply a denoiser once");
  add_common(dn, dn_common);
  dn->add_option("--in", dn_in, "Input image (PGM/PPM/PFM)")->required();
  dn->add_option("--out", dn_out, "Output image");
  auto* dn_sigma_opt =
      dn->add_option("--sigma", dn_sigma, "Add Gaussian noise first and score against the input")->capture_default_str();
  auto* dn_ref_opt = dn->add_option("--reference", dn_reference, "Clean image to score against");
  dn_sigma_opt->excludes(dn_ref_opt);
  dn->add_option("--noisy-out", dn_noisy_out, "Write the noisy input here");
  dn->add_option("--bit-depth", dn_depth, "PNM output bit depth")->capture_default_str()->check(CLI::IsMember({8, 16}));
  add_denoiser(dn, dn_den);

  // deconvolve
  Common dc_common;
  DenoiserOpts dc_den;
  SchemeOpts dc_scheme;
  std::string dc_in, dc_out, dc_kernel = "gaussian:1.6", dc_history, dc_degraded_out;
  double dc_sigma = 0.01;
  int dc_crop = 12, dc_depth = 8;
  bool dc_observed = false;
  auto* dc = app.add_subcommand("deconvolve", "Deblur an image (synthesizes the blur unless --observed)");
  add_common(dc, dc_common);
  dc->add_option("--in", dc_in, "Ground truth, or the blurred observation with --observed")->required();
  dc->add_option("--out", dc_out, "Restored image");
  dc->add_option("--kernel", dc_kernel, "delta | gaussian:STD[:SIZE] | box:N | motion:LEN:DEG | file:PATH")
      ->capture_default_str();
  auto* dc_sigma_opt = dc->add_option("--sigma", dc_sigma, "Noise std added to the blurred image")->capture_default_str();
  auto* dc_obs_opt = dc->add_flag("--observed", dc_observed, "Input is already degraded (no reference)");
  dc_obs_opt->excludes(dc_sigma_opt);
  dc->add_option("--crop", dc_crop, "Border excluded from PSNR")->capture_default_str();
  dc->add_option("--history", dc_history, "Per-iteration CSV");
  dc->add_option("--degraded-out", dc_degraded_out, "Write the degraded image here");
  dc->add_option("--bit-depth", dc_depth, "PNM output bit depth")->capture_default_str()->check(CLI::IsMember({8, 16}));
  add_scheme(dc, dc_scheme, true);
  add_denoiser(dc, dc_den);

  // demosaick
  Common dm_common;
  DenoiserOpts dm_den;
  SchemeOpts dm_scheme;
  std::string dm_in, dm_out, dm_pattern = "RGGB", dm_history, dm_degraded_out;
  int dm_crop = 5, dm_depth = 8;
  bool dm_observed = false;
  auto* dm = app.add_subcommand("demosaick", "Reconstruct color from a Bayer mosaic");
  add_common(dm, dm_common);
  dm->add_option("--in", dm_in, "3-channel ground truth, or a 1-channel mosaic with --observed")->required();
  dm->add_option("--out", dm_out, "Restored image");
  dm->add_option("--pattern", dm_pattern, "Bayer layout")->capture_default_str();
  dm->add_flag("--observed", dm_observed, "Input is a mosaic (no reference)");
  dm->add_option("--crop", dm_crop, "Border excluded from PSNR")->capture_default_str();
  dm->add_option("--history", dm_history, "Per-iteration CSV");
  dm->add_option("--degraded-out", dm_degraded_out, "Write the bilinear demosaick here");
  dm->add_option("--bit-depth", dm_depth, "PNM output bit depth")->capture_default_str()->check(CLI::IsMember({8, 16}));
  add_scheme(dm, dm_scheme, true);
  add_denoiser(dm, dm_den);

  // grid-search
  Common gs_common;
  DenoiserOpts gs_den;
  SchemeOpts gs_scheme;
  std::vector<std::string> gs_in;
  std::string gs_task = "deconv", gs_synth = "cartoon", gs_kernel = "gaussian:1.6", gs_pattern = "RGGB", gs_csv;
  std::vector<double> gs_alphas{8, 16, 32, 64, 128}, gs_btv{0.0}, gs_bcross{0.0};
  double gs_sigma = 0.01;
  int gs_size = 64, gs_count = 1, gs_crop = -1;
  auto* gs = app.add_subcommand("grid-search", "Exhaustive search over alpha, beta-tv and beta-cross");
  add_common(gs, gs_common);
  gs->add_option("--task", gs_task, "deconv or demosaick")->capture_default_str()->check(
      CLI::IsMember({"deconv", "demosaick"}));
  gs->add_option("--in", gs_in, "Ground-truth images (synthetic scenes when omitted)");
  gs->add_option("--synth", gs_synth, "Synthetic scene: cartoon, gradients, chart, color")->capture_default_str();
  gs->add_option("--size", gs_size, "Synthetic scene size")->capture_default_str();
  gs->add_option("--count", gs_count, "Number of synthetic scenes")->capture_default_str();
  gs->add_option("--kernel", gs_kernel, "Blur kernel spec")->capture_default_str();
  gs->add_option("--sigma", gs_sigma, "Noise std")->capture_default_str();
  gs->add_option("--pattern", gs_pattern, "Bayer layout")->capture_default_str();
  gs->add_option("--crop", gs_crop, "Scoring border, -1 = 12 (deconv) or 5 (demosaick)")->capture_default_str();
  gs->add_option("--alphas", gs_alphas, "Alpha grid")->capture_default_str()->delimiter(',');
  gs->add_option("--betas-tv", gs_btv, "Beta-tv grid")->capture_default_str()->delimiter(',');
  gs->add_option("--betas-cross", gs_bcross, "Beta-cross grid")->capture_default_str()->delimiter(',');
  gs->add_option("--csv", gs_csv, "Result table (stdout when omitted)");
  add_scheme(gs, gs_scheme, false);
  add_denoiser(gs, gs_den);

  // fixed-point-check
  Common fp_common;
  DenoiserOpts fp_den;
  fp_den.kind = "tv";
  fp_den.tv_lambda = 0.01;
  fp_den.tv_iters = 2000;
  fp_den.tv_tol = 1e-13;
  std::string fp_in, fp_kernel = "gaussian:1.0";
  double fp_sigma = 0.01, fp_alpha = 1.0, fp_tau = 0.0, fp_tol = 1e-13, fp_threshold = 1e-8;
  int fp_size = 16, fp_max_iters = 20000, fp_check_iters = 10;
  auto* fp = app.add_subcommand("fixed-point-check",
                                "Converge PG, then check the other schemes stay put under matched steps");
  add_common(fp, fp_common);
  fp->add_option("--in", fp_in, "Ground truth (synthetic cartoon when omitted)");
  fp->add_option("--size", fp_size, "Synthetic scene size")->capture_default_str();
  fp->add_option("--kernel", fp_kernel, "Blur kernel spec")->capture_default_str();
  fp->add_option("--sigma", fp_sigma, "Noise std")->capture_default_str();
  fp->add_option("--alpha", fp_alpha, "Data fidelity weight")->capture_default_str();
  fp->add_option("--tau", fp_tau, "PG step, 0 = 1/(alpha ||A||^2)")->capture_default_str();
  fp->add_option("--max-iters", fp_max_iters, "PG iteration cap")->capture_default_str();
  fp->add_option("--tol", fp_tol, "PG stopping tolerance")->capture_default_str();
  fp->add_option("--check-iters", fp_check_iters, "Iterations per scheme")->capture_default_str();
  fp->add_option("--threshold", fp_threshold, "Largest allowed per-iteration change")->capture_default_str();
  add_denoiser(fp, fp_den);

  // alpha-sigma-sweep
  Common as_common;
  SchemeOpts as_scheme;
  std::string as_in, as_synth = "cartoon", as_kernel = "gaussian:1.6", as_csv;
  std::vector<double> as_sigmas{0.02, 0.04, 0.06, 0.08, 0.1};
  std::vector<double> as_alphas;
  for (int i = 0; i <= 24; ++i) as_alphas.push_back(std::pow(2.0, i * 0.5 - 4.0));
  double as_noise = 0.02;
  int as_size = 64, as_crop = 12, as_tv_iters = 500;
  double as_tv_tol = 1e-8;
  auto* as = app.add_subcommand("alpha-sigma-sweep",
                                "Best alpha per denoiser strength (TV prox with lambda = sigma^2) and its quadratic fit");
  add_common(as, as_common);
  as->add_option("--in", as_in, "Ground truth (synthetic scene when omitted)");
  as->add_option("--synth", as_synth, "Synthetic scene kind")->capture_default_str();
  as->add_option("--size", as_size, "Synthetic scene size")->capture_default_str();
  as->add_option("--kernel", as_kernel, "Blur kernel spec")->capture_default_str();
  as->add_option("--noise", as_noise, "Noise std of the observation")->capture_default_str();
  as->add_option("--crop", as_crop, "Scoring border")->capture_default_str();
  as->add_option("--sigmas", as_sigmas, "Denoiser strengths")->capture_default_str()->delimiter(',');
  as->add_option("--alphas", as_alphas, "Alpha grid")->capture_default_str()->delimiter(',');
  as->add_option("--tv-iters", as_tv_iters, "TV prox inner iterations")->capture_default_str();
  as->add_option("--tv-tol", as_tv_tol, "TV prox inner tolerance")->capture_default_str();
  as->add_option("--csv", as_csv, "Result table (stdout when omitted)");
  add_scheme(as, as_scheme, false);

  // weights-info
  Common wi_common;
  std::string wi_path;
  auto* wi = app.add_subcommand("weights-info", "Print the layer table of a PNPW weights file");
  add_common(wi, wi_common);
  wi->add_option("file", wi_path, "Weights file")->required();

  // synth
  Common sy_common;
  std::string sy_kind = "cartoon", sy_out;
  int sy_w = 64, sy_h = 64, sy_c = 1, sy_depth = 8;
  auto* sy = app.add_subcommand("synth", "Write a synthetic test scene");
  add_common(sy, sy_common);
  sy->add_option("--kind", sy_kind, "cartoon, gradients, chart or color")->capture_default_str();
  sy->add_option("--width", sy_w, "Width")->capture_default_str();
  sy->add_option("--height", sy_h, "Height")->capture_default_str();
  sy->add_option("--channels", sy_c, "Channels (color is always 3)")->capture_default_str();
  sy->add_option("--out", sy_out, "Output image")->required();
  sy->add_option("--bit-depth", sy_depth, "PNM output bit depth")->capture_default_str()->check(CLI::IsMember({8, 16}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    // A missing or unreadable config file is an i/o problem rather than bad usage.
    if (dynamic_cast<const CLI::FileError*>(&e)) {
      std::cerr << "error: " << e.what() << "\n";
      return kIo;
    }
    app.exit(e);
    return kUsage;
  }

  try {
    if (*dn) {
      apply_common(dn, dn_common);
      ImagePtr in = read_image(dn_in);
      DenoiserPtr den = make_denoiser(dn_den);
      ImagePtr reference;
      ImagePtr noisy;
      const pnp_image* source = in.get();
      if (dn_sigma > 0.0) {
        pnp_image* n = nullptr;
        check(pnp_image_add_noise(in.get(), dn_sigma, dn_common.seed, &n));
        noisy.reset(n);
        source = noisy.get();
        if (!dn_noisy_out.empty()) write_image(source, dn_noisy_out, dn_depth);
      } else if (!dn_noisy_out.empty()) {
        throw Failure{kUsage, "--noisy-out needs --sigma > 0"};
      }
      if (!dn_reference.empty()) reference = read_image(dn_reference);
      const pnp_image* ref = dn_sigma > 0.0 ? in.get() : reference.get();
      pnp_image* o = nullptr;
      check(pnp_denoiser_apply(den.get(), source, &o));
      ImagePtr out(o);
      if (!dn_out.empty()) write_image(out.get(), dn_out, dn_depth);
      if (ref) {
        double before = 0.0, after = 0.0;
        check(pnp_image_psnr(source, ref, 0, &before));
        check(pnp_image_psnr(out.get(), ref, 0, &after));
        std::cout << "psnr input: " << fmt(before) << " dB\npsnr denoised: " << fmt(after) << " dB\n";
      }
      return kOk;
    }

    if (*dc) {
      apply_common(dc, dc_common);
      const pnp_scheme_config cfg = make_config(dc_scheme);
      DenoiserPtr den = make_denoiser(dc_den);
      ImagePtr in = read_image(dc_in);
      pnp_problem* p = nullptr;
      if (dc_observed)
        check(pnp_problem_deconv_observed(in.get(), dc_kernel.c_str(), &p));
      else
        check(pnp_problem_deconv(in.get(), dc_kernel.c_str(), dc_sigma, dc_common.seed, dc_crop, dc_in.c_str(), &p));
      ProblemPtr problem(p);
      if (!dc_degraded_out.empty()) {
        pnp_image* d = nullptr;
        check(pnp_problem_degraded(problem.get(), &d));
        ImagePtr degraded(d);
        write_image(degraded.get(), dc_degraded_out, dc_depth);
      }
      return solve_and_report(problem.get(), cfg, den.get(), dc_common, dc_out, dc_depth, dc_history, dc_crop);
    }

    if (*dm) {
      apply_common(dm, dm_common);
      const pnp_scheme_config cfg = make_config(dm_scheme);
      DenoiserPtr den = make_denoiser(dm_den);
      ImagePtr in = read_image(dm_in);
      pnp_problem* p = nullptr;
      if (dm_observed)
        check(pnp_problem_demosaick_observed(in.get(), dm_pattern.c_str(), &p));
      else
        check(pnp_problem_demosaick(in.get(), dm_pattern.c_str(), dm_crop, dm_in.c_str(), &p));
      ProblemPtr problem(p);
      if (!dm_degraded_out.empty()) {
        pnp_image* d = nullptr;
        check(pnp_problem_degraded(problem.get(), &d));
        ImagePtr degraded(d);
        write_image(degraded.get(), dm_degraded_out, dm_depth);
      }
      return solve_and_report(problem.get(), cfg, den.get(), dm_common, dm_out, dm_depth, dm_history, dm_crop);
    }

    if (*gs) {
      apply_common(gs, gs_common);
      DenoiserPtr den = make_denoiser(gs_den);
      pnp_scheme_config cfg = make_config(gs_scheme);
      const int crop = gs_crop >= 0 ? gs_crop : (gs_task == "deconv" ? 12 : 5);
      std::vector<ProblemPtr> problems = synth_or_read_problems(gs_in, gs_task, gs_synth, gs_size, gs_count, gs_kernel,
                                                                gs_sigma, gs_pattern, crop, gs_common.seed);
      std::vector<const pnp_problem*> raw;
      for (auto& p : problems) raw.push_back(p.get());
      pnp_grid_best best;
      char* csv = nullptr;
      check(pnp_grid_search(raw.data(), raw.size(), gs_alphas.data(), gs_alphas.size(), gs_btv.data(), gs_btv.size(),
                            gs_bcross.data(), gs_bcross.size(), &cfg, den.get(), &best, &csv));
      write_text(gs_csv, take_string(csv));
      std::cerr << "best: alpha=" << best.alpha << " beta_tv=" << best.beta_tv << " beta_cross=" << best.beta_cross
                << " mean_psnr=" << fmt(best.mean_psnr) << " dB\n";
      return kOk;
    }

    if (*fp) {
      apply_common(fp, fp_common);
      DenoiserPtr den = make_denoiser(fp_den);
      ImagePtr truth;
      if (fp_in.empty()) {
        pnp_image* img = nullptr;
        check(pnp_image_synth("cartoon", fp_size, fp_size, 1, fp_common.seed, &img));
        truth.reset(img);
      } else {
        truth = read_image(fp_in);
      }
      pnp_problem* p = nullptr;
      check(pnp_problem_deconv(truth.get(), fp_kernel.c_str(), fp_sigma, fp_common.seed, 0, "fixed-point", &p));
      ProblemPtr problem(p);

      pnp_scheme_config pg;
      pnp_scheme_config_default(&pg);
      pg.scheme = PNP_SCHEME_PG;
      pg.tau = fp_tau;
      pg.alpha = fp_alpha;
      pg.max_iters = fp_max_iters;
      pg.tol = fp_tol;
      pnp_report* r = nullptr;
      check(pnp_solve(problem.get(), &pg, den.get(), 0, &r));
      ReportPtr rep(r);
      if (pnp_report_stop_reason(rep.get()) == PNP_STOP_NONFINITE) throw Failure{kNumerical, "PG diverged"};
      pnp_image* u = nullptr;
      check(pnp_report_image(rep.get(), &u));
      ImagePtr fixed(u);
      const double tau = pnp_report_tau(rep.get());
      std::cerr << "pg: " << pnp_report_iterations(rep.get()) << " iterations, tau " << tau << "\n";

      std::cout << "scheme,t,residual,max_change\n";
      bool ok = true;
      const pnp_scheme schemes[] = {PNP_SCHEME_PG, PNP_SCHEME_ADMM, PNP_SCHEME_PDHG1, PNP_SCHEME_PDHG2};
      const char* names[] = {"pg", "admm", "pdhg1", "pdhg2"};
      for (int i = 0; i < 4; ++i) {
        pnp_scheme_config c = pg;
        c.scheme = schemes[i];
        c.tau = tau;
        if (schemes[i] != PNP_SCHEME_PG) {
          // t = 1/gamma must equal the PG step; PDHG steps keep tau*gamma within the PDHG2 bound.
          c.gamma = 1.0 / tau;
          c.tau = schemes[i] == PNP_SCHEME_PDHG1 ? 0.0 : tau;
        }
        double residual = 0.0, drift = 0.0;
        check(pnp_fixed_point_residual(problem.get(), &c, den.get(), fixed.get(), 0.0, &residual));
        check(pnp_fixed_point_drift(problem.get(), &c, den.get(), fixed.get(), fp_check_iters, &drift));
        ok = ok && residual <= fp_threshold && drift <= fp_threshold;
        std::cout << names[i] << "," << fmt_e(schemes[i] == PNP_SCHEME_PG ? tau : 1.0 / c.gamma) << ","
                  << fmt_e(residual) << "," << fmt_e(drift) << "\n";
      }
      if (!ok) {
        std::cerr << "error: fixed-point check exceeded " << fmt_e(fp_threshold) << "\n";
        return kNumerical;
      }
      return kOk;
    }

    if (*as) {
      apply_common(as, as_common);
      ImagePtr truth;
      if (as_in.empty()) {
        pnp_image* img = nullptr;
        check(pnp_image_synth(as_synth.c_str(), as_size, as_size, 1, as_common.seed, &img));
        truth.reset(img);
      } else {
        truth = read_image(as_in);
      }
      pnp_problem* p = nullptr;
      check(pnp_problem_deconv(truth.get(), as_kernel.c_str(), as_noise, as_common.seed, as_crop, "sweep", &p));
      ProblemPtr problem(p);
      const pnp_scheme_config cfg = make_config(as_scheme);
      double fit = 0.0, r2 = 0.0;
      char* csv = nullptr;
      check(pnp_alpha_sigma_sweep(problem.get(), as_sigmas.data(), as_sigmas.size(), as_alphas.data(),
                                  as_alphas.size(), &cfg, as_tv_iters, as_tv_tol, &fit, &r2, &csv));
      write_text(as_csv, take_string(csv));
      std::cerr << "fit: alpha = " << fit << " * sigma^2, r^2 = " << fmt(r2) << "\n";
      return kOk;
    }

    if (*wi) {
      apply_common(wi, wi_common);
      char* s = nullptr;
      check(pnp_weights_info(wi_path.c_str(), &s));
      std::cout << take_string(s);
      return kOk;
    }

    if (*sy) {
      apply_common(sy, sy_common);
      pnp_image* img = nullptr;
      check(pnp_image_synth(sy_kind.c_str(), sy_w, sy_h, sy_kind == "color" ? 3 : sy_c, sy_common.seed, &img));
      ImagePtr out(img);
      write_image(out.get(), sy_out, sy_depth);
      return kOk;
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  }
  return kUsage;
}
