#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pnp/image.hpp"
#include "pnp/linear_ops.hpp"
#include "pnp/prox.hpp"
#include "pnp/schemes.hpp"

namespace pnp {

// Synthetic ground truth ------------------------------------------------------

/// Piecewise-constant scene of overlapping disks and rectangles on a flat background.
Image synth_cartoon(int width, int height, int channels, RngSeed seed);
/// Smooth ramps crossed by a few sharp steps.
Image synth_gradients_edges(int width, int height, int channels, RngSeed seed);
/// Bars and rings of increasing spatial frequency.
Image synth_resolution_chart(int width, int height, int channels);
/// 3-channel scene: colored cartoon shapes over smooth color gradients.
Image synth_color_scene(int width, int height, RngSeed seed);

/// Builds "cartoon", "gradients", "chart" or "color" scenes.
Image synth_image(const std::string& kind, int width, int height, int channels, RngSeed seed);

/// Kernel from a spec string: "delta", "gaussian:<std>[:<size>]", "box:<size>",
/// "motion:<length>:<angle_deg>", or "file:<path>".
ConvKernel parse_kernel_spec(const std::string& spec);

// Problems ---------------------------------------------------------------------

struct DeconvExperiment {
  std::string kernel = "gaussian:1.6";
  double sigma = 0.01;
  int crop = 12;
};

struct DemosaickExperiment {
  BayerPattern pattern;
  int crop = 5;
};

/// One restoration instance: the data term (alpha = 1 until a scheme reweights it),
/// ground truth, the starting iterate and the scoring crop.
struct Problem {
  std::string name;
  DataTerm data;
  Image clean;
  Image u0;
  /// What a viewer sees before restoration (clamped observation or bilinear demosaick).
  Image degraded;
  int crop = 0;
};

/// Blurs and adds noise to `clean`. The data term keeps the unclamped observation;
/// `degraded` is its clamped copy and also the starting iterate.
Problem build_deconv(const DeconvExperiment& e, const Image& clean, RngSeed seed, std::string name = "deconv");

/// Noise-free mosaic of a 3-channel image. Starts from the bilinear demosaick.
Problem build_demosaick(const DemosaickExperiment& e, const Image& clean, std::string name = "demosaick");

/// Per-channel bilinear interpolation of the missing CFA samples (normalized 3x3 convolution
/// over in-bounds samples); sampled positions are copied through.
Image bilinear_demosaick(const Image& mosaic, const BayerPattern& pattern);

/// Scores a reconstruction: PSNR of clamp01(u) against the ground truth after cropping.
double score(const Problem& p, const Image& u);

// Grid search ------------------------------------------------------------------

struct GridSearchSpec {
  std::vector<double> alphas;
  std::vector<double> beta_tv{0.0};
  std::vector<double> beta_cross{0.0};
};

struct GridCell {
  double alpha = 0.0;
  double beta_tv = 0.0;
  double beta_cross = 0.0;
  /// Crop-scored PSNR per problem; -inf for divergent runs.
  std::vector<double> psnr;
  double mean_psnr = 0.0;
  bool diverged = false;
};

struct GridSearchResult {
  /// Alpha-major, then beta_tv, then beta_cross.
  std::vector<GridCell> cells;
  std::size_t best = 0;

  const GridCell& best_cell() const { return cells.at(best); }
};

/// Evaluates every cell with a fresh run per problem. The template supplies scheme, steps,
/// denoiser and iteration limits; tau <= 0 in the template selects the default step. Cells
/// run in parallel; ordering and tie-breaking (first best in iteration order) are fixed.
GridSearchResult grid_search(const GridSearchSpec& spec, const std::vector<Problem>& problems,
                             const SchemeConfig& cfg_template);

/// Header: alpha,beta_tv,beta_cross,mean_psnr,diverged,<problem names...>
std::string grid_search_csv(const GridSearchResult& r, const std::vector<Problem>& problems);

/// Reconstructs one problem with the template and the given weights.
RunReport solve(const Problem& p, const SchemeConfig& cfg_template, double alpha, double beta_tv = 0.0,
                double beta_cross = 0.0, const RunOptions& opts = {});

// Alpha-sigma relation -----------------------------------------------------------

struct AlphaSigmaRow {
  double sigma = 0.0;
  double best_alpha = 0.0;
  double best_psnr = 0.0;
};

struct AlphaSigmaResult {
  std::vector<AlphaSigmaRow> rows;
  /// Least-squares coefficient p of alpha = p * sigma^2.
  double fit_p = 0.0;
  /// Coefficient of determination of that fit (1 when all points lie on it).
  double r_squared = 0.0;
};

/// Core sweep: for each sigma picks the alpha with the highest score (first on ties).
AlphaSigmaResult sweep_alpha_sigma(const std::vector<double>& sigmas, const std::vector<double>& alphas,
                                   const std::function<double(double sigma, double alpha)>& score_fn);

/// Uses TvProx(lambda = sigma^2) as the denoiser family; inner iteration settings come from the
/// template's denoiser when it is a TvProx, defaults otherwise.
AlphaSigmaResult alpha_sigma_sweep(const std::vector<double>& sigmas, const Problem& problem,
                                   const std::vector<double>& alphas, const SchemeConfig& cfg_template);

/// Header: sigma,best_alpha,best_psnr; trailing rows "fit_p,<p>" and "r_squared,<r2>".
std::string alpha_sigma_csv(const AlphaSigmaResult& r);

// PSNR tables ----------------------------------------------------------------------

struct PsnrTable {
  std::vector<std::string> columns;
  std::vector<std::string> row_names;
  /// rows[i][j]: image i, column j.
  std::vector<std::vector<double>> rows;

  std::vector<double> averages() const;
  /// Aligned text table with an "average" row.
  std::string to_text() const;
  /// Header "image,<columns...>", one line per image and a final "average" line.
  std::string to_csv() const;
  /// Inverse of to_csv (the average row is dropped and recomputed).
  static PsnrTable from_csv(const std::string& csv);
};

/// Per-image table: overall crop-scored PSNR and per-channel PSNR for each reconstruction.
PsnrTable psnr_table(const std::vector<Problem>& problems, const std::vector<Image>& results);

}  // namespace pnp
