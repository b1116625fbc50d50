#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pnp/denoisers.hpp"
#include "pnp/image.hpp"
#include "pnp/prox.hpp"

namespace pnp {

enum class Scheme { PG, ADMM, PDHG1, PDHG2, StackedPDHG };

std::string scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

struct SchemeConfig {
  SchemeConfig(Scheme scheme, DataTerm data, Denoiser denoiser)
      : scheme(scheme), data(std::move(data)), denoiser(std::move(denoiser)) {}

  Scheme scheme;
  /// Primal step. PG uses it as the gradient step; ADMM ignores it.
  double tau = 1.0;
  /// Dual step (ADMM penalty).
  double gamma = 1.0;
  /// Extrapolation weight for the PDHG variants.
  double theta = 1.0;
  DataTerm data;
  /// Weights of the explicit priors stacked next to the denoiser (StackedPDHG only).
  double beta_tv = 0.0;
  double beta_cross = 0.0;
  Denoiser denoiser;
  int max_iters = 30;
  /// Stop once ||u^{k+1} - u^k|| / max(||u^k||, 1e-12) <= tol.
  double tol = 1e-6;
};

/// Largest admissible step quantity for the scheme: bound on tau*gamma for the PDHG variants
/// (1 / ||K||^2 with K the stacked dual operator) and on tau for PG (1 / (alpha ||A||^2)).
/// Returns +inf for ADMM.
double step_bound(const SchemeConfig& cfg);

/// Copy of cfg with tau = 0.95 * step_bound / gamma (PDHG variants) or step_bound (PG).
SchemeConfig with_default_steps(SchemeConfig cfg);

struct SchemeState {
  Image u;
  Image u_bar;
  /// Dual of the denoiser block (ADMM multiplier for ADMM).
  Image y;
  /// PDHG1: data dual on the range of A. StackedPDHG: TV dual. Empty otherwise.
  Image z;
  /// StackedPDHG cross-channel dual; empty unless beta_cross > 0.
  Image z_cross;
  /// ADMM split variable.
  Image v;
  int k = 0;
};

/// Zero duals, u_bar = v = u0.
SchemeState initial_state(const SchemeConfig& cfg, const Image& u0);

/// Auxiliary variables that make a fixed point u0 of u = G(u - t A^T grad H_f(A u)) a fixed point
/// of the scheme: y0 = -A^T grad H_f(A u0), v0 = u_bar0 = u0 and, for PDHG1, z0 = grad H_f(A u0).
SchemeState fixed_point_state(const SchemeConfig& cfg, const Image& u0);

/// One iteration in place. Throws Error(Numerical) if the denoiser rejects its input.
void step(const SchemeConfig& cfg, SchemeState& state);

enum class StopReason { Tolerance, MaxIters, NonFinite };
std::string stop_reason_name(StopReason r);

struct IterationRecord {
  int k = 0;
  double rel_change = 0.0;
  double data_energy = 0.0;
  /// NaN unless RunOptions::track_fixed_point_residual.
  double fixed_point_residual = 0.0;
  /// NaN unless a reference image was supplied.
  double psnr = 0.0;
};

struct RunOptions {
  std::optional<Image> reference;
  int psnr_border = 0;
  bool track_fixed_point_residual = false;
  /// Called after every completed iteration.
  std::function<void(const SchemeState&)> on_iteration;
};

struct RunReport {
  Image u;
  int iterations = 0;
  StopReason stop = StopReason::MaxIters;
  std::vector<IterationRecord> history;
  bool step_condition_violated = false;
  SchemeState final_state;
};

RunReport run(const SchemeConfig& cfg, SchemeState state, const RunOptions& opts = {});
RunReport run(const SchemeConfig& cfg, const Image& u0, const RunOptions& opts = {});

RunReport run_pg(SchemeConfig cfg, const Image& u0, const RunOptions& opts = {});
RunReport run_admm(SchemeConfig cfg, const Image& u0, const RunOptions& opts = {});
RunReport run_pdhg1(SchemeConfig cfg, const Image& u0, const RunOptions& opts = {});
RunReport run_pdhg2(SchemeConfig cfg, const Image& u0, const RunOptions& opts = {});
RunReport run_stacked_pdhg(SchemeConfig cfg, const Image& u0, const RunOptions& opts = {});

/// Step t of the shared fixed-point equation u = G(u - t A^T grad H_f(A u)):
/// tau for PG and 1/gamma for ADMM, PDHG1, PDHG2 and StackedPDHG.
double fixed_point_step(const SchemeConfig& cfg);

/// ||u - G(u - t A^T grad H_f(A u))|| / max(||u||, 1e-12). For StackedPDHG the explicit priors
/// are not part of the residual.
double fixed_point_residual(const SchemeConfig& cfg, const Image& u);
double fixed_point_residual(const SchemeConfig& cfg, const Image& u, double t);

/// Equivalent configuration with gamma = new_gamma: tau*gamma is preserved and alpha, beta_tv,
/// beta_cross are multiplied by new_gamma/gamma. PDHG2 and StackedPDHG only; with zero dual
/// initialization both configurations produce the same u-iterates.
SchemeConfig rescale_config(const SchemeConfig& cfg, double new_gamma);

/// CSV with header "k,rel_change,data_energy,fixed_point_residual,psnr_vs_reference";
/// untracked columns are left empty.
std::string history_csv(const std::vector<IterationRecord>& history);

}  // namespace pnp
