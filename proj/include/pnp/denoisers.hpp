#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "pnp/cnn.hpp"
#include "pnp/image.hpp"

namespace pnp {

struct NlmParams {
  int patch_radius = 1;
  int search_radius = 5;
  /// Filtering strength; weights decay as exp(-d^2 / h^2) with d^2 the mean squared patch distance.
  double h = 0.1;
  /// Noise level subtracted from patch distances (2 * sigma^2); 0 disables.
  double sigma = 0.0;
};

struct TvProxParams {
  double lambda = 0.0;
  int inner_iters = 500;
  double inner_tol = 1e-8;
};

struct IdentityDenoiser {};
struct GaussianSmoothDenoiser {
  double std = 1.0;
};
struct NlmDenoiser {
  NlmParams params;
};
struct TvProxDenoiser {
  TvProxParams params;
};
struct CnnDenoiser {
  std::shared_ptr<const CnnModel> model;
};

/// The slot that replaces a regularizer's proximal operator. Immutable; apply() is pure and
/// deterministic, never clamps, and preserves the input shape.
class Denoiser {
 public:
  using Kind = std::variant<IdentityDenoiser, GaussianSmoothDenoiser, NlmDenoiser, TvProxDenoiser, CnnDenoiser>;

  Denoiser() = default;
  /// `channels` restricts accepted inputs; nullopt accepts any channel count.
  explicit Denoiser(Kind kind, std::optional<int> channels = std::nullopt);

  static Denoiser identity() { return Denoiser(IdentityDenoiser{}); }
  static Denoiser gaussian(double std) { return Denoiser(GaussianSmoothDenoiser{std}); }
  static Denoiser nlm(NlmParams p) { return Denoiser(NlmDenoiser{p}); }
  static Denoiser tv_prox(double lambda, int inner_iters = 500, double inner_tol = 1e-8) {
    return Denoiser(TvProxDenoiser{{lambda, inner_iters, inner_tol}});
  }
  static Denoiser cnn(CnnModel model);

  const Kind& kind() const { return kind_; }
  std::optional<int> channels() const { return channels_; }
  std::string name() const;

  Image apply(const Image& x) const;
  Image operator()(const Image& x) const { return apply(x); }

 private:
  Kind kind_{IdentityDenoiser{}};
  std::optional<int> channels_;
};

/// Exact prox of lambda * TV (isotropic, per channel, Neumann gradient):
/// argmin_u 1/2 ||u - b||^2 + lambda * ||D u||_{2,1}.
/// Solved in the dual by accelerated projected gradient (step 1/8) with adaptive restart;
/// stops when the relative dual change drops to inner_tol or after inner_iters.
/// Returns the lowest-energy primal iterate seen.
Image tv_prox_denoise(double lambda, const Image& b, int inner_iters = 500, double inner_tol = 1e-8);
double tv_prox_energy(double lambda, const Image& b, const Image& u);
/// ||D u||_{2,1}
double total_variation(const Image& u);

Image nlm_denoise(const NlmParams& p, const Image& x);

/// Separable normalized Gaussian with radius ceil(3*std) and replicate boundary.
/// std < 0.5 returns x unchanged.
Image gaussian_smooth(double std, const Image& x);

}  // namespace pnp
