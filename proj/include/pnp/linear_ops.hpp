#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "pnp/image.hpp"

namespace pnp {

/// Odd-sized, centered convolution kernel stored row-major.
class ConvKernel {
 public:
  ConvKernel(int width, int height, std::vector<double> taps, bool normalize = true);

  static ConvKernel delta();
  /// Sampled Gaussian; size 0 picks 2*ceil(3*std)+1.
  static ConvKernel gaussian(double std, int size = 0);
  static ConvKernel box(int size);
  /// Line of the given length (pixels) at angle_deg, rasterized with linear weights.
  static ConvKernel motion(double length, double angle_deg);
  /// Plain text: "KERNEL w h" followed by w*h whitespace-separated reals, row-major.
  static ConvKernel from_file(const std::filesystem::path& path, bool normalize = true);
  void save(const std::filesystem::path& path) const;

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<double>& taps() const { return taps_; }
  double tap(int row, int col) const { return taps_[static_cast<std::size_t>(row) * width_ + col]; }
  /// 180 degree rotation.
  ConvKernel flipped() const;

 private:
  int width_;
  int height_;
  std::vector<double> taps_;
};

enum BayerChannel : int { kRed = 0, kGreen = 1, kBlue = 2 };

struct BayerPattern {
  /// layout[row % 2][col % 2] is the channel sampled at that position.
  std::array<std::array<int, 2>, 2> layout{{{kRed, kGreen}, {kGreen, kBlue}}};

  static BayerPattern rggb() { return {}; }
  static BayerPattern parse(const std::string& name);
  int channel_at(int row, int col) const { return layout[row & 1][col & 1]; }
};

Image conv_forward(const ConvKernel& k, const Image& x);
Image conv_adjoint(const ConvKernel& k, const Image& y);

Image bayer_forward(const BayerPattern& p, const Image& x);
Image bayer_adjoint(const BayerPattern& p, const Image& m);
/// 0/1 mask with the shape of the 3-channel image: 1 where the channel is sampled.
Image bayer_mask(const BayerPattern& p, int width, int height);

/// Forward differences with Neumann boundary. Channel c maps to planes 2c (horizontal,
/// x[i][j+1]-x[i][j]) and 2c+1 (vertical, x[i+1][j]-x[i][j]); differences leaving the grid are 0.
Image grad_forward(const Image& x);
Image grad_adjoint(const Image& g);

/// Cross-channel gradient differences for a 3-channel image. Pair p in {(R,G), (R,B), (G,B)}
/// occupies planes 2p (horizontal) and 2p+1 (vertical) holding grad(x_c) - grad(x_c').
Image channel_grad_diff_forward(const Image& x);
Image channel_grad_diff_adjoint(const Image& g);

struct IdentityOp {};
struct CircularConvOp {
  ConvKernel kernel;
};
struct BayerMaskOp {
  BayerPattern pattern;
};
struct GradientOp {};
struct ChannelGradDiffOp {};

using LinearOperator = std::variant<IdentityOp, CircularConvOp, BayerMaskOp, GradientOp, ChannelGradDiffOp>;

std::string operator_name(const LinearOperator& op);
Image apply(const LinearOperator& op, const Image& x);
Image apply_adjoint(const LinearOperator& op, const Image& y);
Shape output_shape(const LinearOperator& op, const Shape& input);

struct PowerIterationOptions {
  int iters = 100;
  RngSeed seed{0};
  double rel_tol = 1e-12;
};

/// Largest singular value of an operator given through its normal map x -> A^T A x.
/// Rayleigh quotients of the power iterates are non-decreasing, so more iterations never lower it.
double power_norm(const std::function<Image(const Image&)>& normal_map, const Shape& input,
                  const PowerIterationOptions& opts = {});

double operator_norm(const LinearOperator& op, const Shape& input, const PowerIterationOptions& opts = {});

}  // namespace pnp
