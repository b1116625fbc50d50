#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pnp/image.hpp"

namespace pnp {

/// 3x3 convolution layer. Weights are indexed [out][in][row][col].
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  bool relu = false;
  std::vector<float> weights;
  std::vector<float> bias;

  float weight(int o, int i, int row, int col) const {
    return weights[((static_cast<std::size_t>(o) * in_channels + i) * 3 + row) * 3 + col];
  }
};

/// Feed-forward stack of 3x3 convolutions. With `residual` the network predicts the noise
/// and the denoised image is input - net(input).
struct CnnModel {
  int input_channels = 1;
  bool residual = true;
  std::vector<ConvLayer> layers;

  /// Throws Error(Format) on any structural or numeric inconsistency.
  void validate() const;
};

// PNPW weights file, all fields little-endian:
//   "PNPW" | u32 version (=1) | u32 input_channels | u8 residual | u32 layer_count
//   per layer: u32 in_ch | u32 out_ch | u8 relu | f32 weights[out][in][3][3] | f32 bias[out]
// Batch normalization is not represented. Exporters fold each BN layer (mean m, variance v,
// scale g, shift b, epsilon e) into the preceding convolution:
//   s = g / sqrt(v + e);  W'[o] = s[o] * W[o];  bias'[o] = s[o] * (bias[o] - m[o]) + b[o]
inline constexpr char kPnpwMagic[4] = {'P', 'N', 'P', 'W'};
inline constexpr std::uint32_t kPnpwVersion = 1;

CnnModel load_model(const std::filesystem::path& path);
CnnModel parse_model(const std::string& bytes);
std::string serialize_model(const CnnModel& model);
void save_model(const std::filesystem::path& path, const CnnModel& model);

/// Forward pass with zero padding; output has the input's shape.
Image infer(const CnnModel& model, const Image& x);

/// Human-readable layer table.
std::string describe_model(const CnnModel& model);

/// Random model with the given hidden width, weights uniform in [-scale, scale]. Test fixture helper.
CnnModel random_model(int input_channels, int hidden, int depth, bool residual, RngSeed seed, double scale = 0.1);

}  // namespace pnp
