#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pnp {

struct Shape {
  int width = 0;
  int height = 0;
  int channels = 0;

  std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
  std::size_t size() const { return plane_size() * channels; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

/// Planar multi-channel raster of doubles: all of channel 0 row-major, then channel 1, ...
/// Nominal range is [0,1] but intermediate iterates may leave it.
class Image {
 public:
  Image() = default;
  explicit Image(Shape shape, double fill = 0.0);
  Image(int width, int height, int channels, double fill = 0.0)
      : Image(Shape{width, height, channels}, fill) {}
  Image(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  int width() const { return shape_.width; }
  int height() const { return shape_.height; }
  int channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> plane(int c);
  std::span<const double> plane(int c) const;

  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool all_finite() const;

  Image& operator+=(const Image& o);
  Image& operator-=(const Image& o);
  Image& operator*=(double s);

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
  }

  Shape shape_{};
  std::vector<double> data_;
};

Image operator+(Image a, const Image& b);
Image operator-(Image a, const Image& b);
Image operator*(double s, Image a);

/// a + s * b
Image axpy(const Image& a, double s, const Image& b);

void require_same_shape(const Image& a, const Image& b, const char* what);

double dot(const Image& a, const Image& b);
double norm(const Image& a);
/// ||a - b|| / max(||b||, eps)
double relative_distance(const Image& a, const Image& b, double eps = 1e-12);

double mse(const Image& a, const Image& b);
/// Returns +infinity when the images are identical.
double psnr(const Image& a, const Image& b, double peak = 1.0);
/// PSNR restricted to the interior after removing `border` pixels on each side.
double psnr_cropped(const Image& a, const Image& b, int border, double peak = 1.0);
/// PSNR of a single channel.
double psnr_channel(const Image& a, const Image& b, int channel, int border = 0, double peak = 1.0);

Image crop(const Image& x, int border);
Image clamp01(const Image& x);

struct RngSeed {
  std::uint64_t value = 0;
};

/// Counter-based standard normal sample keyed by (seed, index); independent of call order.
double gaussian_sample(RngSeed seed, std::uint64_t index);
/// Counter-based uniform sample in (0, 1].
double uniform_sample(RngSeed seed, std::uint64_t index);

/// x + n with n ~ N(0, sigma^2) i.i.d.; not clamped.
Image add_gaussian_noise(const Image& x, double sigma, RngSeed seed);
/// Samples uniform in [lo, hi), keyed by seed.
Image random_image(Shape shape, RngSeed seed, double lo = 0.0, double hi = 1.0);

}  // namespace pnp
