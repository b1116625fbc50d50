#include "pnp/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pnp/error.hpp"

namespace pnp {

std::string to_string(const Shape& s) {
  return std::to_string(s.width) + "x" + std::to_string(s.height) + "x" + std::to_string(s.channels);
}

Image::Image(Shape shape, double fill) : shape_(shape) {
  require(shape.width >= 1 && shape.height >= 1 && shape.channels >= 1, ErrorKind::InvalidArgument,
          "image dimensions must be positive, got " + to_string(shape));
  data_.assign(shape.size(), fill);
}

Image::Image(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  require(shape.width >= 1 && shape.height >= 1 && shape.channels >= 1, ErrorKind::InvalidArgument,
          "image dimensions must be positive, got " + to_string(shape));
  require(data_.size() == shape.size(), ErrorKind::ShapeMismatch,
          "image data length " + std::to_string(data_.size()) + " does not match " + to_string(shape));
}

std::span<double> Image::plane(int c) {
  return std::span<double>(data_).subspan(static_cast<std::size_t>(c) * shape_.plane_size(),
                                          shape_.plane_size());
}

std::span<const double> Image::plane(int c) const {
  return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * shape_.plane_size(),
                                                shape_.plane_size());
}

bool Image::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Image& Image::operator+=(const Image& o) {
  require_same_shape(*this, o, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Image& Image::operator-=(const Image& o) {
  require_same_shape(*this, o, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Image& Image::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Image operator+(Image a, const Image& b) { return a += b; }
Image operator-(Image a, const Image& b) { return a -= b; }
Image operator*(double s, Image a) { return a *= s; }

Image axpy(const Image& a, double s, const Image& b) {
  require_same_shape(a, b, "axpy");
  Image out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += s * bd[i];
  return out;
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::ShapeMismatch, std::string(what) + ": shape mismatch " + to_string(a.shape()) +
                                       " vs " + to_string(b.shape()));
  }
}

double dot(const Image& a, const Image& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) s += ad[i] * bd[i];
  return s;
}

double norm(const Image& a) { return std::sqrt(dot(a, a)); }

double relative_distance(const Image& a, const Image& b, double eps) {
  return norm(a - b) / std::max(norm(b), eps);
}

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  double s = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) {
    const double d = ad[i] - bd[i];
    s += d * d;
  }
  return s / static_cast<double>(ad.size());
}

namespace {

double psnr_from_mse(double m, double peak) {
  require(peak > 0.0, ErrorKind::InvalidArgument, "psnr: peak must be positive");
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

}  // namespace

double psnr(const Image& a, const Image& b, double peak) { return psnr_from_mse(mse(a, b), peak); }

Image crop(const Image& x, int border) {
  require(border >= 0 && 2 * border < x.width() && 2 * border < x.height(), ErrorKind::InvalidArgument,
          "crop border " + std::to_string(border) + " too large for " + to_string(x.shape()));
  if (border == 0) return x;
  Image out(x.width() - 2 * border, x.height() - 2 * border, x.channels());
  for (int c = 0; c < x.channels(); ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int xx = 0; xx < out.width(); ++xx) out.at(c, y, xx) = x.at(c, y + border, xx + border);
  return out;
}

double psnr_cropped(const Image& a, const Image& b, int border, double peak) {
  require_same_shape(a, b, "psnr_cropped");
  return psnr(crop(a, border), crop(b, border), peak);
}

double psnr_channel(const Image& a, const Image& b, int channel, int border, double peak) {
  require_same_shape(a, b, "psnr_channel");
  require(channel >= 0 && channel < a.channels(), ErrorKind::InvalidArgument, "psnr_channel: bad channel");
  Shape s{a.width(), a.height(), 1};
  auto pa = a.plane(channel);
  auto pb = b.plane(channel);
  Image ca(s, std::vector<double>(pa.begin(), pa.end()));
  Image cb(s, std::vector<double>(pb.begin(), pb.end()));
  return psnr_cropped(ca, cb, border, peak);
}

Image clamp01(const Image& x) {
  Image out = x;
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double to_unit_open_closed(std::uint64_t bits) {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

}  // namespace

double uniform_sample(RngSeed seed, std::uint64_t index) {
  return to_unit_open_closed(splitmix64(splitmix64(seed.value) ^ splitmix64(index * 2 + 1)));
}

double gaussian_sample(RngSeed seed, std::uint64_t index) {
  const std::uint64_t key = splitmix64(seed.value);
  const double u1 = to_unit_open_closed(splitmix64(key ^ splitmix64(2 * index)));
  const double u2 = to_unit_open_closed(splitmix64(key ^ splitmix64(2 * index + 1) ^ 0x5851f42d4c957f2dULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Image add_gaussian_noise(const Image& x, double sigma, RngSeed seed) {
  require(std::isfinite(sigma) && sigma >= 0.0, ErrorKind::InvalidArgument,
          "add_gaussian_noise: sigma must be finite and non-negative");
  Image out = x;
  if (sigma == 0.0) return out;
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += sigma * gaussian_sample(seed, i);
  return out;
}

Image random_image(Shape shape, RngSeed seed, double lo, double hi) {
  Image out(shape);
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = lo + (hi - lo) * (1.0 - uniform_sample(seed, i));
  return out;
}

}  // namespace pnp
