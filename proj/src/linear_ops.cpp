#include "pnp/linear_ops.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "fft.hpp"
#include "pnp/error.hpp"

namespace pnp {

ConvKernel::ConvKernel(int width, int height, std::vector<double> taps, bool normalize)
    : width_(width), height_(height), taps_(std::move(taps)) {
  require(width >= 1 && height >= 1 && width % 2 == 1 && height % 2 == 1, ErrorKind::InvalidArgument,
          "kernel dimensions must be odd and positive, got " + std::to_string(width) + "x" +
              std::to_string(height));
  require(taps_.size() == static_cast<std::size_t>(width) * height, ErrorKind::InvalidArgument,
          "kernel tap count does not match its dimensions");
  require(std::all_of(taps_.begin(), taps_.end(), [](double v) { return std::isfinite(v); }),
          ErrorKind::InvalidArgument, "kernel taps must be finite");
  if (normalize) {
    double sum = 0.0;
    for (double v : taps_) sum += v;
    require(sum != 0.0, ErrorKind::InvalidArgument, "cannot normalize a kernel whose taps sum to zero");
    for (double& v : taps_) v /= sum;
  }
}

ConvKernel ConvKernel::delta() { return ConvKernel(1, 1, {1.0}); }

ConvKernel ConvKernel::gaussian(double std, int size) {
  require(std > 0.0 && std::isfinite(std), ErrorKind::InvalidArgument, "gaussian kernel std must be positive");
  if (size <= 0) size = 2 * static_cast<int>(std::ceil(3.0 * std)) + 1;
  require(size % 2 == 1, ErrorKind::InvalidArgument, "gaussian kernel size must be odd");
  const int r = size / 2;
  std::vector<double> taps(static_cast<std::size_t>(size) * size);
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x)
      taps[static_cast<std::size_t>(y + r) * size + (x + r)] = std::exp(-(x * x + y * y) / (2.0 * std * std));
  return ConvKernel(size, size, std::move(taps));
}

ConvKernel ConvKernel::box(int size) {
  require(size >= 1 && size % 2 == 1, ErrorKind::InvalidArgument, "box kernel size must be odd and positive");
  return ConvKernel(size, size, std::vector<double>(static_cast<std::size_t>(size) * size, 1.0));
}

ConvKernel ConvKernel::motion(double length, double angle_deg) {
  require(length >= 1.0 && std::isfinite(length), ErrorKind::InvalidArgument, "motion length must be >= 1");
  const int r = static_cast<int>(std::ceil(length / 2.0));
  const int size = 2 * r + 1;
  std::vector<double> taps(static_cast<std::size_t>(size) * size, 0.0);
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double dx = std::cos(a);
  const double dy = -std::sin(a);
  const int samples = 8 * size;
  for (int s = 0; s < samples; ++s) {
    const double t = (s + 0.5) / samples - 0.5;
    const double px = r + t * (length - 1.0) * dx;
    const double py = r + t * (length - 1.0) * dy;
    const int x0 = static_cast<int>(std::floor(px));
    const int y0 = static_cast<int>(std::floor(py));
    const double fx = px - x0;
    const double fy = py - y0;
    for (int oy = 0; oy <= 1; ++oy) {
      for (int ox = 0; ox <= 1; ++ox) {
        const int xx = x0 + ox;
        const int yy = y0 + oy;
        if (xx < 0 || yy < 0 || xx >= size || yy >= size) continue;
        taps[static_cast<std::size_t>(yy) * size + xx] += (ox ? fx : 1 - fx) * (oy ? fy : 1 - fy);
      }
    }
  }
  return ConvKernel(size, size, std::move(taps));
}

ConvKernel ConvKernel::from_file(const std::filesystem::path& path, bool normalize) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open kernel file '" + path.string() + "'");
  std::string tag;
  int w = 0;
  int h = 0;
  if (!(in >> tag >> w >> h) || tag != "KERNEL")
    fail(ErrorKind::Format, "kernel file '" + path.string() + "' must start with 'KERNEL w h'");
  if (w < 1 || h < 1) fail(ErrorKind::Format, "bad kernel dimensions in '" + path.string() + "'");
  std::vector<double> taps(static_cast<std::size_t>(w) * h);
  for (double& v : taps) {
    if (!(in >> v)) fail(ErrorKind::Format, "kernel file '" + path.string() + "' has too few taps");
  }
  std::string extra;
  if (in >> extra) fail(ErrorKind::Format, "kernel file '" + path.string() + "' has trailing data");
  try {
    return ConvKernel(w, h, std::move(taps), normalize);
  } catch (const Error& e) {
    fail(ErrorKind::Format, "kernel file '" + path.string() + "': " + e.what());
  }
}

void ConvKernel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out << "KERNEL " << width_ << " " << height_ << "\n" << std::setprecision(17);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) out << (x ? " " : "") << tap(y, x);
    out << "\n";
  }
}

ConvKernel ConvKernel::flipped() const {
  std::vector<double> t(taps_.rbegin(), taps_.rend());
  return ConvKernel(width_, height_, std::move(t), false);
}

namespace detail {

Spectrum kernel_spectrum(const ConvKernel& k, int width, int height) {
  std::vector<double> embedded(static_cast<std::size_t>(width) * height, 0.0);
  const int cy = k.height() / 2;
  const int cx = k.width() / 2;
  for (int a = 0; a < k.height(); ++a) {
    for (int b = 0; b < k.width(); ++b) {
      const int y = ((a - cy) % height + height) % height;
      const int x = ((b - cx) % width + width) % width;
      embedded[static_cast<std::size_t>(y) * width + x] += k.tap(a, b);
    }
  }
  return fft2(embedded, width, height);
}

}  // namespace detail

namespace {

void require_kernel_fits(const ConvKernel& k, const Image& x) {
  require(k.width() <= x.width() && k.height() <= x.height(), ErrorKind::ShapeMismatch,
          "kernel " + std::to_string(k.width()) + "x" + std::to_string(k.height()) + " larger than image " +
              to_string(x.shape()));
}

Image conv_with_spectrum(const Image& x, const detail::Spectrum& ks, bool conjugate) {
  Image out(x.shape());
  for (int c = 0; c < x.channels(); ++c) {
    auto s = detail::fft2(x.plane(c), x.width(), x.height());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= conjugate ? std::conj(ks[i]) : ks[i];
    detail::ifft2_real(std::move(s), x.width(), x.height(), out.plane(c));
  }
  return out;
}

}  // namespace

Image conv_forward(const ConvKernel& k, const Image& x) {
  require_kernel_fits(k, x);
  return conv_with_spectrum(x, detail::kernel_spectrum(k, x.width(), x.height()), false);
}

Image conv_adjoint(const ConvKernel& k, const Image& y) {
  require_kernel_fits(k, y);
  return conv_with_spectrum(y, detail::kernel_spectrum(k, y.width(), y.height()), true);
}

BayerPattern BayerPattern::parse(const std::string& name) {
  require(name.size() == 4, ErrorKind::InvalidArgument, "Bayer pattern must have four letters, got '" + name + "'");
  BayerPattern p;
  for (int i = 0; i < 4; ++i) {
    int ch = -1;
    switch (std::toupper(static_cast<unsigned char>(name[i]))) {
      case 'R': ch = kRed; break;
      case 'G': ch = kGreen; break;
      case 'B': ch = kBlue; break;
      default: fail(ErrorKind::InvalidArgument, "bad Bayer pattern letter in '" + name + "'");
    }
    p.layout[i / 2][i % 2] = ch;
  }
  return p;
}

namespace {

void require_even(const Image& x, const char* what) {
  require(x.width() % 2 == 0 && x.height() % 2 == 0, ErrorKind::ShapeMismatch,
          std::string(what) + ": dimensions must be even, got " + to_string(x.shape()));
}

}  // namespace

Image bayer_forward(const BayerPattern& p, const Image& x) {
  require(x.channels() == 3, ErrorKind::ShapeMismatch, "bayer_forward: needs a 3-channel image");
  require_even(x, "bayer_forward");
  Image m(x.width(), x.height(), 1);
  for (int y = 0; y < x.height(); ++y)
    for (int xx = 0; xx < x.width(); ++xx) m.at(0, y, xx) = x.at(p.channel_at(y, xx), y, xx);
  return m;
}

Image bayer_adjoint(const BayerPattern& p, const Image& m) {
  require(m.channels() == 1, ErrorKind::ShapeMismatch, "bayer_adjoint: needs a 1-channel mosaic");
  require_even(m, "bayer_adjoint");
  Image x(m.width(), m.height(), 3);
  for (int y = 0; y < m.height(); ++y)
    for (int xx = 0; xx < m.width(); ++xx) x.at(p.channel_at(y, xx), y, xx) = m.at(0, y, xx);
  return x;
}

Image bayer_mask(const BayerPattern& p, int width, int height) {
  return bayer_adjoint(p, Image(width, height, 1, 1.0));
}

Image grad_forward(const Image& x) {
  const int w = x.width();
  const int h = x.height();
  Image g(w, h, 2 * x.channels());
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        const double v = x.at(c, y, xx);
        g.at(2 * c, y, xx) = xx + 1 < w ? x.at(c, y, xx + 1) - v : 0.0;
        g.at(2 * c + 1, y, xx) = y + 1 < h ? x.at(c, y + 1, xx) - v : 0.0;
      }
    }
  }
  return g;
}

Image grad_adjoint(const Image& g) {
  require(g.channels() % 2 == 0, ErrorKind::ShapeMismatch, "grad_adjoint: channel count must be even");
  const int w = g.width();
  const int h = g.height();
  Image x(w, h, g.channels() / 2);
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        double v = 0.0;
        if (xx >= 1) v += g.at(2 * c, y, xx - 1);
        if (xx + 1 < w) v -= g.at(2 * c, y, xx);
        if (y >= 1) v += g.at(2 * c + 1, y - 1, xx);
        if (y + 1 < h) v -= g.at(2 * c + 1, y, xx);
        x.at(c, y, xx) = v;
      }
    }
  }
  return x;
}

namespace {

constexpr std::array<std::pair<int, int>, 3> kChannelPairs{{{kRed, kGreen}, {kRed, kBlue}, {kGreen, kBlue}}};

}  // namespace

Image channel_grad_diff_forward(const Image& x) {
  require(x.channels() == 3, ErrorKind::ShapeMismatch, "channel_grad_diff_forward: needs a 3-channel image");
  const Image g = grad_forward(x);
  Image out(x.width(), x.height(), 2 * static_cast<int>(kChannelPairs.size()));
  for (std::size_t p = 0; p < kChannelPairs.size(); ++p) {
    const auto [a, b] = kChannelPairs[p];
    for (int d = 0; d < 2; ++d) {
      auto dst = out.plane(static_cast<int>(2 * p) + d);
      auto ga = g.plane(2 * a + d);
      auto gb = g.plane(2 * b + d);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = ga[i] - gb[i];
    }
  }
  return out;
}

Image channel_grad_diff_adjoint(const Image& g) {
  require(g.channels() == 2 * static_cast<int>(kChannelPairs.size()), ErrorKind::ShapeMismatch,
          "channel_grad_diff_adjoint: needs a 6-plane field");
  Image field(g.width(), g.height(), 6);
  for (std::size_t p = 0; p < kChannelPairs.size(); ++p) {
    const auto [a, b] = kChannelPairs[p];
    for (int d = 0; d < 2; ++d) {
      auto src = g.plane(static_cast<int>(2 * p) + d);
      auto fa = field.plane(2 * a + d);
      auto fb = field.plane(2 * b + d);
      for (std::size_t i = 0; i < src.size(); ++i) {
        fa[i] += src[i];
        fb[i] -= src[i];
      }
    }
  }
  return grad_adjoint(field);
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

std::string operator_name(const LinearOperator& op) {
  return std::visit(overloaded{
                        [](const IdentityOp&) { return std::string("identity"); },
                        [](const CircularConvOp&) { return std::string("circular-conv"); },
                        [](const BayerMaskOp&) { return std::string("bayer-mask"); },
                        [](const GradientOp&) { return std::string("gradient"); },
                        [](const ChannelGradDiffOp&) { return std::string("channel-grad-diff"); },
                    },
                    op);
}

Image apply(const LinearOperator& op, const Image& x) {
  return std::visit(overloaded{
                        [&](const IdentityOp&) { return x; },
                        [&](const CircularConvOp& o) { return conv_forward(o.kernel, x); },
                        [&](const BayerMaskOp& o) { return bayer_forward(o.pattern, x); },
                        [&](const GradientOp&) { return grad_forward(x); },
                        [&](const ChannelGradDiffOp&) { return channel_grad_diff_forward(x); },
                    },
                    op);
}

Image apply_adjoint(const LinearOperator& op, const Image& y) {
  return std::visit(overloaded{
                        [&](const IdentityOp&) { return y; },
                        [&](const CircularConvOp& o) { return conv_adjoint(o.kernel, y); },
                        [&](const BayerMaskOp& o) { return bayer_adjoint(o.pattern, y); },
                        [&](const GradientOp&) { return grad_adjoint(y); },
                        [&](const ChannelGradDiffOp&) { return channel_grad_diff_adjoint(y); },
                    },
                    op);
}

Shape output_shape(const LinearOperator& op, const Shape& in) {
  return std::visit(overloaded{
                        [&](const IdentityOp&) { return in; },
                        [&](const CircularConvOp&) { return in; },
                        [&](const BayerMaskOp&) { return Shape{in.width, in.height, 1}; },
                        [&](const GradientOp&) { return Shape{in.width, in.height, 2 * in.channels}; },
                        [&](const ChannelGradDiffOp&) { return Shape{in.width, in.height, 6}; },
                    },
                    op);
}

double power_norm(const std::function<Image(const Image&)>& normal_map, const Shape& input,
                  const PowerIterationOptions& opts) {
  require(opts.iters >= 1, ErrorKind::InvalidArgument, "power iteration needs at least one iteration");
  Image x(input);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = gaussian_sample(opts.seed, i);
  x *= 1.0 / norm(x);

  double estimate = 0.0;
  for (int it = 0; it < opts.iters; ++it) {
    Image y = normal_map(x);
    const double rayleigh = dot(x, y);
    const double ny = norm(y);
    if (ny == 0.0) return 0.0;
    const double prev = estimate;
    estimate = std::max(estimate, rayleigh);
    x = (1.0 / ny) * std::move(y);
    if (it > 0 && std::abs(estimate - prev) <= opts.rel_tol * estimate) break;
  }
  return std::sqrt(estimate);
}

double operator_norm(const LinearOperator& op, const Shape& input, const PowerIterationOptions& opts) {
  return power_norm([&](const Image& x) { return apply_adjoint(op, apply(op, x)); }, input, opts);
}

}  // namespace pnp
