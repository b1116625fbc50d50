#include "pnp/prox.hpp"

#include <cmath>
#include <variant>

#include "fft.hpp"
#include "pnp/error.hpp"

namespace pnp {

struct DataTerm::Cache {
  // circular conv
  detail::Spectrum kernel;
  std::vector<detail::Spectrum> adjoint_f;  // conj(k^) f^ per channel
  // Bayer mask / identity
  Image adjoint_f_image;
  Image mask;
};

DataTerm::DataTerm(LinearOperator op, Image observation, double alpha)
    : op_(std::move(op)), f_(std::move(observation)), alpha_(alpha) {
  require(alpha > 0.0 && std::isfinite(alpha), ErrorKind::InvalidArgument, "data term alpha must be positive");
  require(f_.all_finite(), ErrorKind::InvalidArgument, "observation must be finite");
  auto cache = std::make_shared<Cache>();
  if (const auto* conv = std::get_if<CircularConvOp>(&op_)) {
    require(conv->kernel.width() <= f_.width() && conv->kernel.height() <= f_.height(), ErrorKind::ShapeMismatch,
            "kernel larger than observation " + to_string(f_.shape()));
    domain_ = f_.shape();
    cache->kernel = detail::kernel_spectrum(conv->kernel, f_.width(), f_.height());
    for (int c = 0; c < f_.channels(); ++c) {
      auto s = detail::fft2(f_.plane(c), f_.width(), f_.height());
      for (std::size_t i = 0; i < s.size(); ++i) s[i] *= std::conj(cache->kernel[i]);
      cache->adjoint_f.push_back(std::move(s));
    }
  } else if (const auto* bayer = std::get_if<BayerMaskOp>(&op_)) {
    require(f_.channels() == 1, ErrorKind::ShapeMismatch, "Bayer observation must be a 1-channel mosaic");
    domain_ = Shape{f_.width(), f_.height(), 3};
    cache->adjoint_f_image = bayer_adjoint(bayer->pattern, f_);
    cache->mask = bayer_mask(bayer->pattern, f_.width(), f_.height());
  } else if (std::holds_alternative<IdentityOp>(op_)) {
    domain_ = f_.shape();
  } else {
    fail(ErrorKind::InvalidArgument, "data term operator must be identity, circular-conv or bayer-mask");
  }
  cache_ = std::move(cache);
}

DataTerm DataTerm::with_alpha(double alpha) const {
  require(alpha > 0.0 && std::isfinite(alpha), ErrorKind::InvalidArgument, "data term alpha must be positive");
  DataTerm d = *this;
  d.alpha_ = alpha;
  return d;
}

namespace {

Image spectral_multiply(const Image& x, const detail::Spectrum& k, bool conjugate) {
  Image out(x.shape());
  for (int c = 0; c < x.channels(); ++c) {
    auto s = detail::fft2(x.plane(c), x.width(), x.height());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= conjugate ? std::conj(k[i]) : k[i];
    detail::ifft2_real(std::move(s), x.width(), x.height(), out.plane(c));
  }
  return out;
}

}  // namespace

Image DataTerm::forward(const Image& u) const {
  require(u.shape() == domain_, ErrorKind::ShapeMismatch,
          "data term: expected " + to_string(domain_) + ", got " + to_string(u.shape()));
  if (std::holds_alternative<CircularConvOp>(op_)) return spectral_multiply(u, cache_->kernel, false);
  return apply(op_, u);
}

Image DataTerm::adjoint(const Image& r) const {
  require(r.shape() == f_.shape(), ErrorKind::ShapeMismatch,
          "data term adjoint: expected " + to_string(f_.shape()) + ", got " + to_string(r.shape()));
  if (std::holds_alternative<CircularConvOp>(op_)) return spectral_multiply(r, cache_->kernel, true);
  return apply_adjoint(op_, r);
}

double DataTerm::energy(const Image& u) const {
  const Image r = forward(u) - f_;
  return 0.5 * alpha_ * dot(r, r);
}

Image DataTerm::gradient(const Image& u) const { return alpha_ * adjoint(forward(u) - f_); }

Image DataTerm::range_gradient(const Image& w) const {
  require_same_shape(w, f_, "range_gradient");
  return alpha_ * (w - f_);
}

Image DataTerm::prox(double t, const Image& v) const {
  require(std::isfinite(t) && t >= 0.0, ErrorKind::InvalidArgument, "prox step must be finite and non-negative");
  require(v.shape() == domain_, ErrorKind::ShapeMismatch,
          "prox_data: expected " + to_string(domain_) + ", got " + to_string(v.shape()));
  const double c = t * alpha_;
  if (c == 0.0) return v;

  if (std::holds_alternative<CircularConvOp>(op_)) {
    Image out(v.shape());
    const auto& k = cache_->kernel;
    for (int ch = 0; ch < v.channels(); ++ch) {
      auto s = detail::fft2(v.plane(ch), v.width(), v.height());
      const auto& af = cache_->adjoint_f[ch];
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = (s[i] + c * af[i]) / (1.0 + c * std::norm(k[i]));
      detail::ifft2_real(std::move(s), v.width(), v.height(), out.plane(ch));
    }
    return out;
  }
  if (std::holds_alternative<BayerMaskOp>(op_)) {
    Image out(v.shape());
    const auto& atf = cache_->adjoint_f_image;
    const auto& m = cache_->mask;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (v[i] + c * atf[i]) / (1.0 + c * m[i]);
    return out;
  }
  return range_prox(t, v);
}

Image DataTerm::range_prox(double s, const Image& v) const {
  require_same_shape(v, f_, "range_prox");
  const double c = s * alpha_;
  Image out(v.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (v[i] + c * f_[i]) / (1.0 + c);
  return out;
}

double data_energy(const DataTerm& d, const Image& u) { return d.energy(u); }
Image data_gradient(const DataTerm& d, const Image& u) { return d.gradient(u); }
Image prox_data(const DataTerm& d, double t, const Image& v) { return d.prox(t, v); }

Image prox_l21(double lambda, const Image& p) {
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::InvalidArgument, "prox_l21: lambda must be >= 0");
  require(p.channels() % 2 == 0, ErrorKind::ShapeMismatch, "prox_l21: channel count must be even");
  if (lambda == 0.0) return p;
  Image q(p.shape());
  const std::size_t n = p.shape().plane_size();
  for (int c = 0; c < p.channels(); c += 2) {
    auto px = p.plane(c);
    auto py = p.plane(c + 1);
    auto qx = q.plane(c);
    auto qy = q.plane(c + 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = std::hypot(px[i], py[i]);
      if (mag <= lambda) continue;  // q already 0
      const double f = 1.0 - lambda / mag;
      qx[i] = f * px[i];
      qy[i] = f * py[i];
    }
  }
  return q;
}

Image prox_l1(double lambda, const Image& p) {
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::InvalidArgument, "prox_l1: lambda must be >= 0");
  if (lambda == 0.0) return p;
  Image q(p.shape());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double a = std::abs(p[i]) - lambda;
    q[i] = a > 0.0 ? std::copysign(a, p[i]) : 0.0;
  }
  return q;
}

double l21_norm(const Image& p) {
  require(p.channels() % 2 == 0, ErrorKind::ShapeMismatch, "l21_norm: channel count must be even");
  double s = 0.0;
  for (int c = 0; c < p.channels(); c += 2) {
    auto px = p.plane(c);
    auto py = p.plane(c + 1);
    for (std::size_t i = 0; i < px.size(); ++i) s += std::hypot(px[i], py[i]);
  }
  return s;
}

double l1_norm(const Image& p) {
  double s = 0.0;
  for (double v : p.data()) s += std::abs(v);
  return s;
}

}  // namespace pnp
