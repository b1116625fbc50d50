#include "pnp/denoisers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pnp/error.hpp"
#include "pnp/linear_ops.hpp"
#include "pnp/parallel.hpp"
#include "pnp/prox.hpp"

namespace pnp {

Denoiser::Denoiser(Kind kind, std::optional<int> channels) : kind_(std::move(kind)), channels_(channels) {
  if (const auto* g = std::get_if<GaussianSmoothDenoiser>(&kind_)) {
    require(g->std > 0.0 && std::isfinite(g->std), ErrorKind::InvalidArgument, "gaussian std must be positive");
  } else if (const auto* n = std::get_if<NlmDenoiser>(&kind_)) {
    const auto& p = n->params;
    require(p.patch_radius >= 1 && p.search_radius >= 1, ErrorKind::InvalidArgument, "NLM radii must be >= 1");
    require(p.h > 0.0 && std::isfinite(p.h), ErrorKind::InvalidArgument, "NLM h must be positive and finite");
    require(p.sigma >= 0.0 && std::isfinite(p.sigma), ErrorKind::InvalidArgument, "NLM sigma must be >= 0");
  } else if (const auto* t = std::get_if<TvProxDenoiser>(&kind_)) {
    require(t->params.lambda >= 0.0 && std::isfinite(t->params.lambda), ErrorKind::InvalidArgument,
            "TV lambda must be >= 0");
    require(t->params.inner_iters >= 1, ErrorKind::InvalidArgument, "TV inner_iters must be >= 1");
  } else if (const auto* c = std::get_if<CnnDenoiser>(&kind_)) {
    require(c->model != nullptr, ErrorKind::InvalidArgument, "CNN denoiser needs a model");
    c->model->validate();
    channels_ = c->model->input_channels;
  }
}

Denoiser Denoiser::cnn(CnnModel model) {
  return Denoiser(CnnDenoiser{std::make_shared<const CnnModel>(std::move(model))});
}

std::string Denoiser::name() const {
  struct Visitor {
    std::string operator()(const IdentityDenoiser&) const { return "identity"; }
    std::string operator()(const GaussianSmoothDenoiser&) const { return "gaussian"; }
    std::string operator()(const NlmDenoiser&) const { return "nlm"; }
    std::string operator()(const TvProxDenoiser&) const { return "tv"; }
    std::string operator()(const CnnDenoiser&) const { return "cnn"; }
  };
  return std::visit(Visitor{}, kind_);
}

Image Denoiser::apply(const Image& x) const {
  if (channels_)
    require(x.channels() == *channels_, ErrorKind::ShapeMismatch,
            "denoiser '" + name() + "' expects " + std::to_string(*channels_) + " channel(s), got " +
                std::to_string(x.channels()));
  require(x.all_finite(), ErrorKind::Numerical, "denoiser '" + name() + "' received non-finite input");
  struct Visitor {
    const Image& x;
    Image operator()(const IdentityDenoiser&) const { return x; }
    Image operator()(const GaussianSmoothDenoiser& g) const { return gaussian_smooth(g.std, x); }
    Image operator()(const NlmDenoiser& n) const { return nlm_denoise(n.params, x); }
    Image operator()(const TvProxDenoiser& t) const {
      return tv_prox_denoise(t.params.lambda, x, t.params.inner_iters, t.params.inner_tol);
    }
    Image operator()(const CnnDenoiser& c) const { return infer(*c.model, x); }
  };
  return std::visit(Visitor{x}, kind_);
}

double total_variation(const Image& u) { return l21_norm(grad_forward(u)); }

double tv_prox_energy(double lambda, const Image& b, const Image& u) {
  const Image r = u - b;
  return 0.5 * dot(r, r) + lambda * total_variation(u);
}

namespace {

// Projects every per-pixel, per-channel 2-vector onto the unit ball.
void project_unit_ball(Image& p) {
  for (int c = 0; c < p.channels(); c += 2) {
    auto px = p.plane(c);
    auto py = p.plane(c + 1);
    for (std::size_t i = 0; i < px.size(); ++i) {
      const double m = std::hypot(px[i], py[i]);
      if (m > 1.0) {
        px[i] /= m;
        py[i] /= m;
      }
    }
  }
}

}  // namespace

Image tv_prox_denoise(double lambda, const Image& b, int inner_iters, double inner_tol) {
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::InvalidArgument, "TV lambda must be >= 0");
  require(inner_iters >= 1, ErrorKind::InvalidArgument, "TV inner_iters must be >= 1");
  if (lambda == 0.0) return b;

  // Dual of the prox: min_{|p|<=1} ||b - lambda D^T p||^2, gradient Lipschitz constant 8 lambda^2.
  const double step = 1.0 / (8.0 * lambda);
  Shape dual_shape{b.width(), b.height(), 2 * b.channels()};
  Image p(dual_shape);
  Image q = p;
  double t = 1.0;

  Image best = b;
  double best_energy = tv_prox_energy(lambda, b, b);

  for (int k = 0; k < inner_iters; ++k) {
    const Image u_q = axpy(b, -lambda, grad_adjoint(q));
    Image p_next = axpy(q, step, grad_forward(u_q));
    project_unit_ball(p_next);

    const Image u = axpy(b, -lambda, grad_adjoint(p_next));
    const double e = tv_prox_energy(lambda, b, u);
    if (e < best_energy) {
      best_energy = e;
      best = u;
    }

    const Image delta = p_next - p;
    const double change = norm(delta) / std::max(norm(p_next), 1e-12);

    // Restart momentum whenever it points against the latest step.
    const double t_next = dot(q - p_next, delta) > 0.0 ? 1.0 : 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = t_next == 1.0 ? 0.0 : (t - 1.0) / t_next;
    q = axpy(p_next, momentum, delta);
    t = t_next;
    p = std::move(p_next);

    if (k > 0 && change <= inner_tol) break;
  }
  return best;
}

Image nlm_denoise(const NlmParams& p, const Image& x) {
  require(p.patch_radius >= 1 && p.search_radius >= 1, ErrorKind::InvalidArgument, "NLM radii must be >= 1");
  require(p.h > 0.0 && std::isfinite(p.h), ErrorKind::InvalidArgument, "NLM h must be positive and finite");
  const int w = x.width();
  const int h = x.height();
  const int pr = p.patch_radius;
  const int sr = p.search_radius;
  require(w > 2 * pr && h > 2 * pr, ErrorKind::ShapeMismatch,
          "NLM: image " + to_string(x.shape()) + " not larger than the " + std::to_string(2 * pr + 1) +
              "-pixel patch window");

  const int chans = x.channels();
  const double inv_h2 = 1.0 / (p.h * p.h);
  const double offset = 2.0 * p.sigma * p.sigma;
  const double patch_norm = 1.0 / (static_cast<double>((2 * pr + 1) * (2 * pr + 1)) * chans);
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };

  Image out(x.shape());
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    std::vector<double> acc(chans);
    for (int xx = 0; xx < w; ++xx) {
      std::fill(acc.begin(), acc.end(), 0.0);
      double wsum = 0.0;
      double wmax = 0.0;
      const int qy0 = std::max(0, y - sr);
      const int qy1 = std::min(h - 1, y + sr);
      const int qx0 = std::max(0, xx - sr);
      const int qx1 = std::min(w - 1, xx + sr);
      for (int qy = qy0; qy <= qy1; ++qy) {
        for (int qx = qx0; qx <= qx1; ++qx) {
          if (qy == y && qx == xx) continue;
          double d2 = 0.0;
          for (int c = 0; c < chans; ++c) {
            for (int dy = -pr; dy <= pr; ++dy) {
              const int ay = clampi(y + dy, h);
              const int by = clampi(qy + dy, h);
              for (int dx = -pr; dx <= pr; ++dx) {
                const double diff = x.at(c, ay, clampi(xx + dx, w)) - x.at(c, by, clampi(qx + dx, w));
                d2 += diff * diff;
              }
            }
          }
          d2 *= patch_norm;
          const double wt = std::exp(-std::max(0.0, d2 - offset) * inv_h2);
          wmax = std::max(wmax, wt);
          wsum += wt;
          for (int c = 0; c < chans; ++c) acc[c] += wt * x.at(c, qy, qx);
        }
      }
      // The center pixel gets the largest non-self weight.
      if (wmax == 0.0) wmax = 1.0;
      wsum += wmax;
      for (int c = 0; c < chans; ++c) out.at(c, y, xx) = (acc[c] + wmax * x.at(c, y, xx)) / wsum;
    }
  });
  return out;
}

Image gaussian_smooth(double std, const Image& x) {
  require(std > 0.0 && std::isfinite(std), ErrorKind::InvalidArgument, "gaussian std must be positive");
  // Below half a pixel the sampled kernel is treated as a delta.
  if (std < 0.5) return x;
  const int r = static_cast<int>(std::ceil(3.0 * std));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-(i * i) / (2.0 * std * std));
  for (double& v : k) v /= sum;

  const int w = x.width();
  const int h = x.height();
  Image tmp(x.shape());
  Image out(x.shape());
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * x.at(c, y, std::clamp(xx + i, 0, w - 1));
        tmp.at(c, y, xx) = s;
      }
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.at(c, std::clamp(y + i, 0, h - 1), xx);
        out.at(c, y, xx) = s;
      }
  }
  return out;
}

}  // namespace pnp
