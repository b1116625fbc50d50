#include "pnp/schemes.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "pnp/csv.hpp"
#include "pnp/error.hpp"
#include "pnp/linear_ops.hpp"

namespace pnp {

namespace {

constexpr double kEps = 1e-12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_pdhg(Scheme s) { return s == Scheme::PDHG1 || s == Scheme::PDHG2 || s == Scheme::StackedPDHG; }

bool uses_tv(const SchemeConfig& cfg) { return cfg.scheme == Scheme::StackedPDHG && cfg.beta_tv > 0.0; }
bool uses_cross(const SchemeConfig& cfg) { return cfg.scheme == Scheme::StackedPDHG && cfg.beta_cross > 0.0; }

void validate(const SchemeConfig& cfg) {
  require(cfg.tau > 0.0 && std::isfinite(cfg.tau), ErrorKind::InvalidArgument, "tau must be positive");
  require(cfg.gamma > 0.0 && std::isfinite(cfg.gamma), ErrorKind::InvalidArgument, "gamma must be positive");
  require(std::isfinite(cfg.theta), ErrorKind::InvalidArgument, "theta must be finite");
  require(cfg.beta_tv >= 0.0 && cfg.beta_cross >= 0.0, ErrorKind::InvalidArgument, "beta weights must be >= 0");
  require(cfg.max_iters >= 0, ErrorKind::InvalidArgument, "max_iters must be >= 0");
  require(cfg.tol >= 0.0, ErrorKind::InvalidArgument, "tol must be >= 0");
  if (uses_cross(cfg))
    require(cfg.data.domain_shape().channels == 3, ErrorKind::ShapeMismatch,
            "cross-channel prior needs a 3-channel unknown");
}

double data_operator_norm_sq(const DataTerm& d) {
  const double n = power_norm([&](const Image& x) { return d.adjoint(d.forward(x)); }, d.domain_shape());
  return n * n;
}

}  // namespace

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::PG: return "pg";
    case Scheme::ADMM: return "admm";
    case Scheme::PDHG1: return "pdhg1";
    case Scheme::PDHG2: return "pdhg2";
    case Scheme::StackedPDHG: return "stacked";
  }
  return "?";
}

Scheme parse_scheme(const std::string& name) {
  for (Scheme s : {Scheme::PG, Scheme::ADMM, Scheme::PDHG1, Scheme::PDHG2, Scheme::StackedPDHG})
    if (scheme_name(s) == name) return s;
  fail(ErrorKind::InvalidArgument, "unknown scheme '" + name + "' (expected pg, admm, pdhg1, pdhg2, stacked)");
}

std::string stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::Tolerance: return "tol";
    case StopReason::MaxIters: return "max_iters";
    case StopReason::NonFinite: return "nonfinite";
  }
  return "?";
}

double step_bound(const SchemeConfig& cfg) {
  const Shape shape = cfg.data.domain_shape();
  switch (cfg.scheme) {
    case Scheme::PG: return 1.0 / (cfg.data.alpha() * data_operator_norm_sq(cfg.data));
    case Scheme::ADMM: return std::numeric_limits<double>::infinity();
    case Scheme::PDHG1: return 1.0 / (1.0 + data_operator_norm_sq(cfg.data));
    case Scheme::PDHG2: return 1.0;
    case Scheme::StackedPDHG: {
      if (!uses_tv(cfg) && !uses_cross(cfg)) return 1.0;
      // ||[I, -D^T]||^2 = ||I + D D^T||, estimated through the normal map of the stacked operator.
      const double n = power_norm(
          [&](const Image& x) {
            Image out = x;
            if (uses_tv(cfg)) out += grad_adjoint(grad_forward(x));
            if (uses_cross(cfg)) out += channel_grad_diff_adjoint(channel_grad_diff_forward(x));
            return out;
          },
          shape);
      return 1.0 / (n * n);
    }
  }
  return 1.0;
}

SchemeConfig with_default_steps(SchemeConfig cfg) {
  const double bound = step_bound(cfg);
  if (cfg.scheme == Scheme::PG) {
    cfg.tau = bound;
  } else if (is_pdhg(cfg.scheme)) {
    cfg.tau = 0.95 * bound / cfg.gamma;
  }
  return cfg;
}

SchemeState initial_state(const SchemeConfig& cfg, const Image& u0) {
  require(u0.shape() == cfg.data.domain_shape(), ErrorKind::ShapeMismatch,
          "initial image " + to_string(u0.shape()) + " does not match data term domain " +
              to_string(cfg.data.domain_shape()));
  SchemeState s;
  s.u = u0;
  s.u_bar = u0;
  s.v = u0;
  s.y = Image(u0.shape());
  if (cfg.scheme == Scheme::PDHG1) s.z = Image(cfg.data.observation().shape());
  if (uses_tv(cfg)) s.z = Image(output_shape(GradientOp{}, u0.shape()));
  if (uses_cross(cfg)) s.z_cross = Image(output_shape(ChannelGradDiffOp{}, u0.shape()));
  return s;
}

SchemeState fixed_point_state(const SchemeConfig& cfg, const Image& u0) {
  SchemeState s = initial_state(cfg, u0);
  s.y = -1.0 * cfg.data.gradient(u0);
  if (cfg.scheme == Scheme::PDHG1) s.z = cfg.data.range_gradient(cfg.data.forward(u0));
  return s;
}

void step(const SchemeConfig& cfg, SchemeState& s) {
  const DataTerm& d = cfg.data;
  const double g = cfg.gamma;
  const double tau = cfg.tau;

  switch (cfg.scheme) {
    case Scheme::PG: {
      s.u = cfg.denoiser(axpy(s.u, -tau, d.gradient(s.u)));
      s.u_bar = s.u;
      break;
    }
    case Scheme::ADMM: {
      s.v = cfg.denoiser(axpy(s.u, 1.0 / g, s.y));
      s.u = d.prox(1.0 / g, axpy(s.v, -1.0 / g, s.y));
      s.y = axpy(s.y, g, s.u - s.v);
      s.u_bar = s.u;
      break;
    }
    case Scheme::PDHG1: {
      const Image a_ubar = d.forward(s.u_bar);
      const Image z_arg = axpy(a_ubar, 1.0 / g, s.z);
      s.z = axpy(axpy(s.z, g, a_ubar), -g, d.range_prox(1.0 / g, z_arg));
      const Image y_arg = axpy(s.u_bar, 1.0 / g, s.y);
      s.y = axpy(axpy(s.y, g, s.u_bar), -g, cfg.denoiser(y_arg));
      Image u_next = axpy(axpy(s.u, -tau, d.adjoint(s.z)), -tau, s.y);
      s.u_bar = axpy(u_next, cfg.theta, u_next - s.u);
      s.u = std::move(u_next);
      break;
    }
    case Scheme::PDHG2:
    case Scheme::StackedPDHG: {
      Image descent = s.u;
      if (uses_tv(cfg)) {
        const Image d_ubar = grad_forward(s.u_bar);
        const Image arg = axpy(d_ubar, 1.0 / g, s.z);
        s.z = axpy(axpy(s.z, g, d_ubar), -g, prox_l21(cfg.beta_tv / g, arg));
      }
      if (uses_cross(cfg)) {
        const Image c_ubar = channel_grad_diff_forward(s.u_bar);
        const Image arg = axpy(c_ubar, 1.0 / g, s.z_cross);
        s.z_cross = axpy(axpy(s.z_cross, g, c_ubar), -g, prox_l1(cfg.beta_cross / g, arg));
      }
      const Image y_arg = axpy(s.u_bar, 1.0 / g, s.y);
      s.y = axpy(axpy(s.y, g, s.u_bar), -g, cfg.denoiser(y_arg));
      descent = axpy(descent, -tau, s.y);
      if (uses_tv(cfg)) descent = axpy(descent, -tau, grad_adjoint(s.z));
      if (uses_cross(cfg)) descent = axpy(descent, -tau, channel_grad_diff_adjoint(s.z_cross));
      Image u_next = d.prox(tau, descent);
      s.u_bar = axpy(u_next, cfg.theta, u_next - s.u);
      s.u = std::move(u_next);
      break;
    }
  }
  ++s.k;
}

namespace {

bool state_finite(const SchemeState& s) {
  for (const Image* img : {&s.u, &s.u_bar, &s.y, &s.z, &s.z_cross, &s.v})
    if (!img->empty() && !img->all_finite()) return false;
  return true;
}

}  // namespace

RunReport run(const SchemeConfig& cfg, SchemeState state, const RunOptions& opts) {
  validate(cfg);
  require(state.u.shape() == cfg.data.domain_shape(), ErrorKind::ShapeMismatch,
          "scheme state does not match data term domain " + to_string(cfg.data.domain_shape()));
  if (opts.reference) require_same_shape(*opts.reference, state.u, "reference image");

  RunReport report;
  if (is_pdhg(cfg.scheme)) report.step_condition_violated = cfg.tau * cfg.gamma > step_bound(cfg) * (1.0 + 1e-9);
  if (cfg.scheme == Scheme::PG) report.step_condition_violated = cfg.tau > 2.0 * step_bound(cfg);

  report.stop = StopReason::MaxIters;
  if (!state_finite(state)) {
    report.stop = StopReason::NonFinite;
  } else {
    for (int it = 0; it < cfg.max_iters; ++it) {
      SchemeState next = state;
      bool ok = true;
      try {
        step(cfg, next);
        ok = state_finite(next);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numerical) throw;
        ok = false;
      }
      if (!ok) {
        report.stop = StopReason::NonFinite;
        break;
      }

      IterationRecord rec;
      rec.k = next.k;
      rec.rel_change = norm(next.u - state.u) / std::max(norm(state.u), kEps);
      rec.data_energy = cfg.data.energy(next.u);
      rec.fixed_point_residual = opts.track_fixed_point_residual ? fixed_point_residual(cfg, next.u) : kNaN;
      rec.psnr = opts.reference ? psnr_cropped(next.u, *opts.reference, opts.psnr_border) : kNaN;
      report.history.push_back(rec);
      state = std::move(next);
      if (opts.on_iteration) opts.on_iteration(state);
      if (rec.rel_change <= cfg.tol) {
        report.stop = StopReason::Tolerance;
        break;
      }
    }
  }
  report.iterations = static_cast<int>(report.history.size());
  report.u = state.u;
  report.final_state = std::move(state);
  return report;
}

RunReport run(const SchemeConfig& cfg, const Image& u0, const RunOptions& opts) {
  return run(cfg, initial_state(cfg, u0), opts);
}

RunReport run_pg(SchemeConfig cfg, const Image& u0, const RunOptions& opts) {
  cfg.scheme = Scheme::PG;
  return run(cfg, u0, opts);
}

RunReport run_admm(SchemeConfig cfg, const Image& u0, const RunOptions& opts) {
  cfg.scheme = Scheme::ADMM;
  return run(cfg, u0, opts);
}

RunReport run_pdhg1(SchemeConfig cfg, const Image& u0, const RunOptions& opts) {
  cfg.scheme = Scheme::PDHG1;
  return run(cfg, u0, opts);
}

RunReport run_pdhg2(SchemeConfig cfg, const Image& u0, const RunOptions& opts) {
  cfg.scheme = Scheme::PDHG2;
  return run(cfg, u0, opts);
}

RunReport run_stacked_pdhg(SchemeConfig cfg, const Image& u0, const RunOptions& opts) {
  cfg.scheme = Scheme::StackedPDHG;
  return run(cfg, u0, opts);
}

double fixed_point_step(const SchemeConfig& cfg) {
  return cfg.scheme == Scheme::PG ? cfg.tau : 1.0 / cfg.gamma;
}

double fixed_point_residual(const SchemeConfig& cfg, const Image& u, double t) {
  const Image g = cfg.denoiser(axpy(u, -t, cfg.data.gradient(u)));
  return norm(u - g) / std::max(norm(u), kEps);
}

double fixed_point_residual(const SchemeConfig& cfg, const Image& u) {
  return fixed_point_residual(cfg, u, fixed_point_step(cfg));
}

SchemeConfig rescale_config(const SchemeConfig& cfg, double new_gamma) {
  require(cfg.scheme == Scheme::PDHG2 || cfg.scheme == Scheme::StackedPDHG, ErrorKind::InvalidArgument,
          "rescale_config applies to pdhg2 and stacked only");
  require(new_gamma > 0.0 && std::isfinite(new_gamma), ErrorKind::InvalidArgument, "new gamma must be positive");
  if (new_gamma == cfg.gamma) return cfg;
  // tau*alpha and beta/gamma are what the iterates see
  const double s = new_gamma / cfg.gamma;
  SchemeConfig out = cfg;
  out.gamma = new_gamma;
  out.tau = cfg.tau * cfg.gamma / new_gamma;
  out.data = cfg.data.with_alpha(cfg.data.alpha() * s);
  out.beta_tv = cfg.beta_tv * s;
  out.beta_cross = cfg.beta_cross * s;
  return out;
}

std::string history_csv(const std::vector<IterationRecord>& history) {
  std::ostringstream out;
  out << "k,rel_change,data_energy,fixed_point_residual,psnr_vs_reference\n";
  auto opt = [](double v) { return std::isnan(v) ? std::string() : format_number(v); };
  for (const auto& r : history) {
    out << r.k << "," << format_number(r.rel_change) << "," << format_number(r.data_energy) << ","
        << opt(r.fixed_point_residual) << "," << opt(r.psnr) << "\n";
  }
  return out.str();
}

}  // namespace pnp
