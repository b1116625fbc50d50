#pragma once

#include <memory>

#include "pnp/image.hpp"
#include "pnp/linear_ops.hpp"

namespace pnp {

/// Quadratic data fidelity (alpha/2) * ||A u - f||^2 for A in {identity, circular conv, Bayer mask}.
/// Spectra and A^T f are cached at construction; instances are immutable and cheap to copy.
class DataTerm {
 public:
  DataTerm(LinearOperator op, Image observation, double alpha);

  const LinearOperator& op() const { return op_; }
  const Image& observation() const { return f_; }
  double alpha() const { return alpha_; }
  /// Shape of u (the unknown), which differs from f for the Bayer mask.
  const Shape& domain_shape() const { return domain_; }

  DataTerm with_alpha(double alpha) const;

  Image forward(const Image& u) const;
  Image adjoint(const Image& r) const;

  double energy(const Image& u) const;
  /// alpha * A^T (A u - f)
  Image gradient(const Image& u) const;
  /// Gradient of H_f on the range side, evaluated at w = A u: alpha * (w - f).
  Image range_gradient(const Image& w) const;

  /// argmin_u 1/2 ||u - v||^2 + t * (alpha/2) ||A u - f||^2
  Image prox(double t, const Image& v) const;
  /// argmin_w 1/2 ||w - v||^2 + s * (alpha/2) ||w - f||^2
  Image range_prox(double s, const Image& v) const;

 private:
  struct Cache;

  LinearOperator op_;
  Image f_;
  double alpha_;
  Shape domain_;
  std::shared_ptr<const Cache> cache_;
};

double data_energy(const DataTerm& d, const Image& u);
Image data_gradient(const DataTerm& d, const Image& u);
Image prox_data(const DataTerm& d, double t, const Image& v);

/// Isotropic shrinkage of the 2-vectors formed by planes (2c, 2c+1) at each pixel.
Image prox_l21(double lambda, const Image& p);
/// Per-sample soft threshold.
Image prox_l1(double lambda, const Image& p);

/// sum over pixels and source channels of the Euclidean norm of (p[2c], p[2c+1]).
double l21_norm(const Image& p);
double l1_norm(const Image& p);

}  // namespace pnp
