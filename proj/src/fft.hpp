#pragma once

#include <complex>
#include <span>
#include <vector>

namespace pnp::detail {

using Spectrum = std::vector<std::complex<double>>;

/// Unnormalized 2-D complex DFT of a height x width row-major plane.
Spectrum fft2(std::span<const double> plane, int width, int height);
/// Inverse DFT scaled by 1/(width*height), real part only.
void ifft2_real(Spectrum spectrum, int width, int height, std::span<double> out);
void ifft2_inplace(Spectrum& spectrum, int width, int height);

}  // namespace pnp::detail

namespace pnp {
class ConvKernel;
}

namespace pnp::detail {

/// DFT of the kernel zero-embedded in a width x height grid with its center moved to (0,0).
Spectrum kernel_spectrum(const ConvKernel& k, int width, int height);

}  // namespace pnp::detail
