#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace pnp::detail {
namespace {

// FFTW planning is not thread-safe; execution on fresh arrays is.
struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

std::mutex g_plan_mutex;

const PlanPair& plans_for(int width, int height) {
  static std::map<std::pair<int, int>, PlanPair> cache;
  std::lock_guard lock(g_plan_mutex);
  auto it = cache.find({width, height});
  if (it != cache.end()) return it->second;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  auto* buf = fftw_alloc_complex(n);
  PlanPair p;
  p.forward = fftw_plan_dft_2d(height, width, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.backward = fftw_plan_dft_2d(height, width, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(buf);
  return cache.emplace(std::make_pair(width, height), p).first->second;
}

fftw_complex* as_fftw(Spectrum& s) { return reinterpret_cast<fftw_complex*>(s.data()); }

}  // namespace

Spectrum fft2(std::span<const double> plane, int width, int height) {
  Spectrum s(plane.begin(), plane.end());
  const auto& p = plans_for(width, height);
  fftw_execute_dft(p.forward, as_fftw(s), as_fftw(s));
  return s;
}

void ifft2_inplace(Spectrum& spectrum, int width, int height) {
  const auto& p = plans_for(width, height);
  fftw_execute_dft(p.backward, as_fftw(spectrum), as_fftw(spectrum));
  const double scale = 1.0 / (static_cast<double>(width) * height);
  for (auto& v : spectrum) v *= scale;
}

void ifft2_real(Spectrum spectrum, int width, int height, std::span<double> out) {
  ifft2_inplace(spectrum, width, height);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = spectrum[i].real();
}

}  // namespace pnp::detail
