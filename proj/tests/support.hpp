#pragma once

#include <vector>

#include "nfdm/core.hpp"
#include "nfdm/nft_inverse.hpp"

namespace nfdm::test {

inline std::vector<SpectralTarget> reference_targets(int k0, int k1, int k2, int k3) {
  auto qpsk = [](double r, double off, int k) { return std::polar(r, off + kPi / 2.0 * k); };
  return {{cd(0, 0.3), qpsk(5.0, kPi / 4, k0), qpsk(5.0, kPi / 4, k1)},
          {cd(0, 0.6), qpsk(0.14, 0.0, k2), qpsk(0.14, 0.0, k3)}};
}

// Waveform on an n-sample grid whose edges sit below 1e-9 of the peak.
inline DualPolSignal wide_symbol(const std::vector<SpectralTarget>& targets, std::size_t n = 4096,
                                 double extra_window = 0.0) {
  const auto w = suggest_window(targets, 1e-9);
  return generate_from_spectrum({targets, TimeGrid::centered(n, 2.0 * w.half_width + extra_window, w.center)});
}

// Symbol on a physical grid sampled at `rate` (Hz) over `n` samples. The time
// origin is kept so b is unchanged by the sampling.
inline DualPolSignal physical_symbol(const std::vector<SpectralTarget>& targets, const NormalizationParams& np,
                                     double rate, std::size_t n) {
  const double dt = 1.0 / (rate * np.T0_s);
  const auto w = suggest_window(targets, 1e-9);
  return denormalize_signal(
      generate_from_spectrum({targets, TimeGrid::centered(n, dt * static_cast<double>(n), w.center)}), np);
}

}  // namespace nfdm::test
