#pragma once

// Reproducible noise streams. Each stream is keyed by (seed, stream index), so
// a noisy run is fully determined by its seed and the index of each noise
// source regardless of evaluation order.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace nfdm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t stream) : eng_(stream_key(seed, stream)) {}

  // Circular complex Gaussian with E|n|^2 = variance.
  std::complex<double> complex_gaussian(double variance) {
    const double s = std::sqrt(0.5 * variance);
    return {s * normal_(eng_), s * normal_(eng_)};
  }

  double gaussian() { return normal_(eng_); }
  double uniform() { return uniform_(eng_); }
  std::uint64_t bits() { return eng_(); }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace nfdm
