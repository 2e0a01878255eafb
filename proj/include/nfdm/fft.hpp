#pragma once

// Thin RAII wrapper over FFTW for unnormalized complex DFTs, plus the
// frequency-domain helpers shared by the channel and receiver.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include "nfdm/core.hpp"

namespace nfdm {

namespace detail {
// FFTW planning is not thread-safe; execution with the plan's own buffer is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// Forward transform X_k = sum_n x_n exp(-2 pi i k n / N); the inverse carries
// the 1/N factor.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("Fft: size must be > 0");
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (!buf_) throw std::bad_alloc();
    std::lock_guard lock(detail::fftw_planner_mutex());
    const int ni = static_cast<int>(n);
    fwd_ = fftw_plan_dft_1d(ni, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(ni, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  ~Fft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }

  std::size_t size() const { return n_; }

  void forward(std::span<cd> data) { run(data, fwd_, 1.0); }
  void inverse(std::span<cd> data) { run(data, bwd_, 1.0 / static_cast<double>(n_)); }

 private:
  void run(std::span<cd> data, fftw_plan plan, double scale) {
    if (data.size() != n_) throw std::invalid_argument("Fft: size mismatch");
    auto* b = reinterpret_cast<cd*>(buf_);
    std::copy(data.begin(), data.end(), b);
    fftw_execute(plan);
    for (std::size_t i = 0; i < n_; ++i) data[i] = b[i] * scale;
  }

  std::size_t n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

// Frequency of DFT bin k for n samples spaced dt (numpy.fft.fftfreq layout).
inline double fft_frequency(std::size_t k, std::size_t n, double dt) {
  const auto kk = static_cast<double>(k);
  const auto nn = static_cast<double>(n);
  return (k < (n + 1) / 2 ? kk : kk - nn) / (nn * dt);
}

inline std::vector<double> fft_frequencies(std::size_t n, double dt) {
  std::vector<double> f(n);
  for (std::size_t k = 0; k < n; ++k) f[k] = fft_frequency(k, n, dt);
  return f;
}

// Combined two-polarization power spectrum |Q1|^2 + |Q2|^2 per bin.
inline std::vector<double> power_spectrum(const DualPolSignal& sig) {
  const std::size_t n = sig.size();
  Fft fft(n);
  std::vector<cd> a = sig.q1, b = sig.q2;
  fft.forward(a);
  fft.forward(b);
  std::vector<double> s(n);
  for (std::size_t k = 0; k < n; ++k) s[k] = std::norm(a[k]) + std::norm(b[k]);
  return s;
}

// Band-limited interpolation of a periodic signal by spectral zero padding.
inline DualPolSignal upsample_fft(const DualPolSignal& sig, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("upsample_fft: factor must be >= 1");
  if (factor == 1) return sig;
  const std::size_t n = sig.size();
  const std::size_t m = n * factor;
  Fft small(n), big(m);
  auto up = [&](const std::vector<cd>& x) {
    std::vector<cd> X = x;
    small.forward(X);
    std::vector<cd> Y(m);
    const std::size_t pos = (n + 1) / 2;  // bins [0, pos) are non-negative
    for (std::size_t k = 0; k < pos; ++k) Y[k] = X[k];
    for (std::size_t k = pos; k < n; ++k) Y[m - n + k] = X[k];
    if (n % 2 == 0) {  // split the Nyquist bin symmetrically
      const cd nyq = X[n / 2];
      Y[n / 2] = 0.5 * nyq;
      Y[m - n / 2] = 0.5 * nyq;
    }
    big.inverse(Y);
    for (auto& y : Y) y *= static_cast<double>(factor);
    return Y;
  };
  DualPolSignal out;
  out.grid = TimeGrid(m, sig.grid.dt() / static_cast<double>(factor), sig.grid.t_start());
  out.domain = sig.domain;
  out.q1 = up(sig.q1);
  out.q2 = up(sig.q2);
  return out;
}

}  // namespace nfdm
