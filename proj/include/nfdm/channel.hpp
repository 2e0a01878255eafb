#pragma once

// Split-step Fourier integration of the Manakov equation
//   dq/ds = i c_d q_tt + i c_n |q|^2 q - (alpha/2) q
// with lumped amplification, ASE, and B2B noise loading.
//
// Physical units: c_d = -beta2/2, c_n = 8 gamma / 9, s in metres.
// Normalized units (i q_z = q_tt + 2|q|^2 q): c_d = -1, c_n = -2, no loss.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfdm/core.hpp"
#include "nfdm/fft.hpp"
#include "nfdm/random.hpp"

namespace nfdm {

struct SsfmConfig {
  int steps_per_span = 100;
  double step_km = 0.0;  // overrides steps_per_span when > 0
  std::uint64_t rng_seed = 1;
  bool ase_enabled = false;
  bool lossless_lpa = false;  // lossless spans with the path-averaged gamma
  double max_nonlinear_phase = 0.05;

  void validate() const {
    if (steps_per_span < 1) throw std::invalid_argument("SsfmConfig: steps_per_span must be >= 1");
    if (step_km < 0.0) throw std::invalid_argument("SsfmConfig: step_km must be >= 0");
    if (!(max_nonlinear_phase > 0.0)) throw std::invalid_argument("SsfmConfig: max_nonlinear_phase must be > 0");
  }
};

// Full width of the smallest band [-f, f] holding `fraction` of the power.
inline double bandwidth_fraction(const DualPolSignal& sig, double fraction) {
  const auto ps = power_spectrum(sig);
  const std::size_t n = sig.size();
  double total = 0.0;
  for (double p : ps) total += p;
  if (!(total > 0.0)) throw std::invalid_argument("bandwidth: zero signal");
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  const double dt = sig.grid.dt();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(fft_frequency(a, n, dt)) < std::abs(fft_frequency(b, n, dt));
  });
  double acc = 0.0;
  for (std::size_t i = 0; i < n;) {
    const double f = std::abs(fft_frequency(order[i], n, dt));
    // bins sharing |f| enter together so the band stays symmetric
    while (i < n && std::abs(fft_frequency(order[i], n, dt)) == f) acc += ps[order[i++]];
    if (acc >= fraction * total) return 2.0 * f;
  }
  return 1.0 / dt;
}

inline double bandwidth_99(const DualPolSignal& sig) { return bandwidth_fraction(sig, 0.99); }

// Fraction of the spectral energy in the outermost 5% of the simulation band.
inline double edge_band_fraction(const DualPolSignal& sig) {
  const auto ps = power_spectrum(sig);
  const std::size_t n = sig.size();
  const double nyq = 0.5 / sig.grid.dt();
  double total = 0.0, edge = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    total += ps[k];
    if (std::abs(fft_frequency(k, n, sig.grid.dt())) > 0.95 * nyq) edge += ps[k];
  }
  return total > 0.0 ? edge / total : 0.0;
}

inline void check_aliasing(const DualPolSignal& sig, const char* where) {
  const double r = edge_band_fraction(sig);
  if (r > 1e-6)
    throw std::runtime_error(std::string(where) + ": aliasing guard tripped (edge-band energy fraction " +
                             std::to_string(r) + ")");
}

namespace detail {

class SplitStep {
 public:
  SplitStep(std::size_t n, double dt, double c_d, double c_n)
      : fft_(n), c_d_(c_d), c_n_(c_n), omega2_(n) {
    for (std::size_t k = 0; k < n; ++k) {
      const double w = 2.0 * kPi * fft_frequency(k, n, dt);
      omega2_[k] = w * w;
    }
  }

  // Advances (q1, q2) by `length` in `steps` symmetric steps with power loss
  // rate alpha. Throws when a step's peak nonlinear phase exceeds max_phase.
  void run(std::vector<cd>& q1, std::vector<cd>& q2, double length, int steps, double alpha, double max_phase) {
    if (steps < 1) throw std::invalid_argument("SplitStep: steps must be >= 1");
    const double h = length / steps;
    const double h_eff = alpha > 0.0 ? -std::expm1(-alpha * h) / alpha : h;
    const double decay = std::exp(-0.5 * alpha * h);
    set_half_step(h);
    std::vector<cd> a = q1, b = q2;
    fft_.forward(a);
    fft_.forward(b);
    for (int s = 0; s < steps; ++s) {
      for (std::size_t k = 0; k < a.size(); ++k) a[k] *= half_[k], b[k] *= half_[k];
      fft_.inverse(a);
      fft_.inverse(b);
      double peak = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double p = std::norm(a[i]) + std::norm(b[i]);
        peak = std::max(peak, p);
        const cd rot = std::polar(decay, c_n_ * p * h_eff);
        a[i] *= rot;
        b[i] *= rot;
      }
      if (std::abs(c_n_) * peak * h_eff > max_phase)
        throw std::runtime_error("split-step: nonlinear phase per step " + std::to_string(std::abs(c_n_) * peak * h_eff) +
                                 " rad exceeds " + std::to_string(max_phase) + "; use more steps");
      fft_.forward(a);
      fft_.forward(b);
      for (std::size_t k = 0; k < a.size(); ++k) a[k] *= half_[k], b[k] *= half_[k];
    }
    fft_.inverse(a);
    fft_.inverse(b);
    q1 = std::move(a);
    q2 = std::move(b);
  }

 private:
  void set_half_step(double h) {
    if (h == half_h_ && !half_.empty()) return;
    half_.resize(omega2_.size());
    for (std::size_t k = 0; k < omega2_.size(); ++k) half_[k] = std::polar(1.0, -c_d_ * omega2_[k] * 0.5 * h);
    half_h_ = h;
  }

  Fft fft_;
  double c_d_;
  double c_n_;
  std::vector<double> omega2_;
  std::vector<cd> half_;
  double half_h_ = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace detail

// Lossless normalized propagation over distance z in n_steps steps.
inline DualPolSignal propagate_normalized(const DualPolSignal& sig, double z, int n_steps,
                                          double max_nonlinear_phase = 0.05) {
  if (sig.domain != Domain::Normalized) throw std::invalid_argument("propagate_normalized: expected normalized signal");
  if (sig.energy() > 0.0) check_aliasing(sig, "propagate_normalized");
  DualPolSignal out = sig;
  if (z == 0.0) return out;
  detail::SplitStep ss(sig.size(), sig.grid.dt(), -1.0, -2.0);
  ss.run(out.q1, out.q2, z, n_steps, 0.0, max_nonlinear_phase);
  return out;
}

using SpanTap = std::function<void(int span, const DualPolSignal& after_amplifier)>;

// Per-polarization ASE power spectral density of one amplifier, W/Hz.
inline double ase_psd_per_pol(double gain_linear, const FiberParams& fiber) {
  const double nu = kSpeedOfLight / (fiber.carrier_wavelength_nm * 1e-9);
  return (gain_linear - 1.0) * kPlanck * nu * db_to_linear(fiber.noise_figure_db) / 2.0;
}

// Physical propagation over fiber.n_spans spans, each followed by a lumped
// amplifier restoring the span loss. `tap` sees the signal after every
// amplifier.
inline DualPolSignal propagate_link(const DualPolSignal& sig, const FiberParams& fiber, const SsfmConfig& cfg,
                                    const SpanTap& tap = {}) {
  if (sig.domain != Domain::Physical) throw std::invalid_argument("propagate_link: expected physical signal");
  fiber.validate();
  cfg.validate();
  sig.validate();
  const bool nonzero = sig.energy() > 0.0;
  if (nonzero) {
    check_aliasing(sig, "propagate_link");
    const double bw = bandwidth_99(sig);
    if (sig.grid.sample_rate() < 4.0 * bw)
      throw std::invalid_argument("propagate_link: sample rate below 4x the 99% bandwidth");
  }

  const double span_m = fiber.span_length_km * 1e3;
  const int steps = cfg.step_km > 0.0 ? std::max(1, static_cast<int>(std::ceil(fiber.span_length_km / cfg.step_km)))
                                      : cfg.steps_per_span;
  const double beta2 = beta2_from_D(fiber.dispersion_ps_nm_km, fiber.carrier_wavelength_nm) * 1e-27;  // s^2/m
  const double gamma = (cfg.lossless_lpa ? lpa_effective_gamma(fiber.gamma_per_w_km, fiber.alpha_db_per_km,
                                                               fiber.span_length_km)
                                         : fiber.gamma_per_w_km) * 1e-3;
  const double alpha = cfg.lossless_lpa ? 0.0 : alpha_per_km(fiber.alpha_db_per_km) * 1e-3;  // 1/m
  const double gain_amp = std::exp(0.5 * alpha * span_m);
  const double gain_pow = gain_amp * gain_amp;
  const double var = cfg.ase_enabled && !cfg.lossless_lpa ? ase_psd_per_pol(gain_pow, fiber) * sig.grid.sample_rate()
                                                          : 0.0;

  detail::SplitStep ss(sig.size(), sig.grid.dt(), -0.5 * beta2, 8.0 * gamma / 9.0);
  DualPolSignal out = sig;
  for (int span = 0; span < fiber.n_spans; ++span) {
    ss.run(out.q1, out.q2, span_m, steps, alpha, cfg.max_nonlinear_phase);
    for (std::size_t i = 0; i < out.size(); ++i) out.q1[i] *= gain_amp, out.q2[i] *= gain_amp;
    if (var > 0.0) {
      NoiseStream ns(cfg.rng_seed, static_cast<std::uint64_t>(span));
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.q1[i] += ns.complex_gaussian(var);
        out.q2[i] += ns.complex_gaussian(var);
      }
    }
    if (tap) tap(span, out);
  }
  if (nonzero && var == 0.0) check_aliasing(out, "propagate_link");
  return out;
}

// Ideal spectral evolution of b over normalized distance z: b e^{-4 i lambda^2 z}.
inline std::array<cd, 2> expected_b_evolution(const std::array<cd, 2>& b, cd lambda, double z) {
  const cd m = std::exp(cd(0, -4.0) * lambda * lambda * z);
  return {b[0] * m, b[1] * m};
}

// Loads white Gaussian noise so that mean signal power over the noise power in
// ref_bandwidth (both polarizations) equals the target OSNR.
inline DualPolSignal add_noise_for_osnr(const DualPolSignal& sig, double target_osnr_db, double ref_bandwidth_hz,
                                        std::uint64_t rng_seed, std::uint64_t stream = 0) {
  if (target_osnr_db < -10.0) throw std::invalid_argument("add_noise_for_osnr: target OSNR below -10 dB");
  if (!(ref_bandwidth_hz > 0.0)) throw std::invalid_argument("add_noise_for_osnr: reference bandwidth must be > 0");
  const double p_sig = sig.mean_power();
  if (!(p_sig > 0.0)) throw std::invalid_argument("add_noise_for_osnr: zero signal");
  if (std::isinf(target_osnr_db) && target_osnr_db > 0.0) return sig;
  const double psd = p_sig / (db_to_linear(target_osnr_db) * 2.0 * ref_bandwidth_hz);
  const double var = psd * sig.grid.sample_rate();
  DualPolSignal out = sig;
  NoiseStream n1(rng_seed, 2 * stream), n2(rng_seed, 2 * stream + 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.q1[i] += n1.complex_gaussian(var);
    out.q2[i] += n2.complex_gaussian(var);
  }
  return out;
}

// OSNR estimate from a clean reference and its noisy version: noise PSD from
// the periodogram of the difference, averaged over the band.
inline double measure_osnr_db(const DualPolSignal& clean, const DualPolSignal& noisy, double ref_bandwidth_hz) {
  if (clean.size() != noisy.size()) throw std::invalid_argument("measure_osnr_db: length mismatch");
  DualPolSignal diff = noisy;
  for (std::size_t i = 0; i < diff.size(); ++i) diff.q1[i] -= clean.q1[i], diff.q2[i] -= clean.q2[i];
  const auto ps = power_spectrum(diff);
  const double n = static_cast<double>(diff.size());
  double mean_bin = 0.0;
  for (double p : ps) mean_bin += p;
  mean_bin /= n;
  // |X_k|^2 = N fs S(f) for white noise of two-sided PSD S summed over both polarizations
  const double psd_both = mean_bin / (n * clean.grid.sample_rate());
  return 10.0 * std::log10(clean.mean_power() / (psd_both * ref_bandwidth_hz));
}

}  // namespace nfdm
