#pragma once

// Shared domain types for the DP-NFDM toolkit: uniform time grids, the
// dual-polarization signal container, fiber parameters, and the
// physical <-> normalized change of variables of the Manakov system.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace nfdm {

using cd = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPlanck = 6.62607015e-34;     // J s

class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(std::size_t n_samples, double dt, double t_start)
      : n_samples_(n_samples), dt_(dt), t_start_(t_start) {
    if (n_samples < 2) throw std::invalid_argument("TimeGrid: n_samples must be >= 2");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("TimeGrid: dt must be > 0");
    if (!std::isfinite(t_start)) throw std::invalid_argument("TimeGrid: t_start must be finite");
  }

  // Grid of n samples covering [center - window/2, center + window/2).
  static TimeGrid centered(std::size_t n_samples, double window, double center = 0.0) {
    const double dt = window / static_cast<double>(n_samples);
    return TimeGrid(n_samples, dt, center - 0.5 * window);
  }

  std::size_t size() const { return n_samples_; }
  double dt() const { return dt_; }
  double t_start() const { return t_start_; }
  double t_end() const { return t_start_ + dt_ * static_cast<double>(n_samples_ - 1); }
  double window() const { return dt_ * static_cast<double>(n_samples_); }
  double time(std::size_t i) const { return t_start_ + dt_ * static_cast<double>(i); }
  double sample_rate() const { return 1.0 / dt_; }

  bool operator==(const TimeGrid&) const = default;

 private:
  std::size_t n_samples_ = 2;
  double dt_ = 1.0;
  double t_start_ = 0.0;
};

enum class Domain { Physical, Normalized };

inline const char* to_string(Domain d) {
  return d == Domain::Physical ? "physical" : "normalized";
}

// Sampled complex envelope pair. Physical samples are in sqrt(W) on a grid in
// seconds; normalized samples and times are dimensionless.
struct DualPolSignal {
  TimeGrid grid;
  std::vector<cd> q1;
  std::vector<cd> q2;
  Domain domain = Domain::Normalized;

  DualPolSignal() = default;
  DualPolSignal(TimeGrid g, std::vector<cd> a, std::vector<cd> b, Domain d)
      : grid(g), q1(std::move(a)), q2(std::move(b)), domain(d) {
    validate();
  }

  static DualPolSignal zeros(const TimeGrid& g, Domain d) {
    return DualPolSignal(g, std::vector<cd>(g.size()), std::vector<cd>(g.size()), d);
  }

  void validate() const {
    if (q1.size() != grid.size() || q2.size() != grid.size())
      throw std::invalid_argument("DualPolSignal: sample count does not match grid");
  }

  std::size_t size() const { return grid.size(); }

  double power(std::size_t i) const { return std::norm(q1[i]) + std::norm(q2[i]); }

  // Rectangle-rule energy; exact for band-limited periodic signals.
  double energy() const {
    double e = 0.0;
    for (std::size_t i = 0; i < size(); ++i) e += power(i);
    return e * grid.dt();
  }

  double mean_power() const { return energy() / grid.window(); }

  double peak_power() const {
    double p = 0.0;
    for (std::size_t i = 0; i < size(); ++i) p = std::max(p, power(i));
    return p;
  }

  // Largest |q_j| in the first and last `fraction` of the window, relative to
  // the peak |q_j|. Zero signals report 0.
  double boundary_ratio(double fraction = 0.01) const {
    const std::size_t n = size();
    const std::size_t edge = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * n));
    double peak = 0.0, edge_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = std::max(std::abs(q1[i]), std::abs(q2[i]));
      peak = std::max(peak, m);
      if (i < edge || i >= n - edge) edge_max = std::max(edge_max, m);
    }
    return peak > 0.0 ? edge_max / peak : 0.0;
  }

  bool satisfies_vanishing_boundaries(double threshold = 1e-3, double fraction = 0.01) const {
    return boundary_ratio(fraction) < threshold;
  }
};

// Fiber link description. Defaults: standard SMF, 9 spans of 41.5 km.
struct FiberParams {
  double dispersion_ps_nm_km = 17.5;
  double gamma_per_w_km = 1.25;
  double alpha_db_per_km = 0.195;
  double span_length_km = 41.5;
  int n_spans = 9;
  double carrier_wavelength_nm = 1550.0;
  double noise_figure_db = 5.0;

  void validate() const {
    if (!(span_length_km > 0.0)) throw std::invalid_argument("FiberParams: span_length_km must be > 0");
    if (!(gamma_per_w_km > 0.0)) throw std::invalid_argument("FiberParams: gamma_per_w_km must be > 0");
    if (!(alpha_db_per_km >= 0.0)) throw std::invalid_argument("FiberParams: alpha_db_per_km must be >= 0");
    if (n_spans < 0) throw std::invalid_argument("FiberParams: n_spans must be >= 0");
    if (!(carrier_wavelength_nm > 0.0))
      throw std::invalid_argument("FiberParams: carrier_wavelength_nm must be > 0");
    if (!(dispersion_ps_nm_km > 0.0))
      throw std::invalid_argument("FiberParams: anomalous dispersion (dispersion_ps_nm_km > 0) required");
  }

  bool operator==(const FiberParams&) const = default;
};

// Power attenuation rate in 1/km. The field decays at half this rate.
inline double alpha_per_km(double alpha_db_per_km) {
  return alpha_db_per_km * std::log(10.0) / 10.0;
}

// Group-velocity dispersion in ps^2/km from D in ps/(nm km).
inline double beta2_from_D(double dispersion_ps_nm_km, double carrier_wavelength_nm) {
  if (!(carrier_wavelength_nm > 0.0)) throw std::invalid_argument("beta2_from_D: wavelength must be > 0");
  if (dispersion_ps_nm_km < 0.0) throw std::invalid_argument("beta2_from_D: dispersion must be >= 0");
  const double c_nm_per_ps = kSpeedOfLight * 1e9 / 1e12;
  return -dispersion_ps_nm_km * carrier_wavelength_nm * carrier_wavelength_nm /
         (2.0 * kPi * c_nm_per_ps);
}

// Lossless path-averaged nonlinearity: gamma (1 - exp(-aL)) / (aL).
inline double lpa_effective_gamma(double gamma, double alpha_db_per_km, double span_length_km) {
  if (!(gamma > 0.0)) throw std::invalid_argument("lpa_effective_gamma: gamma must be > 0");
  if (!(span_length_km > 0.0)) throw std::invalid_argument("lpa_effective_gamma: span_length must be > 0");
  if (!(alpha_db_per_km >= 0.0)) throw std::invalid_argument("lpa_effective_gamma: alpha must be >= 0");
  const double x = alpha_per_km(alpha_db_per_km) * span_length_km;
  if (x < 1e-8) return gamma * (1.0 - 0.5 * x);
  return gamma * (-std::expm1(-x)) / x;
}

struct NormalizationParams {
  double T0_s = 47e-12;
  double P_w = 0.0;
  double L_char_m = 0.0;

  // Normalized distance for a physical propagation distance. The sign follows
  // the change of variable z = -s / L.
  double z_from_distance(double distance_m) const { return -distance_m / L_char_m; }
};

inline NormalizationParams normalization_from_link(double T0_s, const FiberParams& fiber, bool use_lpa) {
  if (!(T0_s > 0.0)) throw std::invalid_argument("normalization_from_link: T0 must be > 0");
  const double beta2_ps2_km = beta2_from_D(fiber.dispersion_ps_nm_km, fiber.carrier_wavelength_nm);
  if (beta2_ps2_km == 0.0) throw std::invalid_argument("normalization_from_link: zero dispersion");
  const double gamma = use_lpa ? lpa_effective_gamma(fiber.gamma_per_w_km, fiber.alpha_db_per_km,
                                                     fiber.span_length_km)
                               : fiber.gamma_per_w_km;
  const double beta2 = std::abs(beta2_ps2_km) * 1e-27;  // s^2/m
  const double gamma_m = gamma * 1e-3;                  // 1/(W m)
  NormalizationParams np;
  np.T0_s = T0_s;
  np.P_w = beta2 / ((8.0 / 9.0) * gamma_m * T0_s * T0_s);
  np.L_char_m = 2.0 * T0_s * T0_s / beta2;
  return np;
}

inline DualPolSignal normalize_signal(const DualPolSignal& sig, const NormalizationParams& np) {
  if (sig.domain != Domain::Physical) throw std::invalid_argument("normalize_signal: expected physical signal");
  const double s = 1.0 / std::sqrt(np.P_w);
  DualPolSignal out;
  out.grid = TimeGrid(sig.size(), sig.grid.dt() / np.T0_s, sig.grid.t_start() / np.T0_s);
  out.domain = Domain::Normalized;
  out.q1.resize(sig.size());
  out.q2.resize(sig.size());
  for (std::size_t i = 0; i < sig.size(); ++i) {
    out.q1[i] = sig.q1[i] * s;
    out.q2[i] = sig.q2[i] * s;
  }
  return out;
}

inline DualPolSignal denormalize_signal(const DualPolSignal& sig, const NormalizationParams& np) {
  if (sig.domain != Domain::Normalized) throw std::invalid_argument("denormalize_signal: expected normalized signal");
  const double s = std::sqrt(np.P_w);
  DualPolSignal out;
  out.grid = TimeGrid(sig.size(), sig.grid.dt() * np.T0_s, sig.grid.t_start() * np.T0_s);
  out.domain = Domain::Physical;
  out.q1.resize(sig.size());
  out.q2.resize(sig.size());
  for (std::size_t i = 0; i < sig.size(); ++i) {
    out.q1[i] = sig.q1[i] * s;
    out.q2[i] = sig.q2[i] * s;
  }
  return out;
}

inline double watts_to_dbm(double w) { return 10.0 * std::log10(w / 1e-3); }
inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace nfdm
