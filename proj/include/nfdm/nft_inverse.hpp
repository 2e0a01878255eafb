#pragma once

// Inverse NFT by iterated Darboux transformation of the Manakov system.
//
// Starting from the vacuum, every target eigenvalue lambda_k is attached to an
// auxiliary solution (A e^{-i lambda t}, B e^{i lambda t}, C e^{i lambda t})
// with (A, B, C) = (1, -b1, -b2). Each step adds one eigenvalue to the signal
// and maps the pending auxiliary solutions through (lambda_k I - G0).
//
// G0 = Psi diag(l0, l0*, l0*) Psi^{-1} has the closed form
//   G0 = l0* I + (l0 - l0*) Phi Phi^H / |Phi|^2
// because the first column of Psi is orthogonal to the other two. Only the
// direction of Phi enters, so auxiliary solutions are kept unit-normalized per
// sample and the exponentials never overflow.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <vector>

#include "nfdm/core.hpp"

namespace nfdm {

struct SpectralTarget {
  cd lambda;
  cd b1;
  cd b2;
};

struct AuxiliarySolution {
  cd lambda;
  std::vector<std::array<cd, 3>> values;  // unit 2-norm per sample
};

struct DarbouxPlan {
  std::vector<SpectralTarget> targets;
  TimeGrid grid;

  void validate() const {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (!(targets[i].lambda.imag() > 0.0))
        throw std::invalid_argument("DarbouxPlan: eigenvalues must lie in the upper half plane");
      for (std::size_t j = 0; j < i; ++j)
        if (targets[i].lambda == targets[j].lambda)
          throw std::invalid_argument("DarbouxPlan: eigenvalues must be distinct");
    }
  }
};

namespace detail {

inline void normalize3(std::array<cd, 3>& v) {
  const double n = std::sqrt(std::norm(v[0]) + std::norm(v[1]) + std::norm(v[2]));
  if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("Darboux: degenerate auxiliary solution");
  for (auto& x : v) x /= n;
}

}  // namespace detail

// Vacuum auxiliary solution for (lambda, b1, b2), evaluated in log form so
// that only the per-sample direction is stored.
inline AuxiliarySolution vacuum_auxiliary(const SpectralTarget& target, const TimeGrid& grid) {
  AuxiliarySolution aux;
  aux.lambda = target.lambda;
  aux.values.resize(grid.size());
  const cd i_lambda = cd(0, 1) * target.lambda;
  const std::array<cd, 3> coeff{cd(1), -target.b1, -target.b2};
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const double t = grid.time(n);
    const std::array<cd, 3> exponent{-i_lambda * t, i_lambda * t, i_lambda * t};
    double lmax = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k)
      if (coeff[k] != cd(0)) lmax = std::max(lmax, exponent[k].real() + std::log(std::abs(coeff[k])));
    std::array<cd, 3> v;
    for (int k = 0; k < 3; ++k)
      v[k] = coeff[k] == cd(0) ? cd(0) : coeff[k] * std::exp(exponent[k] - lmax);
    detail::normalize3(v);
    aux.values[n] = v;
  }
  return aux;
}

// One Darboux step: add aux.lambda to the spectrum of `seed` and map every
// pending auxiliary solution. Returns the new signal; `others` is updated in
// place.
inline DualPolSignal darboux_step(const DualPolSignal& seed, const AuxiliarySolution& aux,
                                  std::vector<AuxiliarySolution>& others) {
  if (seed.domain != Domain::Normalized) throw std::invalid_argument("darboux_step: expected normalized signal");
  const std::size_t n = seed.size();
  if (aux.values.size() != n) throw std::invalid_argument("darboux_step: auxiliary solution length mismatch");
  for (const auto& o : others)
    if (o.values.size() != n) throw std::invalid_argument("darboux_step: auxiliary solution length mismatch");

  const cd l0 = aux.lambda;
  const cd l0c = std::conj(l0);
  const cd gain = cd(0, 2) * (l0c - l0);  // 4 Im(l0)
  DualPolSignal out = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = aux.values[i];
    const double norm2 = std::norm(p[0]) + std::norm(p[1]) + std::norm(p[2]);
    if (!(norm2 > 0.0)) throw std::domain_error("darboux_step: degenerate auxiliary solution");
    // u_j^* / (1 + |u|^2) with u_j = p_{j+1} / p_1, written without dividing by p_1.
    out.q1[i] += gain * std::conj(p[1]) * p[0] / norm2;
    out.q2[i] += gain * std::conj(p[2]) * p[0] / norm2;
    for (auto& o : others) {
      auto& v = o.values[i];
      const cd proj = (std::conj(p[0]) * v[0] + std::conj(p[1]) * v[1] + std::conj(p[2]) * v[2]) / norm2;
      const cd lk = o.lambda;
      std::array<cd, 3> w;
      for (int k = 0; k < 3; ++k) w[k] = (lk - l0c) * v[k] - (l0 - l0c) * proj * p[k];
      detail::normalize3(w);
      v = w;
    }
  }
  return out;
}

struct SynthesisResult {
  DualPolSignal signal;
  double boundary_ratio = 0.0;
  bool vanishing = true;
};

inline SynthesisResult synthesize(const DarbouxPlan& plan, double boundary_threshold = 1e-3) {
  plan.validate();
  std::vector<AuxiliarySolution> aux;
  aux.reserve(plan.targets.size());
  for (const auto& t : plan.targets) aux.push_back(vacuum_auxiliary(t, plan.grid));
  DualPolSignal sig = DualPolSignal::zeros(plan.grid, Domain::Normalized);
  for (std::size_t k = 0; k < aux.size(); ++k) {
    std::vector<AuxiliarySolution> pending(std::make_move_iterator(aux.begin() + static_cast<long>(k) + 1),
                                           std::make_move_iterator(aux.end()));
    sig = darboux_step(sig, aux[k], pending);
    for (std::size_t j = 0; j < pending.size(); ++j) aux[k + 1 + j] = std::move(pending[j]);
  }
  SynthesisResult r;
  r.boundary_ratio = sig.boundary_ratio();
  r.vanishing = plan.targets.empty() || r.boundary_ratio < boundary_threshold;
  r.signal = std::move(sig);
  return r;
}

// Waveform carrying the plan's discrete spectrum. Warns on stderr when the grid
// is too short for the waveform to vanish at its edges.
inline DualPolSignal generate_from_spectrum(const DarbouxPlan& plan) {
  auto r = synthesize(plan);
  if (!r.vanishing)
    std::cerr << "nfdm: warning: Darboux waveform does not vanish at the window edges (ratio "
              << r.boundary_ratio << "); enlarge the grid\n";
  return std::move(r.signal);
}

// Time at which the soliton attached to a target would sit on its own:
// ln|b| / (2 Im lambda).
inline double soliton_center(const SpectralTarget& t) {
  const double mag = std::sqrt(std::norm(t.b1) + std::norm(t.b2));
  if (!(mag > 0.0)) throw std::invalid_argument("soliton_center: b must be nonzero");
  return std::log(mag) / (2.0 * t.lambda.imag());
}

struct WindowSuggestion {
  double center = 0.0;
  double half_width = 0.0;
};

// Window covering every soliton with tails decayed to `threshold` of the peak:
// half-width ln(1/threshold) / (2 min Im lambda) around the span of soliton
// centers, widened by the largest pairwise interaction shift
// sum_j |ln|(l_k - l_j*) / (l_k - l_j)|| / (2 Im l_k).
inline WindowSuggestion suggest_window(const std::vector<SpectralTarget>& targets, double threshold) {
  if (targets.empty()) return {0.0, 1.0};
  double im_min = targets.front().lambda.imag();
  double c_lo = soliton_center(targets.front()), c_hi = c_lo;
  double shift = 0.0;
  for (const auto& t : targets) {
    im_min = std::min(im_min, t.lambda.imag());
    c_lo = std::min(c_lo, soliton_center(t));
    c_hi = std::max(c_hi, soliton_center(t));
    double s = 0.0;
    for (const auto& o : targets)
      if (&o != &t)
        s += std::abs(std::log(std::abs((t.lambda - std::conj(o.lambda)) / (t.lambda - o.lambda))));
    shift = std::max(shift, s / (2.0 * t.lambda.imag()));
  }
  const double tail = std::log(1.0 / threshold) / (2.0 * im_min);
  return {0.5 * (c_lo + c_hi), 0.5 * (c_hi - c_lo) + tail + shift};
}

// Center for a fixed window that balances the soliton tail levels at both
// edges, modelling each component as 4 Im(lambda) exp(-2 Im(lambda) |t - t_k|).
inline double balanced_center(const std::vector<SpectralTarget>& targets, double window) {
  if (targets.empty()) return 0.0;
  const double half = 0.5 * window;
  auto edge_log = [&](double edge) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& t : targets) {
      const double a = t.lambda.imag();
      best = std::max(best, std::log(4.0 * a) - 2.0 * a * std::abs(edge - soliton_center(t)));
    }
    return best;
  };
  double lo = soliton_center(targets.front()), hi = lo;
  for (const auto& t : targets) {
    lo = std::min(lo, soliton_center(t) - window);
    hi = std::max(hi, soliton_center(t) + window);
  }
  // f(c) = left tail - right tail increases with c.
  for (int it = 0; it < 200; ++it) {
    const double c = 0.5 * (lo + hi);
    const double f = edge_log(c - half) - edge_log(c + half);
    (f > 0.0 ? hi : lo) = c;
  }
  return 0.5 * (lo + hi);
}

}  // namespace nfdm
