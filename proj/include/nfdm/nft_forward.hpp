#pragma once

// Direct nonlinear Fourier transform for the Manakov system.
//
// The spectral problem v' = (lambda A + B(t)) v with A = diag(-i, i, i) and
// B = [[0, q1, q2], [-q1*, 0, 0], [-q2*, 0, 0]] is integrated one step per
// sample with the trapezoidal rule applied in the interaction picture:
//
//   (I - h/2 B_{n+1}) v_{n+1} = exp(h lambda A) (I + h/2 B_n) v_n
//
// The step is exact on the vacuum and unitary for real lambda. By default the
// scattering data are Richardson-extrapolated from the full grid and the grid
// with every other sample, which lifts the O(h^2) scheme to O(h^4).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nfdm/core.hpp"

namespace nfdm {

struct NftOptions {
  bool richardson = true;
  std::size_t renorm_interval = 64;
  // Matching point for forward-backward integration as a fraction of the
  // window, measured from the left boundary.
  double match_fraction = 0.5;
  double ill_conditioned_threshold = 1e8;
};

struct ScatteringData {
  cd a{1.0, 0.0};
  cd a_prime{0.0, 0.0};
  std::array<cd, 2> b{};
};

struct DiscreteEigen {
  cd lambda;
  std::array<cd, 2> b{};
  cd a_prime;
  double condition = 1.0;  // 2-norm condition of the right Jost basis at the matching point
  bool ill_conditioned = false;
};

struct DiscreteSpectrum {
  std::vector<DiscreteEigen> entries;
  std::size_t size() const { return entries.size(); }
};

// Newton-Raphson eigenvalue search settings.
struct SearchConfig {
  double re_min = -2.0;
  double re_max = 2.0;
  double im_max = 2.0;
  int n_re = 8;
  int n_im = 8;
  std::vector<cd> warm_start;  // when non-empty these replace the seed grid
  double step_tol = 1e-12;
  double root_tol = 1e-10;
  double accept_tol = 1e-6;  // |a| bound for a converged root to be kept
  int max_iter = 50;
  double dedup_radius = 1e-3;

  static SearchConfig expected(std::vector<cd> seeds) {
    SearchConfig c;
    c.warm_start = std::move(seeds);
    return c;
  }

  std::vector<cd> seeds() const {
    if (!warm_start.empty()) return warm_start;
    std::vector<cd> s;
    s.reserve(static_cast<std::size_t>(n_re * n_im));
    for (int i = 0; i < n_im; ++i) {
      const double im = im_max * (i + 1) / n_im;
      for (int r = 0; r < n_re; ++r) {
        const double re = n_re == 1 ? 0.5 * (re_min + re_max)
                                    : re_min + (re_max - re_min) * r / (n_re - 1);
        s.emplace_back(re, im);
      }
    }
    return s;
  }
};

namespace detail {

// m * exp(log_mag): keeps exponentially large or small Jost quantities finite.
struct Scaled {
  cd m;
  double log_mag = 0.0;
  cd value() const { return m * std::exp(log_mag); }
};

// a and b combined over levels with weights (4, -1)/3.
inline cd richardson(const Scaled& fine, const Scaled& coarse, double* log_out = nullptr) {
  const double L = std::max(fine.log_mag, coarse.log_mag);
  const cd r = (4.0 * fine.m * std::exp(fine.log_mag - L) - coarse.m * std::exp(coarse.log_mag - L)) / 3.0;
  if (log_out) {
    *log_out = L;
    return r;
  }
  return r * std::exp(L);
}

inline double max_abs(const std::array<cd, 3>& v) {
  return std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])});
}

// One resolution level of the sampled potential.
struct PotentialLevel {
  std::vector<cd> q1, q2;
  double t0 = 0.0;
  double h = 1.0;

  std::size_t size() const { return q1.size(); }
  double t_end() const { return t0 + h * static_cast<double>(size() - 1); }
};

struct ForwardResult {
  std::array<cd, 3> v{};
  std::array<cd, 3> dv{};
  double log_scale = 0.0;
};

// Left Jost solution phi, normalized so that phi = v exp(log_scale) exp(-i lambda t0),
// integrated from index 0 to index `stop`.
inline ForwardResult integrate_forward(const PotentialLevel& p, cd lambda, bool with_derivative,
                                       std::size_t stop, std::size_t renorm) {
  const double h = p.h;
  const cd em = std::exp(cd(0, -1) * lambda * h);
  const cd ep = std::exp(cd(0, 1) * lambda * h);
  ForwardResult r;
  r.v = {cd(1), cd(0), cd(0)};
  for (std::size_t n = 0; n < stop; ++n) {
    const cd f1 = 0.5 * h * p.q1[n], f2 = 0.5 * h * p.q2[n];
    const cd g1 = 0.5 * h * p.q1[n + 1], g2 = 0.5 * h * p.q2[n + 1];
    const double den = 1.0 + std::norm(g1) + std::norm(g2);
    auto step = [&](const std::array<cd, 3>& x) {
      // w = exp(h lambda A) (I + h/2 B_n) x
      std::array<cd, 3> w{(x[0] + f1 * x[1] + f2 * x[2]) * em, (x[1] - std::conj(f1) * x[0]) * ep,
                          (x[2] - std::conj(f2) * x[0]) * ep};
      return w;
    };
    auto solve = [&](const std::array<cd, 3>& w) {
      // (I - h/2 B_{n+1}) y = w
      std::array<cd, 3> y;
      y[0] = (w[0] + g1 * w[1] + g2 * w[2]) / den;
      y[1] = w[1] - std::conj(g1) * y[0];
      y[2] = w[2] - std::conj(g2) * y[0];
      return y;
    };
    const auto w = step(r.v);
    if (with_derivative) {
      auto dw = step(r.dv);
      dw[0] += cd(0, -h) * w[0];
      dw[1] += cd(0, h) * w[1];
      dw[2] += cd(0, h) * w[2];
      r.dv = solve(dw);
    }
    r.v = solve(w);
    if ((n + 1) % renorm == 0 || n + 1 == stop) {
      const double s = max_abs(r.v);
      if (s > 0.0 && std::isfinite(s)) {
        for (auto& x : r.v) x /= s;
        for (auto& x : r.dv) x /= s;
        r.log_scale += std::log(s);
      }
    }
  }
  return r;
}

struct BackwardResult {
  std::array<std::array<cd, 3>, 2> cols{};  // right Jost basis columns
  double log_scale = 0.0;
};

// Right Jost basis psi = W exp(log_scale) exp(i lambda t_end), integrated from
// the last index back to `stop`.
inline BackwardResult integrate_backward(const PotentialLevel& p, cd lambda, std::size_t stop,
                                         std::size_t renorm) {
  const double h = p.h;
  const cd em_inv = std::exp(cd(0, 1) * lambda * h);
  const cd ep_inv = std::exp(cd(0, -1) * lambda * h);
  BackwardResult r;
  r.cols[0] = {cd(0), cd(1), cd(0)};
  r.cols[1] = {cd(0), cd(0), cd(1)};
  std::size_t count = 0;
  for (std::size_t n = p.size() - 1; n > stop; --n) {
    const cd g1 = 0.5 * h * p.q1[n], g2 = 0.5 * h * p.q2[n];
    const cd f1 = 0.5 * h * p.q1[n - 1], f2 = 0.5 * h * p.q2[n - 1];
    const double den = 1.0 + std::norm(f1) + std::norm(f2);
    for (auto& x : r.cols) {
      // y = exp(-h lambda A) (I - h/2 B_n) x, then solve (I + h/2 B_{n-1}) z = y
      const cd y0 = (x[0] - g1 * x[1] - g2 * x[2]) * em_inv;
      const cd y1 = (x[1] + std::conj(g1) * x[0]) * ep_inv;
      const cd y2 = (x[2] + std::conj(g2) * x[0]) * ep_inv;
      const cd z0 = (y0 - f1 * y1 - f2 * y2) / den;
      x = {z0, y1 + std::conj(f1) * z0, y2 + std::conj(f2) * z0};
    }
    ++count;
    if (count % renorm == 0 || n - 1 == stop) {
      const double s = std::max(max_abs(r.cols[0]), max_abs(r.cols[1]));
      if (s > 0.0 && std::isfinite(s)) {
        for (auto& c : r.cols)
          for (auto& x : c) x /= s;
        r.log_scale += std::log(s);
      }
    }
  }
  return r;
}

struct MatchResult {
  std::array<cd, 2> b{};
  double condition = 1.0;
};

// Least-squares solve of W x = v for a 3x2 W, with the condition number of W.
inline MatchResult match_least_squares(const std::array<std::array<cd, 3>, 2>& W, const std::array<cd, 3>& v) {
  cd g00 = 0, g01 = 0, g11 = 0, r0 = 0, r1 = 0;
  for (int k = 0; k < 3; ++k) {
    g00 += std::norm(W[0][k]);
    g11 += std::norm(W[1][k]);
    g01 += std::conj(W[0][k]) * W[1][k];
    r0 += std::conj(W[0][k]) * v[k];
    r1 += std::conj(W[1][k]) * v[k];
  }
  const cd det = g00 * g11 - g01 * std::conj(g01);
  MatchResult m;
  m.b[0] = (g11 * r0 - g01 * r1) / det;
  m.b[1] = (g00 * r1 - std::conj(g01) * r0) / det;
  const double tr = g00.real() + g11.real();
  const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det.real()));
  const double lmax = 0.5 * tr + disc, lmin = 0.5 * tr - disc;
  m.condition = lmin > 0.0 ? std::sqrt(lmax / lmin) : std::numeric_limits<double>::infinity();
  return m;
}

}  // namespace detail

// Prepared potential for repeated scattering evaluations at many lambda.
class MzspSolver {
 public:
  explicit MzspSolver(const DualPolSignal& sig, NftOptions opt = {}) : opt_(opt) {
    if (sig.domain != Domain::Normalized) throw std::invalid_argument("MzspSolver: expected normalized signal");
    sig.validate();
    if (opt_.renorm_interval == 0) opt_.renorm_interval = 64;
    fine_.q1 = sig.q1;
    fine_.q2 = sig.q2;
    fine_.t0 = sig.grid.t_start();
    fine_.h = sig.grid.dt();
    if (opt_.richardson && sig.size() < 5) opt_.richardson = false;
    if (opt_.richardson) {
      // Both levels must end on the same sample; the potential vanishes outside
      // the window, so an even-length grid is closed with a zero sample.
      if (fine_.size() % 2 == 0) {
        fine_.q1.emplace_back(0.0);
        fine_.q2.emplace_back(0.0);
      }
      coarse_.t0 = fine_.t0;
      coarse_.h = 2.0 * fine_.h;
      for (std::size_t i = 0; i < fine_.size(); i += 2) {
        coarse_.q1.push_back(fine_.q1[i]);
        coarse_.q2.push_back(fine_.q2[i]);
      }
    }
  }

  const NftOptions& options() const { return opt_; }

  ScatteringData scatter(cd lambda, bool with_derivative) const {
    if (!opt_.richardson) {
      const auto s = scatter_level(fine_, lambda, with_derivative);
      return {s.a.value(), s.a_prime.value(), {s.b[0].value(), s.b[1].value()}};
    }
    const auto f = scatter_level(fine_, lambda, with_derivative);
    const auto c = scatter_level(coarse_, lambda, with_derivative);
    ScatteringData out;
    out.a = detail::richardson(f.a, c.a);
    out.a_prime = detail::richardson(f.a_prime, c.a_prime);
    out.b[0] = detail::richardson(f.b[0], c.b[0]);
    out.b[1] = detail::richardson(f.b[1], c.b[1]);
    return out;
  }

  // Newton increment a / a' together with |a|, evaluated without forming the
  // possibly overflowing a itself.
  struct NewtonTerms {
    cd step;
    double abs_a;
  };

  NewtonTerms newton_terms(cd lambda) const {
    if (!opt_.richardson) {
      const auto s = scatter_level(fine_, lambda, true);
      return {s.a.m / s.a_prime.m * std::exp(s.a.log_mag - s.a_prime.log_mag), std::abs(s.a.value())};
    }
    const auto f = scatter_level(fine_, lambda, true);
    const auto c = scatter_level(coarse_, lambda, true);
    double la = 0, ld = 0;
    const cd a = detail::richardson(f.a, c.a, &la);
    const cd d = detail::richardson(f.a_prime, c.a_prime, &ld);
    return {a / d * std::exp(la - ld), std::abs(a) * std::exp(la)};
  }

  // Scattering vector b at an eigenvalue from forward-backward matching.
  detail::MatchResult match_b(cd lambda) const {
    if (!opt_.richardson) return match_level(fine_, lambda, match_index(fine_.size(), false));
    const std::size_t m = match_index(fine_.size(), true);
    const auto f = match_level(fine_, lambda, m);
    const auto c = match_level(coarse_, lambda, m / 2);
    detail::MatchResult out;
    out.b[0] = (4.0 * f.b[0] - c.b[0]) / 3.0;
    out.b[1] = (4.0 * f.b[1] - c.b[1]) / 3.0;
    out.condition = f.condition;
    return out;
  }

 private:
  struct LevelScatter {
    detail::Scaled a, a_prime;
    std::array<detail::Scaled, 2> b;
  };

  LevelScatter scatter_level(const detail::PotentialLevel& p, cd lambda, bool with_derivative) const {
    const auto r = detail::integrate_forward(p, lambda, with_derivative, p.size() - 1, opt_.renorm_interval);
    const double span = p.t_end() - p.t0;
    // a = v1 e^{L} e^{i lambda span}
    const double la = r.log_scale - lambda.imag() * span;
    const cd pa = std::exp(cd(0, lambda.real() * span));
    LevelScatter s;
    s.a = {r.v[0] * pa, la};
    s.a_prime = {(r.dv[0] + cd(0, span) * r.v[0]) * pa, la};
    // b = v_{2,3} e^{L} e^{-i lambda (t0 + t_end)}
    const double sum = p.t0 + p.t_end();
    const double lb = r.log_scale + lambda.imag() * sum;
    const cd pb = std::exp(cd(0, -lambda.real() * sum));
    s.b[0] = {r.v[1] * pb, lb};
    s.b[1] = {r.v[2] * pb, lb};
    return s;
  }

  std::size_t match_index(std::size_t n, bool even) const {
    const double frac = std::clamp(opt_.match_fraction, 0.0, 1.0);
    auto m = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n - 1)));
    if (even) m -= m % 2;
    return std::clamp<std::size_t>(m, 0, n - 1);
  }

  detail::MatchResult match_level(const detail::PotentialLevel& p, cd lambda, std::size_t m) const {
    const auto fwd = detail::integrate_forward(p, lambda, false, m, opt_.renorm_interval);
    const auto bwd = detail::integrate_backward(p, lambda, m, opt_.renorm_interval);
    auto res = detail::match_least_squares(bwd.cols, fwd.v);
    // phi = v e^{L1} e^{-i lambda t0}, psi = W e^{L2} e^{i lambda t_end}
    const cd factor = std::exp(fwd.log_scale - bwd.log_scale + cd(0, -1) * lambda * (p.t0 + p.t_end()));
    res.b[0] *= factor;
    res.b[1] *= factor;
    return res;
  }

  NftOptions opt_;
  detail::PotentialLevel fine_, coarse_;
};

// Scattering data at a single spectral point.
inline ScatteringData mzsp_scatter(const DualPolSignal& sig, cd lambda, bool with_derivative,
                                   const NftOptions& opt = {}) {
  return MzspSolver(sig, opt).scatter(lambda, with_derivative);
}

// Newton-Raphson refinement of a single seed; nullopt when it fails to converge
// to an upper-half-plane root.
// Damped Newton iteration on a(lambda), optionally deflated by roots already
// found: a(l) / prod (l - r) / (l - r*). Steps that would leave the upper half
// plane are halved.
inline std::optional<cd> newton_refine(const MzspSolver& solver, cd seed, const SearchConfig& cfg,
                                       const std::vector<cd>& deflate = {}) {
  cd lambda = seed;
  const double bound = 10.0 * std::max({std::abs(cfg.re_min), std::abs(cfg.re_max), cfg.im_max, std::abs(seed)});
  for (int it = 0; it < cfg.max_iter; ++it) {
    const auto t = solver.newton_terms(lambda);
    if (!std::isfinite(t.step.real()) || !std::isfinite(t.step.imag())) return std::nullopt;
    if (t.abs_a < cfg.root_tol) return lambda.imag() > 0.0 ? std::optional<cd>(lambda) : std::nullopt;
    cd step = t.step;
    if (!deflate.empty()) {
      cd log_deriv = 1.0 / step;
      for (const cd r : deflate) log_deriv -= 1.0 / (lambda - r) - 1.0 / (lambda - std::conj(r));
      step = 1.0 / log_deriv;
    }
    int halvings = 0;
    while (!((lambda - step).imag() > 0.0) && halvings < 40) step *= 0.5, ++halvings;
    lambda -= step;
    if (!(lambda.imag() > 0.0) || std::abs(lambda) > bound) return std::nullopt;
    if (std::abs(step) < cfg.step_tol) {
      const auto check = solver.newton_terms(lambda);
      if (check.abs_a < cfg.accept_tol) return lambda;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

// Seeds are refined once directly; seeds that did not yield a new root are
// retried with the roots found so far deflated out.
inline std::vector<cd> find_discrete_eigenvalues(const MzspSolver& solver, const SearchConfig& cfg = {}) {
  std::vector<cd> found;
  auto add = [&](const std::optional<cd>& root) {
    if (!root) return false;
    const bool dup = std::any_of(found.begin(), found.end(),
                                 [&](cd f) { return std::abs(f - *root) <= cfg.dedup_radius; });
    if (!dup) found.push_back(*root);
    return !dup;
  };
  std::vector<cd> retry;
  for (const cd seed : cfg.seeds())
    if (!add(newton_refine(solver, seed, cfg))) retry.push_back(seed);
  if (!found.empty()) {
    for (const cd seed : retry) {
      const std::vector<cd> known = found;
      const auto root = newton_refine(solver, seed, cfg, known);
      if (root) {
        const auto polished = newton_refine(solver, *root, cfg);
        add(polished ? polished : root);
      }
    }
  }
  std::sort(found.begin(), found.end(), [](cd x, cd y) { return x.imag() < y.imag(); });
  return found;
}

inline std::vector<cd> find_discrete_eigenvalues(const DualPolSignal& sig, const SearchConfig& cfg = {},
                                                 const NftOptions& opt = {}) {
  return find_discrete_eigenvalues(MzspSolver(sig, opt), cfg);
}

inline DiscreteSpectrum compute_b_coefficients(const MzspSolver& solver, const std::vector<cd>& eigenvalues) {
  DiscreteSpectrum spec;
  for (const cd lambda : eigenvalues) {
    const auto m = solver.match_b(lambda);
    DiscreteEigen e;
    e.lambda = lambda;
    e.b = m.b;
    e.a_prime = solver.scatter(lambda, true).a_prime;
    e.condition = m.condition;
    e.ill_conditioned = !(m.condition < solver.options().ill_conditioned_threshold);
    spec.entries.push_back(e);
  }
  return spec;
}

inline DiscreteSpectrum compute_b_coefficients(const DualPolSignal& sig, const std::vector<cd>& eigenvalues,
                                               const NftOptions& opt = {}) {
  return compute_b_coefficients(MzspSolver(sig, opt), eigenvalues);
}

struct ContinuousSpectrum {
  std::vector<double> lambda;
  std::vector<std::array<cd, 2>> qhat;  // b / a; NaN at spectral singularities
  std::vector<std::size_t> singularities;
};

inline ContinuousSpectrum continuous_spectrum(const DualPolSignal& sig, const std::vector<double>& lambda_grid,
                                              const NftOptions& opt = {}) {
  const MzspSolver solver(sig, opt);
  ContinuousSpectrum out;
  out.lambda = lambda_grid;
  out.qhat.resize(lambda_grid.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    const auto s = solver.scatter(cd(lambda_grid[i], 0.0), false);
    if (std::abs(s.a) < 1e-12) {
      out.singularities.push_back(i);
      out.qhat[i] = {cd(nan, nan), cd(nan, nan)};
      continue;
    }
    out.qhat[i] = {s.b[0] / s.a, s.b[1] / s.a};
  }
  return out;
}

// Energy carried by the continuous spectrum, (1/pi) int log(1 + |qhat|^2) dlambda,
// by the trapezoidal rule over the supplied grid. Singular points are skipped.
inline double continuous_energy(const ContinuousSpectrum& cs) {
  double e = 0.0;
  for (std::size_t i = 0; i + 1 < cs.lambda.size(); ++i) {
    auto density = [&](std::size_t k) {
      const double v = std::log1p(std::norm(cs.qhat[k][0]) + std::norm(cs.qhat[k][1]));
      return std::isfinite(v) ? v : 0.0;
    };
    e += 0.5 * (density(i) + density(i + 1)) * (cs.lambda[i + 1] - cs.lambda[i]);
  }
  return e / kPi;
}

// Full discrete NFT: eigenvalue search followed by forward-backward b.
inline DiscreteSpectrum discrete_spectrum(const DualPolSignal& sig, const SearchConfig& cfg = {},
                                          const NftOptions& opt = {}) {
  const MzspSolver solver(sig, opt);
  return compute_b_coefficients(solver, find_discrete_eigenvalues(solver, cfg));
}

}  // namespace nfdm
