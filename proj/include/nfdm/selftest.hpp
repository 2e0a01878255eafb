#pragma once

// Acceptance properties of the toolkit, one pass/fail line each. Shared by the
// `selftest` CLI verb and the acceptance test binary.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nfdm/channel.hpp"
#include "nfdm/core.hpp"
#include "nfdm/nft_forward.hpp"
#include "nfdm/nft_inverse.hpp"
#include "nfdm/parallel.hpp"
#include "nfdm/scenario.hpp"
#include "nfdm/transceiver.hpp"

namespace nfdm {

struct SelftestOptions {
  std::size_t roundtrip_symbols = 1000;
  std::size_t link_symbols = 10000;
  std::size_t sweep_symbols = 10000;
  std::vector<double> osnr_list{8, 10, 12, 14, 16};
  double transmission_rx_osnr_db = 13.0;
  std::size_t threads = 0;
  std::uint64_t seed = 2024;

  static SelftestOptions quick() {
    SelftestOptions o;
    o.roundtrip_symbols = 100;
    o.link_symbols = 1000;
    o.sweep_symbols = 2000;
    return o;
  }
};

struct CriterionResult {
  std::string id;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

namespace selftest_detail {

inline std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

inline std::vector<SpectralTarget> targets_of(const NfdmSymbol& s, const SymbolDesign& d) {
  return spectral_targets(s, d);
}

// Reference symbol on the default NFT grid: 4096 samples over a window whose
// edges are below 1e-9 of the peak.
inline DualPolSignal wide_symbol(const std::vector<SpectralTarget>& t, std::size_t n = 4096) {
  const auto w = suggest_window(t, 1e-9);
  return synthesize({t, TimeGrid::centered(n, 2.0 * w.half_width, w.center)}).signal;
}

// One-sided two-proportion z statistic for "p_a > p_b".
inline double z_excess(double err_a, double bits_a, double err_b, double bits_b) {
  const double pa = err_a / bits_a, pb = err_b / bits_b;
  const double p = (err_a + err_b) / (bits_a + bits_b);
  const double se = std::sqrt(p * (1.0 - p) * (1.0 / bits_a + 1.0 / bits_b));
  if (se == 0.0) return pa > pb ? std::numeric_limits<double>::infinity() : 0.0;
  return (pa - pb) / se;
}

constexpr double kZ95 = 1.6448536269514722;

}  // namespace selftest_detail

inline CriterionResult check_roundtrip(const SelftestOptions& o) {
  using namespace selftest_detail;
  CriterionResult r{"1", "round-trip fidelity", false, {}, 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  const SymbolDesign d;
  const auto syms = random_symbols(o.roundtrip_symbols, o.seed, 1, d);
  std::vector<double> dl(syms.size()), db(syms.size());
  parallel_for(
      syms.size(),
      [&](std::size_t k) {
        const auto t = targets_of(syms[k], d);
        const auto sig = wide_symbol(t);
        const auto spec = discrete_spectrum(sig, SearchConfig::expected({d.eigenvalues[0], d.eigenvalues[1]}));
        if (spec.size() != 2) {
          dl[k] = db[k] = std::numeric_limits<double>::infinity();
          return;
        }
        for (std::size_t e = 0; e < 2; ++e) {
          dl[k] = std::max(dl[k], std::abs(spec.entries[e].lambda - t[e].lambda));
          db[k] = std::max({db[k], std::abs(spec.entries[e].b[0] - t[e].b1) / std::abs(t[e].b1),
                            std::abs(spec.entries[e].b[1] - t[e].b2) / std::abs(t[e].b2)});
        }
      },
      o.threads);
  const double max_dl = *std::max_element(dl.begin(), dl.end());
  const double max_db = *std::max_element(db.begin(), db.end());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.pass = max_dl < 1e-6 && max_db < 1e-3 && secs < 300.0;
  r.detail = fmt("%zu symbols, max |dlambda| = %.2e (< 1e-6), max rel b error = %.2e (< 1e-3), %.1f s (< 300 s)",
                 syms.size(), max_dl, max_db, secs);
  return r;
}

inline CriterionResult check_evolution_law(const SelftestOptions& o) {
  using namespace selftest_detail;
  CriterionResult r{"2", "spectral evolution law", false, {}, 0.0};
  const SymbolDesign d;
  const auto syms = random_symbols(3, o.seed, 2, d);
  const std::vector<cd> eig{d.eigenvalues[0], d.eigenvalues[1]};
  const std::vector<cd> probes{cd(0.2, 0.1), cd(-0.5, 0.4), cd(0.0, 1.0), cd(0.7, 0.0)};
  double worst_a = 0.0, worst_b = 0.0;
  for (const auto& s : syms) {
    const auto t = targets_of(s, d);
    const auto sig = wide_symbol(t);
    const MzspSolver s0(sig);
    const auto b0 = compute_b_coefficients(s0, eig);
    for (double z : {0.25, 0.5, 1.0}) {
      const auto out = propagate_normalized(sig, z, static_cast<int>(2000 * z));
      const MzspSolver s1(out);
      for (cd l : probes) worst_a = std::max(worst_a, std::abs(s1.scatter(l, false).a - s0.scatter(l, false).a));
      const auto b1 = compute_b_coefficients(s1, eig);
      for (std::size_t k = 0; k < 2; ++k) {
        const auto expect = expected_b_evolution(b0.entries[k].b, eig[k], z);
        const double bn = std::hypot(std::abs(expect[0]), std::abs(expect[1]));
        worst_b = std::max({worst_b, std::abs(b1.entries[k].b[0] - expect[0]) / bn,
                            std::abs(b1.entries[k].b[1] - expect[1]) / bn});
      }
    }
  }
  r.pass = worst_a < 1e-4 && worst_b < 1e-3;
  r.detail = fmt("z in {0.25, 0.5, 1}: max |da| = %.2e (< 1e-4), max rel b deviation = %.2e (< 1e-3)", worst_a, worst_b);
  return r;
}

inline CriterionResult check_waveform_metrics(const SelftestOptions& o) {
  using namespace selftest_detail;
  CriterionResult r{"3", "waveform metrics", false, {}, 0.0};
  const SymbolDesign d;
  FiberParams f41, f83;
  f83.span_length_km = 83.0;
  const auto np41 = normalization_from_link(47e-12, f41, true);
  const auto np83 = normalization_from_link(47e-12, f83, true);
  FrameLayout layout;
  layout.n_payload = 1024;
  const auto payload = random_symbols(layout.n_payload, o.seed, 3, d);
  const auto frame41 = build_frame(payload, layout, np41, d);
  const auto frame83 = build_frame(payload, layout, np83, d);
  const auto slot = synthesize_slot(map_bits(SymbolBits{}, d), slot_grid(layout, np41, d, 64), d, 1e-3);
  const double bw = bandwidth_99(frame41);
  const double papr = papr_db(slot);
  const double p41 = watts_to_dbm(frame41.mean_power());
  const double p83 = watts_to_dbm(frame83.mean_power());
  r.pass = std::abs(bw / 12.7e9 - 1.0) <= 0.05 && std::abs(papr - 9.49) <= 0.5 && std::abs(p41 - 5.30) <= 0.3 &&
           std::abs(p83 - 7.70) <= 0.3;
  r.detail = fmt("bw99 = %.3f GHz (12.7 +/- 5%%), PAPR = %.2f dB (9.49 +/- 0.5), Ptx = %.2f dBm (5.30 +/- 0.3), "
                 "%.2f dBm at 83 km (7.70 +/- 0.3)",
                 bw / 1e9, papr, p41, p83);
  return r;
}

inline CriterionResult check_soliton_period(const SelftestOptions&) {
  using namespace selftest_detail;
  CriterionResult r{"4", "soliton period", false, {}, 0.0};
  const FiberParams f;
  const double b2 = std::abs(beta2_from_D(f.dispersion_ps_nm_km, f.carrier_wavelength_nm)) * 1e-24;  // s^2/km
  const double W = 12.7e9;
  const double zs = kPi / 2.0 / (W * W * b2);
  r.pass = std::abs(zs / 436.0 - 1.0) <= 0.02;
  r.detail = fmt("beta2 = %.4f ps^2/km, period = %.1f km (436 +/- 2%%)", -b2 * 1e24, zs);
  return r;
}

inline CriterionResult check_trace_formula(const SelftestOptions&) {
  using namespace selftest_detail;
  CriterionResult r{"5", "trace formula", false, {}, 0.0};
  const SymbolDesign d;
  const auto sig = wide_symbol(targets_of(map_bits(SymbolBits{}, d), d));
  const double e = sig.energy();
  r.pass = std::abs(e / 3.6 - 1.0) < 1e-3;
  r.detail = fmt("normalized energy = %.8f (3.6, rel < 1e-3)", e);
  return r;
}

inline CriterionResult check_closed_forms(const SelftestOptions&) {
  using namespace selftest_detail;
  CriterionResult r{"6", "closed-form oracles", false, {}, 0.0};
  const double A = 1.0, T = 2.0;
  const std::size_t n = 4001;
  const TimeGrid rect_grid(n, T / static_cast<double>(n - 1), 0.0);
  DualPolSignal rect = DualPolSignal::zeros(rect_grid, Domain::Normalized);
  for (auto& x : rect.q1) x = A;
  const MzspSolver rs(rect);
  double worst = 0.0;
  for (cd l : {cd(0.3, 0.1), cd(1.0, 0.0), cd(-0.5, 0.5), cd(0.0, 0.8), cd(2.0, 0.0)}) {
    const cd D = std::sqrt(l * l + A * A);
    const cd expect = std::exp(cd(0, 1) * l * T) * (std::cos(D * T) - cd(0, 1) * l * std::sin(D * T) / D);
    worst = std::max(worst, std::abs(rs.scatter(l, false).a - expect) / std::abs(expect));
  }
  const auto g = TimeGrid::centered(4096, 60.0);
  DualPolSignal sech = DualPolSignal::zeros(g, Domain::Normalized);
  for (std::size_t i = 0; i < g.size(); ++i) sech.q1[i] = 1.0 / std::cosh(g.time(i));
  const auto eig = find_discrete_eigenvalues(sech);
  const double err = eig.size() == 1 ? std::abs(eig[0] - cd(0, 0.5)) : std::numeric_limits<double>::infinity();
  r.pass = worst < 1e-6 && err < 1e-6;
  r.detail = fmt("rectangle max rel error in a = %.2e (< 1e-6), sech eigenvalue error = %.2e (< 1e-6, %zu found)",
                 worst, err, eig.size());
  return r;
}

inline CriterionResult check_noiseless_link(const SelftestOptions& o) {
  using namespace selftest_detail;
  CriterionResult r{"7a", "noiseless 9 x 41.5 km link", false, {}, 0.0};
  ScenarioConfig c;
  c.mode = Mode::Transmission;
  c.sweep = {9};
  c.ase = false;
  c.n_symbols = o.link_symbols;
  c.seed = o.seed;
  const auto rep = run_scenario(c, o.threads);
  const auto& p = rep.points[0];
  r.pass = p.ber_avg == 0.0;
  r.detail = fmt("%zu symbols over 373.5 km, BER = %.3g, erasures = %zu", p.n_symbols, p.ber_avg, p.erasures);
  return r;
}

inline std::vector<CriterionResult> check_b2b_sweep(const SelftestOptions& o) {
  using namespace selftest_detail;
  ScenarioConfig c;
  c.mode = Mode::BackToBack;
  c.sweep = o.osnr_list;
  c.n_symbols = o.sweep_symbols;
  c.seed = o.seed;
  const auto rep = run_scenario(c, o.threads);

  CriterionResult mono{"7b", "BER monotone in OSNR", false, {}, 0.0};
  mono.pass = true;
  std::string bers;
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    bers += fmt("%s%.3g", i ? ", " : "", rep.points[i].ber_avg);
    if (i > 0 && rep.points[i].ber_avg > rep.points[i - 1].ber_avg) mono.pass = false;
  }
  mono.detail = fmt("%zu symbols/point, BER = [%s]", c.n_symbols, bers.c_str());

  CriterionResult order{"7c", "higher eigenvalue BER >= lower eigenvalue BER", false, {}, 0.0};
  order.pass = true;
  std::string zs;
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    const auto& p = rep.points[i];
    const double z = z_excess(p.errors[0] + p.errors[1], static_cast<double>(p.bits[0] + p.bits[1]),
                              p.errors[2] + p.errors[3], static_cast<double>(p.bits[2] + p.bits[3]));
    if (z > kZ95) order.pass = false;
    zs += fmt("%s%.3g/%.3g", i ? ", " : "", 0.5 * (p.ber[0] + p.ber[1]), 0.5 * (p.ber[2] + p.ber[3]));
  }
  order.detail = fmt("lambda1/lambda2 BER per OSNR = [%s]; fails if lambda1 exceeds lambda2 at 95%% confidence",
                     zs.c_str());
  return {mono, order};
}

inline CriterionResult check_span_length(const SelftestOptions& o) {
  using namespace selftest_detail;
  CriterionResult r{"7d", "41.5 km spans no worse than 83 km spans", false, {}, 0.0};
  auto run = [&](double span_km, std::vector<double> spans) {
    ScenarioConfig c;
    c.mode = Mode::Transmission;
    c.fiber.span_length_km = span_km;
    c.sweep = std::move(spans);
    c.n_symbols = o.sweep_symbols;
    c.seed = o.seed;
    c.rx_osnr_db = o.transmission_rx_osnr_db;
    return run_scenario(c, o.threads);
  };
  const auto short_spans = run(41.5, {2, 4, 6, 8});
  const auto long_spans = run(83.0, {1, 2, 3, 4});
  r.pass = true;
  std::string s;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& a = short_spans.points[i];
    const auto& b = long_spans.points[i];
    auto sum = [](const auto& v) { return static_cast<double>(v[0] + v[1] + v[2] + v[3]); };
    const double z = z_excess(sum(a.errors), sum(a.bits), sum(b.errors), sum(b.bits));
    if (z > kZ95) r.pass = false;
    s += fmt("%s%.0f km: %.3g vs %.3g", i ? ", " : "", 83.0 * (i + 1), a.ber_avg, b.ber_avg);
  }
  r.detail = fmt("receiver OSNR %.1f dB, %zu symbols/point, BER 41.5 vs 83: [%s]", o.transmission_rx_osnr_db,
                 o.sweep_symbols, s.c_str());
  return r;
}

inline CriterionResult check_ssfm(const SelftestOptions&) {
  using namespace selftest_detail;
  CriterionResult r{"8", "split-step integrity", false, {}, 0.0};
  const SymbolDesign d;
  const auto sig = wide_symbol(targets_of(map_bits(bits_from_index(0x6c), d), d));
  const double e0 = sig.energy();
  const double drift = std::abs(propagate_normalized(sig, 1.0, 400).energy() - e0) / e0;

  FiberParams fiber;
  fiber.n_spans = 1;
  const auto np = normalization_from_link(47e-12, fiber, true);
  FrameLayout layout;
  layout.n_payload = 16;
  layout.n_training = 0;
  const auto frame = build_frame(random_symbols(16, 5, 5, d), layout, np, d);
  SsfmConfig coarse, fine;
  fine.steps_per_span = 2 * coarse.steps_per_span;
  const auto a = propagate_link(frame, fiber, coarse);
  const auto b = propagate_link(frame, fiber, fine);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    diff = std::max({diff, std::abs(a.q1[i] - b.q1[i]), std::abs(a.q2[i] - b.q2[i])});
  const double rel = diff / std::sqrt(b.peak_power());
  r.pass = drift < 1e-6 && rel < 1e-5;
  r.detail = fmt("lossless energy drift over z = 1: %.2e (< 1e-6); step halving at 41.5 km, 5.3 dBm: %.2e of peak "
                 "(< 1e-5)",
                 drift, rel);
  return r;
}

inline CriterionResult check_determinism(const SelftestOptions& o) {
  using namespace selftest_detail;
  CriterionResult r{"9", "determinism", false, {}, 0.0};
  ScenarioConfig c;
  c.mode = Mode::BackToBack;
  c.sweep = {10, 14};
  c.n_symbols = 1000;
  c.seed = o.seed;
  const auto a = report_csv(run_scenario(c, 1));
  const auto b = report_csv(run_scenario(c, 1));
  const auto t = report_csv(run_scenario(c, 4));
  ScenarioConfig tr = c;
  tr.mode = Mode::Transmission;
  tr.sweep = {1, 2};
  tr.rx_osnr_db = 12.0;
  const auto x = report_csv(run_scenario(tr, 1));
  const auto y = report_csv(run_scenario(tr, 3));
  r.pass = a == b && a == t && x == y;
  r.detail = fmt("B2B repeat %s, B2B 1 vs 4 threads %s, transmission 1 vs 3 threads %s", a == b ? "identical" : "DIFFERENT",
                 a == t ? "identical" : "DIFFERENT", x == y ? "identical" : "DIFFERENT");
  return r;
}

// Runs every criterion, printing one line each as it completes. Returns true
// when all pass.
inline bool run_selftest(const SelftestOptions& o, std::ostream& os, std::vector<CriterionResult>* out = nullptr) {
  using Clock = std::chrono::steady_clock;
  std::vector<std::function<std::vector<CriterionResult>()>> checks{
      [&] { return std::vector{check_roundtrip(o)}; },
      [&] { return std::vector{check_evolution_law(o)}; },
      [&] { return std::vector{check_waveform_metrics(o)}; },
      [&] { return std::vector{check_soliton_period(o)}; },
      [&] { return std::vector{check_trace_formula(o)}; },
      [&] { return std::vector{check_closed_forms(o)}; },
      [&] { return std::vector{check_noiseless_link(o)}; },
      [&] { return check_b2b_sweep(o); },
      [&] { return std::vector{check_span_length(o)}; },
      [&] { return std::vector{check_ssfm(o)}; },
      [&] { return std::vector{check_determinism(o)}; },
  };
  bool all = true;
  for (const auto& check : checks) {
    const auto t0 = Clock::now();
    std::vector<CriterionResult> rs;
    try {
      rs = check();
    } catch (const std::exception& e) {
      rs = {CriterionResult{"?", "criterion raised", false, e.what(), 0.0}};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    for (auto& res : rs) {
      res.seconds = secs / static_cast<double>(rs.size());
      os << (res.pass ? "PASS" : "FAIL") << "  [" << res.id << "] " << res.name << ": " << res.detail << " ("
         << selftest_detail::fmt("%.1f s", secs) << ")" << std::endl;
      all = all && res.pass;
      if (out) out->push_back(res);
    }
  }
  return all;
}

}  // namespace nfdm
