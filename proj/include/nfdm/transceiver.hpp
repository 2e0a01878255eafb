#pragma once

// DP-NFDM transmitter and receiver chain: bits -> b coefficients -> Darboux
// slots -> frame, and back through front end, synchronization, NFT detection,
// derotation, blind phase search and minimum-distance decisions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfdm/channel.hpp"
#include "nfdm/core.hpp"
#include "nfdm/fft.hpp"
#include "nfdm/nft_forward.hpp"
#include "nfdm/nft_inverse.hpp"
#include "nfdm/parallel.hpp"
#include "nfdm/random.hpp"

namespace nfdm {

// One QPSK ring.
struct ConstellationSpec {
  double radius = 1.0;
  double phase_offset = 0.0;
  int cardinality = 4;

  void validate() const {
    if (cardinality != 4) throw std::invalid_argument("ConstellationSpec: only QPSK (cardinality 4) is supported");
    if (!(radius > 0.0)) throw std::invalid_argument("ConstellationSpec: radius must be > 0");
  }
  bool operator==(const ConstellationSpec&) const = default;
};

// Eigenvalues and their rings. Both polarizations of an eigenvalue share a ring.
struct SymbolDesign {
  std::array<cd, 2> eigenvalues{cd(0, 0.3), cd(0, 0.6)};
  std::array<ConstellationSpec, 2> rings{ConstellationSpec{5.0, kPi / 4.0, 4}, ConstellationSpec{0.14, 0.0, 4}};

  void validate() const {
    for (const auto& r : rings) r.validate();
    for (const cd l : eigenvalues)
      if (!(l.imag() > 0.0)) throw std::invalid_argument("SymbolDesign: eigenvalues must lie in the upper half plane");
    if (eigenvalues[0] == eigenvalues[1]) throw std::invalid_argument("SymbolDesign: eigenvalues must be distinct");
  }
  bool operator==(const SymbolDesign&) const = default;
};

using SymbolBits = std::array<bool, 8>;

// points = (b1(l1), b2(l1), b1(l2), b2(l2)); bits 2k, 2k+1 select points[k].
struct NfdmSymbol {
  SymbolBits bits{};
  std::array<cd, 4> points{};
};

// Gray quadrant: 00 -> 0, 01 -> 1, 11 -> 2, 10 -> 3 (steps of pi/2).
inline int gray_quadrant(bool hi, bool lo) {
  static constexpr int table[2][2] = {{0, 1}, {3, 2}};
  return table[hi][lo];
}

inline std::array<bool, 2> gray_bits(int quadrant) {
  static constexpr bool table[4][2] = {{false, false}, {false, true}, {true, true}, {true, false}};
  const int q = ((quadrant % 4) + 4) % 4;
  return {table[q][0], table[q][1]};
}

inline cd ring_point(const ConstellationSpec& ring, int quadrant) {
  return std::polar(ring.radius, ring.phase_offset + kPi / 2.0 * quadrant);
}

inline const ConstellationSpec& ring_of(const SymbolDesign& d, std::size_t point) { return d.rings[point / 2]; }

inline NfdmSymbol map_bits(const SymbolBits& bits, const SymbolDesign& design = {}) {
  NfdmSymbol s;
  s.bits = bits;
  for (std::size_t k = 0; k < 4; ++k)
    s.points[k] = ring_point(ring_of(design, k), gray_quadrant(bits[2 * k], bits[2 * k + 1]));
  return s;
}

// Nearest ring point quadrant.
inline int nearest_quadrant(cd x, const ConstellationSpec& ring) {
  const double ang = std::arg(x) - ring.phase_offset;
  return static_cast<int>(std::lround(ang / (kPi / 2.0))) & 3;
}

inline SymbolBits demap(const std::array<cd, 4>& points, const SymbolDesign& design = {}) {
  SymbolBits bits{};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto b = gray_bits(nearest_quadrant(points[k], ring_of(design, k)));
    bits[2 * k] = b[0];
    bits[2 * k + 1] = b[1];
  }
  return bits;
}

inline SymbolBits bits_from_index(unsigned v) {
  SymbolBits b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = (v >> (7 - i)) & 1u;
  return b;
}

inline std::vector<NfdmSymbol> random_symbols(std::size_t n, std::uint64_t seed, std::uint64_t stream,
                                              const SymbolDesign& design = {}) {
  NoiseStream rng(seed, stream);
  std::vector<NfdmSymbol> out(n);
  for (auto& s : out) s = map_bits(bits_from_index(static_cast<unsigned>(rng.bits() & 0xffu)), design);
  return out;
}

struct FrameLayout {
  double symbol_slot_s = 1e-9;
  std::size_t n_payload = 0;
  std::size_t n_training = 64;
  std::uint64_t training_seed = 0x5eed;
  std::size_t samples_per_slot = 64;
  double boundary_threshold = 1e-3;  // edge power over peak power within a slot

  void validate() const {
    if (!(symbol_slot_s > 0.0)) throw std::invalid_argument("FrameLayout: symbol_slot_s must be > 0");
    if (samples_per_slot < 8) throw std::invalid_argument("FrameLayout: samples_per_slot must be >= 8");
    if (!(boundary_threshold > 0.0)) throw std::invalid_argument("FrameLayout: boundary_threshold must be > 0");
  }
  std::size_t n_slots() const { return n_training + n_payload; }
  double sample_period() const { return symbol_slot_s / static_cast<double>(samples_per_slot); }
};

inline std::vector<SpectralTarget> spectral_targets(const NfdmSymbol& s, const SymbolDesign& design) {
  return {{design.eigenvalues[0], s.points[0], s.points[1]}, {design.eigenvalues[1], s.points[2], s.points[3]}};
}

// Normalized time grid of one slot with `oversample` times the line rate.
// Every symbol shares it since |b| is fixed per eigenvalue.
inline TimeGrid slot_grid(const FrameLayout& layout, const NormalizationParams& np, const SymbolDesign& design,
                          std::size_t oversample = 1) {
  const double window = layout.symbol_slot_s / np.T0_s;
  const NfdmSymbol ref = map_bits(SymbolBits{}, design);
  const double center = balanced_center(spectral_targets(ref, design), window);
  return TimeGrid::centered(layout.samples_per_slot * oversample, window, center);
}

inline std::vector<NfdmSymbol> training_symbols(const FrameLayout& layout, const SymbolDesign& design = {}) {
  return random_symbols(layout.n_training, layout.training_seed, 0, design);
}

// Edge power over peak power of one slot waveform.
inline double slot_edge_ratio(const DualPolSignal& slot) {
  const std::size_t n = slot.size();
  const double peak = slot.peak_power();
  return peak > 0.0 ? std::max(slot.power(0), slot.power(n - 1)) / peak : 0.0;
}

// Normalized waveform of one symbol on the slot grid; throws if its tails
// overflow the slot.
inline DualPolSignal synthesize_slot(const NfdmSymbol& s, const TimeGrid& grid, const SymbolDesign& design,
                                     double boundary_threshold) {
  auto sig = synthesize({spectral_targets(s, design), grid}).signal;
  const double r = slot_edge_ratio(sig);
  if (r > boundary_threshold)
    throw std::runtime_error("build_frame: slot overflow (edge/peak power " + std::to_string(r) + " > " +
                             std::to_string(boundary_threshold) + ")");
  return sig;
}

// Amplitude predistortion for a sine-shaped modulator transfer: each
// quadrature x is replaced by (2/pi) m asin(x / m), m the largest quadrature
// magnitude in the frame.
inline DualPolSignal predistort_asin(const DualPolSignal& sig) {
  double m = 0.0;
  for (std::size_t i = 0; i < sig.size(); ++i)
    m = std::max({m, std::abs(sig.q1[i].real()), std::abs(sig.q1[i].imag()), std::abs(sig.q2[i].real()),
                  std::abs(sig.q2[i].imag())});
  if (m == 0.0) return sig;
  auto f = [m](double x) { return 2.0 / kPi * m * std::asin(std::clamp(x / m, -1.0, 1.0)); };
  DualPolSignal out = sig;
  for (std::size_t i = 0; i < sig.size(); ++i) {
    out.q1[i] = {f(sig.q1[i].real()), f(sig.q1[i].imag())};
    out.q2[i] = {f(sig.q2[i].real()), f(sig.q2[i].imag())};
  }
  return out;
}

struct FrameOptions {
  bool predistort = false;
  std::size_t threads = 0;
};

namespace detail {

inline DualPolSignal assemble_slots(const std::vector<NfdmSymbol>& symbols, const FrameLayout& layout,
                                    const NormalizationParams& np, const SymbolDesign& design, std::size_t threads) {
  const TimeGrid grid = slot_grid(layout, np, design);
  const std::size_t sps = layout.samples_per_slot;
  DualPolSignal out =
      DualPolSignal::zeros(TimeGrid(symbols.size() * sps, layout.sample_period(), 0.0), Domain::Physical);
  const double scale = std::sqrt(np.P_w);
  parallel_for(
      symbols.size(),
      [&](std::size_t k) {
        const auto slot = synthesize_slot(symbols[k], grid, design, layout.boundary_threshold);
        for (std::size_t i = 0; i < sps; ++i) {
          out.q1[k * sps + i] = slot.q1[i] * scale;
          out.q2[k * sps + i] = slot.q2[i] * scale;
        }
      },
      threads);
  return out;
}

}  // namespace detail

// Physical frame: training slots followed by the payload, time origin at the
// start of the first slot.
inline DualPolSignal build_frame(const std::vector<NfdmSymbol>& payload, const FrameLayout& layout,
                                 const NormalizationParams& np, const SymbolDesign& design = {},
                                 const FrameOptions& opt = {}) {
  layout.validate();
  design.validate();
  if (payload.size() != layout.n_payload) throw std::invalid_argument("build_frame: payload size differs from layout");
  std::vector<NfdmSymbol> all = training_symbols(layout, design);
  all.insert(all.end(), payload.begin(), payload.end());
  const auto out = detail::assemble_slots(all, layout, np, design, opt.threads);
  return opt.predistort ? predistort_asin(out) : out;
}

// Training slots as expected after normalized distance z: each b rotated by
// its eigenvalue's evolution factor.
inline DualPolSignal training_reference(const FrameLayout& layout, const NormalizationParams& np,
                                        const SymbolDesign& design = {}, double z = 0.0) {
  layout.validate();
  design.validate();
  auto train = training_symbols(layout, design);
  for (auto& t : train)
    for (std::size_t e = 0; e < 2; ++e) {
      const auto b = expected_b_evolution({t.points[2 * e], t.points[2 * e + 1]}, design.eigenvalues[e], z);
      t.points[2 * e] = b[0];
      t.points[2 * e + 1] = b[1];
    }
  return detail::assemble_slots(train, layout, np, design, 0);
}

struct SyncResult {
  std::size_t offset = 0;
  double pslr = 0.0;  // peak over largest side lobe, magnitude ratio
};

namespace detail {

// c[k] = sum_n (x1[(n + k) mod N] conj(r1[n]) + x2[...] conj(r2[n])) via FFT.
inline std::vector<double> circular_xcorr_mag(const DualPolSignal& x, const DualPolSignal& r) {
  const std::size_t n = x.size();
  Fft fft(n);
  std::vector<cd> acc(n);
  auto one = [&](const std::vector<cd>& xs, const std::vector<cd>& rs) {
    std::vector<cd> X = xs, R(n);
    std::copy(rs.begin(), rs.end(), R.begin());
    fft.forward(X);
    fft.forward(R);
    for (std::size_t k = 0; k < n; ++k) acc[k] += X[k] * std::conj(R[k]);
  };
  one(x.q1, r.q1);
  one(x.q2, r.q2);
  fft.inverse(acc);
  std::vector<double> mag(n);
  for (std::size_t k = 0; k < n; ++k) mag[k] = std::abs(acc[k]);
  return mag;
}

// Half-width of the main lobe: lag of the first trough of the reference
// autocorrelation magnitude.
inline std::size_t main_lobe_halfwidth(const DualPolSignal& ref) {
  const auto ac = circular_xcorr_mag(ref, ref);
  std::size_t k = 0;
  while (k + 1 < ac.size() / 2 && ac[k + 1] < ac[k]) ++k;
  return std::max<std::size_t>(k, 1);
}

}  // namespace detail

// Sample offset of the training pattern in rx (circular). Throws when the
// correlation peak does not stand out from its side lobes by a factor 3.
inline SyncResult synchronize(const DualPolSignal& rx, const DualPolSignal& training_ref) {
  if (training_ref.size() > rx.size()) throw std::invalid_argument("synchronize: reference longer than rx");
  if (!(training_ref.energy() > 0.0)) throw std::invalid_argument("synchronize: empty reference");
  const auto c = detail::circular_xcorr_mag(rx, training_ref);
  const std::size_t n = c.size();
  const std::size_t peak = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
  const std::size_t hw = detail::main_lobe_halfwidth(training_ref);
  double side = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t d = std::min((k + n - peak) % n, (peak + n - k) % n);
    if (d > hw) side = std::max(side, c[k]);
  }
  SyncResult r{peak, side > 0.0 ? c[peak] / side : std::numeric_limits<double>::infinity()};
  if (r.pslr < 3.0)
    throw std::runtime_error("synchronize: peak-to-side-lobe ratio " + std::to_string(r.pslr) + " below 3");
  return r;
}

inline DualPolSignal rescale_power(const DualPolSignal& sig, double p_target) {
  const double p = sig.mean_power();
  if (!(p > 0.0)) throw std::invalid_argument("rescale_power: zero signal");
  DualPolSignal out = sig;
  const double s = std::sqrt(p_target / p);
  for (std::size_t i = 0; i < out.size(); ++i) out.q1[i] *= s, out.q2[i] *= s;
  return out;
}

// Brick-wall low-pass keeping |f| <= bandwidth / 2, then power rescaled to p_tx.
inline DualPolSignal receiver_frontend(const DualPolSignal& rx, double p_tx, double bandwidth_hz) {
  if (!(p_tx > 0.0)) throw std::invalid_argument("receiver_frontend: p_tx must be > 0");
  if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("receiver_frontend: bandwidth must be > 0");
  const std::size_t n = rx.size();
  Fft fft(n);
  DualPolSignal out = rx;
  for (auto* q : {&out.q1, &out.q2}) {
    fft.forward(*q);
    for (std::size_t k = 0; k < n; ++k)
      if (std::abs(fft_frequency(k, n, rx.grid.dt())) > 0.5 * bandwidth_hz) (*q)[k] = 0.0;
    fft.inverse(*q);
  }
  return rescale_power(out, p_tx);
}

struct Detection {
  std::array<cd, 4> points{};
  std::array<cd, 2> eigenvalues{};
  std::array<bool, 2> erased{false, false};
};

struct DetectOptions {
  double association_radius = 0.15;
  NftOptions nft{};
};

// Locates the eigenvalues near `expected`, computes b at the found values and
// undoes the propagation phase e^{-4 i l^2 z}.
inline Detection detect_symbol(const DualPolSignal& slot, const std::array<cd, 2>& expected, double z_normalized,
                               const DetectOptions& opt = {}) {
  if (slot.domain != Domain::Normalized) throw std::invalid_argument("detect_symbol: expected normalized slot");
  const MzspSolver solver(slot, opt.nft);
  const auto found = find_discrete_eigenvalues(solver, SearchConfig::expected({expected[0], expected[1]}));
  Detection d;
  for (std::size_t k = 0; k < 2; ++k) {
    std::optional<cd> best;
    for (const cd f : found)
      if (std::abs(f - expected[k]) <= opt.association_radius &&
          (!best || std::abs(f - expected[k]) < std::abs(*best - expected[k])))
        best = f;
    if (!best) {
      d.erased[k] = true;
      d.eigenvalues[k] = expected[k];
      continue;
    }
    const cd l = *best;
    d.eigenvalues[k] = l;
    const auto b = solver.match_b(l).b;
    const auto b0 = expected_b_evolution(b, l, -z_normalized);
    d.points[2 * k] = b0[0];
    d.points[2 * k + 1] = b0[1];
  }
  return d;
}

struct BpsOptions {
  int n_test_phases = 32;
  int window = 64;
};

// Blind phase search on one ring. Erased entries (nullopt) are passed through
// and contribute nothing to the metric. Candidates cover [-pi/4, pi/4); the
// estimate is unwrapped across symbols in steps of pi/2.
inline std::vector<std::optional<cd>> blind_phase_search(const std::vector<std::optional<cd>>& points,
                                                         const ConstellationSpec& ring, const BpsOptions& opt = {}) {
  if (opt.n_test_phases < 1 || opt.window < 1) throw std::invalid_argument("blind_phase_search: bad options");
  const std::size_t n = points.size();
  const int B = opt.n_test_phases;
  std::vector<double> phases(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) phases[static_cast<std::size_t>(b)] = -kPi / 4.0 + (kPi / 2.0) * b / B;

  // metric[i][b]: squared distance of the rotated point to its nearest ring point
  std::vector<double> metric(n * static_cast<std::size_t>(B), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!points[i]) continue;
    for (int b = 0; b < B; ++b) {
      const cd r = *points[i] * std::polar(1.0, -phases[static_cast<std::size_t>(b)]);
      metric[i * B + b] = std::norm(r - ring_point(ring, nearest_quadrant(r, ring)));
    }
  }
  // sliding window sums through prefix sums
  std::vector<double> prefix((n + 1) * static_cast<std::size_t>(B), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (int b = 0; b < B; ++b) prefix[(i + 1) * B + b] = prefix[i * B + b] + metric[i * B + b];

  const std::size_t half = static_cast<std::size_t>(opt.window) / 2;
  std::vector<std::optional<cd>> out(n);
  double prev = 0.0;
  bool have_prev = false;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, lo + static_cast<std::size_t>(opt.window));
    int best = 0;
    double best_v = std::numeric_limits<double>::infinity();
    for (int b = 0; b < B; ++b) {
      const double v = prefix[hi * B + b] - prefix[lo * B + b];
      if (v < best_v) best_v = v, best = b;
    }
    double phi = phases[static_cast<std::size_t>(best)];
    if (have_prev) phi += (kPi / 2.0) * std::round((prev - phi) / (kPi / 2.0));
    prev = phi;
    have_prev = true;
    if (points[i]) out[i] = *points[i] * std::polar(1.0, -phi);
  }
  return out;
}

enum class ErasurePolicy { Half, Pessimistic };

inline const char* to_string(ErasurePolicy p) { return p == ErasurePolicy::Half ? "half" : "pessimistic"; }

struct ErrorCount {
  std::array<double, 4> errors{};  // per constellation (l1 p1, l1 p2, l2 p1, l2 p2)
  std::array<std::size_t, 4> bits{};
  double total_errors() const { return errors[0] + errors[1] + errors[2] + errors[3]; }
  std::size_t total_bits() const { return bits[0] + bits[1] + bits[2] + bits[3]; }
  double ber() const { return total_bits() ? total_errors() / static_cast<double>(total_bits()) : 0.0; }
  double ber(std::size_t k) const { return bits[k] ? errors[k] / static_cast<double>(bits[k]) : 0.0; }
  ErrorCount& operator+=(const ErrorCount& o) {
    for (std::size_t k = 0; k < 4; ++k) errors[k] += o.errors[k], bits[k] += o.bits[k];
    return *this;
  }
};

// Minimum-distance decision per ring and bit error count against the sent
// bits. An erased point is charged 1 of its 2 bits (Half) or both
// (Pessimistic).
inline std::pair<SymbolBits, ErrorCount> decide_and_count(const std::array<std::optional<cd>, 4>& recovered,
                                                          const SymbolBits& reference, const SymbolDesign& design = {},
                                                          ErasurePolicy policy = ErasurePolicy::Half) {
  SymbolBits bits{};
  ErrorCount c;
  for (std::size_t k = 0; k < 4; ++k) {
    c.bits[k] = 2;
    if (!recovered[k]) {
      c.errors[k] = policy == ErasurePolicy::Half ? 1.0 : 2.0;
      continue;
    }
    const auto b = gray_bits(nearest_quadrant(*recovered[k], ring_of(design, k)));
    bits[2 * k] = b[0];
    bits[2 * k + 1] = b[1];
    c.errors[k] = (b[0] != reference[2 * k]) + (b[1] != reference[2 * k + 1]);
  }
  return {bits, c};
}

// Peak instantaneous power over mean power, in dB.
inline double papr_db(const DualPolSignal& sig) {
  const double mean = sig.mean_power();
  if (!(mean > 0.0)) throw std::invalid_argument("papr: zero signal");
  return 10.0 * std::log10(sig.peak_power() / mean);
}

struct ReceiverConfig {
  double z_normalized = 0.0;
  double filter_bandwidth_hz = 0.0;  // 0: no filtering, rescale only
  std::size_t nft_oversample = 4;
  bool phase_search = true;
  BpsOptions bps{};
  DetectOptions detect{};
  ErasurePolicy erasure = ErasurePolicy::Half;
  std::size_t threads = 0;
};

struct ReceivedFrame {
  std::size_t sync_offset = 0;
  std::vector<Detection> detections;
  std::vector<std::array<std::optional<cd>, 4>> points;  // after phase search
  ErrorCount errors;
};

// Full receiver: front end, synchronization, per-slot NFT detection,
// per-constellation blind phase search, decisions and error counting.
inline ReceivedFrame receive_frame(const DualPolSignal& rx, const std::vector<NfdmSymbol>& sent,
                                   const FrameLayout& layout, const NormalizationParams& np, double p_tx,
                                   const ReceiverConfig& cfg, const SymbolDesign& design = {}) {
  if (rx.domain != Domain::Physical) throw std::invalid_argument("receive_frame: expected physical signal");
  if (sent.size() != layout.n_payload) throw std::invalid_argument("receive_frame: payload size differs from layout");
  const DualPolSignal fe = cfg.filter_bandwidth_hz > 0.0 ? receiver_frontend(rx, p_tx, cfg.filter_bandwidth_hz)
                                                         : rescale_power(rx, p_tx);
  const auto sync = synchronize(fe, training_reference(layout, np, design, cfg.z_normalized));
  const std::size_t sps = layout.samples_per_slot;
  const std::size_t n = fe.size();
  const TimeGrid base = slot_grid(layout, np, design);
  const double inv = 1.0 / std::sqrt(np.P_w);

  ReceivedFrame out;
  out.sync_offset = sync.offset;
  out.detections.resize(sent.size());
  parallel_for(
      sent.size(),
      [&](std::size_t k) {
        DualPolSignal slot = DualPolSignal::zeros(base, Domain::Normalized);
        const std::size_t start = sync.offset + (layout.n_training + k) * sps;
        for (std::size_t i = 0; i < sps; ++i) {
          slot.q1[i] = fe.q1[(start + i) % n] * inv;
          slot.q2[i] = fe.q2[(start + i) % n] * inv;
        }
        out.detections[k] = detect_symbol(upsample_fft(slot, cfg.nft_oversample), design.eigenvalues,
                                          cfg.z_normalized, cfg.detect);
      },
      cfg.threads);

  out.points.resize(sent.size());
  for (std::size_t c = 0; c < 4; ++c) {
    std::vector<std::optional<cd>> seq(sent.size());
    for (std::size_t k = 0; k < sent.size(); ++k)
      if (!out.detections[k].erased[c / 2]) seq[k] = out.detections[k].points[c];
    if (cfg.phase_search) seq = blind_phase_search(seq, ring_of(design, c), cfg.bps);
    for (std::size_t k = 0; k < sent.size(); ++k) out.points[k][c] = seq[k];
  }
  for (std::size_t k = 0; k < sent.size(); ++k)
    out.errors += decide_and_count(out.points[k], sent[k].bits, design, cfg.erasure).second;
  return out;
}

}  // namespace nfdm
