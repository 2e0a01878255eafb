#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nfdm/transceiver.hpp"
#include "support.hpp"

using namespace nfdm;
using namespace nfdm::test;
using Catch::Approx;

namespace {

std::vector<NfdmSymbol> all_patterns(const SymbolDesign& d = {}) {
  std::vector<NfdmSymbol> s;
  for (unsigned v = 0; v < 256; ++v) s.push_back(map_bits(bits_from_index(v), d));
  return s;
}

NormalizationParams reference_np(double span_km = 41.5) {
  FiberParams f;
  f.span_length_km = span_km;
  return normalization_from_link(47e-12, f, true);
}

// Single symbol on its slot at `oversample` times the line rate.
DualPolSignal fine_slot(const NfdmSymbol& s, std::size_t oversample, const NormalizationParams& np) {
  const SymbolDesign d;
  return synthesize_slot(s, slot_grid(FrameLayout{}, np, d, oversample), d, 1e-3);
}

}  // namespace

TEST_CASE("bit mapping", "[transceiver]") {
  const SymbolDesign d;
  const auto s = map_bits(SymbolBits{}, d);
  CHECK(std::abs(s.points[0] - std::polar(5.0, kPi / 4)) < 1e-15);
  CHECK(std::abs(s.points[1] - std::polar(5.0, kPi / 4)) < 1e-15);
  CHECK(std::abs(s.points[2] - cd(0.14)) < 1e-15);
  CHECK(std::abs(s.points[3] - cd(0.14)) < 1e-15);

  for (const auto& p : all_patterns()) {
    CHECK(demap(p.points, d) == p.bits);
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(p.points[k]) == Approx(ring_of(d, k).radius).epsilon(1e-15));
  }
  // neighbouring quadrants differ in one bit
  for (int q = 0; q < 4; ++q) {
    const auto a = gray_bits(q), b = gray_bits(q + 1);
    CHECK((a[0] != b[0]) + (a[1] != b[1]) == 1);
    CHECK(gray_quadrant(a[0], a[1]) == q);
  }
}

TEST_CASE("waveform metrics of the reference design", "[transceiver][oracle]") {
  const auto np = reference_np();
  // single symbol on a finely sampled slot
  const auto s = denormalize_signal(fine_slot(map_bits(SymbolBits{}), 64, np), np);
  CHECK(papr_db(s) == Approx(9.49).margin(0.5));
  // long random frame
  FrameLayout layout;
  layout.n_payload = 1024;
  const auto frame = build_frame(random_symbols(layout.n_payload, 3, 1), layout, np);
  CHECK(bandwidth_99(frame) == Approx(12.7e9).epsilon(0.05));
  CHECK(watts_to_dbm(frame.mean_power()) == Approx(5.30).margin(0.3));
  const auto np83 = reference_np(83.0);
  CHECK(watts_to_dbm(build_frame(random_symbols(layout.n_payload, 3, 1), layout, np83).mean_power()) ==
        Approx(7.70).margin(0.3));
}

TEST_CASE("papr", "[transceiver]") {
  const TimeGrid grid(1000, 1e-3, 0.0);
  DualPolSignal c = DualPolSignal::zeros(grid, Domain::Physical);
  for (std::size_t i = 0; i < c.size(); ++i) c.q1[i] = std::polar(2.0, 0.01 * i);
  CHECK(papr_db(c) == Approx(0.0).margin(1e-12));
  DualPolSignal s = DualPolSignal::zeros(grid, Domain::Physical);
  for (std::size_t i = 0; i < s.size(); ++i) s.q1[i] = std::cos(2.0 * kPi * 10.0 * grid.time(i));
  CHECK(papr_db(s) == Approx(10.0 * std::log10(2.0)).epsilon(1e-9));
  CHECK_THROWS_AS(papr_db(DualPolSignal::zeros(grid, Domain::Physical)), std::invalid_argument);
}

TEST_CASE("frame construction", "[transceiver]") {
  const auto np = reference_np();
  FrameLayout layout;
  layout.n_payload = 8;
  const auto payload = random_symbols(8, 1, 2);
  const auto frame = build_frame(payload, layout, np);
  CHECK(frame.size() == 72 * 64);
  CHECK(frame.grid.dt() == Approx(1e-9 / 64));
  CHECK(frame.domain == Domain::Physical);

  // training slots lead the frame
  const auto ref = training_reference(layout, np);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(frame.q1[i] == ref.q1[i]);

  CHECK_THROWS_AS(build_frame(random_symbols(7, 1, 2), layout, np), std::invalid_argument);
  FrameLayout tight = layout;
  tight.boundary_threshold = 1e-8;
  CHECK_THROWS_AS(build_frame(payload, tight, np), std::runtime_error);

  FrameOptions pre;
  pre.predistort = true;
  const auto p = build_frame(payload, layout, np, {}, pre);
  // odd, monotone, and fixes the largest quadrature
  double m = 0.0;
  for (std::size_t i = 0; i < frame.size(); ++i) m = std::max(m, std::abs(frame.q1[i].real()));
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double x = frame.q1[i].real(), y = p.q1[i].real();
    CHECK(std::signbit(x) == std::signbit(y));
    CHECK(std::abs(y) <= std::abs(x) + 1e-15);
  }
}

TEST_CASE("synchronization", "[transceiver]") {
  const auto np = reference_np();
  FrameLayout layout;
  layout.n_payload = 32;
  const auto frame = build_frame(random_symbols(32, 4, 4), layout, np);
  const auto ref = training_reference(layout, np);

  auto delayed = [&](std::size_t d) {
    DualPolSignal rx = DualPolSignal::zeros(TimeGrid(frame.size() + 400, frame.grid.dt(), 0.0), Domain::Physical);
    for (std::size_t i = 0; i < frame.size(); ++i) rx.q1[i + d] = frame.q1[i], rx.q2[i + d] = frame.q2[i];
    return rx;
  };
  CHECK(synchronize(frame, ref).offset == 0);
  CHECK(synchronize(delayed(173), ref).offset == 173);

  // AWGN at 15 dB SNR
  const double noise_var = frame.mean_power() / db_to_linear(15.0) / 2.0;
  int hits = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    NoiseStream ns(77, static_cast<std::uint64_t>(t));
    const std::size_t d = static_cast<std::size_t>(ns.uniform() * 400);
    auto rx = delayed(d);
    for (std::size_t i = 0; i < rx.size(); ++i) {
      rx.q1[i] += ns.complex_gaussian(noise_var);
      rx.q2[i] += ns.complex_gaussian(noise_var);
    }
    try {
      hits += synchronize(rx, ref).offset == d;
    } catch (const std::runtime_error&) {
    }
  }
  CHECK(hits >= 990);

  DualPolSignal noise = DualPolSignal::zeros(frame.grid, Domain::Physical);
  NoiseStream ns(5, 5);
  for (std::size_t i = 0; i < noise.size(); ++i) noise.q1[i] = ns.complex_gaussian(1.0), noise.q2[i] = ns.complex_gaussian(1.0);
  CHECK_THROWS_AS(synchronize(noise, ref), std::runtime_error);
}

TEST_CASE("evolved training reference after a long link", "[transceiver]") {
  const auto np = reference_np();
  FiberParams fiber;
  FrameLayout layout;
  layout.n_payload = 400;
  const auto frame = build_frame(random_symbols(400, 8, 8), layout, np);
  const auto rx = receiver_frontend(propagate_link(frame, fiber, SsfmConfig{}), frame.mean_power(),
                                    bandwidth_99(frame));
  const double z = np.z_from_distance(fiber.span_length_km * 1e3 * fiber.n_spans);
  const auto r = synchronize(rx, training_reference(layout, np, {}, z));
  CHECK(r.offset == 0);
  const auto peak = [&](double zz) {
    const auto c = detail::circular_xcorr_mag(rx, training_reference(layout, np, {}, zz));
    return c[0];
  };
  CHECK(peak(z) > 1.2 * peak(0.0));
  CHECK(r.pslr > synchronize(frame, training_reference(layout, np)).pslr * 0.8);
}

TEST_CASE("receiver front end", "[transceiver]") {
  const std::size_t n = 1024;
  const TimeGrid grid(n, 1.0 / 64e9, 0.0);
  auto tone = [&](double f, double amp) {
    DualPolSignal s = DualPolSignal::zeros(grid, Domain::Physical);
    for (std::size_t i = 0; i < n; ++i) s.q1[i] = std::polar(amp, 2.0 * kPi * f * grid.time(i));
    return s;
  };
  const double bin = 64e9 / n;
  const auto in = tone(40 * bin, 0.1);
  const auto out = receiver_frontend(in, in.mean_power(), 12.7e9);
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(out.q1[i] - in.q1[i]));
  CHECK(d < 1e-12);

  auto mixed = in;
  const auto far = tone(300 * bin, 0.05);
  for (std::size_t i = 0; i < n; ++i) mixed.q1[i] += far.q1[i];
  const auto cleaned = receiver_frontend(mixed, in.mean_power(), 12.7e9);
  d = 0.0;
  for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(cleaned.q1[i] - in.q1[i]));
  CHECK(d < 1e-12);

  const auto np = reference_np();
  FrameLayout layout;
  layout.n_payload = 16;
  const auto frame = build_frame(random_symbols(16, 9, 9), layout, np);
  const auto noisy = add_noise_for_osnr(frame, 10.0, 12.5e9, 1);
  CHECK(receiver_frontend(noisy, frame.mean_power(), bandwidth_99(frame)).mean_power() ==
        Approx(frame.mean_power()).epsilon(1e-6));
}

TEST_CASE("noiseless detection", "[transceiver]") {
  const auto np = reference_np();
  const SymbolDesign d;
  for (unsigned v : {0u, 27u, 100u, 201u, 255u}) {
    const auto s = map_bits(bits_from_index(v), d);
    const auto det = detect_symbol(fine_slot(s, 4, np), d.eigenvalues, 0.0);
    for (std::size_t k = 0; k < 4; ++k) {
      INFO("pattern " << v << " point " << k);
      CHECK(std::abs(det.points[k] - s.points[k]) / std::abs(s.points[k]) < 1e-3);
    }
    CHECK_FALSE(det.erased[0]);
    CHECK_FALSE(det.erased[1]);
  }
}

TEST_CASE("derotation removes the propagation phase", "[transceiver][property]") {
  const auto targets = reference_targets(3, 1, 0, 2);
  const auto sig = wide_symbol(targets);
  const std::array<cd, 2> eig{cd(0, 0.3), cd(0, 0.6)};
  const auto ref = detect_symbol(sig, eig, 0.0);
  for (double z : {0.5, 1.0, 1.5, 2.0}) {
    const auto out = propagate_normalized(sig, z, static_cast<int>(1500 * z));
    const auto det = detect_symbol(out, eig, z);
    for (std::size_t k = 0; k < 4; ++k) {
      INFO("z " << z << " point " << k);
      CHECK(std::abs(det.points[k] - ref.points[k]) / std::abs(ref.points[k]) < 1e-3);
    }
  }
}

TEST_CASE("blind phase search", "[transceiver]") {
  const ConstellationSpec ring{5.0, kPi / 4, 4};
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> q(0, 3);
  std::vector<int> sent(2000);
  for (auto& x : sent) x = q(rng);

  SECTION("clean constellation is left alone") {
    std::vector<std::optional<cd>> pts;
    for (int x : sent) pts.push_back(ring_point(ring, x));
    const auto out = blind_phase_search(pts, ring);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(std::abs(*out[i] - *pts[i]) < 1e-12);
  }
  SECTION("constant rotation") {
    std::vector<std::optional<cd>> pts;
    for (int x : sent) pts.push_back(ring_point(ring, x) * std::polar(1.0, 0.3));
    const auto out = blind_phase_search(pts, ring);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(std::abs(std::arg(*out[i] / ring_point(ring, sent[i]))) < kPi / 64);
    }
  }
  SECTION("slow phase walk at 20 dB SNR") {
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t n = 20000;
    std::vector<int> tx(n);
    std::vector<std::optional<cd>> pts(n);
    const double sigma = ring.radius / std::sqrt(2.0 * db_to_linear(20.0));
    double theta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      tx[i] = q(rng);
      theta += 0.01 * g(rng);
      pts[i] = ring_point(ring, tx[i]) * std::polar(1.0, theta) + cd(sigma * g(rng), sigma * g(rng));
    }
    const auto out = blind_phase_search(pts, ring);
    std::size_t errors = 0;
    for (std::size_t i = 0; i < n; ++i) errors += nearest_quadrant(*out[i], ring) != tx[i];
    CHECK(static_cast<double>(errors) / n < 1e-3);
  }
  SECTION("erasures pass through") {
    std::vector<std::optional<cd>> pts(10, ring_point(ring, 1));
    pts[3].reset();
    const auto out = blind_phase_search(pts, ring);
    CHECK_FALSE(out[3].has_value());
    CHECK(out[4].has_value());
  }
}

TEST_CASE("decisions and error counting", "[transceiver]") {
  const SymbolDesign d;
  const auto s = map_bits(bits_from_index(0b01101100), d);
  std::array<std::optional<cd>, 4> pts;
  for (std::size_t k = 0; k < 4; ++k) pts[k] = s.points[k];
  auto [bits, c] = decide_and_count(pts, s.bits, d);
  CHECK(bits == s.bits);
  CHECK(c.total_errors() == 0.0);
  CHECK(c.total_bits() == 8);

  pts[2] = *pts[2] * cd(0, 1);
  CHECK(decide_and_count(pts, s.bits, d).second.errors[2] == 1.0);

  const std::array<std::optional<cd>, 4> none{};
  CHECK(decide_and_count(none, s.bits, d).second.total_errors() == 4.0);
  CHECK(decide_and_count(none, s.bits, d, ErasurePolicy::Pessimistic).second.total_errors() == 8.0);
}

TEST_CASE("noiseless back-to-back recovers every pattern", "[transceiver][property]") {
  const auto np = reference_np();
  const auto payload = all_patterns();
  FrameLayout layout;
  layout.n_payload = payload.size();
  const auto frame = build_frame(payload, layout, np);
  ReceiverConfig rc;
  rc.filter_bandwidth_hz = bandwidth_99(frame);
  const auto r = receive_frame(frame, payload, layout, np, frame.mean_power(), rc);
  CHECK(r.sync_offset == 0);
  CHECK(r.errors.total_errors() == 0.0);
  for (std::size_t k = 0; k < payload.size(); ++k) {
    for (std::size_t c = 0; c < 4; ++c) REQUIRE(r.points[k][c].has_value());
    CHECK(demap({*r.points[k][0], *r.points[k][1], *r.points[k][2], *r.points[k][3]}) == payload[k].bits);
  }
}

TEST_CASE("noiseless 9 x 41.5 km link recovers every pattern", "[transceiver][property]") {
  FiberParams fiber;
  const auto np = normalization_from_link(47e-12, fiber, true);
  const auto payload = all_patterns();
  FrameLayout layout;
  layout.n_payload = payload.size();
  const auto frame = build_frame(payload, layout, np);
  const auto rx = propagate_link(frame, fiber, SsfmConfig{});
  ReceiverConfig rc;
  rc.filter_bandwidth_hz = bandwidth_99(frame);
  rc.z_normalized = np.z_from_distance(fiber.span_length_km * 1e3 * fiber.n_spans);
  const auto r = receive_frame(rx, payload, layout, np, frame.mean_power(), rc);
  CHECK(r.errors.total_errors() == 0.0);
}

TEST_CASE("higher eigenvalue scatters more under noise", "[transceiver]") {
  const auto np = reference_np();
  FrameLayout layout;
  layout.n_payload = 1000;
  const auto payload = random_symbols(layout.n_payload, 12, 1);
  const auto frame = build_frame(payload, layout, np);
  const auto rx = add_noise_for_osnr(frame, 14.0, 12.5e9, 21);
  ReceiverConfig rc;
  rc.filter_bandwidth_hz = bandwidth_99(frame);
  rc.phase_search = false;
  const auto r = receive_frame(rx, payload, layout, np, frame.mean_power(), rc);
  std::array<double, 2> evm{};
  std::array<int, 2> count{};
  for (std::size_t k = 0; k < payload.size(); ++k)
    for (std::size_t c = 0; c < 4; ++c)
      if (r.points[k][c]) {
        evm[c / 2] += std::norm(*r.points[k][c] - payload[k].points[c]) / std::norm(payload[k].points[c]);
        ++count[c / 2];
      }
  CHECK(evm[1] / count[1] > evm[0] / count[0]);
}
