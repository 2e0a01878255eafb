#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "nfdm/channel.hpp"
#include "nfdm/nft_forward.hpp"
#include "support.hpp"

using namespace nfdm;
using namespace nfdm::test;
using Catch::Approx;

namespace {

double max_abs_diff(const DualPolSignal& a, const DualPolSignal& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d = std::max({d, std::abs(a.q1[i] - b.q1[i]), std::abs(a.q2[i] - b.q2[i])});
  return d;
}

double peak_abs(const DualPolSignal& s) { return std::sqrt(s.peak_power()); }

}  // namespace

TEST_CASE("zero input stays zero", "[channel]") {
  const auto zero = DualPolSignal::zeros(TimeGrid(256, 1.0 / 64e9, 0.0), Domain::Physical);
  const auto out = propagate_link(zero, FiberParams{}, SsfmConfig{});
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.power(i) == 0.0);
  const auto zn = propagate_normalized(DualPolSignal::zeros(TimeGrid::centered(128, 10.0), Domain::Normalized), 1.0, 10);
  for (std::size_t i = 0; i < zn.size(); ++i) CHECK(zn.power(i) == 0.0);
}

TEST_CASE("expected b evolution", "[channel]") {
  const std::array<cd, 2> b{cd(1.0), cd(0.0, 2.0)};
  const auto r = expected_b_evolution(b, cd(0, 0.5), 0.25);
  CHECK(std::abs(r[0] - std::polar(1.0, 0.25)) < 1e-15);
  CHECK(std::abs(r[1] - cd(0, 2.0) * std::polar(1.0, 0.25)) < 1e-15);
  const auto id = expected_b_evolution(b, cd(0.3, 0.7), 0.0);
  CHECK(id[0] == b[0]);
  CHECK(id[1] == b[1]);
  for (double im : {0.1, 0.3, 0.6, 1.5})
    for (double z : {-3.0, 0.7, 10.0}) CHECK(std::abs(expected_b_evolution(b, cd(0, im), z)[0]) == Approx(1.0));
}

TEST_CASE("lossless propagation conserves energy", "[channel][property]") {
  const auto sig = wide_symbol(reference_targets(1, 3, 0, 2));
  const double e0 = sig.energy();
  const auto out = propagate_normalized(sig, 1.0, 400);
  CHECK(std::abs(out.energy() - e0) / e0 < 1e-6);
}

TEST_CASE("fundamental soliton keeps its envelope", "[channel][oracle]") {
  const auto grid = TimeGrid::centered(2048, 60.0);
  DualPolSignal s = DualPolSignal::zeros(grid, Domain::Normalized);
  for (std::size_t i = 0; i < s.size(); ++i) s.q1[i] = 1.0 / std::cosh(grid.time(i));
  const auto out = propagate_normalized(s, 1.0, 1000);
  double env = 0.0, phase = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    env = std::max(env, std::abs(std::abs(out.q1[i]) - std::abs(s.q1[i])));
    // analytic phase: i q_z = q_tt + 2|q|^2 q gives q = sech(t) e^{-i z}
    phase = std::max(phase, std::abs(out.q1[i] - s.q1[i] * std::polar(1.0, -1.0)));
  }
  CHECK(env < 1e-4);
  CHECK(phase < 1e-4);
}

TEST_CASE("step halving converges at reference power", "[channel][property]") {
  FiberParams fiber;
  fiber.n_spans = 1;
  const auto np = normalization_from_link(47e-12, fiber, true);
  const auto sig = physical_symbol(reference_targets(0, 1, 2, 3), np, 64e9, 1024);
  SsfmConfig coarse, fine;
  fine.steps_per_span = 2 * coarse.steps_per_span;
  const auto a = propagate_link(sig, fiber, coarse);
  const auto b = propagate_link(sig, fiber, fine);
  CHECK(max_abs_diff(a, b) / peak_abs(b) < 1e-5);
}

TEST_CASE("spectral evolution convention", "[channel][oracle]") {
  const auto targets = reference_targets(0, 0, 0, 0);
  const auto sig = wide_symbol(targets);
  const std::vector<cd> eig{cd(0, 0.3), cd(0, 0.6)};
  const auto before = compute_b_coefficients(sig, eig);
  const MzspSolver s0(sig);
  const std::vector<cd> probes{cd(0.2, 0.1), cd(-0.5, 0.4), cd(0.0, 1.0), cd(0.7, 0.0)};
  for (double z : {0.25, 0.5, 1.0}) {
    const auto out = propagate_normalized(sig, z, static_cast<int>(2000 * z));
    const MzspSolver s1(out);
    for (cd l : probes) CHECK(std::abs(s1.scatter(l, false).a - s0.scatter(l, false).a) < 1e-4);
    const auto after = compute_b_coefficients(out, eig);
    for (std::size_t k = 0; k < 2; ++k) {
      const auto expect = expected_b_evolution(before.entries[k].b, eig[k], z);
      const double bn = std::hypot(std::abs(expect[0]), std::abs(expect[1]));
      CHECK(std::abs(after.entries[k].b[0] - expect[0]) / bn < 1e-3);
      CHECK(std::abs(after.entries[k].b[1] - expect[1]) / bn < 1e-3);
    }
  }
}

TEST_CASE("path-averaged model improves with shorter spans", "[channel][property]") {
  // same total distance, 4 x 41.5 km against 2 x 83 km
  auto b_error = [](double span_km, int spans) {
    FiberParams fiber;
    fiber.span_length_km = span_km;
    fiber.n_spans = spans;
    const auto np = normalization_from_link(47e-12, fiber, true);
    const auto targets = reference_targets(0, 1, 2, 3);
    const auto tx = physical_symbol(targets, np, 64e9, 2048);
    const auto rx = normalize_signal(upsample_fft(propagate_link(tx, fiber, SsfmConfig{}), 4), np);
    const double z = np.z_from_distance(span_km * 1e3 * spans);
    const std::vector<cd> eig = find_discrete_eigenvalues(rx, SearchConfig::expected({cd(0, 0.3), cd(0, 0.6)}));
    REQUIRE(eig.size() == 2);
    const auto spec = compute_b_coefficients(rx, eig);
    double err = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      const std::array<cd, 2> b0{targets[k].b1, targets[k].b2};
      const auto expect = expected_b_evolution(b0, targets[k].lambda, z);
      const double bn = std::hypot(std::abs(b0[0]), std::abs(b0[1]));
      err = std::max({err, std::abs(spec.entries[k].b[0] - expect[0]) / bn,
                      std::abs(spec.entries[k].b[1] - expect[1]) / bn});
    }
    return err;
  };
  const double e41 = b_error(41.5, 4);
  const double e83 = b_error(83.0, 2);
  INFO("41.5 km: " << e41 << "  83 km: " << e83);
  CHECK(e41 < e83);
}

TEST_CASE("lumped gain restores span loss", "[channel]") {
  FiberParams fiber;
  fiber.n_spans = 3;
  const auto np = normalization_from_link(47e-12, fiber, true);
  const auto sig = physical_symbol(reference_targets(2, 2, 1, 0), np, 64e9, 1024);
  std::vector<double> energies;
  propagate_link(sig, fiber, SsfmConfig{}, [&](int, const DualPolSignal& s) { energies.push_back(s.energy()); });
  REQUIRE(energies.size() == 3);
  for (double e : energies) CHECK(e == Approx(sig.energy()).epsilon(1e-9));
}

TEST_CASE("amplifier noise", "[channel]") {
  FiberParams fiber;
  fiber.n_spans = 4;
  const TimeGrid grid(8192, 1.0 / 64e9, 0.0);
  const auto zero = DualPolSignal::zeros(grid, Domain::Physical);
  SsfmConfig cfg;
  cfg.ase_enabled = true;
  cfg.rng_seed = 99;
  const auto a = propagate_link(zero, fiber, cfg);
  const auto b = propagate_link(zero, fiber, cfg);
  CHECK(max_abs_diff(a, b) == 0.0);

  const double g = std::exp(alpha_per_km(fiber.alpha_db_per_km) * fiber.span_length_km);
  const double var = ase_psd_per_pol(g, fiber) * grid.sample_rate();
  CHECK(a.mean_power() == Approx(4.0 * 2.0 * var).epsilon(0.05));

  cfg.rng_seed = 100;
  CHECK(max_abs_diff(a, propagate_link(zero, fiber, cfg)) > 0.0);
}

TEST_CASE("guards", "[channel]") {
  FiberParams fiber;
  fiber.n_spans = 1;
  const auto np = normalization_from_link(47e-12, fiber, true);

  SECTION("white input trips the aliasing guard") {
    const auto noisy = add_noise_for_osnr(physical_symbol(reference_targets(0, 0, 0, 0), np, 64e9, 1024), 10.0,
                                          12.5e9, 1);
    CHECK_THROWS_AS(propagate_link(noisy, fiber, SsfmConfig{}), std::runtime_error);
  }
  SECTION("undersampled input is rejected") {
    const auto sig = physical_symbol(reference_targets(0, 0, 0, 0), np, 40e9, 512);
    CHECK_THROWS(propagate_link(sig, fiber, SsfmConfig{}));
  }
  SECTION("too few steps trips the nonlinear phase guard") {
    const auto sig = physical_symbol(reference_targets(0, 0, 0, 0), np, 64e9, 1024);
    SsfmConfig cfg;
    cfg.steps_per_span = 2;
    CHECK_THROWS_AS(propagate_link(sig, fiber, cfg), std::runtime_error);
  }
  SECTION("domain checks") {
    CHECK_THROWS_AS(propagate_link(DualPolSignal::zeros(TimeGrid::centered(64, 1.0), Domain::Normalized), fiber,
                                   SsfmConfig{}),
                    std::invalid_argument);
    CHECK_THROWS_AS(propagate_normalized(DualPolSignal::zeros(TimeGrid(64, 1e-12, 0.0), Domain::Physical), 1.0, 10),
                    std::invalid_argument);
  }
}

TEST_CASE("OSNR noise loading", "[channel]") {
  FiberParams fiber;
  const auto np = normalization_from_link(47e-12, fiber, true);
  const auto sig = physical_symbol(reference_targets(1, 2, 3, 0), np, 64e9, 1 << 16);

  CHECK(max_abs_diff(add_noise_for_osnr(sig, std::numeric_limits<double>::infinity(), 12.5e9, 3), sig) == 0.0);
  CHECK_THROWS_AS(add_noise_for_osnr(sig, -10.5, 12.5e9, 3), std::invalid_argument);
  CHECK_THROWS_AS(add_noise_for_osnr(DualPolSignal::zeros(sig.grid, Domain::Physical), 10.0, 12.5e9, 3),
                  std::invalid_argument);

  for (double osnr : {5.0, 12.0, 20.0}) {
    const auto noisy = add_noise_for_osnr(sig, osnr, 12.5e9, 7);
    CHECK(std::abs(measure_osnr_db(sig, noisy, 12.5e9) - osnr) < 0.1);
    CHECK(measure_osnr_db(sig, noisy, 6.25e9) - measure_osnr_db(sig, noisy, 12.5e9) ==
          Approx(10.0 * std::log10(2.0)).epsilon(1e-12));
  }
}
