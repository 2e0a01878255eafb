#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "nfdm/core.hpp"

using namespace nfdm;
using Catch::Approx;

namespace {

DualPolSignal random_physical(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1e-2);
  const TimeGrid grid(n, 1e-12, -0.5e-9);
  DualPolSignal s = DualPolSignal::zeros(grid, Domain::Physical);
  for (std::size_t i = 0; i < n; ++i) {
    s.q1[i] = {g(rng), g(rng)};
    s.q2[i] = {g(rng), g(rng)};
  }
  return s;
}

}  // namespace

TEST_CASE("TimeGrid rejects invalid grids", "[core]") {
  CHECK_THROWS_AS(TimeGrid(1, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid(8, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid(8, -1.0, 0.0), std::invalid_argument);
  const auto g = TimeGrid::centered(8, 4.0);
  CHECK(g.window() == Approx(4.0));
  CHECK(g.t_start() == Approx(-2.0));
  CHECK(g.dt() == Approx(0.5));
}

TEST_CASE("DualPolSignal length invariant", "[core]") {
  const TimeGrid g(4, 1.0, 0.0);
  CHECK_THROWS_AS(DualPolSignal(g, std::vector<cd>(3), std::vector<cd>(4), Domain::Normalized),
                  std::invalid_argument);
}

TEST_CASE("beta2 from dispersion", "[core]") {
  // -D lambda^2 / (2 pi c), evaluated by hand
  CHECK(beta2_from_D(17.5, 1550.0) == Approx(-22.320343491162394).epsilon(1e-12));
  CHECK(beta2_from_D(0.0, 1550.0) == 0.0);
  CHECK_THROWS_AS(beta2_from_D(17.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(beta2_from_D(-1.0, 1550.0), std::invalid_argument);

  // soliton period (pi/2) / (W^2 |beta2|) with W = 12.7 GHz
  const double b2 = std::abs(beta2_from_D(17.5, 1550.0)) * 1e-24;  // s^2/km
  const double W = 12.7e9;
  CHECK(kPi / 2.0 / (W * W * b2) == Approx(436.0).epsilon(0.02));
}

TEST_CASE("LPA effective nonlinearity", "[core]") {
  CHECK(lpa_effective_gamma(1.25, 0.195, 41.5) == Approx(0.5667500296416637).epsilon(1e-12));
  CHECK(lpa_effective_gamma(1.25, 0.195, 83.0) == Approx(0.32734046818112306).epsilon(1e-12));
  CHECK(lpa_effective_gamma(1.25, 0.0, 41.5) == 1.25);
  CHECK_THROWS_AS(lpa_effective_gamma(0.0, 0.2, 40.0), std::invalid_argument);
  CHECK_THROWS_AS(lpa_effective_gamma(1.0, -0.2, 40.0), std::invalid_argument);
  CHECK_THROWS_AS(lpa_effective_gamma(1.0, 0.2, 0.0), std::invalid_argument);
}

TEST_CASE("LPA gamma is monotone in alpha L and tends to gamma", "[core][property]") {
  // alpha L on a log grid in [1e-6, 10]; span length fixed at 1 km so alpha_db carries alpha L.
  double prev = 1.0 + 1e-15;
  for (int k = 0; k <= 70; ++k) {
    const double aL = std::pow(10.0, -6.0 + 7.0 * k / 70.0);
    const double alpha_db = aL * 10.0 / std::log(10.0);
    const double g = lpa_effective_gamma(1.0, alpha_db, 1.0);
    CHECK(g < prev);
    CHECK(g <= 1.0);
    prev = g;
  }
  CHECK(lpa_effective_gamma(1.0, 1e-6 * 10.0 / std::log(10.0), 1.0) == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("normalization of the reference link", "[core]") {
  FiberParams fiber;
  const auto np = normalization_from_link(47e-12, fiber, true);
  CHECK(np.P_w == Approx(0.02005700712608404).epsilon(1e-9));
  CHECK(np.L_char_m / 1e3 == Approx(197.93602198591972).epsilon(1e-9));

  FiberParams hot = fiber;
  hot.gamma_per_w_km *= 2.0;
  const auto np2 = normalization_from_link(47e-12, hot, true);
  CHECK(np2.P_w == Approx(np.P_w / 2.0).epsilon(1e-12));
  CHECK(np2.L_char_m == Approx(np.L_char_m).epsilon(1e-12));

  const auto np3 = normalization_from_link(2 * 47e-12, fiber, true);
  CHECK(np3.P_w == Approx(np.P_w / 4.0).epsilon(1e-12));
  CHECK(np3.L_char_m == Approx(np.L_char_m * 4.0).epsilon(1e-12));

  const auto raw = normalization_from_link(47e-12, fiber, false);
  CHECK(raw.P_w < np.P_w);

  FiberParams flat = fiber;
  flat.dispersion_ps_nm_km = 0.0;
  CHECK_THROWS_AS(normalization_from_link(47e-12, flat, true), std::invalid_argument);
  CHECK_THROWS_AS(normalization_from_link(0.0, fiber, true), std::invalid_argument);
}

TEST_CASE("normalize and denormalize", "[core]") {
  FiberParams fiber;
  const auto np = normalization_from_link(47e-12, fiber, true);
  const TimeGrid grid(16, 1e-12, 0.0);

  SECTION("zero signal") {
    const auto z = normalize_signal(DualPolSignal::zeros(grid, Domain::Physical), np);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z.power(i) == 0.0);
  }
  SECTION("constant sqrt(P) maps to one") {
    DualPolSignal s = DualPolSignal::zeros(grid, Domain::Physical);
    for (auto& x : s.q1) x = std::sqrt(np.P_w);
    const auto n = normalize_signal(s, np);
    CHECK(std::abs(n.q1[3] - cd(1.0)) < 1e-14);
    CHECK(n.grid.dt() == Approx(1e-12 / 47e-12));
  }
  SECTION("domain mismatch") {
    CHECK_THROWS_AS(normalize_signal(DualPolSignal::zeros(grid, Domain::Normalized), np), std::invalid_argument);
    CHECK_THROWS_AS(denormalize_signal(DualPolSignal::zeros(grid, Domain::Physical), np), std::invalid_argument);
  }
}

TEST_CASE("normalization round trip and energy scaling", "[core][property]") {
  std::mt19937_64 rng(7);
  FiberParams fiber;
  const auto np = normalization_from_link(47e-12, fiber, true);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_physical(rng, 64 + trial);
    const auto back = denormalize_signal(normalize_signal(s, np), np);
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      err = std::max(err, std::abs(back.q1[i] - s.q1[i]) + std::abs(back.q2[i] - s.q2[i]));
      ref = std::max(ref, std::abs(s.q1[i]) + std::abs(s.q2[i]));
    }
    CHECK(err / ref < 1e-12);
    CHECK(back.grid.t_start() == Approx(s.grid.t_start()).epsilon(1e-12));

    // E_phys = P T0 E_norm
    const auto n = normalize_signal(s, np);
    CHECK(s.energy() == Approx(np.P_w * np.T0_s * n.energy()).epsilon(1e-10));
  }
}

TEST_CASE("boundary ratio", "[core]") {
  const TimeGrid grid(200, 0.1, -10.0);
  DualPolSignal s = DualPolSignal::zeros(grid, Domain::Normalized);
  for (std::size_t i = 0; i < s.size(); ++i) s.q1[i] = 1.0 / std::cosh(grid.time(i));
  // last two samples sit at t = 9.8, 9.9
  CHECK(s.boundary_ratio() == Approx(1.0 / std::cosh(9.8)).epsilon(1e-9));
  CHECK(s.satisfies_vanishing_boundaries());
  CHECK_FALSE(s.satisfies_vanishing_boundaries(1e-6));
}
