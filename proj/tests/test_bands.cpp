#include <catch2/catch.hpp>

#include <cmath>

#include "donorstark/bands.hpp"
#include "test_helpers.hpp"

using namespace dstark;

TEST_CASE("Bloch Hamiltonian is Hermitian at random k") {
  const auto p = test_helpers::load_si_params();
  test_helpers::SplitMix64 rng(17);
  for (int i = 0; i < 6; ++i) {
    const Vec3 k{rng.symmetric(), rng.symmetric(), rng.symmetric()};
    for (bool spin : {false, true}) {
      const auto h = bloch_hamiltonian(p, k, spin);
      REQUIRE((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-13);
    }
  }
}

TEST_CASE("Gamma-point degeneracy pattern") {
  const auto p = test_helpers::load_si_params();
  // Without spin-orbit the valence top at Gamma is threefold degenerate.
  auto rep = bulk_bands(p, {{0, 0, 0}}, false);
  const auto& b = rep.bands[0];
  REQUIRE(b[3] - b[1] < 1e-10);  // indices 1..3 degenerate
  REQUIRE(b[1] - b[0] > 1.0);    // split from the deep s band

  // With spin-orbit the sixfold manifold splits 4 + 2 by the coupling.
  auto rep2 = bulk_bands(p, {{0, 0, 0}}, true);
  const auto& c = rep2.bands[0];
  REQUIRE(c[7] - c[4] < 1e-10);        // Gamma8 quartet
  REQUIRE(c[3] - c[2] < 1e-10);        // Gamma7 doublet
  const double delta0 = c[7] - c[3];
  REQUIRE(delta0 > 0.035);
  REQUIRE(delta0 < 0.06);
}

TEST_CASE("shipped parameter set reproduces its published bulk targets") {
  const auto p = test_helpers::load_si_params();
  const auto targets = nlohmann::json::parse(test_helpers::read_file(
      test_helpers::data_file("si_sp3d5s.json")))["validation_targets"];
  const double gap_ref = targets["indirect_gap_ev"].get<double>();
  const double gap_tol = targets["gap_tolerance_ev"].get<double>();

  for (bool spin : {false, true}) {
    const auto rep = bulk_bands(p, gamma_x_path(400), spin);
    REQUIRE(std::abs(rep.indirect_gap_ev - gap_ref) < gap_tol);
    REQUIRE(rep.valley_position >=
            targets["valley_position_min"].get<double>());
    REQUIRE(rep.valley_position <=
            targets["valley_position_max"].get<double>());
  }
}

TEST_CASE("bands shift rigidly under a global onsite shift") {
  auto p = test_helpers::load_si_params();
  const auto base = bulk_bands(p, gamma_x_path(32), true);
  const double c = 1.0;
  for (auto& [k, v] : p.onsite) v += c;
  const auto shifted = bulk_bands(p, gamma_x_path(32), true);
  for (std::size_t i = 0; i < base.bands.size(); ++i)
    for (std::size_t b = 0; b < base.bands[i].size(); ++b)
      REQUIRE(shifted.bands[i][b] ==
              Approx(base.bands[i][b] + c).margin(1e-10));
  REQUIRE(shifted.indirect_gap_ev == Approx(base.indirect_gap_ev).margin(1e-10));
}

TEST_CASE("band energies at shared k identical under grid doubling") {
  const auto p = test_helpers::load_si_params();
  const auto coarse = bulk_bands(p, gamma_x_path(100), false);
  const auto fine = bulk_bands(p, gamma_x_path(200), false);
  for (int i = 0; i <= 100; ++i) {
    for (std::size_t b = 0; b < coarse.bands[i].size(); ++b)
      REQUIRE(std::abs(coarse.bands[i][b] - fine.bands[2 * i][b]) < 1e-12);
  }
  // refined extrema are grid-stable
  REQUIRE(std::abs(coarse.indirect_gap_ev - fine.indirect_gap_ev) < 1e-6);
  REQUIRE(std::abs(coarse.valley_position - fine.valley_position) < 1e-3);
}

TEST_CASE("band solves parallelize deterministically over k") {
  const auto p = test_helpers::load_si_params();
  ThreadPool pool(3);
  const auto serial = bulk_bands(p, gamma_x_path(24), true);
  const auto parallel = bulk_bands(p, gamma_x_path(24), true, &pool);
  for (std::size_t i = 0; i < serial.bands.size(); ++i)
    for (std::size_t b = 0; b < serial.bands[i].size(); ++b)
      REQUIRE(serial.bands[i][b] == parallel.bands[i][b]);
}
