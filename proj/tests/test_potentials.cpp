#include <catch2/catch.hpp>

#include <cmath>

#include "donorstark/lattice.hpp"
#include "donorstark/potentials.hpp"
#include "test_helpers.hpp"

using namespace dstark;

namespace {

DomainSpec cube_spec(double cells, double depth_frac = 0.5) {
  DomainSpec spec;
  const double a = units::si_lattice_constant_nm;
  spec.extents_nm = {cells * a, cells * a, cells * a};
  spec.lattice_constant_nm = a;
  spec.depth_axis = Axis::y;
  spec.impurity_depth_nm = depth_frac * cells * a;
  return spec;
}

}  // namespace

TEST_CASE("donor potential values and scaling") {
  const auto lat = build_domain(cube_spec(8.0));
  DonorPotentialParams p;
  p.kappa = 11.9;
  p.u0_ev = 4.33;
  const auto v = donor_potential(p, lat);

  // Donor site carries -u0.
  REQUIRE(v[lat.donor_index] == Approx(-4.33));

  const Vec3 r0 = lat.sites[lat.donor_index].position_nm;
  // Direct arithmetic oracle at the analytic Coulomb tail:
  // e^2/(4 pi eps0) = 1.43996 eV nm, kappa = 11.9, r = 1 nm -> -0.1210 eV.
  const double expect_1nm = -1.43996 / 11.9;
  REQUIRE(expect_1nm == Approx(-0.1210).margin(2e-4));
  for (std::int64_t i = 0; i < lat.n_sites(); ++i) {
    if (i == lat.donor_index) continue;
    const double r = (lat.sites[i].position_nm - r0).norm();
    REQUIRE(v[i] == Approx(expect_1nm / r).epsilon(1e-12));
    REQUIRE(v[i] < 0);
  }
}

TEST_CASE("donor potential is isotropic and has the pure Coulomb tail") {
  const auto lat = build_domain(cube_spec(8.0));
  DonorPotentialParams p;
  const auto v = donor_potential(p, lat);
  const Vec3 r0 = lat.sites[lat.donor_index].position_nm;

  // Sites equidistant from the donor get equal values.
  std::map<long long, double> by_r2;
  for (std::int64_t i = 0; i < lat.n_sites(); ++i) {
    if (i == lat.donor_index) continue;
    const Vec3 d = lat.sites[i].position_nm - r0;
    const long long key = llround(d.dot(d) * 1e9);
    auto it = by_r2.find(key);
    if (it == by_r2.end()) {
      by_r2[key] = v[i];
    } else {
      REQUIRE(v[i] == Approx(it->second).margin(1e-14));
    }
  }

  // Doubling distance halves the magnitude: compare two sites along the
  // same ray at r and 2r.
  double r1 = -1, v1 = 0, v2 = 0;
  for (std::int64_t i = 0; i < lat.n_sites(); ++i) {
    if (i == lat.donor_index) continue;
    const Vec3 d = lat.sites[i].position_nm - r0;
    for (std::int64_t j = 0; j < lat.n_sites(); ++j) {
      if (j == lat.donor_index || j == i) continue;
      const Vec3 e = lat.sites[j].position_nm - r0;
      if (std::abs(e.x - 2 * d.x) < 1e-12 && std::abs(e.y - 2 * d.y) < 1e-12 &&
          std::abs(e.z - 2 * d.z) < 1e-12) {
        r1 = d.norm();
        v1 = v[i];
        v2 = v[j];
        break;
      }
    }
    if (r1 > 0) break;
  }
  REQUIRE(r1 > 0);
  REQUIRE(v2 == Approx(0.5 * v1).epsilon(1e-12));
}

TEST_CASE("field potential basics") {
  const auto lat = build_domain(cube_spec(6.0));
  const Vec3 r0 = lat.sites[lat.donor_index].position_nm;

  FieldSpec zero;
  zero.magnitude_v_um = 0;
  zero.gauge_origin_nm = r0;
  for (double u : field_potential(zero, lat)) REQUIRE(u == 0.0);

  // 0.5 V/um along +y, 10 nm above the origin -> +0.005 eV.
  FieldSpec f;
  f.magnitude_v_um = 0.5;
  f.direction = {0, 1, 0};
  f.gauge_origin_nm = {0, 0, 0};
  const auto u = field_potential(f, lat);
  for (std::int64_t i = 0; i < lat.n_sites(); ++i) {
    const double y = lat.sites[i].position_nm.y;
    REQUIRE(u[i] == Approx(0.5e-3 * y).margin(1e-15));
  }
  // Extrapolated to 10 nm the value is +0.005 eV.
  REQUIRE(0.5e-3 * 10.0 == Approx(0.005));

  // Reversing the direction negates all values.
  FieldSpec fr = f;
  fr.direction = {0, -1, 0};
  const auto ur = field_potential(fr, lat);
  for (std::int64_t i = 0; i < lat.n_sites(); ++i)
    REQUIRE(ur[i] == Approx(-u[i]).margin(1e-15));

  FieldSpec bad = f;
  bad.direction = {0, 2, 0};
  REQUIRE_THROWS_AS(field_potential(bad, lat), std::invalid_argument);
}

TEST_CASE("field and donor potentials add commutatively") {
  const auto lat = build_domain(cube_spec(4.0));
  DonorPotentialParams dp;
  FieldSpec f;
  f.magnitude_v_um = 0.7;
  f.direction = {0, 1, 0};
  f.gauge_origin_nm = lat.sites[lat.donor_index].position_nm;
  const auto a = donor_potential(dp, lat);
  const auto b = field_potential(f, lat);
  for (std::int64_t i = 0; i < lat.n_sites(); ++i) {
    REQUIRE(a[i] + b[i] == b[i] + a[i]);
  }
}

TEST_CASE("bmb core potential analytic limits") {
  BmbCoreParams p;
  p.kappa = 11.9;
  p.zeta = 0.75;
  p.alpha_per_nm = 14.8;
  p.beta_per_nm = 5.9;
  p.gamma_per_nm = 38.6;

  // q = 0 -> 0 for any parameters (every term is proportional to q^2).
  REQUIRE(bmb_core_potential(p, 0.0) == 0.0);

  // zeta = 1, kappa = 1, alpha = gamma -> exact cancellation for all q.
  BmbCoreParams c;
  c.kappa = 1.0;
  c.zeta = 1.0;
  c.alpha_per_nm = 7.0;
  c.beta_per_nm = 3.0;
  c.gamma_per_nm = 7.0;
  for (double q : {0.1, 1.0, 5.0, 50.0})
    REQUIRE(bmb_core_potential(c, q) == Approx(0.0).margin(1e-18));

  // q -> infinity approaches (kappa - 1)/(pi^2 kappa); checked numerically
  // far out on the tail.
  const double limit = (p.kappa - 1.0) / (M_PI * M_PI * p.kappa);
  REQUIRE(bmb_core_potential(p, 1e6) == Approx(limit).epsilon(1e-9));

  BmbCoreParams bad = p;
  bad.zeta = 1.5;
  REQUIRE_THROWS_AS(bmb_core_potential(bad, 1.0), std::invalid_argument);
  bad = p;
  bad.alpha_per_nm = -1;
  REQUIRE_THROWS_AS(bmb_core_potential(bad, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(bmb_core_potential(p, -1.0), std::invalid_argument);
}
