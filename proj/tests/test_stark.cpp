#include <catch2/catch.hpp>

#include <cmath>

#include "donorstark/hamiltonian.hpp"
#include "donorstark/potentials.hpp"
#include "donorstark/solver.hpp"
#include "donorstark/stark.hpp"
#include "test_helpers.hpp"

using namespace dstark;

namespace {

std::vector<double> default_grid() {
  return {-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0};
}

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

TEST_CASE("exact quadratic data recovered exactly") {
  const auto fields = default_grid();
  const double eta2 = -3.7e-3;  // measured coefficient scale
  std::vector<double> y;
  for (double f : fields) y.push_back(eta2 * f * f);
  const auto fit = fit_stark(fields, y);
  REQUIRE(fit.eta2 == Approx(eta2).margin(1e-15));
  REQUIRE(fit.eta1 == Approx(0.0).margin(1e-15));
  REQUIRE(fit.rms_residual < 1e-15);
}

TEST_CASE("noisy coefficients recovered within three sigma") {
  const auto fields = default_grid();
  const double eta2 = -2.57e-3, eta1 = 1e-4;
  test_helpers::SplitMix64 rng(404);
  std::vector<double> y;
  for (double f : fields) {
    const double noise = 1e-6 * (rng.uniform() + rng.uniform() +
                                 rng.uniform() + rng.uniform() - 2.0);
    y.push_back(eta2 * f * f + eta1 * f + noise);
  }
  const auto fit = fit_stark(fields, y);
  REQUIRE(std::abs(fit.eta2 - eta2) <
          3 * std::sqrt(fit.covariance(0, 0)) + 1e-12);
  REQUIRE(std::abs(fit.eta1 - eta1) <
          3 * std::sqrt(fit.covariance(1, 1)) + 1e-12);
}

TEST_CASE("fit is scale-consistent under field rescaling") {
  const auto fields = default_grid();
  const double eta2 = -1.8e-3, eta1 = 2.5e-4;
  std::vector<double> y, scaled_fields;
  for (double f : fields) {
    y.push_back(eta2 * f * f + eta1 * f);
    scaled_fields.push_back(2.0 * f);
  }
  const auto fit = fit_stark(fields, y);
  const auto fit2 = fit_stark(scaled_fields, y);
  REQUIRE(fit2.eta2 == Approx(fit.eta2 / 4.0).epsilon(1e-12));
  REQUIRE(fit2.eta1 == Approx(fit.eta1 / 2.0).epsilon(1e-12));
}

TEST_CASE("rank-deficient designs raise fit errors") {
  REQUIRE_THROWS_AS(fit_stark({0.0, 1.0}, {0.0, -1e-3}), FitError);
  // four points but only two distinct fields
  REQUIRE_THROWS_AS(fit_stark({0.0, 1.0, 1.0, 0.0}, {0, -1e-3, -1e-3, 0}),
                    FitError);
  // no zero field
  REQUIRE_THROWS_AS(
      fit_stark({0.5, 1.0, 1.5, 2.0}, {-1e-4, -2e-4, -3e-4, -4e-4}),
      FitError);
}

TEST_CASE("dipole line fit recovers slope and intercept") {
  const auto fields = default_grid();
  std::vector<double> d;
  for (double f : fields) d.push_back(0.013 * f + 0.21);
  const auto fit = fit_dipole(fields, d);
  REQUIRE(fit.slope_nm_um_v == Approx(0.013).epsilon(1e-12));
  REQUIRE(fit.intercept_nm == Approx(0.21).epsilon(1e-12));
  REQUIRE(fit.r_squared == Approx(1.0).margin(1e-12));
}

TEST_CASE("spin levels analytics") {
  // b0 = 0, a = 0: four degenerate zeros
  auto lv = spin_levels(2.0, 0.0, 0.0);
  for (double e : lv.energies_ev) REQUIRE(e == 0.0);

  // a = 0: two doublets split by g muB B0
  const double g = 1.9985, b0 = 0.35;
  lv = spin_levels(g, b0, 0.0);
  const double split = g * units::mu_bohr_ev_per_tesla * b0;
  REQUIRE(lv.energies_ev[0] == Approx(lv.energies_ev[1]).margin(1e-18));
  REQUIRE(lv.energies_ev[2] == Approx(lv.energies_ev[3]).margin(1e-18));
  REQUIRE(lv.energies_ev[2] - lv.energies_ev[0] == Approx(split));

  // hyperfine-split ESR transition difference equals a exactly:
  // E(+1/2, mI) - E(-1/2, mI) differs by a between mI = +1/2 and -1/2.
  const double a = 1.2e-7;
  lv = spin_levels(g, b0, a);
  const double up_minus =
      lv.energies_ev[2] - lv.energies_ev[0];  // mI = -1/2 branch
  const double up_plus =
      lv.energies_ev[3] - lv.energies_ev[1];  // mI = +1/2 branch
  REQUIRE(up_plus - up_minus == Approx(a).margin(1e-18));

  REQUIRE_THROWS_AS(spin_levels(2.0, -1.0, 0.0), std::invalid_argument);
}

TEST_CASE("perturbation dipole intercept matches the dipole moment exactly") {
  const auto lat = build_domain(cube_spec(2.0));
  auto params = test_helpers::load_si_params();
  DonorPotentialParams dp;
  const auto v = donor_potential(dp, lat);
  AssemblyOptions opts;
  opts.spin_orbit = false;
  const auto h = SparseHamiltonian::assemble(lat, params, v, opts);
  const auto dense = dense_diagonalize(h);

  // gap states as a zero-field "solution"
  int j = 1;
  double best = 0;
  const auto& ev = dense.eigenvalues;
  for (int i = 80; i < 560; ++i)
    if (ev(i) - ev(i - 1) > best) {
      best = ev(i) - ev(i - 1);
      j = i;
    }
  const int m = 6;
  EigenSolution zero;
  zero.eigenvalues = ev.segment(j, m);
  zero.eigenvectors = dense.eigenvectors.middleCols(j, m);
  zero.residuals = Eigen::VectorXd::Constant(m, 1e-12);

  const Vec3 axis{0, -1, 0};  // electron-displacement convention
  const auto pred = perturbation_dipole(zero, lat, h, axis, 1e-8);
  REQUIRE(pred.states_used == m);
  REQUIRE(pred.slope_nm_um_v > 0.0);

  const double origin =
      lat.sites[lat.donor_index].position_nm.dot(axis);
  const double direct =
      dipole_moment(zero.eigenvectors.col(0), lat, h, axis, origin);
  REQUIRE(pred.intercept_nm == Approx(direct).margin(1e-14));

  // degenerate ground state rejected
  EigenSolution degen = zero;
  degen.eigenvalues(1) = degen.eigenvalues(0);
  REQUIRE_THROWS_AS(perturbation_dipole(degen, lat, h, axis, 1e-8),
                    DegenerateStateError);
}

TEST_CASE("gaussian start vector is normalized and donor-centered") {
  const auto lat = build_domain(cube_spec(3.0));
  const auto v = gaussian_start(lat, false, 0.4);
  REQUIRE(v.norm() == Approx(1.0).epsilon(1e-12));
  // the donor-site s amplitude is the largest entry
  double vmax = 0;
  for (int i = 0; i < v.size(); ++i) vmax = std::max(vmax, std::abs(v(i)));
  REQUIRE(std::abs(v(lat.donor_index * n_orbitals + orb_s)) ==
          Approx(vmax));
}

TEST_CASE("trivial sweep with only the zero field completes") {
  DomainSpec spec = cube_spec(2.0);
  SweepConfig cfg;
  cfg.params = test_helpers::load_si_params();
  cfg.assembly.spin_orbit = false;
  cfg.solver.tolerance_ev = 1e-8;
  cfg.solver.max_iterations = 8000;
  cfg.solver.block_size = 2;
  cfg.n_states = 2;
  cfg.calibrate = false;
  cfg.fixed_u0_ev = 4.33;

  const auto sweep = run_sweep(spec, {0.0}, cfg);
  REQUIRE(sweep.complete);
  REQUIRE(sweep.fields_v_um == std::vector<double>{0.0});
  REQUIRE(sweep.delta_a_over_a0 == std::vector<double>{0.0});
  REQUIRE(sweep.ratios == std::vector<double>{1.0});
  REQUIRE(sweep.u0_ev == 4.33);
  // a one-point sweep cannot be fitted: structured error, not a crash
  REQUIRE_THROWS_AS(fit_stark(sweep), FitError);
}

TEST_CASE("sweep preconditions") {
  DomainSpec spec = cube_spec(2.0);
  SweepConfig cfg;
  cfg.params = test_helpers::load_si_params();
  REQUIRE_THROWS_AS(run_sweep(spec, {0.5, 0.25}, cfg), std::invalid_argument);
  REQUIRE_THROWS_AS(run_sweep(spec, {0.25, 0.5}, cfg), std::invalid_argument);
}

TEST_CASE("depth scan isolates per-depth failures") {
  DomainSpec spec = cube_spec(2.0);
  SweepConfig cfg;
  cfg.params = test_helpers::load_si_params();
  cfg.assembly.spin_orbit = false;
  cfg.solver.tolerance_ev = 1e-8;
  cfg.solver.max_iterations = 8000;
  cfg.solver.block_size = 2;
  cfg.n_states = 2;
  cfg.calibrate = false;

  // second depth lies outside the domain and must fail alone
  const double a = spec.extents_nm[1];
  const auto entries = depth_scan(spec, {0.5 * a, 3.0 * a}, {0.0}, cfg);
  REQUIRE(entries.size() == 2);
  REQUIRE(entries[0].sweep.complete);
  REQUIRE_FALSE(entries[1].error.empty());
}
