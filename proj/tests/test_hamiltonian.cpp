#include <catch2/catch.hpp>

#include <cmath>
#include <complex>

#include "donorstark/hamiltonian.hpp"
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

SparseHamiltonian make_h(const DomainLattice& lat, bool spin,
                         double passivation = 30.0, double field = 0.0) {
  auto params = test_helpers::load_si_params();
  DonorPotentialParams dp;
  auto v = donor_potential(dp, lat);
  if (field != 0) {
    FieldSpec f;
    f.magnitude_v_um = field;
    f.direction = {0, 1, 0};
    f.gauge_origin_nm = lat.sites[lat.donor_index].position_nm;
    const auto u = field_potential(f, lat);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += u[i];
  }
  AssemblyOptions opts;
  opts.spin_orbit = spin;
  opts.passivation_ev = passivation;
  return SparseHamiltonian::assemble(lat, params, v, opts);
}

}  // namespace

TEST_CASE("assembly rejects mismatched potential length") {
  const auto lat = build_domain(cube_spec(2.0));
  auto params = test_helpers::load_si_params();
  std::vector<double> v(lat.n_sites() - 1, 0.0);
  REQUIRE_THROWS_AS(SparseHamiltonian::assemble(lat, params, v),
                    AssemblyError);
}

TEST_CASE("matrix-free apply equals dense multiply") {
  const auto lat = build_domain(cube_spec(2.0));
  for (bool spin : {false, true}) {
    const auto h = make_h(lat, spin);
    const auto m = h.dense();
    REQUIRE(h.dimension() == (spin ? 64 * 20 : 64 * 10));

    test_helpers::SplitMix64 rng(42);
    if (!spin) {
      Eigen::VectorXd x(h.dimension()), y(h.dimension());
      for (int i = 0; i < x.size(); ++i) x(i) = rng.symmetric();
      h.apply(x.data(), y.data());
      const Eigen::VectorXd yd = (m * x.cast<std::complex<double>>()).real();
      REQUIRE((y - yd).cwiseAbs().maxCoeff() < 1e-12);
    } else {
      Eigen::VectorXcd x(h.dimension()), y(h.dimension());
      for (int i = 0; i < x.size(); ++i)
        x(i) = std::complex<double>(rng.symmetric(), rng.symmetric());
      h.apply(x.data(), y.data());
      const Eigen::VectorXcd yd = m * x;
      REQUIRE((y - yd).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("dense matrix is Hermitian and apply passes the random-vector test") {
  const auto lat = build_domain(cube_spec(2.0));
  const auto h = make_h(lat, true);
  const auto m = h.dense();
  REQUIRE((m - m.adjoint()).cwiseAbs().maxCoeff() < 1e-12);

  // |<x, Hy> - <Hx, y>| <= 1e-10 ||x|| ||y|| ||H||_est
  test_helpers::SplitMix64 rng(7);
  Eigen::VectorXcd x(h.dimension()), y(h.dimension()), hx(h.dimension()),
      hy(h.dimension());
  for (int i = 0; i < x.size(); ++i) {
    x(i) = std::complex<double>(rng.symmetric(), rng.symmetric());
    y(i) = std::complex<double>(rng.symmetric(), rng.symmetric());
  }
  h.apply(x.data(), hx.data());
  h.apply(y.data(), hy.data());
  const std::complex<double> a = x.dot(hy), b = hx.dot(y);
  REQUIRE(std::abs(a - b) <=
          1e-10 * x.norm() * y.norm() * h.gershgorin_bound());
}

TEST_CASE("constant potential shift moves all eigenvalues by c") {
  const auto lat = build_domain(cube_spec(1.0));
  auto params = test_helpers::load_si_params();
  DonorPotentialParams dp;
  auto v = donor_potential(dp, lat);
  AssemblyOptions opts;
  opts.spin_orbit = false;
  const auto h0 = SparseHamiltonian::assemble(lat, params, v, opts);
  const double c = 1.0;
  for (auto& vi : v) vi += c;
  const auto h1 = SparseHamiltonian::assemble(lat, params, v, opts);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e0(h0.dense(),
                                                     Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e1(h1.dense(),
                                                     Eigen::EigenvaluesOnly);
  REQUIRE((e1.eigenvalues() - e0.eigenvalues() -
           Eigen::VectorXd::Constant(e0.eigenvalues().size(), c))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
}

TEST_CASE("Gershgorin-type bound contains the spectrum") {
  const auto lat = build_domain(cube_spec(2.0));
  const auto h = make_h(lat, false);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.dense(),
                                                     Eigen::EigenvaluesOnly);
  const double bound = h.gershgorin_bound();
  REQUIRE(es.eigenvalues().minCoeff() >= -bound);
  REQUIRE(es.eigenvalues().maxCoeff() <= bound);
}

TEST_CASE("spectrum invariant under site relabeling") {
  const auto lat = build_domain(cube_spec(1.0));
  const auto h = make_h(lat, false);
  const Eigen::MatrixXcd m = h.dense();
  const int n = m.rows();

  // Permute whole site blocks with a fixed pseudo-random permutation.
  std::vector<int> perm(lat.n_sites());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  test_helpers::SplitMix64 rng(3);
  for (int i = perm.size() - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.next() % (i + 1)]);
  Eigen::MatrixXcd pm = Eigen::MatrixXcd::Zero(n, n);
  const int d = h.site_dim();
  for (std::size_t si = 0; si < perm.size(); ++si)
    for (std::size_t sj = 0; sj < perm.size(); ++sj)
      pm.block(perm[si] * d, perm[sj] * d, d, d) =
          m.block(si * d, sj * d, d, d);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e0(m, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e1(pm,
                                                     Eigen::EigenvaluesOnly);
  REQUIRE((e0.eigenvalues() - e1.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("threaded apply is bit-identical to serial") {
  const auto lat = build_domain(cube_spec(3.0));
  const auto h = make_h(lat, false, 30.0, 0.3);
  test_helpers::SplitMix64 rng(11);
  Eigen::VectorXd x(h.dimension());
  for (int i = 0; i < x.size(); ++i) x(i) = rng.symmetric();

  Eigen::VectorXd y1(h.dimension()), y2(h.dimension()), y3(h.dimension());
  h.apply(x.data(), y1.data(), nullptr);
  ThreadPool pool2(2);
  h.apply(x.data(), y2.data(), &pool2);
  ThreadPool pool3(3);
  h.apply(x.data(), y3.data(), &pool3);
  REQUIRE(std::memcmp(y1.data(), y2.data(), sizeof(double) * y1.size()) == 0);
  REQUIRE(std::memcmp(y1.data(), y3.data(), sizeof(double) * y1.size()) == 0);
}

TEST_CASE("content hash tracks inputs") {
  const auto lat = build_domain(cube_spec(2.0));
  const auto h1 = make_h(lat, false);
  const auto h2 = make_h(lat, false);
  const auto h3 = make_h(lat, false, 30.0, 0.1);
  REQUIRE(h1.content_hash() == h2.content_hash());
  REQUIRE(h1.content_hash() != h3.content_hash());
}
