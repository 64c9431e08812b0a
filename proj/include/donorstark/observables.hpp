#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "donorstark/hamiltonian.hpp"
#include "donorstark/lattice.hpp"
#include "donorstark/slater_koster.hpp"
#include "donorstark/solver.hpp"

namespace dstark {

enum class ContactMode { all_orbitals, s_only };

struct DegenerateStateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Summed on-site orbital weight at the donor site: the tight-binding proxy
// for |Psi(r0)|^2. s_only restricts to the l = 0 (s and s*) orbitals that
// mediate the Fermi contact interaction.
struct ContactDensity {
  double total = 0;
  double s_only = 0;
  ContactMode mode = ContactMode::all_orbitals;

  double value() const {
    return mode == ContactMode::all_orbitals ? total : s_only;
  }
};

namespace detail {

inline void check_unit_norm(const Eigen::VectorXcd& psi) {
  const double n = psi.norm();
  if (std::abs(n - 1.0) > 1e-10)
    throw std::invalid_argument("eigenvector norm deviates from 1: " +
                                std::to_string(n));
}

}  // namespace detail

inline ContactDensity contact_density(const Eigen::VectorXcd& psi,
                                      const SparseHamiltonian& h,
                                      std::int64_t donor_index,
                                      ContactMode mode) {
  detail::check_unit_norm(psi);
  if (donor_index < 0 || donor_index >= h.n_sites())
    throw std::invalid_argument("invalid donor index");
  const int d = h.site_dim();
  const int spins = h.with_spin() ? 2 : 1;
  ContactDensity c;
  c.mode = mode;
  for (int s = 0; s < spins; ++s) {
    for (int o = 0; o < n_orbitals; ++o) {
      const double w = std::norm(psi(donor_index * d + s * n_orbitals + o));
      c.total += w;
      if (o == orb_s || o == orb_sstar) c.s_only += w;
    }
  }
  return c;
}

// A(eps)/A(0) as the ratio of donor-site weights, Phase-invariant.
inline double contact_ratio(const Eigen::VectorXcd& psi_field,
                            const Eigen::VectorXcd& psi_zero,
                            const SparseHamiltonian& h,
                            std::int64_t donor_index,
                            ContactMode mode = ContactMode::all_orbitals) {
  const auto num = contact_density(psi_field, h, donor_index, mode);
  const auto den = contact_density(psi_zero, h, donor_index, mode);
  if (den.value() <= 1e-300)
    throw DegenerateStateError(
        "zero-field state has no donor-site weight; wrong state selected");
  return num.value() / den.value();
}

// Per-site probability of an eigenvector (summed over orbitals and spin).
inline std::vector<double> site_probabilities(const Eigen::VectorXcd& psi,
                                              const SparseHamiltonian& h) {
  detail::check_unit_norm(psi);
  const int d = h.site_dim();
  std::vector<double> p(h.n_sites());
  for (std::int64_t i = 0; i < h.n_sites(); ++i) {
    double w = 0;
    for (int c = 0; c < d; ++c) w += std::norm(psi(i * d + c));
    p[i] = w;
  }
  return p;
}

// Mean displacement of the distribution along `axis` relative to `origin`,
// in nm.
inline double dipole_moment(const Eigen::VectorXcd& psi,
                            const DomainLattice& lattice,
                            const SparseHamiltonian& h, const Vec3& axis,
                            double origin_nm) {
  const auto p = site_probabilities(psi, h);
  double mean = 0;
  for (std::int64_t i = 0; i < lattice.n_sites(); ++i)
    mean += p[i] * lattice.sites[i].position_nm.dot(axis);
  return mean - origin_nm;
}

// Checks that the consumed state is the solution's ground state and that it
// is cleanly separated from the next one.
inline void guard_ground_state(const EigenSolution& sol,
                               double solver_tolerance_ev) {
  if (sol.eigenvalues.size() >= 2) {
    const double gap = sol.eigenvalues(1) - sol.eigenvalues(0);
    if (gap <= 10.0 * solver_tolerance_ev)
      throw DegenerateStateError(
          "ground state separated from the next state by " +
          std::to_string(gap) + " eV, below 10x solver tolerance");
  }
}

struct DensityMap {
  // One record per site on the requested cut.
  struct Point {
    Vec3 position_nm;
    double value;
  };
  std::string description;
  std::vector<Point> points;
  double field_v_um = 0;
};

struct RangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 2-D cut: all sites whose coordinate along `normal_axis` matches the
// snapped plane through `plane_coord_nm`.
inline DensityMap density_map(const Eigen::VectorXcd& psi,
                              const DomainLattice& lattice,
                              const SparseHamiltonian& h, Axis normal_axis,
                              double plane_coord_nm, double field_v_um = 0) {
  const int ax = static_cast<int>(normal_axis);
  const double extent = lattice.cells[ax] * lattice.spec.lattice_constant_nm;
  if (plane_coord_nm < -1e-9 || plane_coord_nm > extent + 1e-9)
    throw RangeError("cut plane lies outside the domain");
  // Snap to the nearest populated lattice plane (spacing a/4).
  const double spacing = lattice.spec.lattice_constant_nm / 4.0;
  const double snapped = std::round(plane_coord_nm / spacing) * spacing;

  const auto p = site_probabilities(psi, h);
  DensityMap map;
  map.description = std::string("plane ") + axis_name(normal_axis) + " = " +
                    std::to_string(snapped) + " nm";
  map.field_v_um = field_v_um;
  for (std::int64_t i = 0; i < lattice.n_sites(); ++i) {
    if (std::abs(lattice.sites[i].position_nm[ax] - snapped) < 0.25 * spacing)
      map.points.push_back({lattice.sites[i].position_nm, p[i]});
  }
  return map;
}

// 1-D cut through the donor parallel to `axis`: sites within half a bond
// length of the line.
inline DensityMap density_line(const Eigen::VectorXcd& psi,
                               const DomainLattice& lattice,
                               const SparseHamiltonian& h, Axis axis,
                               double field_v_um = 0) {
  const Vec3 r0 = lattice.sites[lattice.donor_index].position_nm;
  const int ax = static_cast<int>(axis);
  const double tol = 0.5 * lattice.bond_length_nm();
  const auto p = site_probabilities(psi, h);
  DensityMap map;
  map.description = std::string("line through donor along ") + axis_name(axis);
  map.field_v_um = field_v_um;
  for (std::int64_t i = 0; i < lattice.n_sites(); ++i) {
    Vec3 d = lattice.sites[i].position_nm - r0;
    double lateral2 = d.dot(d) - d[ax] * d[ax];
    if (lateral2 < tol * tol)
      map.points.push_back({lattice.sites[i].position_nm, p[i]});
  }
  return map;
}

// Differential map |Psi(eps)|^2 - |Psi(0)|^2 on a 2-D cut.
inline DensityMap differential_map(const Eigen::VectorXcd& psi_field,
                                   const Eigen::VectorXcd& psi_zero,
                                   const DomainLattice& lattice,
                                   const SparseHamiltonian& h,
                                   Axis normal_axis, double plane_coord_nm,
                                   double field_v_um) {
  auto a = density_map(psi_field, lattice, h, normal_axis, plane_coord_nm,
                       field_v_um);
  const auto b =
      density_map(psi_zero, lattice, h, normal_axis, plane_coord_nm, 0.0);
  for (std::size_t i = 0; i < a.points.size(); ++i)
    a.points[i].value -= b.points[i].value;
  a.description = "differential " + a.description;
  return a;
}

}  // namespace dstark
