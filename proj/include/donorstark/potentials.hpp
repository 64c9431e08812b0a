#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "donorstark/lattice.hpp"
#include "donorstark/units.hpp"

namespace dstark {

// Screened donor Coulomb potential with an on-site central-cell correction.
// All values are electron potential energy in eV: the donor is attractive,
// so the tail is negative and the donor site carries -u0.
struct DonorPotentialParams {
  double kappa = 11.9;  // relative dielectric constant
  double u0_ev = 4.33;  // on-site correction magnitude, eV
  std::int64_t donor_site = -1;

  void validate() const {
    if (!(kappa > 1)) throw std::invalid_argument("kappa must be > 1");
    if (!std::isfinite(u0_ev)) throw std::invalid_argument("u0 must be finite");
  }
};

inline std::vector<double> donor_potential(const DonorPotentialParams& params,
                                           const DomainLattice& lattice) {
  params.validate();
  const std::int64_t donor =
      params.donor_site >= 0 ? params.donor_site : lattice.donor_index;
  if (donor < 0 || donor >= lattice.n_sites())
    throw std::invalid_argument("donor_potential: invalid donor site");
  const Vec3 r0 = lattice.sites[donor].position_nm;
  const double pref = -units::coulomb_ev_nm / params.kappa;
  std::vector<double> v(lattice.n_sites());
  for (std::int64_t i = 0; i < lattice.n_sites(); ++i) {
    if (i == donor) {
      v[i] = -params.u0_ev;
    } else {
      v[i] = pref / (lattice.sites[i].position_nm - r0).norm();
    }
  }
  return v;
}

// Uniform electric field, stored as electron potential energy:
// U(r) = +e eps (r - gauge_origin) . direction, in eV with eps in V/um.
struct FieldSpec {
  double magnitude_v_um = 0;
  Vec3 direction{0, 1, 0};
  Vec3 gauge_origin_nm{0, 0, 0};

  void validate() const {
    if (std::abs(direction.norm() - 1.0) > 1e-12)
      throw std::invalid_argument("field direction must be a unit vector");
  }
};

inline std::vector<double> field_potential(const FieldSpec& field,
                                           const DomainLattice& lattice) {
  field.validate();
  const double c = units::ev_per_nm_per_v_um * field.magnitude_v_um;
  std::vector<double> v(lattice.n_sites());
  for (std::int64_t i = 0; i < lattice.n_sites(); ++i) {
    v[i] = c * (lattice.sites[i].position_nm - field.gauge_origin_nm)
                   .dot(field.direction);
  }
  return v;
}

// Pantelides-form donor core potential in momentum space.
struct BmbCoreParams {
  double kappa = 11.9;
  double zeta = 0;
  double alpha_per_nm = 0;
  double beta_per_nm = 0;
  double gamma_per_nm = 0;

  void validate() const {
    if (!(alpha_per_nm > 0 && beta_per_nm > 0 && gamma_per_nm > 0))
      throw std::invalid_argument("bmb core: alpha, beta, gamma must be > 0");
    if (!(zeta >= 0 && zeta <= 1))
      throw std::invalid_argument("bmb core: zeta must lie in [0, 1]");
  }
};

// U_cor(q) = (1/(pi^2 kappa)) * ( kappa zeta q^2/(q^2+alpha^2)
//          + kappa (1-zeta) q^2/(q^2+beta^2) - q^2/(q^2+gamma^2) ).
inline double bmb_core_potential(const BmbCoreParams& p, double q_per_nm) {
  p.validate();
  if (q_per_nm < 0)
    throw std::invalid_argument("bmb core: q must be non-negative");
  const double q2 = q_per_nm * q_per_nm;
  const double term1 =
      p.kappa * p.zeta * q2 / (q2 + p.alpha_per_nm * p.alpha_per_nm);
  const double term2 =
      p.kappa * (1.0 - p.zeta) * q2 / (q2 + p.beta_per_nm * p.beta_per_nm);
  const double term3 = q2 / (q2 + p.gamma_per_nm * p.gamma_per_nm);
  return (term1 + term2 - term3) / (M_PI * M_PI * p.kappa);
}

}  // namespace dstark
