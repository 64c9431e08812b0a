#pragma once

// Physical constants and unit conventions used throughout.
//
// Energies are eV, lengths nm, electric fields V/um (= MV/m), magnetic
// fields Tesla. All potentials are stored as electron potential energy,
// so an attractive donor potential is negative.

namespace dstark {
namespace units {

// e^2/(4 pi eps0) in eV*nm
inline constexpr double coulomb_ev_nm = 1.43996;

// Bohr magneton in eV/T
inline constexpr double mu_bohr_ev_per_tesla = 5.7883818060e-5;

// Potential energy per nm of displacement per (V/um) of field, in eV.
// 1 V/um = 1e-3 V/nm and the electron charge is one e.
inline constexpr double ev_per_nm_per_v_um = 1.0e-3;

// Default silicon lattice constant in nm (config value, not hardcoded
// into physics routines).
inline constexpr double si_lattice_constant_nm = 0.5431;

}  // namespace units
}  // namespace dstark
