#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "donorstark/slater_koster.hpp"
#include "donorstark/tb_params.hpp"
#include "donorstark/thread_pool.hpp"

namespace dstark {

struct BandStructureReport {
  std::vector<Vec3> k_path;          // units of 2*pi/a
  std::vector<std::vector<double>> bands;  // ascending eV per k-point
  double valence_max_ev = 0;
  double conduction_min_ev = 0;
  double indirect_gap_ev = 0;
  double valley_position = 0;  // fractional Gamma->X distance of the CB minimum
  int n_filled = 8;            // spin-resolved filled states per cell
};

// Bloch Hamiltonian of the two-atom diamond cell at k (units 2*pi/a).
// Dimension is 2 * n_orbitals * (1 or 2 spins).
inline Eigen::MatrixXcd bloch_hamiltonian(const TbParameterSet& params,
                                          const Vec3& k_2pi_a,
                                          bool with_spin) {
  using cd = std::complex<double>;
  const int no = n_orbitals;
  const int spins = with_spin ? 2 : 1;
  const int atom_dim = no * spins;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2 * atom_dim, 2 * atom_dim);

  const auto eo = onsite_energies(params);
  for (int a = 0; a < 2; ++a)
    for (int s = 0; s < spins; ++s)
      for (int o = 0; o < no; ++o)
        h(a * atom_dim + s * no + o, a * atom_dim + s * no + o) = eo(o);

  if (with_spin && params.spin_orbit_p != 0) {
    const Eigen::MatrixXcd so = spin_orbit_block(params.spin_orbit_p);
    for (int a = 0; a < 2; ++a)
      h.block(a * atom_dim, a * atom_dim, atom_dim, atom_dim) += so;
  }

  // Four bonds from atom A at the origin to B at (1,1,1)a/4 images.
  Eigen::MatrixXcd hab = Eigen::MatrixXcd::Zero(atom_dim, atom_dim);
  for (int c = 0; c < 4; ++c) {
    const Vec3 d{0.25 * diamond::bond_frac4[c][0],
                 0.25 * diamond::bond_frac4[c][1],
                 0.25 * diamond::bond_frac4[c][2]};  // units of a
    const double phase = 2.0 * M_PI * k_2pi_a.dot(d);
    const cd f(std::cos(phase), std::sin(phase));
    const SkBlock b = sk_block(params, diamond::bond_direction(c, false));
    for (int s = 0; s < spins; ++s)
      for (int i = 0; i < no; ++i)
        for (int j = 0; j < no; ++j)
          hab(s * no + i, s * no + j) += f * b(i, j);
  }
  h.block(0, atom_dim, atom_dim, atom_dim) = hab;
  h.block(atom_dim, 0, atom_dim, atom_dim) = hab.adjoint();
  return h;
}

// Dense Bloch diagonalization along a k-path. The gap and valley position
// are taken from the grid extrema with a three-point parabolic refinement
// of the conduction minimum.
inline BandStructureReport bulk_bands(const TbParameterSet& params,
                                      const std::vector<Vec3>& k_path,
                                      bool with_spin = true,
                                      ThreadPool* pool = nullptr) {
  if (k_path.empty()) throw std::invalid_argument("bulk_bands: empty k path");
  BandStructureReport rep;
  rep.k_path = k_path;
  rep.bands.resize(k_path.size());
  rep.n_filled = with_spin ? 8 : 4;

  auto solve_one = [&](std::size_t i) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        bloch_hamiltonian(params, k_path[i], with_spin),
        Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    rep.bands[i].assign(ev.data(), ev.data() + ev.size());
  };
  if (pool && pool->worker_count() > 1) {
    pool->parallel_chunks(k_path.size(), 1,
                          [&](std::size_t, std::size_t b, std::size_t e) {
                            for (std::size_t i = b; i < e; ++i) solve_one(i);
                          });
  } else {
    for (std::size_t i = 0; i < k_path.size(); ++i) solve_one(i);
  }

  // Eight valence electrons per cell fill indices 0..7 with explicit spin,
  // 0..3 without (each band then holds two electrons).
  const int homo = with_spin ? 7 : 3;
  const int lumo = homo + 1;

  double vmax = -1e300, cmin = 1e300;
  std::size_t cmin_idx = 0;
  for (std::size_t i = 0; i < k_path.size(); ++i) {
    vmax = std::max(vmax, rep.bands[i][homo]);
    if (rep.bands[i][lumo] < cmin) {
      cmin = rep.bands[i][lumo];
      cmin_idx = i;
    }
  }
  rep.valence_max_ev = vmax;
  rep.conduction_min_ev = cmin;

  // Parabolic refinement of the conduction minimum along the path.
  double frac = static_cast<double>(cmin_idx) /
                static_cast<double>(k_path.size() - 1);
  if (cmin_idx > 0 && cmin_idx + 1 < k_path.size()) {
    const double y0 = rep.bands[cmin_idx - 1][lumo];
    const double y1 = rep.bands[cmin_idx][lumo];
    const double y2 = rep.bands[cmin_idx + 1][lumo];
    const double denom = y0 - 2 * y1 + y2;
    if (denom > 1e-15) {
      const double shift = 0.5 * (y0 - y2) / denom;  // in grid steps
      frac += shift / static_cast<double>(k_path.size() - 1);
      rep.conduction_min_ev = y1 - 0.25 * (y0 - y2) * shift;
    }
  }
  rep.indirect_gap_ev = rep.conduction_min_ev - rep.valence_max_ev;
  rep.valley_position = frac;
  return rep;
}

// Uniform Gamma -> X path along [100] with n+1 points (k in units 2*pi/a).
inline std::vector<Vec3> gamma_x_path(int n) {
  std::vector<Vec3> path;
  path.reserve(n + 1);
  for (int i = 0; i <= n; ++i)
    path.push_back({static_cast<double>(i) / n, 0.0, 0.0});
  return path;
}

// Bulk conduction-band minimum for the parameter set; the reference energy
// for donor binding. Cached per content hash by callers.
inline double bulk_cbm(const TbParameterSet& params, bool with_spin) {
  const auto rep = bulk_bands(params, gamma_x_path(400), with_spin);
  return rep.conduction_min_ev;
}

}  // namespace dstark
