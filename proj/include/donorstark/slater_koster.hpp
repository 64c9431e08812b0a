#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "donorstark/lattice.hpp"
#include "donorstark/tb_params.hpp"

namespace dstark {

// Orbital indices in the canonical sp3d5s* ordering.
enum Orbital : int {
  orb_s = 0,
  orb_px = 1,
  orb_py = 2,
  orb_pz = 3,
  orb_dxy = 4,
  orb_dyz = 5,
  orb_dzx = 6,
  orb_dx2y2 = 7,
  orb_dz2 = 8,
  orb_sstar = 9,
};

inline constexpr int n_orbitals = 10;

inline int orbital_l(int orb) {
  if (orb == orb_s || orb == orb_sstar) return 0;
  if (orb >= orb_px && orb <= orb_pz) return 1;
  return 2;
}

using SkBlock = Eigen::Matrix<double, n_orbitals, n_orbitals>;

namespace detail {

// Named integrals pulled out of the parameter map once per assembly.
struct SkIntegrals {
  double ss, s_sstar, sstar_sstar, sp, sstar_p, sd, sstar_d;
  double pps, ppp, pds, pdp, dds, ddp, ddd;

  explicit SkIntegrals(const TbParameterSet& p)
      : ss(p.integral("ss_sigma")),
        s_sstar(p.integral("s_sstar_sigma")),
        sstar_sstar(p.integral("sstar_sstar_sigma")),
        sp(p.integral("sp_sigma")),
        sstar_p(p.integral("sstar_p_sigma")),
        sd(p.integral("sd_sigma")),
        sstar_d(p.integral("sstar_d_sigma")),
        pps(p.integral("pp_sigma")),
        ppp(p.integral("pp_pi")),
        pds(p.integral("pd_sigma")),
        pdp(p.integral("pd_pi")),
        dds(p.integral("dd_sigma")),
        ddp(p.integral("dd_pi")),
        ddd(p.integral("dd_delta")) {}
};

// s(-like) to d angular factors, d ordered xy, yz, zx, x2y2, z2.
inline void sd_row(double l, double m, double n, double v, double* out) {
  const double rt3 = std::sqrt(3.0);
  out[0] = rt3 * l * m * v;
  out[1] = rt3 * m * n * v;
  out[2] = rt3 * n * l * v;
  out[3] = 0.5 * rt3 * (l * l - m * m) * v;
  out[4] = (n * n - 0.5 * (l * l + m * m)) * v;
}

// p to d block, rows x,y,z, cols xy,yz,zx,x2y2,z2.
inline void pd_block(double l, double m, double n, double s, double p,
                     double out[3][5]) {
  const double rt3 = std::sqrt(3.0);
  const double l2 = l * l, m2 = m * m, n2 = n * n;
  out[0][0] = rt3 * l2 * m * s + m * (1 - 2 * l2) * p;
  out[0][1] = rt3 * l * m * n * s - 2 * l * m * n * p;
  out[0][2] = rt3 * l2 * n * s + n * (1 - 2 * l2) * p;
  out[1][0] = rt3 * m2 * l * s + l * (1 - 2 * m2) * p;
  out[1][1] = rt3 * m2 * n * s + n * (1 - 2 * m2) * p;
  out[1][2] = rt3 * l * m * n * s - 2 * l * m * n * p;
  out[2][0] = rt3 * l * m * n * s - 2 * l * m * n * p;
  out[2][1] = rt3 * n2 * m * s + m * (1 - 2 * n2) * p;
  out[2][2] = rt3 * n2 * l * s + l * (1 - 2 * n2) * p;
  out[0][3] = 0.5 * rt3 * l * (l2 - m2) * s + l * (1 - l2 + m2) * p;
  out[1][3] = 0.5 * rt3 * m * (l2 - m2) * s - m * (1 + l2 - m2) * p;
  out[2][3] = 0.5 * rt3 * n * (l2 - m2) * s - n * (l2 - m2) * p;
  out[0][4] = l * (n2 - 0.5 * (l2 + m2)) * s - rt3 * l * n2 * p;
  out[1][4] = m * (n2 - 0.5 * (l2 + m2)) * s - rt3 * m * n2 * p;
  out[2][4] = n * (n2 - 0.5 * (l2 + m2)) * s + rt3 * n * (l2 + m2) * p;
}

// d to d block, symmetric, ordered xy,yz,zx,x2y2,z2.
inline void dd_block(double l, double m, double n, double s, double p,
                     double d, double out[5][5]) {
  const double rt3 = std::sqrt(3.0);
  const double l2 = l * l, m2 = m * m, n2 = n * n;
  const double lm = l * m, mn = m * n, nl = n * l;
  const double dx = l2 - m2;        // x2-y2 combination
  const double dz = n2 - 0.5 * (l2 + m2);

  out[0][0] = 3 * l2 * m2 * s + (l2 + m2 - 4 * l2 * m2) * p + (n2 + l2 * m2) * d;
  out[1][1] = 3 * m2 * n2 * s + (m2 + n2 - 4 * m2 * n2) * p + (l2 + m2 * n2) * d;
  out[2][2] = 3 * n2 * l2 * s + (n2 + l2 - 4 * n2 * l2) * p + (m2 + n2 * l2) * d;
  out[0][1] = 3 * l * m2 * n * s + nl * (1 - 4 * m2) * p + nl * (m2 - 1) * d;
  out[0][2] = 3 * l2 * m * n * s + mn * (1 - 4 * l2) * p + mn * (l2 - 1) * d;
  out[1][2] = 3 * m * n2 * l * s + lm * (1 - 4 * n2) * p + lm * (n2 - 1) * d;

  out[0][3] = 1.5 * lm * dx * s + 2 * lm * (m2 - l2) * p + 0.5 * lm * dx * d;
  out[1][3] = 1.5 * mn * dx * s - mn * (1 + 2 * dx) * p + mn * (1 + 0.5 * dx) * d;
  out[2][3] = 1.5 * nl * dx * s + nl * (1 - 2 * dx) * p - nl * (1 - 0.5 * dx) * d;

  out[0][4] = rt3 * lm * dz * s - 2 * rt3 * lm * n2 * p + 0.5 * rt3 * lm * (1 + n2) * d;
  out[1][4] = rt3 * mn * dz * s + rt3 * mn * (l2 + m2 - n2) * p -
              0.5 * rt3 * mn * (l2 + m2) * d;
  out[2][4] = rt3 * nl * dz * s + rt3 * nl * (l2 + m2 - n2) * p -
              0.5 * rt3 * nl * (l2 + m2) * d;

  out[3][3] = 0.75 * dx * dx * s + (l2 + m2 - dx * dx) * p + (n2 + 0.25 * dx * dx) * d;
  out[3][4] = 0.5 * rt3 * dx * dz * s + rt3 * n2 * (m2 - l2) * p +
              0.25 * rt3 * (1 + n2) * dx * d;
  out[4][4] = dz * dz * s + 3 * n2 * (l2 + m2) * p + 0.75 * (l2 + m2) * (l2 + m2) * d;

  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < i; ++j) out[i][j] = out[j][i];
}

}  // namespace detail

// Hopping block <orb_i at FROM | H | orb_j at TO> for a bond whose unit
// direction FROM -> TO is (l, m, n). The block for the reversed bond is the
// transpose of this one.
inline SkBlock sk_block(const TbParameterSet& params, const Vec3& cosines) {
  const double l = cosines.x, m = cosines.y, n = cosines.z;
  if (std::abs(l * l + m * m + n * n - 1.0) > 1e-12) {
    throw std::invalid_argument("sk_block: direction cosines must be unit");
  }
  const detail::SkIntegrals v(params);
  SkBlock b = SkBlock::Zero();

  b(orb_s, orb_s) = v.ss;
  b(orb_sstar, orb_sstar) = v.sstar_sstar;
  b(orb_s, orb_sstar) = v.s_sstar;
  b(orb_sstar, orb_s) = v.s_sstar;

  const double dir[3] = {l, m, n};
  for (int i = 0; i < 3; ++i) {
    b(orb_s, orb_px + i) = dir[i] * v.sp;
    b(orb_px + i, orb_s) = -dir[i] * v.sp;
    b(orb_sstar, orb_px + i) = dir[i] * v.sstar_p;
    b(orb_px + i, orb_sstar) = -dir[i] * v.sstar_p;
  }

  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double diag = (i == j) ? v.ppp : 0.0;
      b(orb_px + i, orb_px + j) =
          dir[i] * dir[j] * (v.pps - v.ppp) + diag;
    }
  }

  double srow[5];
  detail::sd_row(l, m, n, v.sd, srow);
  for (int j = 0; j < 5; ++j) {
    b(orb_s, orb_dxy + j) = srow[j];
    b(orb_dxy + j, orb_s) = srow[j];  // (-1)^(0+2) = +1
  }
  detail::sd_row(l, m, n, v.sstar_d, srow);
  for (int j = 0; j < 5; ++j) {
    b(orb_sstar, orb_dxy + j) = srow[j];
    b(orb_dxy + j, orb_sstar) = srow[j];
  }

  double pd[3][5];
  detail::pd_block(l, m, n, v.pds, v.pdp, pd);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 5; ++j) {
      b(orb_px + i, orb_dxy + j) = pd[i][j];
      b(orb_dxy + j, orb_px + i) = -pd[i][j];  // (-1)^(1+2) = -1
    }
  }

  double dd[5][5];
  detail::dd_block(l, m, n, v.dds, v.ddp, v.ddd, dd);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) b(orb_dxy + i, orb_dxy + j) = dd[i][j];

  return b;
}

// On-site orbital energies as a 10-vector.
inline Eigen::Matrix<double, n_orbitals, 1> onsite_energies(
    const TbParameterSet& params) {
  Eigen::Matrix<double, n_orbitals, 1> e;
  const double es = params.onsite_energy("s");
  const double ep = params.onsite_energy("p");
  const double ed = params.onsite_energy("d");
  const double estar = params.onsite_energy("sstar");
  e << es, ep, ep, ep, ed, ed, ed, ed, ed, estar;
  return e;
}

// On-site spin-orbit Hamiltonian so_p * (L.S) restricted to the p block,
// in the spin-major basis [10 orbitals up, 10 orbitals down]. Built from
// (L_a)_{bc} = -i eps_{abc} and S_a = sigma_a / 2.
inline Eigen::MatrixXcd spin_orbit_block(double so_p) {
  using cd = std::complex<double>;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2 * n_orbitals, 2 * n_orbitals);
  if (so_p == 0) return h;

  Eigen::Matrix3cd L[3];
  for (auto& M : L) M.setZero();
  const cd mi(0, -1);
  // eps_abc over a,b,c in {0,1,2}
  for (int a = 0; a < 3; ++a) {
    for (int bi = 0; bi < 3; ++bi) {
      for (int c = 0; c < 3; ++c) {
        const int eps = (a == bi || bi == c || a == c)
                            ? 0
                            : (((bi - a + 3) % 3 == 1) ? 1 : -1);
        if (eps != 0) L[a](bi, c) = mi * static_cast<double>(eps);
      }
    }
  }
  Eigen::Matrix2cd S[3];
  S[0] << 0, 0.5, 0.5, 0;
  S[1] << 0, cd(0, -0.5), cd(0, 0.5), 0;
  S[2] << 0.5, 0, 0, -0.5;

  for (int a = 0; a < 3; ++a) {
    for (int s1 = 0; s1 < 2; ++s1) {
      for (int s2 = 0; s2 < 2; ++s2) {
        for (int o1 = 0; o1 < 3; ++o1) {
          for (int o2 = 0; o2 < 3; ++o2) {
            h(s1 * n_orbitals + orb_px + o1, s2 * n_orbitals + orb_px + o2) +=
                so_p * L[a](o1, o2) * S[a](s1, s2);
          }
        }
      }
    }
  }
  return h;
}

// Dangling-bond passivation: sp3 hybrid pointing along the missing bond
// direction, h = (s + sqrt(3) d.p) / 2. Adding U |h><h| to the on-site
// block expels the surface state from the gap.
inline Eigen::Matrix<double, n_orbitals, 1> passivation_hybrid(
    const Vec3& missing_dir) {
  Eigen::Matrix<double, n_orbitals, 1> h;
  h.setZero();
  const double rt3 = std::sqrt(3.0);
  h(orb_s) = 0.5;
  h(orb_px) = 0.5 * rt3 * missing_dir.x;
  h(orb_py) = 0.5 * rt3 * missing_dir.y;
  h(orb_pz) = 0.5 * rt3 * missing_dir.z;
  return h;
}

}  // namespace dstark
