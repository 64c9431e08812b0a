#pragma once

// Independent Slater-Koster oracle used only by tests.
//
// Instead of the tabulated angular functions, each two-center element is
// built from first principles: both orbitals are decomposed onto real
// spherical harmonics defined in the bond frame (z along the bond), where
// the axially symmetric two-center Hamiltonian is diagonal: cos-type pairs
// with cos-type, sin with sin, equal |m| entries share one named integral.
// The decomposition coefficients are exact sphere integrals of polynomial
// products, so this path shares no code with the production table.

#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "donorstark/lattice.hpp"
#include "donorstark/slater_koster.hpp"
#include "donorstark/tb_params.hpp"

namespace sk_oracle {

using Monomial = std::array<int, 3>;

struct Poly3 {
  std::map<Monomial, double> terms;

  static Poly3 constant(double c) {
    Poly3 p;
    p.terms[{0, 0, 0}] = c;
    return p;
  }
  static Poly3 linear(double cx, double cy, double cz) {
    Poly3 p;
    if (cx != 0) p.terms[{1, 0, 0}] = cx;
    if (cy != 0) p.terms[{0, 1, 0}] = cy;
    if (cz != 0) p.terms[{0, 0, 1}] = cz;
    return p;
  }
  Poly3 operator*(const Poly3& o) const {
    Poly3 r;
    for (const auto& [ma, ca] : terms)
      for (const auto& [mb, cb] : o.terms)
        r.terms[{ma[0] + mb[0], ma[1] + mb[1], ma[2] + mb[2]}] += ca * cb;
    return r;
  }
  Poly3 operator+(const Poly3& o) const {
    Poly3 r = *this;
    for (const auto& [m, c] : o.terms) r.terms[m] += c;
    return r;
  }
  Poly3 operator-(const Poly3& o) const {
    Poly3 r = *this;
    for (const auto& [m, c] : o.terms) r.terms[m] -= c;
    return r;
  }
  Poly3 scaled(double c) const {
    Poly3 r = *this;
    for (auto& [m, v] : r.terms) v *= c;
    return r;
  }
};

inline double double_factorial(int n) {
  double r = 1;
  for (int k = n; k > 1; k -= 2) r *= k;
  return r;
}

// Exact integral of x^a y^b z^c over the unit sphere surface.
inline double sphere_integral(const Monomial& m) {
  if (m[0] % 2 || m[1] % 2 || m[2] % 2) return 0.0;
  const double num = double_factorial(m[0] - 1) * double_factorial(m[1] - 1) *
                     double_factorial(m[2] - 1);
  return 4.0 * M_PI * num / double_factorial(m[0] + m[1] + m[2] + 1);
}

inline double sphere_integral(const Poly3& p) {
  double s = 0;
  for (const auto& [m, c] : p.terms) s += c * sphere_integral(m);
  return s;
}

enum class MType { m0, cos_like, sin_like };

struct Harmonic {
  Poly3 poly;
  int abs_m;
  MType type;
};

// Normalized real spherical harmonics as polynomials of the given frame
// axes. Order within l matches the canonical orbital ordering:
// l=0: [s]; l=1: [x, y, z]; l=2: [xy, yz, zx, x2-y2, 3z2-r2].
inline std::vector<Harmonic> harmonics(int l, const dstark::Vec3& ex,
                                       const dstark::Vec3& ey,
                                       const dstark::Vec3& ez) {
  const Poly3 X = Poly3::linear(ex.x, ex.y, ex.z);
  const Poly3 Y = Poly3::linear(ey.x, ey.y, ey.z);
  const Poly3 Z = Poly3::linear(ez.x, ez.y, ez.z);
  const Poly3 R2 = X * X + Y * Y + Z * Z;  // = 1 on the sphere
  std::vector<Harmonic> out;
  if (l == 0) {
    out.push_back({Poly3::constant(std::sqrt(1.0 / (4 * M_PI))), 0, MType::m0});
  } else if (l == 1) {
    const double n = std::sqrt(3.0 / (4 * M_PI));
    out.push_back({X.scaled(n), 1, MType::cos_like});
    out.push_back({Y.scaled(n), 1, MType::sin_like});
    out.push_back({Z.scaled(n), 0, MType::m0});
  } else if (l == 2) {
    const double n1 = std::sqrt(15.0 / (4 * M_PI));
    const double n2 = std::sqrt(15.0 / (16 * M_PI));
    const double n3 = std::sqrt(5.0 / (16 * M_PI));
    out.push_back({(X * Y).scaled(n1), 2, MType::sin_like});
    out.push_back({(Y * Z).scaled(n1), 1, MType::sin_like});
    out.push_back({(Z * X).scaled(n1), 1, MType::cos_like});
    out.push_back({(X * X - Y * Y).scaled(n2), 2, MType::cos_like});
    out.push_back({(Z * Z.scaled(3.0) - R2).scaled(n3), 0, MType::m0});
  } else {
    throw std::invalid_argument("l out of range");
  }
  return out;
}

// Named integral for canonical order (lower l first); the star flag
// distinguishes s from s*.
inline double named_integral(const dstark::TbParameterSet& p, int orb1,
                             int orb2, int abs_m) {
  using namespace dstark;
  const int l1 = orbital_l(orb1), l2 = orbital_l(orb2);
  const bool star1 = (orb1 == orb_sstar), star2 = (orb2 == orb_sstar);
  std::string key;
  if (l1 == 0 && l2 == 0) {
    key = (star1 && star2) ? "sstar_sstar_sigma"
                           : ((star1 || star2) ? "s_sstar_sigma" : "ss_sigma");
  } else if (l1 == 0 && l2 == 1) {
    key = star1 ? "sstar_p_sigma" : "sp_sigma";
  } else if (l1 == 0 && l2 == 2) {
    key = star1 ? "sstar_d_sigma" : "sd_sigma";
  } else if (l1 == 1 && l2 == 1) {
    key = abs_m == 0 ? "pp_sigma" : "pp_pi";
  } else if (l1 == 1 && l2 == 2) {
    key = abs_m == 0 ? "pd_sigma" : "pd_pi";
  } else {
    key = abs_m == 0 ? "dd_sigma" : (abs_m == 1 ? "dd_pi" : "dd_delta");
  }
  return p.integral(key);
}

// Orthonormal frame with ez along dir.
inline void bond_frame(const dstark::Vec3& dir, dstark::Vec3& ex,
                       dstark::Vec3& ey, dstark::Vec3& ez) {
  ez = dir;
  const dstark::Vec3 helper =
      std::abs(dir.z) < 0.9 ? dstark::Vec3{0, 0, 1} : dstark::Vec3{1, 0, 0};
  dstark::Vec3 c{helper.y * ez.z - helper.z * ez.y,
                 helper.z * ez.x - helper.x * ez.z,
                 helper.x * ez.y - helper.y * ez.x};
  const double nc = c.norm();
  ex = {c.x / nc, c.y / nc, c.z / nc};
  ey = {ez.y * ex.z - ez.z * ex.y, ez.z * ex.x - ez.x * ex.z,
        ez.x * ex.y - ez.y * ex.x};
}

// Full 10x10 oracle block <orb_i at FROM|H|orb_j at TO> for a bond along dir.
inline dstark::SkBlock oracle_block(const dstark::TbParameterSet& params,
                                    const dstark::Vec3& dir) {
  using namespace dstark;
  Vec3 ex, ey, ez;
  bond_frame(dir, ex, ey, ez);

  struct Decomp {
    std::vector<double> coeff;
    std::vector<int> abs_m;
    std::vector<MType> type;
  };
  std::array<Decomp, n_orbitals> dec;
  const int index_within_l[n_orbitals] = {0, 0, 1, 2, 0, 1, 2, 3, 4, 0};
  for (int orb = 0; orb < n_orbitals; ++orb) {
    const int l = orbital_l(orb);
    const auto lab = harmonics(l, {1, 0, 0}, {0, 1, 0}, {0, 0, 1});
    const auto bond = harmonics(l, ex, ey, ez);
    const auto& mine = lab[index_within_l[orb]];
    for (const auto& bh : bond) {
      dec[orb].coeff.push_back(sphere_integral(mine.poly * bh.poly));
      dec[orb].abs_m.push_back(bh.abs_m);
      dec[orb].type.push_back(bh.type);
    }
  }

  SkBlock b;
  for (int i = 0; i < n_orbitals; ++i) {
    for (int j = 0; j < n_orbitals; ++j) {
      const int li = orbital_l(i), lj = orbital_l(j);
      const double swap_sign = (li > lj) ? ((li + lj) % 2 ? -1.0 : 1.0) : 1.0;
      const int o1 = (li > lj) ? j : i;
      const int o2 = (li > lj) ? i : j;
      double e = 0;
      for (std::size_t a = 0; a < dec[i].coeff.size(); ++a) {
        for (std::size_t c = 0; c < dec[j].coeff.size(); ++c) {
          if (dec[i].abs_m[a] != dec[j].abs_m[c]) continue;
          if (dec[i].type[a] != dec[j].type[c]) continue;
          e += dec[i].coeff[a] * dec[j].coeff[c] *
               named_integral(params, o1, o2, dec[i].abs_m[a]) * swap_sign;
        }
      }
      b(i, j) = e;
    }
  }
  return b;
}

}  // namespace sk_oracle
