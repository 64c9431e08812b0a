#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "donorstark/units.hpp"

namespace dstark {

enum class Axis : int { x = 0, y = 1, z = 2 };

inline Axis axis_from_string(const std::string& s) {
  if (s == "x") return Axis::x;
  if (s == "y") return Axis::y;
  if (s == "z") return Axis::z;
  throw std::invalid_argument("unknown axis '" + s + "' (expected x, y or z)");
}

inline const char* axis_name(Axis a) {
  switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    default: return "z";
  }
}

struct Vec3 {
  double x = 0, y = 0, z = 0;

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator*(double c) const { return {c * x, c * y, c * z}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

// Finite zincblende/diamond domain with a hard-wall interface at coordinate 0
// along the depth axis. Extents are in nm; the impurity depth is measured
// from that interface.
struct DomainSpec {
  std::array<double, 3> extents_nm{};
  double lattice_constant_nm = units::si_lattice_constant_nm;
  Axis depth_axis = Axis::y;
  double impurity_depth_nm = 0;

  void validate() const {
    for (double e : extents_nm) {
      if (!(e > 0)) throw std::invalid_argument("domain extents must be > 0");
    }
    if (!(lattice_constant_nm > 0)) {
      throw std::invalid_argument("lattice constant must be > 0");
    }
    const double d = extents_nm[static_cast<int>(depth_axis)];
    if (!(impurity_depth_nm > 0 && impurity_depth_nm < d)) {
      throw std::invalid_argument(
          "impurity depth must lie strictly inside the domain along the "
          "depth axis");
    }
  }
};

enum class Species : std::uint8_t { host = 0, donor = 1 };

struct AtomSite {
  std::int64_t index = -1;
  Vec3 position_nm{};
  Species species = Species::host;
  bool is_surface = false;
};

// Canonical diamond-lattice data: eight basis atoms per conventional cell in
// units of a/4, and the four tetrahedral bond directions. Even basis indices
// are the fcc (A) sublattice, odd the offset (B) sublattice.
namespace diamond {

inline constexpr int basis_frac4[8][3] = {
    {0, 0, 0}, {1, 1, 1}, {0, 2, 2}, {1, 3, 3},
    {2, 0, 2}, {3, 1, 3}, {2, 2, 0}, {3, 3, 1},
};

// Bond displacement classes from an A-sublattice atom, in units of a/4.
// A B-sublattice atom bonds along the negated vectors.
inline constexpr int bond_frac4[4][3] = {
    {1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1},
};

inline Vec3 bond_direction(int cls, bool from_b_sublattice) {
  const double s = (from_b_sublattice ? -1.0 : 1.0) / std::sqrt(3.0);
  return {s * bond_frac4[cls][0], s * bond_frac4[cls][1],
          s * bond_frac4[cls][2]};
}

}  // namespace diamond

class DomainLattice {
 public:
  // One neighbor record: target site (or -1 outside the domain) per bond
  // class. Direction cosines follow from the class and the sublattice.
  struct NeighborRow {
    std::array<std::int32_t, 4> site{{-1, -1, -1, -1}};
  };

  DomainSpec spec;
  std::array<int, 3> cells{};  // conventional cells per axis
  std::vector<AtomSite> sites;
  std::vector<NeighborRow> neighbors;
  std::int64_t donor_index = -1;
  double requested_depth_nm = 0;
  double snapped_depth_nm = 0;
  std::int64_t bond_count = 0;
  std::int64_t surface_count = 0;

  std::int64_t n_sites() const {
    return static_cast<std::int64_t>(sites.size());
  }

  double bond_length_nm() const {
    return spec.lattice_constant_nm * std::sqrt(3.0) / 4.0;
  }

  bool site_is_b_sublattice(std::int64_t i) const {
    return (static_cast<int>(i & 7)) % 2 == 1;
  }

  Vec3 bond_cosines(std::int64_t from_site, int cls) const {
    return diamond::bond_direction(cls, site_is_b_sublattice(from_site));
  }
};

// Closed-form site count for a DomainSpec: cells are snapped to the nearest
// whole conventional cell per axis (at least one), eight atoms per cell.
inline std::array<int, 3> cell_counts_for(const DomainSpec& spec) {
  std::array<int, 3> n{};
  for (int i = 0; i < 3; ++i) {
    const double ratio = spec.extents_nm[i] / spec.lattice_constant_nm;
    if (ratio < 1.0 - 1e-9) {
      throw std::invalid_argument(
          std::string("domain too small: extent along ") +
          axis_name(static_cast<Axis>(i)) +
          " is below one conventional cell");
    }
    n[i] = std::max(1, static_cast<int>(std::floor(ratio + 1e-9)));
  }
  return n;
}

inline std::int64_t closed_form_site_count(const DomainSpec& spec) {
  const auto n = cell_counts_for(spec);
  return 8LL * n[0] * n[1] * n[2];
}

// Builds the site list, neighbor topology and donor placement.
//
// Site ordering is lexicographic by (cell_x, cell_y, cell_z, basis index):
// index = ((cx*ny + cy)*nz + cz)*8 + b. The donor is the site that best
// matches (center, center) laterally and the requested depth along the
// depth axis; the depth mismatch is bounded by a/8.
inline DomainLattice build_domain(const DomainSpec& spec) {
  spec.validate();
  DomainLattice lat;
  lat.spec = spec;
  lat.cells = cell_counts_for(spec);
  lat.requested_depth_nm = spec.impurity_depth_nm;

  const int nx = lat.cells[0], ny = lat.cells[1], nz = lat.cells[2];
  const double a = spec.lattice_constant_nm;
  const std::int64_t n_sites = 8LL * nx * ny * nz;
  lat.sites.resize(n_sites);
  lat.neighbors.resize(n_sites);

  const int depth_i = static_cast<int>(spec.depth_axis);
  Vec3 target{};
  {
    double t[3];
    for (int i = 0; i < 3; ++i) t[i] = 0.5 * lat.cells[i] * a;
    t[depth_i] = spec.impurity_depth_nm;
    target = {t[0], t[1], t[2]};
  }

  auto cell_site_index = [&](int cx, int cy, int cz, int b) -> std::int64_t {
    return ((static_cast<std::int64_t>(cx) * ny + cy) * nz + cz) * 8 + b;
  };

  // Positions plus donor snap. Snap priority: depth mismatch first, then
  // lateral distance, then index, so the snapped depth error stays <= a/8.
  std::int64_t best = -1;
  double best_depth_err = 0, best_lat2 = 0;
  std::int64_t idx = 0;
  for (int cx = 0; cx < nx; ++cx) {
    for (int cy = 0; cy < ny; ++cy) {
      for (int cz = 0; cz < nz; ++cz) {
        for (int b = 0; b < 8; ++b, ++idx) {
          AtomSite& s = lat.sites[idx];
          s.index = idx;
          s.position_nm = {
              (cx + 0.25 * diamond::basis_frac4[b][0]) * a,
              (cy + 0.25 * diamond::basis_frac4[b][1]) * a,
              (cz + 0.25 * diamond::basis_frac4[b][2]) * a,
          };
          const double depth_err =
              std::abs(s.position_nm[depth_i] - target[depth_i]);
          const Vec3 d = s.position_nm - target;
          const double lat2 = d.dot(d) - (s.position_nm[depth_i] -
                                          target[depth_i]) *
                                             (s.position_nm[depth_i] -
                                              target[depth_i]);
          if (best < 0 || depth_err < best_depth_err - 1e-12 ||
              (depth_err < best_depth_err + 1e-12 && lat2 < best_lat2 - 1e-12)) {
            best = idx;
            best_depth_err = depth_err;
            best_lat2 = lat2;
          }
        }
      }
    }
  }
  lat.donor_index = best;
  lat.sites[best].species = Species::donor;
  lat.snapped_depth_nm = lat.sites[best].position_nm[depth_i];

  // Neighbor topology by cell arithmetic. Bond class c connects basis b to a
  // partner whose fractional position is basis[b] +- bond[c].
  std::int64_t bonds2 = 0;
  idx = 0;
  for (int cx = 0; cx < nx; ++cx) {
    for (int cy = 0; cy < ny; ++cy) {
      for (int cz = 0; cz < nz; ++cz) {
        for (int b = 0; b < 8; ++b, ++idx) {
          const bool is_b = (b % 2 == 1);
          int count = 0;
          for (int c = 0; c < 4; ++c) {
            int f[3], cc[3] = {cx, cy, cz};
            bool inside = true;
            for (int i = 0; i < 3; ++i) {
              const int sgn = is_b ? -1 : 1;
              f[i] = diamond::basis_frac4[b][i] + sgn * diamond::bond_frac4[c][i];
              while (f[i] < 0) {
                f[i] += 4;
                cc[i] -= 1;
              }
              while (f[i] >= 4) {
                f[i] -= 4;
                cc[i] += 1;
              }
              if (cc[i] < 0 || cc[i] >= lat.cells[i]) inside = false;
            }
            if (!inside) continue;
            int nb = -1;
            for (int bb = 0; bb < 8; ++bb) {
              if (diamond::basis_frac4[bb][0] == f[0] &&
                  diamond::basis_frac4[bb][1] == f[1] &&
                  diamond::basis_frac4[bb][2] == f[2]) {
                nb = bb;
                break;
              }
            }
            lat.neighbors[idx].site[c] =
                static_cast<std::int32_t>(cell_site_index(cc[0], cc[1], cc[2], nb));
            ++count;
            ++bonds2;
          }
          lat.sites[idx].is_surface = (count < 4);
          if (count < 4) ++lat.surface_count;
        }
      }
    }
  }
  lat.bond_count = bonds2 / 2;
  return lat;
}

}  // namespace dstark
