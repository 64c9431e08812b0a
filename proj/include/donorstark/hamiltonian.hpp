#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "donorstark/lattice.hpp"
#include "donorstark/slater_koster.hpp"
#include "donorstark/tb_params.hpp"
#include "donorstark/thread_pool.hpp"

namespace dstark {

struct AssemblyOptions {
  bool spin_orbit = true;        // honored only if the set carries a constant
  double passivation_ev = 30.0;  // dangling-bond hybrid shift
};

struct AssemblyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sparse Hermitian tight-binding Hamiltonian over (site x orbital x spin).
//
// The operator is matrix-free: per-site diagonal plus four tetrahedral
// hopping blocks shared by every bond of the same direction class, plus
// rank-one passivation projectors on surface sites and, with spin, one
// fixed on-site spin-orbit block. Real arithmetic is used whenever spin
// is not carried (the Slater-Koster blocks are real).
class SparseHamiltonian {
 public:
  using Block = Eigen::Matrix<double, n_orbitals, n_orbitals>;
  using OrbVec = Eigen::Matrix<double, n_orbitals, 1>;

  static SparseHamiltonian assemble(const DomainLattice& lattice,
                                    const TbParameterSet& params,
                                    const std::vector<double>& site_potential,
                                    const AssemblyOptions& opts = {}) {
    if (static_cast<std::int64_t>(site_potential.size()) != lattice.n_sites())
      throw AssemblyError(
          "assemble: site potential length does not match the lattice");
    SparseHamiltonian h;
    h.n_sites_ = lattice.n_sites();
    h.with_spin_ = opts.spin_orbit && params.spin_orbit_p != 0.0;
    h.site_dim_ = n_orbitals * (h.with_spin_ ? 2 : 1);
    h.onsite_ = onsite_energies(params);
    h.site_potential_ = site_potential;
    h.donor_index_ = lattice.donor_index;

    for (int c = 0; c < 4; ++c)
      h.bond_block_[c] = sk_block(params, diamond::bond_direction(c, false));

    h.neighbors_.resize(4 * h.n_sites_);
    h.is_b_sublattice_.resize(h.n_sites_);
    for (std::int64_t i = 0; i < h.n_sites_; ++i) {
      h.is_b_sublattice_[i] = lattice.site_is_b_sublattice(i);
      for (int c = 0; c < 4; ++c)
        h.neighbors_[4 * i + c] = lattice.neighbors[i].site[c];
    }

    if (opts.passivation_ev != 0.0) {
      for (std::int64_t i = 0; i < h.n_sites_; ++i) {
        for (int c = 0; c < 4; ++c) {
          if (lattice.neighbors[i].site[c] >= 0) continue;
          Passivator pv;
          pv.site = i;
          const Vec3 dir = lat_bond_dir(lattice, i, c);
          const auto hv = passivation_hybrid(dir);
          for (int o = 0; o < 4; ++o) pv.hybrid[o] = hv(o);
          pv.strength = opts.passivation_ev;
          h.passivators_.push_back(pv);
        }
      }
    }

    if (h.with_spin_) h.so_block_ = spin_orbit_block(params.spin_orbit_p);

    h.hash_ = h.compute_hash(lattice, params, opts);
    return h;
  }

  std::int64_t n_sites() const { return n_sites_; }
  int site_dim() const { return site_dim_; }
  bool with_spin() const { return with_spin_; }
  std::int64_t dimension() const { return n_sites_ * site_dim_; }
  std::int64_t donor_index() const { return donor_index_; }
  std::uint64_t content_hash() const { return hash_; }
  const std::vector<double>& site_potential() const { return site_potential_; }

  // Orbital-resolved diagonal in eV.
  Eigen::VectorXd diagonal() const {
    Eigen::VectorXd d(dimension());
    for (std::int64_t i = 0; i < n_sites_; ++i) {
      for (int s = 0; s < (with_spin_ ? 2 : 1); ++s)
        for (int o = 0; o < n_orbitals; ++o)
          d[i * site_dim_ + s * n_orbitals + o] =
              onsite_(o) + site_potential_[i];
    }
    return d;
  }

  // y = H x, real path (spin not carried). Deterministic for any worker
  // count: every output site is written by exactly one chunk.
  void apply(const double* x, double* y, ThreadPool* pool = nullptr) const {
    if (with_spin_)
      throw AssemblyError("real apply called on a spinful Hamiltonian");
    run_chunks(pool, [&](std::int64_t i0, std::int64_t i1) {
      apply_range_real(x, y, i0, i1);
    });
    apply_passivators(x, y);
  }

  // y = H x, complex path (explicit spin, on-site spin-orbit block).
  void apply(const std::complex<double>* x, std::complex<double>* y,
             ThreadPool* pool = nullptr) const {
    if (!with_spin_)
      throw AssemblyError("complex apply called on a spinless Hamiltonian");
    run_chunks(pool, [&](std::int64_t i0, std::int64_t i1) {
      apply_range_complex(x, y, i0, i1);
    });
    apply_passivators_complex(x, y);
  }

  // Dense matrix for small systems (oracle path).
  Eigen::MatrixXcd dense() const {
    const std::int64_t n = dimension();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    const int spins = with_spin_ ? 2 : 1;
    for (std::int64_t i = 0; i < n_sites_; ++i) {
      for (int s = 0; s < spins; ++s)
        for (int o = 0; o < n_orbitals; ++o)
          m(i * site_dim_ + s * n_orbitals + o,
            i * site_dim_ + s * n_orbitals + o) =
              onsite_(o) + site_potential_[i];
      if (with_spin_)
        m.block(i * site_dim_, i * site_dim_, site_dim_, site_dim_) +=
            so_block_;
      for (int c = 0; c < 4; ++c) {
        const std::int64_t j = neighbors_[4 * i + c];
        if (j < 0) continue;
        const Block b =
            is_b_sublattice_[i] ? Block(bond_block_[c].transpose())
                                : bond_block_[c];
        for (int s = 0; s < spins; ++s)
          m.block(i * site_dim_ + s * n_orbitals,
                  j * site_dim_ + s * n_orbitals, n_orbitals, n_orbitals) +=
              b;
      }
    }
    for (const auto& pv : passivators_) {
      for (int s = 0; s < spins; ++s) {
        const std::int64_t base = pv.site * site_dim_ + s * n_orbitals;
        for (int o1 = 0; o1 < 4; ++o1)
          for (int o2 = 0; o2 < 4; ++o2)
            m(base + o1, base + o2) +=
                pv.strength * pv.hybrid[o1] * pv.hybrid[o2];
      }
    }
    return m;
  }

  // Crude upper bound on the spectral radius (Gershgorin over site blocks).
  double gershgorin_bound() const {
    double max_offdiag = 0;
    for (int c = 0; c < 4; ++c)
      max_offdiag = std::max(max_offdiag,
                             bond_block_[c].cwiseAbs().rowwise().sum().maxCoeff());
    double lo = 1e300, hi = -1e300;
    for (std::int64_t i = 0; i < n_sites_; ++i) {
      lo = std::min(lo, site_potential_[i]);
      hi = std::max(hi, site_potential_[i]);
    }
    const double so = with_spin_ ? std::abs(so_block_.cwiseAbs().maxCoeff()) * 3
                                 : 0.0;
    double pass = 0;
    if (!passivators_.empty()) pass = passivators_.front().strength;
    const double emin = onsite_.minCoeff() + lo - 4 * max_offdiag - so;
    const double emax = onsite_.maxCoeff() + hi + 4 * max_offdiag + so + pass;
    return std::max(std::abs(emin), std::abs(emax));
  }

 private:
  struct Passivator {
    std::int64_t site;
    double hybrid[4];
    double strength;
  };

  static Vec3 lat_bond_dir(const DomainLattice& lat, std::int64_t i, int c) {
    return lat.bond_cosines(i, c);
  }

  template <typename Fn>
  void run_chunks(ThreadPool* pool, const Fn& fn) const {
    constexpr std::size_t chunk = 2048;
    if (pool && pool->worker_count() > 1) {
      pool->parallel_chunks(static_cast<std::size_t>(n_sites_), chunk,
                            [&](std::size_t, std::size_t b, std::size_t e) {
                              fn(static_cast<std::int64_t>(b),
                                 static_cast<std::int64_t>(e));
                            });
    } else {
      fn(0, n_sites_);
    }
  }

  void apply_range_real(const double* x, double* y, std::int64_t i0,
                        std::int64_t i1) const {
    using V10 = Eigen::Matrix<double, n_orbitals, 1>;
    for (std::int64_t i = i0; i < i1; ++i) {
      Eigen::Map<V10> yi(y + i * n_orbitals);
      Eigen::Map<const V10> xi(x + i * n_orbitals);
      yi = onsite_.cwiseProduct(xi) + site_potential_[i] * xi;
      const bool bsub = is_b_sublattice_[i];
      for (int c = 0; c < 4; ++c) {
        const std::int64_t j = neighbors_[4 * i + c];
        if (j < 0) continue;
        Eigen::Map<const V10> xj(x + j * n_orbitals);
        if (bsub)
          yi.noalias() += bond_block_[c].transpose() * xj;
        else
          yi.noalias() += bond_block_[c] * xj;
      }
    }
  }

  void apply_range_complex(const std::complex<double>* x,
                           std::complex<double>* y, std::int64_t i0,
                           std::int64_t i1) const {
    using cd = std::complex<double>;
    using V20 = Eigen::Matrix<cd, 2 * n_orbitals, 1>;
    using V10 = Eigen::Matrix<cd, n_orbitals, 1>;
    for (std::int64_t i = i0; i < i1; ++i) {
      Eigen::Map<V20> yi(y + i * site_dim_);
      Eigen::Map<const V20> xi(x + i * site_dim_);
      for (int s = 0; s < 2; ++s)
        yi.segment<n_orbitals>(s * n_orbitals) =
            onsite_.cast<cd>().cwiseProduct(
                xi.segment<n_orbitals>(s * n_orbitals)) +
            site_potential_[i] * xi.segment<n_orbitals>(s * n_orbitals);
      yi.noalias() += so_block_ * xi;
      const bool bsub = is_b_sublattice_[i];
      for (int c = 0; c < 4; ++c) {
        const std::int64_t j = neighbors_[4 * i + c];
        if (j < 0) continue;
        Eigen::Map<const V20> xj(x + j * site_dim_);
        for (int s = 0; s < 2; ++s) {
          Eigen::Map<const V10> xjs(xj.data() + s * n_orbitals);
          if (bsub)
            yi.segment<n_orbitals>(s * n_orbitals).noalias() +=
                bond_block_[c].transpose().cast<cd>() * xjs;
          else
            yi.segment<n_orbitals>(s * n_orbitals).noalias() +=
                bond_block_[c].cast<cd>() * xjs;
        }
      }
    }
  }

  void apply_passivators(const double* x, double* y) const {
    for (const auto& pv : passivators_) {
      const std::int64_t base = pv.site * n_orbitals;
      double dot = 0;
      for (int o = 0; o < 4; ++o) dot += pv.hybrid[o] * x[base + o];
      dot *= pv.strength;
      for (int o = 0; o < 4; ++o) y[base + o] += dot * pv.hybrid[o];
    }
  }

  void apply_passivators_complex(const std::complex<double>* x,
                                 std::complex<double>* y) const {
    for (const auto& pv : passivators_) {
      for (int s = 0; s < 2; ++s) {
        const std::int64_t base = pv.site * site_dim_ + s * n_orbitals;
        std::complex<double> dot = 0;
        for (int o = 0; o < 4; ++o) dot += pv.hybrid[o] * x[base + o];
        dot *= pv.strength;
        for (int o = 0; o < 4; ++o) y[base + o] += dot * pv.hybrid[o];
      }
    }
  }

  std::uint64_t compute_hash(const DomainLattice& lattice,
                             const TbParameterSet& params,
                             const AssemblyOptions& opts) const {
    std::uint64_t h = params.content_hash();
    h = fnv1a64(&lattice.cells, sizeof(lattice.cells), h);
    h = fnv1a64(&lattice.donor_index, sizeof(lattice.donor_index), h);
    h = fnv1a64(site_potential_.data(),
                site_potential_.size() * sizeof(double), h);
    h = fnv1a64(&opts.passivation_ev, sizeof(double), h);
    const int spin_flag = with_spin_ ? 1 : 0;
    h = fnv1a64(&spin_flag, sizeof(int), h);
    return h;
  }

  std::int64_t n_sites_ = 0;
  std::int64_t donor_index_ = -1;
  int site_dim_ = n_orbitals;
  bool with_spin_ = false;
  OrbVec onsite_;
  std::vector<double> site_potential_;
  std::vector<std::int32_t> neighbors_;
  std::vector<char> is_b_sublattice_;
  Block bond_block_[4];
  std::vector<Passivator> passivators_;
  Eigen::MatrixXcd so_block_;
  std::uint64_t hash_ = 0;
};

}  // namespace dstark
