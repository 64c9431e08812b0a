#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "donorstark/hamiltonian.hpp"
#include "donorstark/thread_pool.hpp"

namespace dstark {

struct ConvergenceError : std::runtime_error {
  std::vector<std::pair<int, double>> trace;  // (iteration, worst residual ratio)
  ConvergenceError(const std::string& msg,
                   std::vector<std::pair<int, double>> t)
      : std::runtime_error(msg), trace(std::move(t)) {}
};

struct EmptyWindowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionCapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SpectralTransform { folded, plain };

struct SolverConfig {
  double tolerance_ev = 1e-8;  // residual ||Hv - lambda v||
  int max_iterations = 5000;   // Krylov expansion steps
  std::uint64_t seed = 0x9d2c5680u;
  SpectralTransform transform = SpectralTransform::folded;
  // Fold center. NaN selects it from the window: halfway between the window
  // floor and the target, nudged upward so the target cluster stays the
  // fold minimum.
  double sigma = std::numeric_limits<double>::quiet_NaN();
  // States below the floor (valence side) are discarded; a finite halfwidth
  // turns the target into a hard window and raises EmptyWindowError when
  // nothing converged inside it.
  double window_floor_ev = -std::numeric_limits<double>::infinity();
  double window_halfwidth_ev = std::numeric_limits<double>::infinity();
  int basis_size = 0;    // Krylov basis per restart cycle; 0 = auto
  int extra_states = 6;  // guard states carried beyond n_states
  int block_size = 1;    // band width; raise to resolve exact degeneracies
  double memory_budget_gb = 6.0;
  Eigen::VectorXcd start_vector;             // optional; random otherwise
  std::vector<Eigen::VectorXcd> warm_start;  // previous eigenvectors
};

struct EigenSolution {
  Eigen::VectorXd eigenvalues;    // eV, ascending
  Eigen::MatrixXcd eigenvectors;  // unit-norm columns
  Eigen::VectorXd residuals;      // ||Hv - lambda v|| per pair
  int iterations = 0;
  std::int64_t matvecs = 0;
  double ortho_defect = 0;
  std::uint64_t seed = 0;
  double sigma_used = 0;
  bool converged = false;
};

namespace detail {

inline double splitmix_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

// Deterministic chunked vector kernels: chunk boundaries depend only on the
// problem size, partials combine in chunk order.
template <typename Scalar>
struct VectorOps {
  std::int64_t n;
  ThreadPool* pool;
  static constexpr std::size_t chunk = 1 << 15;

  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using StridedMap =
      Eigen::Map<Mat, 0, Eigen::OuterStride<>>;
  using ConstStridedMap =
      Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;

  // Every kernel walks the same fixed chunk grid whether pooled or not, so
  // SIMD head/tail boundaries and partial-sum order never depend on the
  // worker count.
  template <typename Fn>
  void for_chunks(const Fn& fn) const {
    if (!pool || pool->worker_count() <= 1) {
      for (std::size_t b = 0; b < static_cast<std::size_t>(n); b += chunk)
        fn(b, std::min(static_cast<std::size_t>(n), b + chunk));
      return;
    }
    pool->parallel_chunks(static_cast<std::size_t>(n), chunk,
                          [&](std::size_t, std::size_t b, std::size_t e) {
                            fn(b, e);
                          });
  }

  // Fixed-chunk partials combined in chunk order regardless of the worker
  // count, so results are bit-identical for any parallel configuration.
  Scalar dot(const Scalar* x, const Scalar* y) const {
    auto chunk_dot = [&](std::size_t b, std::size_t e) {
      Eigen::Map<const Vec> mx(x + b, e - b), my(y + b, e - b);
      return Scalar(mx.dot(my));
    };
    if (!pool || pool->worker_count() <= 1) {
      Scalar acc(0);
      for (std::size_t b = 0; b < static_cast<std::size_t>(n); b += chunk)
        acc += chunk_dot(b, std::min(static_cast<std::size_t>(n), b + chunk));
      return acc;
    }
    return pool->template reduce_chunks<Scalar>(
        static_cast<std::size_t>(n), chunk, Scalar(0), chunk_dot);
  }

  double norm(const Scalar* x) const {
    return std::sqrt(std::real(std::complex<double>(dot(x, x))));
  }

  void scale(Scalar* x, double a) const {
    for_chunks([=](std::size_t b, std::size_t e) {
      Eigen::Map<Vec> mx(x + b, e - b);
      mx *= a;
    });
  }

  void axpy(Scalar a, const Scalar* x, Scalar* y) const {
    for_chunks([=](std::size_t b, std::size_t e) {
      Eigen::Map<const Vec> mx(x + b, e - b);
      Eigen::Map<Vec> my(y + b, e - b);
      my += a * mx;
    });
  }

  // c = V(:, 0..k-1)^H w, chunk partials combined in chunk order.
  void project(const Scalar* V, std::int64_t ld, int k, const Scalar* w,
               Scalar* c) const {
    const std::size_t nc = (static_cast<std::size_t>(n) + chunk - 1) / chunk;
    std::vector<Scalar> partial(nc * k, Scalar(0));
    auto chunk_proj = [&](std::size_t ci, std::size_t b, std::size_t e) {
      ConstStridedMap mv(V + b, e - b, k, Eigen::OuterStride<>(ld));
      Eigen::Map<const Vec> mw(w + b, e - b);
      Eigen::Map<Vec> mp(partial.data() + ci * k, k);
      mp.noalias() = mv.adjoint() * mw;
    };
    if (!pool || pool->worker_count() <= 1) {
      for (std::size_t ci = 0; ci < nc; ++ci)
        chunk_proj(ci, ci * chunk,
                   std::min(static_cast<std::size_t>(n), (ci + 1) * chunk));
    } else {
      pool->parallel_chunks(static_cast<std::size_t>(n), chunk, chunk_proj);
    }
    Eigen::Map<Vec> mc(c, k);
    mc.setZero();
    for (std::size_t ci = 0; ci < nc; ++ci)
      mc += Eigen::Map<const Vec>(partial.data() + ci * k, k);
  }

  // w -= V(:, 0..k-1) c
  void rank_update(const Scalar* V, std::int64_t ld, int k, const Scalar* c,
                   Scalar* w) const {
    for_chunks([&](std::size_t b, std::size_t e) {
      ConstStridedMap mv(V + b, e - b, k, Eigen::OuterStride<>(ld));
      Eigen::Map<const Vec> mc(c, k);
      Eigen::Map<Vec> mw(w + b, e - b);
      mw.noalias() -= mv * mc;
    });
  }

  // OUT(:, 0..k_out-1) = V(:, 0..k_in-1) * R  (distinct storage)
  void combine_raw(const Scalar* V, std::int64_t ld_in, int k_in, const Mat& R,
               Scalar* out, std::int64_t ld_out) const {
    const int k_out = static_cast<int>(R.cols());
    for_chunks([&](std::size_t b, std::size_t e) {
      ConstStridedMap mv(V + b, e - b, k_in, Eigen::OuterStride<>(ld_in));
      StridedMap mo(out + b, e - b, k_out, Eigen::OuterStride<>(ld_out));
      mo.noalias() = mv * R;
    });
  }

  // V(:, 0..k_out-1) = V(:, 0..k_in-1) * R in place, per-chunk temporary
  void combine_inplace(Scalar* V, std::int64_t ld, int k_in,
                       const Mat& R) const {
    const int k_out = static_cast<int>(R.cols());
    for_chunks([&](std::size_t b, std::size_t e) {
      ConstStridedMap mv(V + b, e - b, k_in, Eigen::OuterStride<>(ld));
      Mat tmp = mv * R;
      StridedMap mo(V + b, e - b, k_out, Eigen::OuterStride<>(ld));
      mo = tmp;
    });
  }
};

// Krylov-Schur (thick-restart band Lanczos) for the fold-lowest eigenpairs
// of a Hermitian operator, with physical eigenpairs recovered by a final
// Rayleigh-Ritz step on H itself. The small projected matrix T is kept as
// the exact projection of OP onto the orthonormal basis (measured from the
// orthogonalization coefficients), which makes restarts, warm starts and
// band expansion exact rather than arrow-shaped approximations. A band
// width > 1 resolves exactly degenerate multiplets.
template <typename Scalar>
class KrylovSchur {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using ApplyFn = std::function<void(const Scalar*, Scalar*)>;

  KrylovSchur(std::int64_t dim, ApplyFn op, ApplyFn h_apply, int op_cost,
              ThreadPool* pool)
      : n_(dim), op_(std::move(op)), h_(std::move(h_apply)),
        op_cost_(op_cost), pool_(pool) {
    ops_.n = n_;
    ops_.pool = pool;
  }

  EigenSolution solve(int nev, const SolverConfig& cfg, double sigma) {
    nev_ = nev;
    cfg_ = cfg;
    sigma_ = sigma;
    seed_state_ = cfg.seed ^ 0x6a09e667f3bcc908ULL;
    const int want = nev_ + std::max(cfg_.extra_states, 2);

    // Small problems are solved exactly over a full orthonormal basis.
    if (n_ <= std::max(64, 4 * want)) return exact_small_solve(want);

    m_ = cfg.basis_size > 0 ? cfg.basis_size : std::max(2 * want + 24, 48);
    const double bytes_per_vec = static_cast<double>(n_) * sizeof(Scalar);
    const double budget = cfg.memory_budget_gb * 1073741824.0;
    const int mem_cap =
        static_cast<int>(budget / bytes_per_vec) - 2 * want - 6;
    m_ = static_cast<int>(std::min<std::int64_t>(
        {static_cast<std::int64_t>(m_),
         static_cast<std::int64_t>(std::max(mem_cap, want + 8)),
         n_ - 1}));

    V_.resize(n_, m_ + 1);
    T_ = Matrix::Zero(m_ + 1, m_ + 1);
    init_start_block();
    if (m_ < want + 2 * b_ + 2) m_ = std::min<int>(want + 2 * b_ + 2, n_ - 1);

    std::vector<std::pair<int, double>> trace;
    bool window_ever_hit = false;
    for (int cycle = 0;; ++cycle) {
      const double ratio = expand_and_compress(trace, want);
      const bool out_of_budget = iterations_ >= cfg_.max_iterations;
      // Clustered states converge as a subspace while their individual
      // folded residuals stagnate, so check against H periodically even
      // when the fold gate stays high.
      if (ratio < 30.0 || cycle % 3 == 2 || out_of_budget) {
        EigenSolution sol = rayleigh_ritz_on_h(std::min(k_, want + 4));
        sol.iterations = iterations_;
        sol.matvecs = matvecs_;
        sol.seed = cfg_.seed;
        sol.sigma_used = sigma_;
        // Certified candidates only (residual at tolerance, above the
        // floor), taken in fold order so the target cluster leads and
        // half-converged spectral junk cannot mask the verdict. The
        // certified fold values must also dominate the projected fold
        // spectrum: a lower unconverged fold state means a target is
        // still missing.
        auto fold_val = [&](double lam) {
          return cfg_.transform == SpectralTransform::folded
                     ? (lam - sigma_) * (lam - sigma_)
                     : lam;
        };
        std::vector<int> certified;
        for (int i = 0; i < sol.eigenvalues.size(); ++i) {
          if (sol.residuals(i) > cfg_.tolerance_ev) continue;
          if (sol.eigenvalues(i) < cfg_.window_floor_ev) {
            below_floor_seen_ = true;
            continue;
          }
          certified.push_back(i);
        }
        std::sort(certified.begin(), certified.end(), [&](int a, int b) {
          return fold_val(sol.eigenvalues(a)) < fold_val(sol.eigenvalues(b));
        });
        window_ever_hit = window_ever_hit || !certified.empty();
        bool ok = static_cast<int>(certified.size()) >= nev_ &&
                  last_theta_.size() >= nev_;
        for (int i = 0; ok && i < nev_; ++i) {
          const double f = fold_val(sol.eigenvalues(certified[i]));
          const double slack =
              1e-8 + 1e-3 * std::abs(last_theta_(i)) +
              2 * std::sqrt(std::max(f, 0.0)) * cfg_.tolerance_ev * 100;
          ok = f <= last_theta_(i) + slack;
        }
        if (ok) {
          // return certified states sorted ascending in energy
          std::sort(certified.begin(), certified.end(), [&](int a, int b) {
            return sol.eigenvalues(a) < sol.eigenvalues(b);
          });
          EigenSolution out;
          const int q = static_cast<int>(certified.size());
          out.eigenvalues.resize(q);
          out.residuals.resize(q);
          out.eigenvectors.resize(n_, q);
          for (int c = 0; c < q; ++c) {
            out.eigenvalues(c) = sol.eigenvalues(certified[c]);
            out.residuals(c) = sol.residuals(certified[c]);
            out.eigenvectors.col(c) = sol.eigenvectors.col(certified[c]);
          }
          out.iterations = sol.iterations;
          out.matvecs = sol.matvecs;
          out.seed = sol.seed;
          out.sigma_used = sol.sigma_used;
          out.ortho_defect = sol.ortho_defect;
          out.converged = true;
          return out;
        }
        if (out_of_budget) {
          trace.emplace_back(iterations_,
                             certified.empty() ? 1e300 : 0.0);
          if (!window_ever_hit && below_floor_seen_)
            throw EmptyWindowError(
                "states converged only below the window floor");
          throw ConvergenceError(
              "eigensolver did not reach tolerance within max iterations",
              trace);
        }
      }
    }
  }

 private:
  static Scalar conj_scalar(Scalar v) {
    if constexpr (std::is_same_v<Scalar, double>) {
      return v;
    } else {
      return std::conj(v);
    }
  }

  void random_vector(Scalar* v) {
    for (std::int64_t i = 0; i < n_; ++i) {
      if constexpr (std::is_same_v<Scalar, double>) {
        v[i] = splitmix_next(seed_state_);
      } else {
        const double re = splitmix_next(seed_state_);
        const double im = splitmix_next(seed_state_);
        v[i] = Scalar(re, im);
      }
    }
  }

  // Classical Gram-Schmidt of column j against columns [0, j) with a DGKS
  // second pass on cancellation. First-pass coefficients land in h_out when
  // given; returns the post-orthogonalization norm.
  double orthonormalize_col(int j, Vector* h_out = nullptr) {
    Scalar* w = V_.col(j).data();
    const double n0 = ops_.norm(w);
    if (j == 0) {
      if (n0 > 0) ops_.scale(w, 1.0 / n0);
      return n0;
    }
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> c(j);
    ops_.project(V_.data(), n_, j, w, c.data());
    ops_.rank_update(V_.data(), n_, j, c.data(), w);
    if (h_out) {
      for (int i = 0; i < j; ++i) (*h_out)(i) = c(i);
    }
    double nw = ops_.norm(w);
    if (nw < 0.7071 * n0) {
      ops_.project(V_.data(), n_, j, w, c.data());
      ops_.rank_update(V_.data(), n_, j, c.data(), w);
      nw = ops_.norm(w);
    }
    if (nw > 0) ops_.scale(w, 1.0 / nw);
    return nw;
  }

  // Fills column j with a random direction orthonormal to [0, j).
  void seed_random_col(int j) {
    for (int tries = 0; tries < 8; ++tries) {
      random_vector(V_.col(j).data());
      if (orthonormalize_col(j) > 1e-8) return;
    }
    throw std::runtime_error("could not seed an orthonormal direction");
  }

  void copy_in(const Eigen::VectorXcd& src, Scalar* dst) {
    for (std::int64_t i = 0; i < n_; ++i) {
      if constexpr (std::is_same_v<Scalar, double>) {
        dst[i] = src(i).real();
      } else {
        dst[i] = src(i);
      }
    }
  }

  // Warm vectors form a kept block with its exact OP projection. Their
  // residual vectors seed the chain block, so the corrections the kept
  // states need are explored first; remaining chain slots start from the
  // start vector or fresh randomness.
  void init_start_block() {
    b_ = std::clamp(cfg_.block_size, 1, std::max(1, m_ / 4));
    int w = 0;
    const int wcap = std::max(0, m_ / 3);
    for (const auto& ws : cfg_.warm_start) {
      if (w >= wcap || ws.size() != n_) continue;
      copy_in(ws, V_.col(w).data());
      if (orthonormalize_col(w) > 1e-8) ++w;
    }
    if (w > 0) {
      b_ = std::max(b_, std::min(w, std::max(1, m_ / 4)));
      Matrix residuals(n_, w);
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1> c(w);
      for (int i = 0; i < w; ++i) {
        op_(V_.col(i).data(), residuals.col(i).data());
        matvecs_ += op_cost_;
        ops_.project(V_.data(), n_, w, residuals.col(i).data(), c.data());
        for (int r = 0; r < w; ++r) T_(r, i) = c(r);
        ops_.rank_update(V_.data(), n_, w, c.data(), residuals.col(i).data());
      }
      T_.topLeftCorner(w, w) =
          (0.5 * (T_.topLeftCorner(w, w) +
                  T_.topLeftCorner(w, w).adjoint().eval()))
              .eval();
      int placed = w;
      for (int i = 0; i < w && placed < w + b_; ++i) {
        V_.col(placed) = residuals.col(i);
        if (orthonormalize_col(placed) > 1e-10) ++placed;
      }
      while (placed < w + b_) {
        seed_random_col(placed);
        ++placed;
      }
      k_ = w;
      return;
    }
    int placed = 0;
    if (cfg_.start_vector.size() == n_) {
      copy_in(cfg_.start_vector, V_.col(0).data());
      if (orthonormalize_col(0) > 1e-12) placed = 1;
    }
    while (placed < b_) {
      seed_random_col(placed);
      ++placed;
    }
    k_ = 0;
  }

  // One expansion sweep plus restart compression. Returns the worst ratio
  // of folded residual to folded tolerance over the target states.
  double expand_and_compress(std::vector<std::pair<int, double>>& trace,
                             int want) {
    Vector hcol(m_ + 1);
    for (int c = k_; c + b_ <= m_; ++c) {
      const int dst = c + b_;
      op_(V_.col(c).data(), V_.col(dst).data());
      matvecs_ += op_cost_;
      hcol.setZero();
      const double beta = orthonormalize_col(dst, &hcol);
      for (int i = 0; i < dst; ++i) {
        T_(i, c) = hcol(i);
        T_(c, i) = conj_scalar(hcol(i));
      }
      T_(dst, c) = beta;
      T_(c, dst) = beta;
      ++iterations_;
      if (beta <= 1e-13) seed_random_col(dst);
      if (iterations_ >= cfg_.max_iterations + m_) break;
    }

    // Ritz space: columns 0..mb-1 have exact OP projections; the band tail
    // carries the residual couplings.
    const int mb = m_ - b_ + 1;
    Matrix Tsym = (0.5 * (T_.topLeftCorner(mb, mb) +
                          T_.topLeftCorner(mb, mb).adjoint().eval()))
                      .eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(Tsym);
    const Eigen::VectorXd theta = es.eigenvalues();
    const Matrix& Y = es.eigenvectors();

    // Exact folded residuals: norm of the tail coupling rows rotated into
    // the Ritz basis.
    Matrix tail = T_.block(mb, 0, b_, mb) * Y;  // b_ x mb

    auto fold_tol = [&](double th) {
      if (cfg_.transform != SpectralTransform::folded)
        return cfg_.tolerance_ev;
      // res_H ~ res_fold / (2 |lambda - sigma|); the Rayleigh-Ritz pass
      // verifies the actual H residual, so floor the distance estimate.
      const double dist = std::max(std::sqrt(std::max(th, 0.0)), 0.025);
      return std::max(2.0 * dist * cfg_.tolerance_ev, 1e-14);
    };

    double worst_ratio = 0;
    for (int i = 0; i < std::min(nev_, mb); ++i) {
      const double res = tail.col(i).norm();
      worst_ratio = std::max(worst_ratio, res / fold_tol(theta(i)));
    }
    trace.emplace_back(iterations_, worst_ratio);
    last_theta_ = theta.head(std::min(nev_ + 4, mb));

    const int keep = std::min({want + 4, mb - 1, m_ - b_});
    compress(Y, theta, tail, keep, mb);
    return worst_ratio;
  }

  // Krylov-Schur restart: kept Ritz vectors lead, the band tail follows
  // with its exact couplings.
  void compress(const Matrix& Y, const Eigen::VectorXd& theta,
                const Matrix& tail, int keep, int mb) {
    ops_.combine_inplace(V_.data(), n_, mb, Y.leftCols(keep));
    for (int l = 0; l < b_; ++l) V_.col(keep + l) = V_.col(mb + l);
    T_.setZero();
    for (int i = 0; i < keep; ++i) {
      T_(i, i) = theta(i);
      for (int l = 0; l < b_; ++l) {
        T_(keep + l, i) = tail(l, i);
        T_(i, keep + l) = conj_scalar(tail(l, i));
      }
    }
    k_ = keep;
  }

  // Exactly solve tiny problems over a full orthonormal basis.
  EigenSolution exact_small_solve(int want) {
    m_ = static_cast<int>(n_);
    V_.resize(n_, n_);
    int placed = 0;
    for (const auto& ws : cfg_.warm_start) {
      if (placed >= n_ || ws.size() != n_) continue;
      copy_in(ws, V_.col(placed).data());
      if (orthonormalize_col(placed) > 1e-8) ++placed;
    }
    if (placed < n_ && cfg_.start_vector.size() == n_) {
      copy_in(cfg_.start_vector, V_.col(placed).data());
      if (orthonormalize_col(placed) > 1e-12) ++placed;
    }
    while (placed < n_) {
      seed_random_col(placed);
      ++placed;
    }
    k_ = static_cast<int>(n_);
    iterations_ = 1;
    EigenSolution sol = rayleigh_ritz_on_h(static_cast<int>(n_));
    sol.iterations = 1;
    sol.matvecs = matvecs_;
    sol.seed = cfg_.seed;
    sol.sigma_used = sigma_;
    double worst = 0;
    int checked = 0;
    for (int i = 0; i < sol.eigenvalues.size() && checked < nev_; ++i) {
      if (sol.eigenvalues(i) < cfg_.window_floor_ev) continue;
      worst = std::max(worst, sol.residuals(i));
      ++checked;
    }
    if (checked == 0)
      throw EmptyWindowError("no states at or above the window floor");
    sol.converged = (checked == nev_ && worst <= cfg_.tolerance_ev);
    (void)want;
    return sol;
  }

  // Rayleigh-Ritz of H over the leading q columns; output sorted ascending.
  EigenSolution rayleigh_ritz_on_h(int q) {
    q = std::max(1, std::min<int>(q, static_cast<int>(n_)));
    for (int i = 0; i < q; ++i) orthonormalize_col(i);

    Matrix HW(n_, q);
    for (int i = 0; i < q; ++i) {
      h_(V_.col(i).data(), HW.col(i).data());
      ++matvecs_;
    }
    Matrix G(q, q);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> c(q);
    for (int i = 0; i < q; ++i) {
      ops_.project(V_.data(), n_, q, HW.col(i).data(), c.data());
      G.col(i) = c;
    }
    G = (0.5 * (G + G.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(G);
    const Eigen::VectorXd lam = es.eigenvalues();
    const Matrix Z = es.eigenvectors();

    Matrix U(n_, q), HU(n_, q);
    ops_.combine_raw(V_.data(), n_, q, Z, U.data(), n_);
    ops_.combine_raw(HW.data(), n_, q, Z, HU.data(), n_);

    EigenSolution sol;
    sol.eigenvalues.resize(q);
    sol.residuals.resize(q);
    sol.eigenvectors.resize(n_, q);
    Vector r(n_);
    for (int i = 0; i < q; ++i) {
      const double nu = ops_.norm(U.col(i).data());
      if (nu > 0) {
        U.col(i) /= nu;
        HU.col(i) /= nu;
      }
      r = HU.col(i) - Scalar(lam(i)) * U.col(i);
      sol.eigenvalues(i) = lam(i);
      sol.residuals(i) = ops_.norm(r.data());
      if constexpr (std::is_same_v<Scalar, double>) {
        sol.eigenvectors.col(i) =
            U.col(i).template cast<std::complex<double>>();
      } else {
        sol.eigenvectors.col(i) = U.col(i);
      }
    }
    double defect = 0;
    for (int a = 0; a < q; ++a)
      for (int b = a + 1; b < q; ++b)
        defect = std::max(defect, std::abs(sol.eigenvectors.col(a).dot(
                                      sol.eigenvectors.col(b))));
    sol.ortho_defect = defect;
    return sol;
  }

  std::int64_t n_;
  ApplyFn op_, h_;
  int op_cost_ = 1;
  ThreadPool* pool_;
  VectorOps<Scalar> ops_;
  SolverConfig cfg_;
  int nev_ = 1;
  int m_ = 0;
  int k_ = 0;
  int b_ = 1;
  double sigma_ = 0;
  int iterations_ = 0;
  std::int64_t matvecs_ = 0;
  std::uint64_t seed_state_ = 0;
  bool below_floor_seen_ = false;
  Eigen::VectorXd last_theta_;
  Matrix V_;
  Matrix T_;
};

}  // namespace detail

// Full dense spectrum for small systems; the oracle for the Krylov path.
inline EigenSolution dense_diagonalize(const SparseHamiltonian& h,
                                       std::int64_t cap = 5000) {
  const std::int64_t n = h.dimension();
  if (n > cap)
    throw DimensionCapError("dense_diagonalize: dimension " +
                            std::to_string(n) + " exceeds cap " +
                            std::to_string(cap));
  EigenSolution sol;
  const Eigen::MatrixXcd m = h.dense();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  sol.eigenvalues = es.eigenvalues();
  sol.eigenvectors = es.eigenvectors();
  sol.iterations = 1;
  sol.converged = true;
  const Eigen::MatrixXcd r =
      m * sol.eigenvectors - sol.eigenvectors * sol.eigenvalues.asDiagonal();
  sol.residuals = r.colwise().norm();
  if (n <= 2048) {
    sol.ortho_defect = (sol.eigenvectors.adjoint() * sol.eigenvectors -
                        Eigen::MatrixXcd::Identity(n, n))
                           .cwiseAbs()
                           .maxCoeff();
  }
  return sol;
}

// Lowest states nearest the target energy via the configured spectral
// transform; residuals are checked against H itself.
inline EigenSolution lowest_states(const SparseHamiltonian& h, int n_states,
                                   double window_ev, const SolverConfig& cfg,
                                   ThreadPool* pool = nullptr) {
  if (n_states < 1) throw std::invalid_argument("n_states must be >= 1");
  const std::int64_t n = h.dimension();

  double sigma = cfg.sigma;
  if (cfg.transform == SpectralTransform::folded && !std::isfinite(sigma)) {
    if (std::isfinite(cfg.window_floor_ev)) {
      const double span = window_ev - cfg.window_floor_ev;
      sigma = cfg.window_floor_ev + 0.54 * span;
    } else {
      sigma = window_ev;
    }
  }

  EigenSolution sol;
  if (!h.with_spin()) {
    std::vector<double> tmp(n);
    detail::VectorOps<double> ops{n, pool};
    auto h_apply = [&](const double* x, double* y) { h.apply(x, y, pool); };
    auto op = [&](const double* x, double* y) {
      if (cfg.transform == SpectralTransform::plain) {
        h.apply(x, y, pool);
        return;
      }
      h.apply(x, tmp.data(), pool);
      ops.axpy(-sigma, x, tmp.data());
      h.apply(tmp.data(), y, pool);
      ops.axpy(-sigma, tmp.data(), y);
    };
    detail::KrylovSchur<double> solver(
        n, op, h_apply, cfg.transform == SpectralTransform::plain ? 1 : 2,
        pool);
    sol = solver.solve(n_states, cfg, sigma);
  } else {
    using cd = std::complex<double>;
    std::vector<cd> tmp(n);
    detail::VectorOps<cd> ops{n, pool};
    auto h_apply = [&](const cd* x, cd* y) { h.apply(x, y, pool); };
    auto op = [&](const cd* x, cd* y) {
      if (cfg.transform == SpectralTransform::plain) {
        h.apply(x, y, pool);
        return;
      }
      h.apply(x, tmp.data(), pool);
      ops.axpy(cd(-sigma), x, tmp.data());
      h.apply(tmp.data(), y, pool);
      ops.axpy(cd(-sigma), tmp.data(), y);
    };
    detail::KrylovSchur<cd> solver(
        n, op, h_apply, cfg.transform == SpectralTransform::plain ? 1 : 2,
        pool);
    sol = solver.solve(n_states, cfg, sigma);
  }

  // Window selection: drop valence-side states below the floor, apply the
  // hard window when configured, return the lowest n_states.
  std::vector<int> keep;
  for (int i = 0; i < sol.eigenvalues.size(); ++i) {
    const double e = sol.eigenvalues(i);
    if (e < cfg.window_floor_ev) continue;
    if (std::isfinite(cfg.window_halfwidth_ev) &&
        std::abs(e - window_ev) > cfg.window_halfwidth_ev)
      continue;
    keep.push_back(i);
  }
  if (keep.empty())
    throw EmptyWindowError("no converged states inside the requested window");
  const int count = std::min<int>(n_states, static_cast<int>(keep.size()));
  EigenSolution out;
  out.eigenvalues.resize(count);
  out.residuals.resize(count);
  out.eigenvectors.resize(n, count);
  for (int c = 0; c < count; ++c) {
    out.eigenvalues(c) = sol.eigenvalues(keep[c]);
    out.residuals(c) = sol.residuals(keep[c]);
    out.eigenvectors.col(c) = sol.eigenvectors.col(keep[c]);
  }
  out.iterations = sol.iterations;
  out.matvecs = sol.matvecs;
  out.seed = sol.seed;
  out.sigma_used = sol.sigma_used;
  out.converged = sol.converged;
  double defect = 0;
  for (int a = 0; a < count; ++a)
    for (int b = a + 1; b < count; ++b)
      defect = std::max(defect, std::abs(out.eigenvectors.col(a).dot(
                                    out.eigenvectors.col(b))));
  out.ortho_defect = defect;
  return out;
}

}  // namespace dstark
