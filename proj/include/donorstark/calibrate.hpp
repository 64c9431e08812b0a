#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "donorstark/bands.hpp"
#include "donorstark/hamiltonian.hpp"
#include "donorstark/potentials.hpp"
#include "donorstark/solver.hpp"

namespace dstark {

struct CalibrationError : std::runtime_error {
  std::vector<std::pair<double, double>> trace;  // (u0, binding)
  CalibrationError(const std::string& msg,
                   std::vector<std::pair<double, double>> t)
      : std::runtime_error(msg), trace(std::move(t)) {}
};

enum class CbmReference { bulk, finite_domain };

struct CalibrationOptions {
  double target_binding_ev = 0.0456;
  double tolerance_ev = 5e-5;  // 0.05 meV
  int max_root_iterations = 30;
  double u0_min = 0.0;
  double u0_max = 20.0;
  double u0_guess = 4.33;
  double kappa = 11.9;
  CbmReference cbm_reference = CbmReference::bulk;
};

struct CalibrationResult {
  double u0_ev = 0;
  double binding_ev = 0;
  double cbm_ev = 0;
  int iterations = 0;
  std::vector<std::pair<double, double>> trace;  // (u0, binding)
  EigenSolution ground;                          // solution at the root
};

// Ground-state binding at a given u0; eigenvectors are recycled between
// root-finding iterations as warm starts.
namespace detail {

struct BindingEvaluator {
  const DomainLattice& lattice;
  const TbParameterSet& params;
  const AssemblyOptions& assembly;
  SolverConfig solver;
  double kappa;
  double cbm_ev;
  double window_floor_ev;
  ThreadPool* pool;
  std::vector<Eigen::VectorXcd> warm;

  EigenSolution last;

  double operator()(double u0) {
    DonorPotentialParams dp;
    dp.kappa = kappa;
    dp.u0_ev = u0;
    const auto v = donor_potential(dp, lattice);
    const auto h = SparseHamiltonian::assemble(lattice, params, v, assembly);
    SolverConfig cfg = solver;
    cfg.window_floor_ev = window_floor_ev;
    cfg.warm_start = warm;
    last = lowest_states(h, std::max(1, cfg.block_size), cbm_ev - 0.045, cfg,
                         pool);
    warm.clear();
    for (int i = 0; i < last.eigenvectors.cols(); ++i)
      warm.push_back(last.eigenvectors.col(i));
    return cbm_ev - last.eigenvalues(0);
  }
};

}  // namespace detail

// Bracketed secant/bisection root find for the on-site correction u0 such
// that the donor binding hits the target. Deeper wells bind harder, so the
// binding is monotone in u0 over the physical bracket.
inline CalibrationResult calibrate_u0(const DomainLattice& lattice,
                                      const TbParameterSet& params,
                                      const CalibrationOptions& opts,
                                      const SolverConfig& solver_config,
                                      const AssemblyOptions& assembly = {},
                                      ThreadPool* pool = nullptr) {
  const bool with_spin = assembly.spin_orbit && params.spin_orbit_p != 0;
  const auto bulk = bulk_bands(params, gamma_x_path(400), with_spin);
  double cbm = bulk.conduction_min_ev;
  if (opts.cbm_reference == CbmReference::finite_domain) {
    // Lowest conduction state of the undoped passivated box.
    DonorPotentialParams dp;
    dp.kappa = opts.kappa;
    dp.u0_ev = 0.0;
    std::vector<double> zero(lattice.n_sites(), 0.0);
    const auto h = SparseHamiltonian::assemble(lattice, params, zero, assembly);
    SolverConfig cfg = solver_config;
    cfg.window_floor_ev =
        bulk.valence_max_ev + 0.05 * bulk.indirect_gap_ev;
    const auto sol =
        lowest_states(h, 1, bulk.conduction_min_ev + 0.002, cfg, pool);
    cbm = sol.eigenvalues(0);
  }

  detail::BindingEvaluator eval{
      lattice,
      params,
      assembly,
      solver_config,
      opts.kappa,
      cbm,
      bulk.valence_max_ev + 0.05 * bulk.indirect_gap_ev,
      pool,
      {},
      {}};

  CalibrationResult res;
  res.cbm_ev = cbm;
  auto f = [&](double u0) {
    const double b = eval(u0) - opts.target_binding_ev;
    res.trace.emplace_back(u0, b + opts.target_binding_ev);
    ++res.iterations;
    return b;
  };

  // Bracket the root starting from the guess.
  double a = std::max(opts.u0_min, opts.u0_guess - 1.0);
  double b = std::min(opts.u0_max, opts.u0_guess + 1.0);
  double fa = f(a);
  if (std::abs(fa) <= opts.tolerance_ev) {
    res.u0_ev = a;
    res.binding_ev = fa + opts.target_binding_ev;
    res.ground = eval.last;
    return res;
  }
  double fb = f(b);
  while (fa * fb > 0 && res.iterations < opts.max_root_iterations) {
    if (std::abs(fa) < std::abs(fb)) {
      a = std::max(opts.u0_min, a - 2.0 * (b - a));
      if (a <= opts.u0_min && fa * fb > 0 && b >= opts.u0_max) break;
      fa = f(a);
    } else {
      b = std::min(opts.u0_max, b + 2.0 * (b - a));
      fb = f(b);
    }
    if (a <= opts.u0_min + 1e-12 && b >= opts.u0_max - 1e-12 && fa * fb > 0)
      break;
  }
  if (fa * fb > 0)
    throw CalibrationError(
        "calibration target unreachable for u0 in [" +
            std::to_string(opts.u0_min) + ", " + std::to_string(opts.u0_max) +
            "]",
        res.trace);

  // Safeguarded secant within the bracket.
  double x = b, fx = fb;
  while (res.iterations < opts.max_root_iterations) {
    if (std::abs(fx) <= opts.tolerance_ev) break;
    double step;
    const double denom = (fb - fa);
    if (std::abs(denom) > 1e-300) {
      step = a - fa * (b - a) / denom;  // secant through the bracket
    } else {
      step = 0.5 * (a + b);
    }
    if (step <= std::min(a, b) || step >= std::max(a, b))
      step = 0.5 * (a + b);  // fall back to bisection
    x = step;
    fx = f(x);
    if (fa * fx <= 0) {
      b = x;
      fb = fx;
    } else {
      a = x;
      fa = fx;
    }
  }
  if (std::abs(fx) > opts.tolerance_ev)
    throw CalibrationError("calibration did not converge within " +
                               std::to_string(opts.max_root_iterations) +
                               " iterations",
                           res.trace);
  res.u0_ev = x;
  res.binding_ev = fx + opts.target_binding_ev;
  res.ground = eval.last;
  return res;
}

}  // namespace dstark
