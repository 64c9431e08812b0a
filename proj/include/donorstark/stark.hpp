#pragma once

#include <Eigen/Dense>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "donorstark/calibrate.hpp"
#include "donorstark/observables.hpp"
#include "donorstark/potentials.hpp"
#include "donorstark/solver.hpp"
#include "donorstark/units.hpp"

namespace dstark {

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Quadratic Stark fit of dA/A(0) = eta2 eps^2 + eta1 eps (through the
// origin). Fields in V/um, eta2 in um^2/V^2, eta1 in um/V.
struct StarkFit {
  double eta2 = 0;
  double eta1 = 0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double rms_residual = 0;
  double peak_field_v_um = 0;  // -eta1 / (2 eta2)
  // Three-parameter diagnostic fit (with constant); never used for eta.
  double diag_eta2 = 0, diag_eta1 = 0, diag_const = 0;
};

struct DipoleFit {
  double slope_nm_um_v = 0;  // nm per (V/um)
  double intercept_nm = 0;
  double r_squared = 0;
};

struct SweepPointMeta {
  double field_v_um = 0;
  double energy_ev = 0;
  double residual = 0;
  int iterations = 0;
  std::int64_t matvecs = 0;
  double donor_weight = 0;
  double seconds = 0;
};

struct SweepResult {
  double depth_nm = 0;           // snapped donor depth
  double requested_depth_nm = 0;
  std::vector<double> fields_v_um;
  std::vector<double> ratios;           // A(eps)/A(0)
  std::vector<double> delta_a_over_a0;  // ratios - 1
  std::vector<double> dipoles_nm;       // along -field direction
  std::vector<SweepPointMeta> meta;
  double u0_ev = 0;
  double cbm_ev = 0;
  double zero_field_energy_ev = 0;
  bool complete = false;
  std::string error;
};

inline StarkFit fit_stark(const std::vector<double>& fields,
                          const std::vector<double>& delta_a_over_a0) {
  if (fields.size() != delta_a_over_a0.size())
    throw FitError("fit_stark: field and response lengths differ");
  std::vector<double> distinct;
  bool has_zero = false;
  for (double f : fields) {
    if (std::abs(f) < 1e-15) has_zero = true;
    bool seen = false;
    for (double d : distinct) seen = seen || std::abs(d - f) < 1e-12;
    if (!seen) distinct.push_back(f);
  }
  if (distinct.size() < 4 || !has_zero)
    throw FitError(
        "fit_stark: need at least 4 distinct fields including zero");

  const int n = static_cast<int>(fields.size());
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = fields[i] * fields[i];
    x(i, 1) = fields[i];
    y(i) = delta_a_over_a0[i];
  }
  const Eigen::Matrix2d xtx = x.transpose() * x;
  if (std::abs(xtx.determinant()) < 1e-30)
    throw FitError("fit_stark: rank-deficient design matrix");
  const Eigen::Vector2d beta = xtx.ldlt().solve(x.transpose() * y);

  StarkFit fit;
  fit.eta2 = beta(0);
  fit.eta1 = beta(1);
  const Eigen::VectorXd r = y - x * beta;
  const double rss = r.squaredNorm();
  fit.rms_residual = std::sqrt(rss / n);
  const double sigma2 = n > 2 ? rss / (n - 2) : 0.0;
  fit.covariance = sigma2 * xtx.inverse();
  fit.peak_field_v_um =
      std::abs(fit.eta2) > 1e-300 ? -fit.eta1 / (2 * fit.eta2) : 0.0;

  // Diagnostic 3-parameter fit detects pipeline bias.
  Eigen::MatrixXd x3(n, 3);
  x3.leftCols(2) = x;
  x3.col(2).setOnes();
  const Eigen::Vector3d b3 =
      (x3.transpose() * x3).ldlt().solve(x3.transpose() * y);
  fit.diag_eta2 = b3(0);
  fit.diag_eta1 = b3(1);
  fit.diag_const = b3(2);
  return fit;
}

inline StarkFit fit_stark(const SweepResult& sweep) {
  return fit_stark(sweep.fields_v_um, sweep.delta_a_over_a0);
}

inline DipoleFit fit_dipole(const std::vector<double>& fields,
                            const std::vector<double>& dipoles) {
  if (fields.size() != dipoles.size() || fields.size() < 2)
    throw FitError("fit_dipole: need at least two points");
  const int n = static_cast<int>(fields.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += fields[i];
    sy += dipoles[i];
    sxx += fields[i] * fields[i];
    sxy += fields[i] * dipoles[i];
  }
  const double det = n * sxx - sx * sx;
  if (std::abs(det) < 1e-30) throw FitError("fit_dipole: degenerate design");
  DipoleFit fit;
  fit.slope_nm_um_v = (n * sxy - sx * sy) / det;
  fit.intercept_nm = (sy * sxx - sx * sxy) / det;
  double ss_tot = 0, ss_res = 0;
  const double mean = sy / n;
  for (int i = 0; i < n; ++i) {
    const double pred = fit.slope_nm_um_v * fields[i] + fit.intercept_nm;
    ss_tot += (dipoles[i] - mean) * (dipoles[i] - mean);
    ss_res += (dipoles[i] - pred) * (dipoles[i] - pred);
  }
  fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

// Donor-centered Gaussian start vector on the s orbital; accelerates the
// first cold solve.
inline Eigen::VectorXcd gaussian_start(const DomainLattice& lattice,
                                       bool with_spin,
                                       double width_nm = 2.5) {
  const int d = n_orbitals * (with_spin ? 2 : 1);
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(lattice.n_sites() * d);
  const Vec3 r0 = lattice.sites[lattice.donor_index].position_nm;
  for (std::int64_t i = 0; i < lattice.n_sites(); ++i) {
    const Vec3 dr = lattice.sites[i].position_nm - r0;
    const double w = std::exp(-dr.dot(dr) / (2 * width_nm * width_nm));
    v(i * d + orb_s) = w;
  }
  v.normalize();
  return v;
}

struct IonizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything a sweep needs beside the domain and the field grid.
struct SweepConfig {
  TbParameterSet params;
  AssemblyOptions assembly;
  SolverConfig solver;
  double kappa = 11.9;
  int n_states = 4;
  ContactMode contact_mode = ContactMode::all_orbitals;
  double ionization_guard_fraction = 0.2;
  // u0 source: calibrate against the binding target, or use fixed_u0.
  bool calibrate = false;
  double fixed_u0_ev = 4.33;
  CalibrationOptions calibration;
  double gaussian_start_width_nm = 2.5;
};

namespace detail {

struct GapWindow {
  double floor_ev;
  double target_ev;
  double cbm_ev;
};

inline GapWindow gap_window(const TbParameterSet& params, bool with_spin) {
  const auto bulk = bulk_bands(params, gamma_x_path(400), with_spin);
  GapWindow w;
  w.cbm_ev = bulk.conduction_min_ev;
  w.floor_ev = bulk.valence_max_ev + 0.05 * bulk.indirect_gap_ev;
  w.target_ev = bulk.conduction_min_ev - 0.045;
  return w;
}

}  // namespace detail

// One calibrated zero-field solve plus one solve per field, all sharing the
// same u0. Ratios use the chosen contact mode; dipoles are reported along
// the electron-displacement direction (minus the field direction).
inline SweepResult run_sweep(const DomainSpec& domain,
                             const std::vector<double>& fields_v_um,
                             const SweepConfig& cfg,
                             ThreadPool* pool = nullptr) {
  for (std::size_t i = 1; i < fields_v_um.size(); ++i)
    if (!(fields_v_um[i] > fields_v_um[i - 1]))
      throw std::invalid_argument("sweep fields must be strictly increasing");
  bool has_zero = false;
  for (double f : fields_v_um) has_zero = has_zero || std::abs(f) < 1e-15;
  if (!has_zero)
    throw std::invalid_argument("sweep fields must include zero");

  const auto lattice = build_domain(domain);
  const bool with_spin =
      cfg.assembly.spin_orbit && cfg.params.spin_orbit_p != 0;
  const auto window = detail::gap_window(cfg.params, with_spin);

  SweepResult sweep;
  sweep.depth_nm = lattice.snapped_depth_nm;
  sweep.requested_depth_nm = lattice.requested_depth_nm;
  sweep.fields_v_um = fields_v_um;
  sweep.cbm_ev = window.cbm_ev;

  // u0: calibrated on this domain or fixed.
  if (cfg.calibrate) {
    CalibrationOptions copts = cfg.calibration;
    copts.kappa = cfg.kappa;
    SolverConfig scfg = cfg.solver;
    scfg.start_vector =
        gaussian_start(lattice, with_spin, cfg.gaussian_start_width_nm);
    const auto cal =
        calibrate_u0(lattice, cfg.params, copts, scfg, cfg.assembly, pool);
    sweep.u0_ev = cal.u0_ev;
  } else {
    sweep.u0_ev = cfg.fixed_u0_ev;
  }

  DonorPotentialParams dp;
  dp.kappa = cfg.kappa;
  dp.u0_ev = sweep.u0_ev;
  const auto donor_v = donor_potential(dp, lattice);
  const Vec3 r0 = lattice.sites[lattice.donor_index].position_nm;

  // Field along +depth_axis; ratios/dipoles per signed magnitude.
  Vec3 field_dir{0, 0, 0};
  switch (domain.depth_axis) {
    case Axis::x: field_dir = {1, 0, 0}; break;
    case Axis::y: field_dir = {0, 1, 0}; break;
    case Axis::z: field_dir = {0, 0, 1}; break;
  }
  const Vec3 dipole_axis{-field_dir.x, -field_dir.y, -field_dir.z};

  auto solve_at = [&](double field, const std::vector<Eigen::VectorXcd>& warm)
      -> std::pair<EigenSolution, SparseHamiltonian> {
    FieldSpec fs;
    fs.magnitude_v_um = field;
    fs.direction = field_dir;
    fs.gauge_origin_nm = r0;
    auto v = donor_v;
    if (field != 0) {
      const auto u = field_potential(fs, lattice);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += u[i];
    }
    auto h = SparseHamiltonian::assemble(lattice, cfg.params, v, cfg.assembly);
    SolverConfig scfg = cfg.solver;
    scfg.window_floor_ev = window.floor_ev;
    if (warm.empty()) {
      scfg.start_vector =
          gaussian_start(lattice, with_spin, cfg.gaussian_start_width_nm);
    } else {
      scfg.warm_start = warm;
    }
    auto sol = lowest_states(h, cfg.n_states, window.target_ev, scfg, pool);
    return {std::move(sol), std::move(h)};
  };

  std::map<std::size_t, SweepPointMeta> meta_by_index;
  std::map<std::size_t, std::array<double, 3>> values_by_index;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    auto [zero_sol, zero_h] = solve_at(0.0, {});
    const auto t1 = std::chrono::steady_clock::now();
    guard_ground_state(zero_sol, cfg.solver.tolerance_ev);
    const Eigen::VectorXcd psi0 = zero_sol.eigenvectors.col(0);
    sweep.zero_field_energy_ev = zero_sol.eigenvalues(0);
    const double w0 =
        contact_density(psi0, zero_h, lattice.donor_index, cfg.contact_mode)
            .value();

    std::vector<Eigen::VectorXcd> zero_warm;
    for (int i = 0; i < zero_sol.eigenvectors.cols(); ++i)
      zero_warm.push_back(zero_sol.eigenvectors.col(i));

    // Points are solved outward in |field| per sign branch so each solve
    // warm-starts from its nearest neighbor; results are keyed by field and
    // emitted in grid order.
    std::vector<std::size_t> order(fields_v_um.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(fields_v_um[a]) < std::abs(fields_v_um[b]);
    });
    std::vector<Eigen::VectorXcd> warm_pos = zero_warm, warm_neg = zero_warm;

    for (std::size_t oi : order) {
      const double field = fields_v_um[oi];
      if (field == 0.0) {
        values_by_index[oi] = {1.0, 0.0,
                               dipole_moment(psi0, lattice, zero_h,
                                             dipole_axis,
                                             r0.dot(dipole_axis))};
        meta_by_index[oi] = {0.0,
                             zero_sol.eigenvalues(0),
                             zero_sol.residuals(0),
                             zero_sol.iterations,
                             zero_sol.matvecs,
                             w0,
                             std::chrono::duration<double>(t1 - t0).count()};
        continue;
      }
      auto& warm = field > 0 ? warm_pos : warm_neg;
      const auto ts = std::chrono::steady_clock::now();
      auto [sol, h] = solve_at(field, warm);
      const auto te = std::chrono::steady_clock::now();
      guard_ground_state(sol, cfg.solver.tolerance_ev);
      warm.clear();
      for (int i = 0; i < sol.eigenvectors.cols(); ++i)
        warm.push_back(sol.eigenvectors.col(i));
      const Eigen::VectorXcd psi = sol.eigenvectors.col(0);
      const double w =
          contact_density(psi, h, lattice.donor_index, cfg.contact_mode)
              .value();
      if (w < cfg.ionization_guard_fraction * w0)
        throw IonizationError(
            "donor-site weight dropped below the ionization guard at " +
            std::to_string(field) + " V/um");
      values_by_index[oi] = {w / w0, w / w0 - 1.0,
                             dipole_moment(psi, lattice, h, dipole_axis,
                                           r0.dot(dipole_axis))};
      meta_by_index[oi] = {field,
                           sol.eigenvalues(0),
                           sol.residuals(0),
                           sol.iterations,
                           sol.matvecs,
                           w,
                           std::chrono::duration<double>(te - ts).count()};
    }
  } catch (const std::exception& e) {
    sweep.error = e.what();
  }
  // Persist whatever was computed, in grid order; a failed point leaves the
  // sweep marked incomplete.
  sweep.fields_v_um.clear();
  for (std::size_t i = 0; i < fields_v_um.size(); ++i) {
    if (!values_by_index.count(i)) continue;
    sweep.fields_v_um.push_back(fields_v_um[i]);
    sweep.ratios.push_back(values_by_index[i][0]);
    sweep.delta_a_over_a0.push_back(values_by_index[i][1]);
    sweep.dipoles_nm.push_back(values_by_index[i][2]);
    sweep.meta.push_back(meta_by_index[i]);
  }
  sweep.complete = sweep.error.empty() &&
                   sweep.fields_v_um.size() == fields_v_um.size();
  return sweep;
}

struct DepthScanEntry {
  double requested_depth_nm = 0;
  SweepResult sweep;
  std::optional<StarkFit> stark;
  std::optional<DipoleFit> dipole;
  std::string error;
};

// Sweep + fits per depth; per-depth failures do not abort other depths.
inline std::vector<DepthScanEntry> depth_scan(
    const DomainSpec& base_domain, const std::vector<double>& depths_nm,
    const std::vector<double>& fields_v_um, const SweepConfig& cfg,
    ThreadPool* pool = nullptr) {
  std::vector<DepthScanEntry> out(depths_nm.size());
  for (std::size_t i = 0; i < depths_nm.size(); ++i) {
    DepthScanEntry& entry = out[i];
    entry.requested_depth_nm = depths_nm[i];
    DomainSpec spec = base_domain;
    spec.impurity_depth_nm = depths_nm[i];
    try {
      entry.sweep = run_sweep(spec, fields_v_um, cfg, pool);
      if (!entry.sweep.complete) {
        entry.error = entry.sweep.error;
        continue;
      }
      entry.stark = fit_stark(entry.sweep);
      entry.dipole = fit_dipole(entry.sweep.fields_v_um,
                                entry.sweep.dipoles_nm);
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
  }
  return out;
}

struct PerturbationPrediction {
  int states_used = 0;
  double intercept_nm = 0;
  double slope_nm_um_v = 0;
  // Literal second-order term reported for completeness, excluded from the
  // slope; in nm per (V/um)^2.
  double epsilon2_term = 0;
};

// First-order perturbation prediction of the dipole line from zero-field
// eigenpairs: intercept from the ground state alone, slope from the
// transition moments to the m-1 excited states.
inline PerturbationPrediction perturbation_dipole(
    const EigenSolution& zero_field, const DomainLattice& lattice,
    const SparseHamiltonian& h, const Vec3& axis, double tolerance_ev) {
  const int m = static_cast<int>(zero_field.eigenvalues.size());
  if (m < 2)
    throw std::invalid_argument(
        "perturbation_dipole: need at least two zero-field states");
  for (int i = 0; i < m; ++i)
    if (zero_field.residuals(i) > tolerance_ev * 10)
      throw std::invalid_argument(
          "perturbation_dipole: state residuals exceed tolerance");
  const double gap01 = zero_field.eigenvalues(1) - zero_field.eigenvalues(0);
  if (gap01 <= 10 * tolerance_ev)
    throw DegenerateStateError(
        "perturbation_dipole: degenerate ground state");

  const Vec3 r0 = lattice.sites[lattice.donor_index].position_nm;
  const int d = h.site_dim();

  // Y psi for the position operator along `axis` relative to the donor.
  auto apply_y = [&](const Eigen::VectorXcd& psi) {
    Eigen::VectorXcd out(psi.size());
    for (std::int64_t i = 0; i < lattice.n_sites(); ++i) {
      const double y = (lattice.sites[i].position_nm - r0).dot(axis);
      out.segment(i * d, d) = y * psi.segment(i * d, d);
    }
    return out;
  };

  const Eigen::VectorXcd psi0 = zero_field.eigenvectors.col(0);
  const Eigen::VectorXcd ypsi0 = apply_y(psi0);

  PerturbationPrediction pred;
  pred.states_used = m;
  pred.intercept_nm = std::real(psi0.dot(ypsi0));

  const double c_e = units::ev_per_nm_per_v_um;
  std::complex<double> eps2_sum = 0;
  for (int k = 1; k < m; ++k) {
    const std::complex<double> t = zero_field.eigenvectors.col(k).dot(ypsi0);
    const double de = zero_field.eigenvalues(0) - zero_field.eigenvalues(k);
    pred.slope_nm_um_v += -2.0 * c_e * std::norm(t) / de;
    eps2_sum += std::conj(t) * t / (de * de);
  }
  pred.epsilon2_term = c_e * c_e * std::real(eps2_sum);
  return pred;
}

struct SpinLevels {
  double g = 0;
  double b0_tesla = 0;
  double a_ev = 0;
  // E(mS, mI) for mS, mI in {-1/2, +1/2}, ordered
  // (-,-), (-,+), (+,-), (+,+).
  std::array<double, 4> energies_ev{};
};

// Eigenvalues of H = g muB B0 Sz + a Iz Sz for electron and nuclear
// spin one-half.
inline SpinLevels spin_levels(double g, double b0_tesla, double a_ev) {
  if (b0_tesla < 0)
    throw std::invalid_argument("spin_levels: B0 must be non-negative");
  SpinLevels lv;
  lv.g = g;
  lv.b0_tesla = b0_tesla;
  lv.a_ev = a_ev;
  const double zeeman = g * units::mu_bohr_ev_per_tesla * b0_tesla;
  int idx = 0;
  for (double ms : {-0.5, 0.5}) {
    for (double mi : {-0.5, 0.5}) {
      lv.energies_ev[idx++] = zeeman * ms + a_ev * mi * ms;
    }
  }
  return lv;
}

}  // namespace dstark
