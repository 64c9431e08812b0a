// donor_stark: Stark shift of the donor hyperfine coupling near an
// interface, from an atomistic sp3d5s* tight-binding model.
//
// Subcommands: bands, calibrate, solve, sweep, depth-scan, oracle,
// dense-check, plot. Every subcommand writes a run manifest into the output
// directory; failures produce machine-readable error JSON and a nonzero
// exit code.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "donorstark/bands.hpp"
#include "donorstark/calibrate.hpp"
#include "donorstark/config.hpp"
#include "donorstark/io.hpp"
#include "donorstark/observables.hpp"
#include "donorstark/solver.hpp"
#include "donorstark/stark.hpp"

using namespace dstark;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int workers = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string fields_csv;
  std::string depths_csv;
  bool quick = false;
};

std::vector<double> parse_csv_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

RunConfig load_run_config(const CommonArgs& args) {
  RunConfig cfg = parse_config(read_text_file(args.config_path));
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  if (args.workers > 0) cfg.workers = args.workers;
  if (args.seed_set) cfg.seed = args.seed;
  if (!args.fields_csv.empty()) {
    cfg.fields_v_um = parse_csv_list(args.fields_csv);
    std::sort(cfg.fields_v_um.begin(), cfg.fields_v_um.end());
  }
  if (!args.depths_csv.empty()) cfg.depths_nm = parse_csv_list(args.depths_csv);
  if (args.quick) {
    // CI-sized smoke domain
    for (auto& e : cfg.domain.extents_nm) e = std::min(e, 4.4);
    const double d =
        cfg.domain.extents_nm[static_cast<int>(cfg.domain.depth_axis)];
    cfg.domain.impurity_depth_nm = 0.5 * d;
    if (cfg.fields_v_um.size() > 5)
      cfg.fields_v_um = {-1.0, -0.5, 0.0, 0.5, 1.0};
    cfg.depths_nm = {cfg.domain.impurity_depth_nm};
  }
  return cfg;
}

struct StageTimer {
  std::vector<std::pair<std::string, double>>& sink;
  std::string name;
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  StageTimer(std::vector<std::pair<std::string, double>>& s, std::string n)
      : sink(s), name(std::move(n)) {}
  ~StageTimer() {
    sink.emplace_back(
        name, std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            start)
                  .count());
  }
};

RunManifest make_manifest(const std::string& subcommand, const RunConfig& cfg,
                          const TbParameterSet& params) {
  RunManifest m;
  m.subcommand = subcommand;
  m.config_hash = cfg.config_hash();
  m.params_checksum = params.checksum;
  m.seed = cfg.seed;
  m.workers = cfg.workers;
  return m;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

int fail_with_error_json(const RunConfig* cfg, const std::string& subcommand,
                         const std::exception& e) {
  nlohmann::json j;
  j["error"] = e.what();
  j["subcommand"] = subcommand;
  std::cerr << j.dump() << "\n";
  if (cfg) {
    try {
      write_text_file(out_path(*cfg, "error.json"), j.dump(2) + "\n");
    } catch (...) {
    }
  }
  return 1;
}

Vec3 depth_axis_unit(const RunConfig& cfg) {
  switch (cfg.domain.depth_axis) {
    case Axis::x: return {1, 0, 0};
    case Axis::y: return {0, 1, 0};
    default: return {0, 0, 1};
  }
}

// ---------------------------------------------------------------- bands --

int cmd_bands(const RunConfig& cfg) {
  const auto params = cfg.load_parameter_set();
  auto manifest = make_manifest("bands", cfg, params);
  ThreadPool pool(cfg.workers);

  nlohmann::json report;
  std::string csv = "k_frac,spin_orbit,band_index,energy_ev\n";
  for (bool spin : {false, true}) {
    StageTimer t(manifest.stage_seconds,
                 spin ? "bands_spinful" : "bands_spinless");
    const auto rep = bulk_bands(params, gamma_x_path(400), spin, &pool);
    nlohmann::json r;
    r["indirect_gap_ev"] = rep.indirect_gap_ev;
    r["valence_max_ev"] = rep.valence_max_ev;
    r["conduction_min_ev"] = rep.conduction_min_ev;
    r["valley_position"] = rep.valley_position;
    report[spin ? "spin_orbit_on" : "spin_orbit_off"] = r;
    for (std::size_t i = 0; i < rep.k_path.size(); i += 4) {
      for (std::size_t b = 0; b < rep.bands[i].size(); ++b) {
        csv += format_double(rep.k_path[i].x) + "," + (spin ? "1," : "0,") +
               std::to_string(b) + "," + format_double(rep.bands[i][b]) +
               "\n";
      }
    }
  }

  const auto targets =
      nlohmann::json::parse(read_text_file(cfg.params_file))
          .at("validation_targets");
  const double gap = report["spin_orbit_on"]["indirect_gap_ev"].get<double>();
  const double valley =
      report["spin_orbit_on"]["valley_position"].get<double>();
  report["targets"] = targets;
  report["gap_within_tolerance"] =
      std::abs(gap - targets.at("indirect_gap_ev").get<double>()) <
      targets.at("gap_tolerance_ev").get<double>();
  report["valley_within_range"] =
      valley >= targets.at("valley_position_min").get<double>() &&
      valley <= targets.at("valley_position_max").get<double>();

  write_text_file(out_path(cfg, "bands.csv"), csv);
  write_text_file(out_path(cfg, "bands_report.json"), report.dump(2) + "\n");
  manifest.write(out_path(cfg, "manifest.json"));
  std::printf("bands: gap %.4f eV valley %.4f -> %s\n", gap, valley,
              (report["gap_within_tolerance"].get<bool>() &&
               report["valley_within_range"].get<bool>())
                  ? "PASS"
                  : "FAIL");
  return 0;
}

// ------------------------------------------------------------ calibrate --

int cmd_calibrate(const RunConfig& cfg) {
  const auto params = cfg.load_parameter_set();
  auto manifest = make_manifest("calibrate", cfg, params);
  ThreadPool pool(cfg.workers);

  const auto lattice = build_domain(cfg.domain);
  manifest.requested_depth_nm = lattice.requested_depth_nm;
  manifest.snapped_depth_nm = lattice.snapped_depth_nm;

  CalibrationOptions opts;
  opts.target_binding_ev = cfg.target_binding_mev * 1e-3;
  opts.tolerance_ev = cfg.calibration_tolerance_mev * 1e-3;
  opts.kappa = cfg.kappa;
  opts.u0_guess = cfg.u0_ev;
  AssemblyOptions assembly;
  assembly.spin_orbit = cfg.spin_orbit;
  assembly.passivation_ev = cfg.passivation_ev;
  SolverConfig solver = cfg.solver_config();
  const bool with_spin = cfg.spin_orbit && params.spin_orbit_p != 0;
  solver.start_vector = gaussian_start(lattice, with_spin);

  CalibrationResult res;
  {
    StageTimer t(manifest.stage_seconds, "calibrate");
    res = calibrate_u0(lattice, params, opts, solver, assembly, &pool);
  }
  manifest.u0_ev = res.u0_ev;

  nlohmann::json j;
  j["u0_ev"] = res.u0_ev;
  j["binding_mev"] = res.binding_ev * 1e3;
  j["target_binding_mev"] = cfg.target_binding_mev;
  j["cbm_ev"] = res.cbm_ev;
  j["iterations"] = res.iterations;
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& [u0, b] : res.trace)
    trace.push_back({{"u0_ev", u0}, {"binding_mev", b * 1e3}});
  j["trace"] = trace;
  write_text_file(out_path(cfg, "calibration.json"), j.dump(2) + "\n");
  manifest.write(out_path(cfg, "manifest.json"));
  std::printf("calibrate: u0 = %.6f eV, binding %.4f meV in %d solves\n",
              res.u0_ev, res.binding_ev * 1e3, res.iterations);
  return 0;
}

// ---------------------------------------------------------------- solve --

int cmd_solve(const RunConfig& cfg, bool write_ckpt, double field_v_um) {
  const auto params = cfg.load_parameter_set();
  auto manifest = make_manifest("solve", cfg, params);
  ThreadPool pool(cfg.workers);

  const auto lattice = build_domain(cfg.domain);
  manifest.requested_depth_nm = lattice.requested_depth_nm;
  manifest.snapped_depth_nm = lattice.snapped_depth_nm;
  const bool with_spin = cfg.spin_orbit && params.spin_orbit_p != 0;
  const auto window = detail::gap_window(params, with_spin);

  double u0 = cfg.u0_ev;
  if (cfg.calibrate_u0) {
    StageTimer t(manifest.stage_seconds, "calibrate");
    CalibrationOptions opts;
    opts.target_binding_ev = cfg.target_binding_mev * 1e-3;
    opts.tolerance_ev = cfg.calibration_tolerance_mev * 1e-3;
    opts.kappa = cfg.kappa;
    opts.u0_guess = cfg.u0_ev;
    AssemblyOptions assembly;
    assembly.spin_orbit = cfg.spin_orbit;
    assembly.passivation_ev = cfg.passivation_ev;
    SolverConfig solver = cfg.solver_config();
    solver.start_vector = gaussian_start(lattice, with_spin);
    u0 = calibrate_u0(lattice, params, opts, solver, assembly, &pool).u0_ev;
  }
  manifest.u0_ev = u0;

  DonorPotentialParams dp;
  dp.kappa = cfg.kappa;
  dp.u0_ev = u0;
  auto v = donor_potential(dp, lattice);
  const Vec3 r0 = lattice.sites[lattice.donor_index].position_nm;
  const Vec3 dir = depth_axis_unit(cfg);
  if (field_v_um != 0) {
    FieldSpec fs;
    fs.magnitude_v_um = field_v_um;
    fs.direction = dir;
    fs.gauge_origin_nm = r0;
    const auto u = field_potential(fs, lattice);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += u[i];
  }
  AssemblyOptions assembly;
  assembly.spin_orbit = cfg.spin_orbit;
  assembly.passivation_ev = cfg.passivation_ev;
  const auto h = SparseHamiltonian::assemble(lattice, params, v, assembly);

  SolverConfig solver = cfg.solver_config();
  solver.window_floor_ev = window.floor_ev;
  solver.start_vector = gaussian_start(lattice, with_spin);
  EigenSolution sol;
  {
    StageTimer t(manifest.stage_seconds, "solve");
    sol = lowest_states(h, cfg.n_states, window.target_ev, solver, &pool);
  }

  nlohmann::json j;
  j["field_v_um"] = field_v_um;
  j["u0_ev"] = u0;
  j["cbm_ev"] = window.cbm_ev;
  j["snapped_depth_nm"] = lattice.snapped_depth_nm;
  nlohmann::json states = nlohmann::json::array();
  for (int i = 0; i < sol.eigenvalues.size(); ++i) {
    const auto call =
        contact_density(sol.eigenvectors.col(i), h, lattice.donor_index,
                        ContactMode::all_orbitals);
    states.push_back(
        {{"energy_ev", sol.eigenvalues(i)},
         {"binding_mev", (window.cbm_ev - sol.eigenvalues(i)) * 1e3},
         {"residual", sol.residuals(i)},
         {"donor_weight_all_orbitals", call.total},
         {"donor_weight_s_only", call.s_only}});
  }
  j["states"] = states;
  j["iterations"] = sol.iterations;
  j["matvecs"] = sol.matvecs;
  const Vec3 dipole_axis{-dir.x, -dir.y, -dir.z};
  j["dipole_nm"] = dipole_moment(sol.eigenvectors.col(0), lattice, h,
                                 dipole_axis, r0.dot(dipole_axis));

  // Differential density cut through the donor for nonzero fields.
  if (field_v_um != 0) {
    const auto v0 = donor_potential(dp, lattice);
    const auto h0 =
        SparseHamiltonian::assemble(lattice, params, v0, assembly);
    EigenSolution sol0;
    {
      StageTimer t(manifest.stage_seconds, "solve_zero_field");
      sol0 = lowest_states(h0, 1, window.target_ev, solver, &pool);
    }
    const auto diff =
        differential_map(sol.eigenvectors.col(0), sol0.eigenvectors.col(0),
                         lattice, h, Axis::z, r0.z, field_v_um);
    write_text_file(out_path(cfg, "diffmap.csv"), density_map_csv(diff));
    write_text_file(
        out_path(cfg, "diffmap.json"),
        density_map_sidecar(diff, lattice.snapped_depth_nm, cfg.contact_mode,
                            cfg.config_hash(), h.content_hash())
                .dump(2) +
            "\n");
    const auto line1d = density_line(sol.eigenvectors.col(0), lattice, h,
                                     cfg.domain.depth_axis, field_v_um);
    write_text_file(out_path(cfg, "line_cut.csv"), density_map_csv(line1d));
  }

  if (write_ckpt) {
    write_checkpoint(out_path(cfg, "eigenvectors.dstk"), sol.eigenvectors,
                     cfg.seed, h.content_hash(), params.checksum);
  }
  write_text_file(out_path(cfg, "solve.json"), j.dump(2) + "\n");
  manifest.write(out_path(cfg, "manifest.json"));
  std::printf("solve: E0 %.6f eV binding %.3f meV residual %.1e\n",
              sol.eigenvalues(0), (window.cbm_ev - sol.eigenvalues(0)) * 1e3,
              sol.residuals(0));
  return 0;
}

// ---------------------------------------------------------------- sweep --

int cmd_sweep(const RunConfig& cfg) {
  const auto params = cfg.load_parameter_set();
  auto manifest = make_manifest("sweep", cfg, params);
  ThreadPool pool(cfg.workers);

  DomainSpec spec = cfg.domain;
  if (!cfg.depths_nm.empty()) spec.impurity_depth_nm = cfg.depths_nm.front();
  SweepConfig scfg = cfg.sweep_config(params);

  SweepResult sweep;
  {
    StageTimer t(manifest.stage_seconds, "sweep");
    sweep = run_sweep(spec, cfg.fields_v_um, scfg, &pool);
  }
  manifest.requested_depth_nm = sweep.requested_depth_nm;
  manifest.snapped_depth_nm = sweep.depth_nm;
  manifest.u0_ev = sweep.u0_ev;

  nlohmann::json j = sweep_json(sweep, cfg.config_hash());
  if (sweep.complete) {
    try {
      j["stark_fit"] = stark_fit_json(fit_stark(sweep));
      j["dipole_fit"] =
          dipole_fit_json(fit_dipole(sweep.fields_v_um, sweep.dipoles_nm));
    } catch (const FitError& e) {
      j["fit_diagnostic"] = e.what();
    }
  }
  DepthScanEntry entry;
  entry.sweep = sweep;
  write_text_file(out_path(cfg, "sweep.csv"), sweep_csv({entry}));
  write_text_file(out_path(cfg, "sweep.json"), j.dump(2) + "\n");
  manifest.write(out_path(cfg, "manifest.json"));
  if (!sweep.complete) {
    std::printf("sweep: INCOMPLETE (%s); partial results persisted\n",
                sweep.error.c_str());
    return 2;
  }
  std::printf("sweep: depth %.3f nm, %zu fields, u0 %.4f eV\n", sweep.depth_nm,
              sweep.fields_v_um.size(), sweep.u0_ev);
  return 0;
}

// ----------------------------------------------------------- depth-scan --

int cmd_depth_scan(const RunConfig& cfg) {
  const auto params = cfg.load_parameter_set();
  auto manifest = make_manifest("depth-scan", cfg, params);
  ThreadPool pool(cfg.workers);

  SweepConfig scfg = cfg.sweep_config(params);
  std::vector<DepthScanEntry> entries;
  {
    StageTimer t(manifest.stage_seconds, "depth_scan");
    entries =
        depth_scan(cfg.domain, cfg.depths_nm, cfg.fields_v_um, scfg, &pool);
  }

  nlohmann::json j;
  j["config_hash"] = hash_hex(cfg.config_hash());
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json row;
    row["requested_depth_nm"] = e.requested_depth_nm;
    row["sweep"] = sweep_json(e.sweep, cfg.config_hash());
    if (e.stark) row["stark_fit"] = stark_fit_json(*e.stark);
    if (e.dipole) row["dipole_fit"] = dipole_fit_json(*e.dipole);
    if (!e.error.empty()) row["error"] = e.error;
    arr.push_back(row);
  }
  j["depths"] = arr;

  // Monotonic trend diagnostics over the successful depths.
  std::vector<const DepthScanEntry*> ok;
  for (const auto& e : entries)
    if (e.stark && e.dipole) ok.push_back(&e);
  if (ok.size() >= 2) {
    bool eta1_decreasing = true, intercept_decreasing = true;
    for (std::size_t i = 1; i < ok.size(); ++i) {
      eta1_decreasing =
          eta1_decreasing &&
          std::abs(ok[i]->stark->eta1) < std::abs(ok[i - 1]->stark->eta1);
      intercept_decreasing = intercept_decreasing &&
                             std::abs(ok[i]->dipole->intercept_nm) <
                                 std::abs(ok[i - 1]->dipole->intercept_nm);
    }
    j["trends"] = {{"abs_eta1_decreasing_with_depth", eta1_decreasing},
                   {"abs_dipole_intercept_decreasing_with_depth",
                    intercept_decreasing}};
  }

  write_text_file(out_path(cfg, "scan.csv"), sweep_csv(entries));
  write_text_file(out_path(cfg, "scan.json"), j.dump(2) + "\n");
  manifest.write(out_path(cfg, "manifest.json"));
  std::printf("depth-scan: %zu depths, %zu complete\n", entries.size(),
              ok.size());
  return 0;
}

// --------------------------------------------------------------- oracle --

int cmd_oracle(const RunConfig& cfg) {
  const auto params = cfg.load_parameter_set();
  auto manifest = make_manifest("oracle", cfg, params);
  ThreadPool pool(cfg.workers);

  DomainSpec spec = cfg.domain;
  if (!cfg.depths_nm.empty()) spec.impurity_depth_nm = cfg.depths_nm.front();
  const auto lattice = build_domain(spec);
  manifest.snapped_depth_nm = lattice.snapped_depth_nm;
  const bool with_spin = cfg.spin_orbit && params.spin_orbit_p != 0;
  const auto window = detail::gap_window(params, with_spin);

  SweepConfig scfg = cfg.sweep_config(params);
  SweepResult sweep;
  {
    StageTimer t(manifest.stage_seconds, "finite_field_sweep");
    sweep = run_sweep(spec, cfg.fields_v_um, scfg, &pool);
  }
  if (!sweep.complete) {
    std::printf("oracle: sweep incomplete (%s)\n", sweep.error.c_str());
    return 2;
  }
  manifest.u0_ev = sweep.u0_ev;

  // Zero-field solve with the oracle's state count.
  DonorPotentialParams dp;
  dp.kappa = cfg.kappa;
  dp.u0_ev = sweep.u0_ev;
  const auto v = donor_potential(dp, lattice);
  AssemblyOptions assembly;
  assembly.spin_orbit = cfg.spin_orbit;
  assembly.passivation_ev = cfg.passivation_ev;
  const auto h = SparseHamiltonian::assemble(lattice, params, v, assembly);
  SolverConfig solver = cfg.solver_config();
  solver.window_floor_ev = window.floor_ev;
  solver.start_vector = gaussian_start(lattice, with_spin);
  const int m_states = std::max(cfg.n_states, 6);
  EigenSolution zero;
  {
    StageTimer t(manifest.stage_seconds, "zero_field_states");
    zero = lowest_states(h, m_states, window.target_ev, solver, &pool);
  }

  const Vec3 dir = depth_axis_unit(cfg);
  const Vec3 axis{-dir.x, -dir.y, -dir.z};
  const auto pred =
      perturbation_dipole(zero, lattice, h, axis, cfg.tolerance_ev);
  const auto fit = fit_dipole(sweep.fields_v_um, sweep.dipoles_nm);

  nlohmann::json j;
  j["states_used"] = pred.states_used;
  j["perturbation"] = {{"intercept_nm", pred.intercept_nm},
                       {"slope_nm_per_v_um", pred.slope_nm_um_v},
                       {"epsilon2_term", pred.epsilon2_term}};
  j["finite_field"] = dipole_fit_json(fit);
  j["slope_relative_difference"] =
      std::abs(pred.slope_nm_um_v - fit.slope_nm_um_v) /
      std::max(std::abs(fit.slope_nm_um_v), 1e-300);
  write_text_file(out_path(cfg, "oracle.json"), j.dump(2) + "\n");
  manifest.write(out_path(cfg, "manifest.json"));
  std::printf(
      "oracle: pert slope %.5g nm/(V/um) vs finite %.5g (diff %.2f%%), "
      "intercept %.5g nm\n",
      pred.slope_nm_um_v, fit.slope_nm_um_v,
      100 * j["slope_relative_difference"].get<double>(), pred.intercept_nm);
  return 0;
}

// ---------------------------------------------------------- dense-check --

int cmd_dense_check(const RunConfig& cfg) {
  const auto params = cfg.load_parameter_set();
  auto manifest = make_manifest("dense-check", cfg, params);
  ThreadPool pool(cfg.workers);

  const auto lattice = build_domain(cfg.domain);
  DonorPotentialParams dp;
  dp.kappa = cfg.kappa;
  dp.u0_ev = cfg.u0_ev;
  const auto v = donor_potential(dp, lattice);
  AssemblyOptions assembly;
  assembly.spin_orbit = cfg.spin_orbit;
  assembly.passivation_ev = cfg.passivation_ev;
  const auto h = SparseHamiltonian::assemble(lattice, params, v, assembly);

  EigenSolution dense;
  {
    StageTimer t(manifest.stage_seconds, "dense");
    dense = dense_diagonalize(h);
  }

  // Widest interior gap defines the comparison window.
  const auto& ev = dense.eigenvalues;
  int j = 1;
  double best = 0;
  for (int i = ev.size() / 8; i < ev.size() * 7 / 8; ++i) {
    if (ev(i) - ev(i - 1) > best) {
      best = ev(i) - ev(i - 1);
      j = i;
    }
  }
  SolverConfig solver = cfg.solver_config();
  solver.tolerance_ev = std::min(cfg.tolerance_ev, 1e-10);
  solver.window_floor_ev = 0.5 * (ev(j) + ev(j - 1));
  solver.block_size = std::max(cfg.block_size, 4);
  const int nev = std::max(cfg.n_states, 4);
  EigenSolution kry;
  {
    StageTimer t(manifest.stage_seconds, "krylov");
    kry = lowest_states(h, nev, ev(j), solver, &pool);
  }

  double max_dlam = 0, min_overlap = 1;
  for (int i = 0; i < kry.eigenvalues.size(); ++i) {
    max_dlam = std::max(max_dlam, std::abs(kry.eigenvalues(i) - ev(j + i)));
    double s2 = 0;
    for (int k = 0; k < ev.size(); ++k) {
      if (std::abs(ev(k) - kry.eigenvalues(i)) < 1e-7)
        s2 +=
            std::norm(dense.eigenvectors.col(k).dot(kry.eigenvectors.col(i)));
    }
    min_overlap = std::min(min_overlap, std::sqrt(s2));
  }
  const bool pass = max_dlam <= 1e-9 && min_overlap > 1.0 - 1e-8;

  nlohmann::json rj;
  rj["dimension"] = h.dimension();
  rj["states_compared"] = static_cast<int>(kry.eigenvalues.size());
  rj["max_abs_dlambda_ev"] = max_dlam;
  rj["min_subspace_overlap"] = min_overlap;
  rj["pass"] = pass;
  write_text_file(out_path(cfg, "dense_check.json"), rj.dump(2) + "\n");
  manifest.write(out_path(cfg, "manifest.json"));
  std::printf("dense-check: %s, max |dlambda| = %.2e eV, overlap %.10f\n",
              pass ? "PASS" : "FAIL", max_dlam, min_overlap);
  return pass ? 0 : 1;
}

// ----------------------------------------------------------------- plot --

int cmd_plot(const RunConfig& cfg, const std::string& scan_dir) {
  const auto params = cfg.load_parameter_set();
  auto manifest = make_manifest("plot", cfg, params);
  const std::string dir = scan_dir.empty() ? cfg.output_dir : scan_dir;
  const auto scan = nlohmann::json::parse(
      read_text_file((std::filesystem::path(dir) / "scan.json").string()));

  std::string fa = "depth_nm,field_V_per_um,dA_over_A0\n";
  std::string fc = "depth_nm,field_V_per_um,dipole_nm\n";
  std::string fb = "depth_nm,eta2_um2_V2,eta1_um_V\n";
  std::string fd = "depth_nm,dipole_slope_nm_per_V_um,dipole_intercept_nm\n";
  std::vector<SvgSeries> sa, sc;
  SvgSeries sb2{"eta2", "#1f77b4", {}}, sb1{"eta1", "#d62728", {}};
  SvgSeries sd{"slope", "#1f77b4", {}};
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                           "#9467bd", "#ff7f0e", "#8c564b"};
  int color_idx = 0;
  for (const auto& row : scan.at("depths")) {
    if (row.contains("error")) continue;
    const auto& sweep = row.at("sweep");
    const double depth = sweep.at("depth_nm").get<double>();
    SvgSeries a{"d=" + std::to_string(depth).substr(0, 5) + " nm",
                palette[color_idx % 6],
                {}};
    SvgSeries c = a;
    for (const auto& p : sweep.at("points")) {
      const double f = p.at("field_v_um").get<double>();
      fa += format_double(depth) + "," + format_double(f) + "," +
            format_double(p.at("dA_over_A0").get<double>()) + "\n";
      fc += format_double(depth) + "," + format_double(f) + "," +
            format_double(p.at("dipole_nm").get<double>()) + "\n";
      a.points.push_back({f, p.at("dA_over_A0").get<double>()});
      c.points.push_back({f, p.at("dipole_nm").get<double>()});
    }
    sa.push_back(a);
    sc.push_back(c);
    ++color_idx;
    if (row.contains("stark_fit")) {
      const auto& sf = row.at("stark_fit");
      fb += format_double(depth) + "," +
            format_double(sf.at("eta2_um2_v2").get<double>()) + "," +
            format_double(sf.at("eta1_um_v").get<double>()) + "\n";
      sb2.points.push_back({depth, sf.at("eta2_um2_v2").get<double>()});
      sb1.points.push_back({depth, sf.at("eta1_um_v").get<double>()});
    }
    if (row.contains("dipole_fit")) {
      const auto& df = row.at("dipole_fit");
      fd += format_double(depth) + "," +
            format_double(df.at("slope_nm_per_v_um").get<double>()) + "," +
            format_double(df.at("intercept_nm").get<double>()) + "\n";
      sd.points.push_back({depth, df.at("slope_nm_per_v_um").get<double>()});
    }
  }
  write_text_file(out_path(cfg, "fig1a_dA_vs_field.csv"), fa);
  write_text_file(out_path(cfg, "fig1b_stark_coeffs_vs_depth.csv"), fb);
  write_text_file(out_path(cfg, "fig1c_dipole_vs_field.csv"), fc);
  write_text_file(out_path(cfg, "fig1d_dipole_slope_vs_depth.csv"), fd);
  write_text_file(out_path(cfg, "fig1a.svg"),
                  svg_line_chart("Hyperfine response vs field", "field (V/um)",
                                 "dA/A(0)", sa));
  write_text_file(out_path(cfg, "fig1b.svg"),
                  svg_line_chart("Stark coefficients vs depth", "depth (nm)",
                                 "eta", {sb2, sb1}));
  write_text_file(out_path(cfg, "fig1c.svg"),
                  svg_line_chart("Dipole vs field", "field (V/um)",
                                 "dipole (nm)", sc));
  write_text_file(out_path(cfg, "fig1d.svg"),
                  svg_line_chart("Dipole slope vs depth", "depth (nm)",
                                 "slope (nm per V/um)", {sd}));

  // Differential-density heatmap when a solve left a map in the directory.
  const auto diff_csv = std::filesystem::path(dir) / "diffmap.csv";
  if (std::filesystem::exists(diff_csv)) {
    std::vector<std::array<double, 3>> pts;
    std::ifstream in(diff_csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      double x, y, z, val;
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &x, &y, &z, &val) == 4)
        pts.push_back({x, y, val});
    }
    write_text_file(out_path(cfg, "fig2a.svg"),
                    svg_heatmap("Differential density cut", pts));
  }
  manifest.write(out_path(cfg, "plot_manifest.json"));
  std::printf("plot: wrote fig1a-d CSV and SVG into %s\n",
              cfg.output_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Donor hyperfine Stark-shift simulator"};
  app.require_subcommand(1);

  CommonArgs args;
  app.add_option("--config", args.config_path, "run configuration JSON")
      ->required();
  app.add_option("--out", args.out_dir, "output directory override");
  app.add_option("--workers", args.workers, "worker thread count");
  auto* seed_opt = app.add_option("--seed", args.seed, "start-vector seed");
  app.add_option("--fields", args.fields_csv,
                 "comma-separated field list in V/um");
  app.add_option("--depths", args.depths_csv,
                 "comma-separated depth list in nm");
  app.add_flag("--quick", args.quick, "shrink the domain for smoke runs");

  auto* bands = app.add_subcommand("bands", "bulk band validation report");
  auto* calibrate = app.add_subcommand("calibrate", "calibrate u0");
  auto* solve = app.add_subcommand("solve", "single eigensolve + observables");
  bool write_ckpt = false;
  double solve_field = 0.0;
  solve->add_flag("--checkpoint", write_ckpt, "write eigenvector checkpoint");
  solve->add_option("--field", solve_field, "field in V/um for this solve");
  auto* sweep = app.add_subcommand("sweep", "field sweep at one depth");
  auto* dscan = app.add_subcommand("depth-scan", "sweeps over a depth list");
  auto* oracle =
      app.add_subcommand("oracle", "perturbation prediction vs sweep");
  auto* dense = app.add_subcommand("dense-check", "tiny-lattice oracle check");
  auto* plot = app.add_subcommand("plot", "emit figure CSVs and SVGs");
  std::string scan_dir;
  plot->add_option("--scan-dir", scan_dir,
                   "directory containing scan.json (defaults to --out)");

  CLI11_PARSE(app, argc, argv);
  args.seed_set = seed_opt->count() > 0;

  RunConfig cfg;
  std::string active = "config";
  try {
    cfg = load_run_config(args);
    if (bands->parsed()) return (active = "bands", cmd_bands(cfg));
    if (calibrate->parsed()) return (active = "calibrate", cmd_calibrate(cfg));
    if (solve->parsed())
      return (active = "solve", cmd_solve(cfg, write_ckpt, solve_field));
    if (sweep->parsed()) return (active = "sweep", cmd_sweep(cfg));
    if (dscan->parsed()) return (active = "depth-scan", cmd_depth_scan(cfg));
    if (oracle->parsed()) return (active = "oracle", cmd_oracle(cfg));
    if (dense->parsed()) return (active = "dense-check", cmd_dense_check(cfg));
    if (plot->parsed()) return (active = "plot", cmd_plot(cfg, scan_dir));
  } catch (const std::exception& e) {
    return fail_with_error_json(active == "config" ? nullptr : &cfg, active,
                                e);
  }
  return 1;
}
