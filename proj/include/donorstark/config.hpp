#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "donorstark/lattice.hpp"
#include "donorstark/potentials.hpp"
#include "donorstark/solver.hpp"
#include "donorstark/stark.hpp"
#include "donorstark/tb_params.hpp"

namespace dstark {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Run configuration: strict schema, unknown keys fatal, physical units in
// the key names. Defaults fill every omitted field and the effective
// document is what gets hashed into manifests.
struct RunConfig {
  DomainSpec domain;
  std::string params_file;
  double kappa = 11.9;
  bool calibrate_u0 = true;
  double u0_ev = 4.33;
  double target_binding_mev = 45.6;
  double calibration_tolerance_mev = 0.05;

  std::vector<double> fields_v_um{-1.0, -0.75, -0.5, -0.25, 0.0,
                                  0.25, 0.5,  0.75, 1.0};
  std::vector<double> depths_nm{10.86};

  // solver
  double tolerance_ev = 1e-8;
  int max_iterations = 5000;
  int n_states = 4;
  int block_size = 2;
  int basis_size = 0;
  std::uint64_t seed = 0x9d2c5680u;
  double sigma_ev = std::numeric_limits<double>::quiet_NaN();
  bool spin_orbit = false;
  double passivation_ev = 30.0;
  double memory_budget_gb = 6.0;

  std::string contact_mode = "all_orbitals";
  double ionization_guard_fraction = 0.2;

  BmbCoreParams bmb{11.9, 0.7572, 14.83, 5.90, 38.63};

  std::string output_dir = "out";
  int workers = 2;

  // original + effective documents
  std::string source_text;

  TbParameterSet load_parameter_set() const {
    return load_params(read_text_file(params_file));
  }

  SweepConfig sweep_config(const TbParameterSet& params) const {
    SweepConfig cfg;
    cfg.params = params;
    cfg.assembly.spin_orbit = spin_orbit;
    cfg.assembly.passivation_ev = passivation_ev;
    cfg.solver = solver_config();
    cfg.kappa = kappa;
    cfg.n_states = n_states;
    cfg.contact_mode = contact_mode == "s_only" ? ContactMode::s_only
                                                : ContactMode::all_orbitals;
    cfg.ionization_guard_fraction = ionization_guard_fraction;
    cfg.calibrate = calibrate_u0;
    cfg.fixed_u0_ev = u0_ev;
    cfg.calibration.target_binding_ev = target_binding_mev * 1e-3;
    cfg.calibration.tolerance_ev = calibration_tolerance_mev * 1e-3;
    cfg.calibration.kappa = kappa;
    cfg.calibration.u0_guess = u0_ev;
    return cfg;
  }

  SolverConfig solver_config() const {
    SolverConfig s;
    s.tolerance_ev = tolerance_ev;
    s.max_iterations = max_iterations;
    s.seed = seed;
    s.sigma = sigma_ev;
    s.block_size = block_size;
    s.basis_size = basis_size;
    s.memory_budget_gb = memory_budget_gb;
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["domain"] = {
        {"extents_nm", {domain.extents_nm[0], domain.extents_nm[1],
                        domain.extents_nm[2]}},
        {"lattice_constant_nm", domain.lattice_constant_nm},
        {"depth_axis", axis_name(domain.depth_axis)},
        {"impurity_depth_nm", domain.impurity_depth_nm},
    };
    j["params_file"] = params_file;
    j["potential"] = {{"kappa", kappa},
                      {"calibrate_u0", calibrate_u0},
                      {"u0_ev", u0_ev},
                      {"target_binding_mev", target_binding_mev},
                      {"calibration_tolerance_mev", calibration_tolerance_mev}};
    j["fields_v_um"] = fields_v_um;
    j["depths_nm"] = depths_nm;
    j["solver"] = {{"tolerance_ev", tolerance_ev},
                   {"max_iterations", max_iterations},
                   {"n_states", n_states},
                   {"block_size", block_size},
                   {"basis_size", basis_size},
                   {"seed", seed},
                   {"spin_orbit", spin_orbit},
                   {"passivation_ev", passivation_ev},
                   {"memory_budget_gb", memory_budget_gb}};
    if (std::isfinite(sigma_ev)) j["solver"]["sigma_ev"] = sigma_ev;
    j["observables"] = {{"contact_mode", contact_mode},
                        {"ionization_guard_fraction",
                         ionization_guard_fraction}};
    j["bmb"] = {{"kappa", bmb.kappa},
                {"zeta", bmb.zeta},
                {"alpha_per_nm", bmb.alpha_per_nm},
                {"beta_per_nm", bmb.beta_per_nm},
                {"gamma_per_nm", bmb.gamma_per_nm}};
    j["output_dir"] = output_dir;
    j["workers"] = workers;
    return j;
  }

  std::uint64_t config_hash() const { return fnv1a64(to_json().dump()); }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj,
                                const std::set<std::string>& known,
                                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

inline double require_positive(double v, const std::string& field) {
  if (!(v > 0)) throw ConfigError("field " + field + " must be > 0");
  return v;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& document) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(document);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  cfg.source_text = document;

  detail::reject_unknown_keys(
      j,
      {"schema_version", "domain", "params_file", "potential", "fields_v_um",
       "depths_nm", "solver", "observables", "bmb", "output_dir", "workers"},
      "config root");
  if (!j.contains("schema_version"))
    throw ConfigError("missing schema_version");
  if (j.at("schema_version").get<int>() != 1)
    throw ConfigError("unsupported schema_version");

  if (!j.contains("domain")) throw ConfigError("missing domain");
  {
    const auto& d = j.at("domain");
    detail::reject_unknown_keys(d,
                                {"extents_nm", "lattice_constant_nm",
                                 "depth_axis", "impurity_depth_nm"},
                                "domain");
    if (!d.contains("extents_nm")) throw ConfigError("missing domain.extents_nm");
    const auto e = d.at("extents_nm");
    if (!e.is_array() || e.size() != 3)
      throw ConfigError("domain.extents_nm must be a 3-array");
    for (int i = 0; i < 3; ++i)
      cfg.domain.extents_nm[i] =
          detail::require_positive(e[i].get<double>(), "domain.extents_nm");
    if (d.contains("lattice_constant_nm"))
      cfg.domain.lattice_constant_nm = detail::require_positive(
          d.at("lattice_constant_nm").get<double>(),
          "domain.lattice_constant_nm");
    if (d.contains("depth_axis"))
      cfg.domain.depth_axis =
          axis_from_string(d.at("depth_axis").get<std::string>());
    if (!d.contains("impurity_depth_nm"))
      throw ConfigError("missing domain.impurity_depth_nm");
    cfg.domain.impurity_depth_nm = detail::require_positive(
        d.at("impurity_depth_nm").get<double>(), "domain.impurity_depth_nm");
  }

  if (!j.contains("params_file")) throw ConfigError("missing params_file");
  cfg.params_file = j.at("params_file").get<std::string>();
  if (const char* env = std::getenv("DONOR_STARK_PARAMS"))
    cfg.params_file = env;

  if (j.contains("potential")) {
    const auto& p = j.at("potential");
    detail::reject_unknown_keys(p,
                                {"kappa", "calibrate_u0", "u0_ev",
                                 "target_binding_mev",
                                 "calibration_tolerance_mev"},
                                "potential");
    if (p.contains("kappa")) cfg.kappa = p.at("kappa").get<double>();
    if (cfg.kappa <= 1) throw ConfigError("potential.kappa must be > 1");
    if (p.contains("calibrate_u0"))
      cfg.calibrate_u0 = p.at("calibrate_u0").get<bool>();
    if (p.contains("u0_ev")) cfg.u0_ev = p.at("u0_ev").get<double>();
    if (p.contains("target_binding_mev"))
      cfg.target_binding_mev = p.at("target_binding_mev").get<double>();
    if (p.contains("calibration_tolerance_mev"))
      cfg.calibration_tolerance_mev =
          detail::require_positive(p.at("calibration_tolerance_mev").get<double>(),
                                   "potential.calibration_tolerance_mev");
  }

  if (j.contains("fields_v_um")) {
    cfg.fields_v_um.clear();
    for (const auto& f : j.at("fields_v_um"))
      cfg.fields_v_um.push_back(f.get<double>());
  }
  if (j.contains("depths_nm")) {
    cfg.depths_nm.clear();
    for (const auto& f : j.at("depths_nm"))
      cfg.depths_nm.push_back(
          detail::require_positive(f.get<double>(), "depths_nm"));
  }

  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    detail::reject_unknown_keys(
        s,
        {"tolerance_ev", "max_iterations", "n_states", "block_size",
         "basis_size", "seed", "sigma_ev", "spin_orbit", "passivation_ev",
         "memory_budget_gb"},
        "solver");
    if (s.contains("tolerance_ev"))
      cfg.tolerance_ev = detail::require_positive(
          s.at("tolerance_ev").get<double>(), "solver.tolerance_ev");
    if (s.contains("max_iterations"))
      cfg.max_iterations = s.at("max_iterations").get<int>();
    if (s.contains("n_states")) cfg.n_states = s.at("n_states").get<int>();
    if (cfg.n_states < 1) throw ConfigError("solver.n_states must be >= 1");
    if (s.contains("block_size"))
      cfg.block_size = s.at("block_size").get<int>();
    if (s.contains("basis_size"))
      cfg.basis_size = s.at("basis_size").get<int>();
    if (s.contains("seed")) cfg.seed = s.at("seed").get<std::uint64_t>();
    if (s.contains("sigma_ev")) cfg.sigma_ev = s.at("sigma_ev").get<double>();
    if (s.contains("spin_orbit"))
      cfg.spin_orbit = s.at("spin_orbit").get<bool>();
    if (s.contains("passivation_ev"))
      cfg.passivation_ev = s.at("passivation_ev").get<double>();
    if (s.contains("memory_budget_gb"))
      cfg.memory_budget_gb = detail::require_positive(
          s.at("memory_budget_gb").get<double>(), "solver.memory_budget_gb");
  }

  if (j.contains("observables")) {
    const auto& o = j.at("observables");
    detail::reject_unknown_keys(
        o, {"contact_mode", "ionization_guard_fraction"}, "observables");
    if (o.contains("contact_mode")) {
      cfg.contact_mode = o.at("contact_mode").get<std::string>();
      if (cfg.contact_mode != "all_orbitals" && cfg.contact_mode != "s_only")
        throw ConfigError(
            "observables.contact_mode must be all_orbitals or s_only");
    }
    if (o.contains("ionization_guard_fraction"))
      cfg.ionization_guard_fraction =
          o.at("ionization_guard_fraction").get<double>();
  }

  if (j.contains("bmb")) {
    const auto& b = j.at("bmb");
    detail::reject_unknown_keys(
        b, {"kappa", "zeta", "alpha_per_nm", "beta_per_nm", "gamma_per_nm"},
        "bmb");
    if (b.contains("kappa")) cfg.bmb.kappa = b.at("kappa").get<double>();
    if (b.contains("zeta")) cfg.bmb.zeta = b.at("zeta").get<double>();
    if (b.contains("alpha_per_nm"))
      cfg.bmb.alpha_per_nm = b.at("alpha_per_nm").get<double>();
    if (b.contains("beta_per_nm"))
      cfg.bmb.beta_per_nm = b.at("beta_per_nm").get<double>();
    if (b.contains("gamma_per_nm"))
      cfg.bmb.gamma_per_nm = b.at("gamma_per_nm").get<double>();
    cfg.bmb.validate();
  }

  if (j.contains("output_dir"))
    cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("workers")) {
    cfg.workers = j.at("workers").get<int>();
    if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
  }

  cfg.domain.validate();
  return cfg;
}

}  // namespace dstark
