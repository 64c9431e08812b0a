#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace dstark {

// FNV-1a 64-bit, used for content checksums in manifests and golden files.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two-center integral names for the sp3d5s* nearest-neighbor model.
inline const std::vector<std::string>& sk_integral_names() {
  static const std::vector<std::string> names = {
      "ss_sigma",     "s_sstar_sigma", "sstar_sstar_sigma", "sp_sigma",
      "sstar_p_sigma", "sd_sigma",     "sstar_d_sigma",     "pp_sigma",
      "pp_pi",        "pd_sigma",      "pd_pi",             "dd_sigma",
      "dd_pi",        "dd_delta",
  };
  return names;
}

// Empirical tight-binding parameter set: on-site energies, Slater-Koster
// two-center integrals and the on-site spin-orbit constant, all in eV.
// Values are opaque literature data loaded from a JSON document.
struct TbParameterSet {
  std::vector<std::string> orbitals;  // s, px, py, pz, dxy, dyz, dzx, dx2y2, dz2, sstar
  std::map<std::string, double> onsite;        // keys s, p, d, sstar
  std::map<std::string, double> sk_integrals;  // keys from sk_integral_names()
  double spin_orbit_p = 0;  // coefficient of L.S on the p block, eV
  std::string provenance;
  int schema_version = 1;
  std::uint64_t checksum = 0;

  int n_orbitals() const { return static_cast<int>(orbitals.size()); }
  int n_basis_per_atom(bool with_spin) const {
    return n_orbitals() * (with_spin ? 2 : 1);
  }

  double onsite_energy(const std::string& key) const {
    auto it = onsite.find(key);
    if (it == onsite.end()) throw SchemaError("missing onsite energy " + key);
    return it->second;
  }

  double integral(const std::string& key) const {
    auto it = sk_integrals.find(key);
    if (it == sk_integrals.end())
      throw SchemaError("missing sk_integral " + key);
    return it->second;
  }

  // Stable content hash over everything that affects the Hamiltonian.
  std::uint64_t content_hash() const {
    std::string blob;
    for (const auto& o : orbitals) blob += o + ";";
    char num[64];
    auto put = [&](const std::string& k, double v) {
      std::snprintf(num, sizeof(num), "%s=%.17g;", k.c_str(), v);
      blob += num;
    };
    for (const auto& [k, v] : onsite) put(k, v);
    for (const auto& [k, v] : sk_integrals) put(k, v);
    put("spin_orbit_p", spin_orbit_p);
    return fnv1a64(blob);
  }
};

inline const std::vector<std::string>& canonical_orbitals() {
  static const std::vector<std::string> orbs = {
      "s", "px", "py", "pz", "dxy", "dyz", "dzx", "dx2y2", "dz2", "sstar"};
  return orbs;
}

inline TbParameterSet load_params(const std::string& document) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(document);
  } catch (const std::exception& e) {
    throw SchemaError(std::string("parameter file is not valid JSON: ") +
                      e.what());
  }
  if (!j.contains("schema_version"))
    throw SchemaError("missing schema_version");
  TbParameterSet p;
  p.schema_version = j.at("schema_version").get<int>();

  if (!j.contains("orbitals")) throw SchemaError("missing orbitals");
  for (const auto& o : j.at("orbitals")) {
    const std::string name = o.get<std::string>();
    bool known = false;
    for (const auto& k : canonical_orbitals()) known = known || (k == name);
    if (!known) throw SchemaError("unknown orbital label " + name);
    p.orbitals.push_back(name);
  }
  if (p.orbitals != canonical_orbitals())
    throw SchemaError("orbitals must list the sp3d5s* set in canonical order");

  auto get_num = [&](const nlohmann::json& obj, const std::string& key,
                     const std::string& what) -> double {
    if (!obj.contains(key)) throw SchemaError("missing " + what + " " + key);
    const auto& v = obj.at(key);
    if (!v.is_number())
      throw SchemaError("non-numeric entry for " + what + " " + key);
    const double d = v.get<double>();
    if (!std::isfinite(d))
      throw SchemaError("non-finite entry for " + what + " " + key);
    return d;
  };

  if (!j.contains("onsite")) throw SchemaError("missing onsite");
  for (const char* k : {"s", "p", "d", "sstar"})
    p.onsite[k] = get_num(j.at("onsite"), k, "onsite energy");

  if (!j.contains("sk_integrals")) throw SchemaError("missing sk_integrals");
  for (const auto& k : sk_integral_names())
    p.sk_integrals[k] = get_num(j.at("sk_integrals"), k, "sk_integral");

  if (!j.contains("spin_orbit")) throw SchemaError("missing spin_orbit");
  p.spin_orbit_p = get_num(j.at("spin_orbit"), "p", "spin_orbit constant");

  if (j.contains("provenance")) p.provenance = j.at("provenance").get<std::string>();
  p.checksum = fnv1a64(document);
  return p;
}

inline std::string save_params(const TbParameterSet& p) {
  nlohmann::json j;
  j["schema_version"] = p.schema_version;
  j["orbitals"] = p.orbitals;
  j["onsite"] = p.onsite;
  j["sk_integrals"] = p.sk_integrals;
  j["spin_orbit"] = {{"p", p.spin_orbit_p}};
  j["provenance"] = p.provenance;
  return j.dump(2);
}

}  // namespace dstark
