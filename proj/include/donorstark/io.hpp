#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "donorstark/config.hpp"
#include "donorstark/observables.hpp"
#include "donorstark/solver.hpp"
#include "donorstark/stark.hpp"
#include "donorstark/tb_params.hpp"

namespace dstark {

// Doubles are printed with %.17g so identical values give identical bytes.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

// Run manifest: everything needed to reproduce an output byte for byte with
// the same binary.
struct RunManifest {
  std::string subcommand;
  std::uint64_t config_hash = 0;
  std::uint64_t params_checksum = 0;
  std::string code_version = "donorstark 1.0";
  std::uint64_t seed = 0;
  int workers = 0;
  double requested_depth_nm = 0;
  double snapped_depth_nm = 0;
  double u0_ev = 0;
  std::vector<std::pair<std::string, double>> stage_seconds;
  nlohmann::json extra;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["subcommand"] = subcommand;
    j["config_hash"] = hash_hex(config_hash);
    j["params_checksum"] = hash_hex(params_checksum);
    j["code_version"] = code_version;
    j["seed"] = seed;
    j["workers"] = workers;
    j["requested_depth_nm"] = requested_depth_nm;
    j["snapped_depth_nm"] = snapped_depth_nm;
    j["u0_ev"] = u0_ev;
    nlohmann::json stages = nlohmann::json::object();
    for (const auto& [name, sec] : stage_seconds) stages[name] = sec;
    j["stage_seconds"] = stages;
    if (!extra.is_null()) j["extra"] = extra;
    return j;
  }

  void write(const std::string& path) const {
    write_text_file(path, to_json().dump(2) + "\n");
  }
};

// Flat CSV for plotting: one row per (depth, field).
inline std::string sweep_csv(const std::vector<DepthScanEntry>& entries) {
  std::string out = "depth_nm,field_V_per_um,dA_over_A0,dipole_nm\n";
  for (const auto& e : entries) {
    if (!e.sweep.complete) continue;
    for (std::size_t i = 0; i < e.sweep.fields_v_um.size(); ++i) {
      out += format_double(e.sweep.depth_nm) + "," +
             format_double(e.sweep.fields_v_um[i]) + "," +
             format_double(e.sweep.delta_a_over_a0[i]) + "," +
             format_double(e.sweep.dipoles_nm[i]) + "\n";
    }
  }
  return out;
}

inline nlohmann::json sweep_json(const SweepResult& sweep,
                                 std::uint64_t config_hash) {
  nlohmann::json j;
  j["config_hash"] = hash_hex(config_hash);
  j["depth_nm"] = sweep.depth_nm;
  j["requested_depth_nm"] = sweep.requested_depth_nm;
  j["u0_ev"] = sweep.u0_ev;
  j["cbm_ev"] = sweep.cbm_ev;
  j["zero_field_energy_ev"] = sweep.zero_field_energy_ev;
  j["complete"] = sweep.complete;
  if (!sweep.error.empty()) j["error"] = sweep.error;
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < sweep.fields_v_um.size() &&
                          i < sweep.ratios.size();
       ++i) {
    nlohmann::json p;
    p["field_v_um"] = sweep.fields_v_um[i];
    p["ratio"] = sweep.ratios[i];
    p["dA_over_A0"] = sweep.delta_a_over_a0[i];
    p["dipole_nm"] = sweep.dipoles_nm[i];
    p["energy_ev"] = sweep.meta[i].energy_ev;
    p["residual"] = sweep.meta[i].residual;
    p["iterations"] = sweep.meta[i].iterations;
    p["donor_weight"] = sweep.meta[i].donor_weight;
    p["seconds"] = sweep.meta[i].seconds;
    points.push_back(p);
  }
  j["points"] = points;
  return j;
}

inline nlohmann::json stark_fit_json(const StarkFit& fit) {
  nlohmann::json j;
  j["eta2_um2_v2"] = fit.eta2;
  j["eta1_um_v"] = fit.eta1;
  j["rms_residual"] = fit.rms_residual;
  j["peak_field_v_um"] = fit.peak_field_v_um;
  j["covariance"] = {{fit.covariance(0, 0), fit.covariance(0, 1)},
                     {fit.covariance(1, 0), fit.covariance(1, 1)}};
  j["diagnostic_fit"] = {{"eta2", fit.diag_eta2},
                         {"eta1", fit.diag_eta1},
                         {"constant", fit.diag_const}};
  return j;
}

inline nlohmann::json dipole_fit_json(const DipoleFit& fit) {
  return nlohmann::json{{"slope_nm_per_v_um", fit.slope_nm_um_v},
                        {"intercept_nm", fit.intercept_nm},
                        {"r_squared", fit.r_squared}};
}

// Density map export: CSV plus sidecar JSON metadata.
inline std::string density_map_csv(const DensityMap& map) {
  std::string out = "x_nm,y_nm,z_nm,value\n";
  for (const auto& p : map.points) {
    out += format_double(p.position_nm.x) + "," +
           format_double(p.position_nm.y) + "," +
           format_double(p.position_nm.z) + "," + format_double(p.value) +
           "\n";
  }
  return out;
}

inline nlohmann::json density_map_sidecar(const DensityMap& map,
                                          double depth_nm,
                                          const std::string& mode,
                                          std::uint64_t config_hash,
                                          std::uint64_t ham_hash) {
  return nlohmann::json{{"description", map.description},
                        {"field_v_um", map.field_v_um},
                        {"depth_nm", depth_nm},
                        {"contact_mode", mode},
                        {"config_hash", hash_hex(config_hash)},
                        {"hamiltonian_hash", hash_hex(ham_hash)},
                        {"points", map.points.size()}};
}

// Binary eigenvector checkpoint: magic "DSTK1", little-endian u64 header
// (dimension, count, seed, hamiltonian hash, params checksum), then
// interleaved (re, im) float64 vector data.
inline void write_checkpoint(const std::string& path,
                             const Eigen::MatrixXcd& vectors,
                             std::uint64_t seed, std::uint64_t ham_hash,
                             std::uint64_t params_checksum) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write("DSTK1", 5);
  auto put_u64 = [&](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  put_u64(static_cast<std::uint64_t>(vectors.rows()));
  put_u64(static_cast<std::uint64_t>(vectors.cols()));
  put_u64(seed);
  put_u64(ham_hash);
  put_u64(params_checksum);
  for (int c = 0; c < vectors.cols(); ++c) {
    for (int r = 0; r < vectors.rows(); ++r) {
      const double re = vectors(r, c).real();
      const double im = vectors(r, c).imag();
      out.write(reinterpret_cast<const char*>(&re), 8);
      out.write(reinterpret_cast<const char*>(&im), 8);
    }
  }
}

struct Checkpoint {
  Eigen::MatrixXcd vectors;
  std::uint64_t seed = 0;
  std::uint64_t ham_hash = 0;
  std::uint64_t params_checksum = 0;
};

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[5];
  in.read(magic, 5);
  if (std::string(magic, 5) != "DSTK1")
    throw std::runtime_error("bad checkpoint magic in " + path);
  auto get_u64 = [&]() {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
  };
  const std::uint64_t rows = get_u64();
  const std::uint64_t cols = get_u64();
  Checkpoint cp;
  cp.seed = get_u64();
  cp.ham_hash = get_u64();
  cp.params_checksum = get_u64();
  cp.vectors.resize(rows, cols);
  for (std::uint64_t c = 0; c < cols; ++c) {
    for (std::uint64_t r = 0; r < rows; ++r) {
      double re, im;
      in.read(reinterpret_cast<char*>(&re), 8);
      in.read(reinterpret_cast<char*>(&im), 8);
      cp.vectors(r, c) = {re, im};
    }
  }
  if (!in) throw std::runtime_error("truncated checkpoint " + path);
  return cp;
}

// Minimal SVG emission: polyline chart for (x, y) series and a grid heatmap.
// CSVs remain the canonical output; these are quick-look renders.
struct SvgSeries {
  std::string label;
  std::string color = "#1f77b4";
  std::vector<std::pair<double, double>> points;
};

inline std::string svg_line_chart(const std::string& title,
                                  const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<SvgSeries>& series,
                                  int width = 640, int height = 420) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax - xmin < 1e-300) xmax = xmin + 1;
  if (ymax - ymin < 1e-300) ymax = ymin + 1;
  const double ml = 70, mr = 20, mt = 40, mb = 50;
  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  auto py = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };
  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
      std::to_string(width) + "\" height=\"" + std::to_string(height) +
      "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(width / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + title +
         "</text>\n";
  // axes
  svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" +
         std::to_string(height - mb) + "\" x2=\"" +
         std::to_string(width - mr) + "\" y2=\"" +
         std::to_string(height - mb) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(mt) +
         "\" x2=\"" + std::to_string(ml) + "\" y2=\"" +
         std::to_string(height - mb) + "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + t * (xmax - xmin) / 4;
    const double yv = ymin + t * (ymax - ymin) / 4;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", xv);
    svg += "<text x=\"" + std::to_string(px(xv)) + "\" y=\"" +
           std::to_string(height - mb + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + buf + "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.3g", yv);
    svg += "<text x=\"" + std::to_string(ml - 8) + "\" y=\"" +
           std::to_string(py(yv) + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + buf + "</text>\n";
  }
  svg += "<text x=\"" + std::to_string(width / 2) + "\" y=\"" +
         std::to_string(height - 12) +
         "\" text-anchor=\"middle\" font-size=\"12\">" + x_label +
         "</text>\n";
  svg += "<text x=\"16\" y=\"" + std::to_string(height / 2) +
         "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 "
         "16 " +
         std::to_string(height / 2) + ")\">" + y_label + "</text>\n";
  int li = 0;
  for (const auto& s : series) {
    std::string pts;
    for (const auto& [x, y] : s.points) {
      pts += std::to_string(px(x)) + "," + std::to_string(py(y)) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + s.color +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    for (const auto& [x, y] : s.points) {
      svg += "<circle cx=\"" + std::to_string(px(x)) + "\" cy=\"" +
             std::to_string(py(y)) + "\" r=\"2.5\" fill=\"" + s.color +
             "\"/>\n";
    }
    svg += "<text x=\"" + std::to_string(width - mr - 6) + "\" y=\"" +
           std::to_string(mt + 16 * (li + 1)) +
           "\" text-anchor=\"end\" font-size=\"11\" fill=\"" + s.color +
           "\">" + s.label + "</text>\n";
    ++li;
  }
  svg += "</svg>\n";
  return svg;
}

// Heatmap of scattered (x, y, value) points rendered as squares; used for
// the differential-density cut renders.
inline std::string svg_heatmap(const std::string& title,
                               const std::vector<std::array<double, 3>>& pts,
                               int width = 560, int height = 560) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300, vmax = 0;
  for (const auto& p : pts) {
    xmin = std::min(xmin, p[0]);
    xmax = std::max(xmax, p[0]);
    ymin = std::min(ymin, p[1]);
    ymax = std::max(ymax, p[1]);
    vmax = std::max(vmax, std::abs(p[2]));
  }
  if (pts.empty() || vmax == 0) vmax = 1;
  const double m = 40;
  auto px = [&](double x) {
    return m + (x - xmin) / std::max(xmax - xmin, 1e-300) * (width - 2 * m);
  };
  auto py = [&](double y) {
    return height - m -
           (y - ymin) / std::max(ymax - ymin, 1e-300) * (height - 2 * m);
  };
  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
      std::to_string(width) + "\" height=\"" + std::to_string(height) +
      "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(width / 2) +
         "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + title +
         "</text>\n";
  for (const auto& p : pts) {
    const double t = p[2] / vmax;  // [-1, 1]
    const int r = t > 0 ? 255 : static_cast<int>(255 * (1 + t));
    const int b = t < 0 ? 255 : static_cast<int>(255 * (1 - t));
    const int g = static_cast<int>(255 * (1 - std::abs(t)));
    char color[8];
    std::snprintf(color, sizeof(color), "#%02x%02x%02x", r, g, b);
    svg += "<rect x=\"" + std::to_string(px(p[0]) - 2) + "\" y=\"" +
           std::to_string(py(p[1]) - 2) +
           "\" width=\"4\" height=\"4\" fill=\"" + std::string(color) +
           "\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace dstark
