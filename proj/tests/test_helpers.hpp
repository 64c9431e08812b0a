#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "donorstark/tb_params.hpp"

namespace test_helpers {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string data_file(const std::string& name) {
  return std::string(DONORSTARK_DATA_DIR) + "/" + name;
}

inline dstark::TbParameterSet load_si_params() {
  return dstark::load_params(read_file(data_file("si_sp3d5s.json")));
}

// Small deterministic generator for test randomness.
struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() {  // in [0, 1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
  double symmetric() { return 2.0 * uniform() - 1.0; }
};

}  // namespace test_helpers
