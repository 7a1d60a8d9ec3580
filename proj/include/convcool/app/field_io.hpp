#pragma once

// Flat binary snapshots: (nx+1)*(ny+1) nodal little-endian float64 values, row-major with
// one row per y-level (x fastest), plus a sidecar "<name>.hdr" text header.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "convcool/error.hpp"
#include "convcool/grid.hpp"

namespace convcool {

inline std::filesystem::path sidecar_path(const std::filesystem::path& bin) {
  std::filesystem::path p = bin;
  p.replace_extension(".hdr");
  return p;
}

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int k = 0; k < 8; ++k) r |= ((x >> (8 * k)) & 0xffu) << (8 * (7 - k));
    return r;
  }
  return x;
}

inline std::map<std::string, std::string> read_header(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open header " + p.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace detail

inline void write_field(const std::filesystem::path& path, const ScalarField& f, double time,
                        const std::string& name = "T") {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (double v : f.values()) {
      const std::uint64_t le = detail::to_little_endian(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&le), sizeof le);
    }
    if (!out) throw IoError("write failed for " + path.string());
  }
  std::ofstream hdr(sidecar_path(path));
  if (!hdr) throw IoError("cannot write header for " + path.string());
  std::ostringstream t;
  t.precision(17);
  t << time;
  hdr << "field=" << name << "\n"
      << "nx=" << f.nx() << "\n"
      << "ny=" << f.ny() << "\n"
      << "time=" << t.str() << "\n"
      << "dtype=float64-le\n"
      << "layout=row-major rows=y cols=x\n"
      << "location=nodes\n";
}

inline ScalarField load_field(const std::filesystem::path& path, const GridSpec& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open field file " + path.string());
  const auto hdr = sidecar_path(path);
  if (std::filesystem::exists(hdr)) {
    const auto kv = detail::read_header(hdr);
    const auto nx = kv.find("nx"), ny = kv.find("ny");
    if (nx == kv.end() || ny == kv.end() || std::stoi(nx->second) != grid.nx ||
        std::stoi(ny->second) != grid.ny) {
      throw ConfigError("field file " + path.string() + " does not match the grid");
    }
  }
  std::vector<double> values(ScalarField::count(grid));
  for (double& v : values) {
    std::uint64_t le = 0;
    if (!in.read(reinterpret_cast<char*>(&le), sizeof le)) {
      throw ConfigError("field file " + path.string() + " has too few values for the grid");
    }
    v = std::bit_cast<double>(detail::to_little_endian(le));
  }
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw ConfigError("field file " + path.string() + " has too many values for the grid");
  }
  ScalarField f(grid, std::move(values));
  if (!f.all_finite()) throw ConfigError("field file " + path.string() + " has non-finite values");
  return f;
}

}  // namespace convcool
