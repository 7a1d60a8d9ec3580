#pragma once

// Run manifest (manifest.json): config echo, mode, every artifact written with
// its row or byte count, wall time and solver reports.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "convcool/error.hpp"

namespace convcool {

struct ManifestEntry {
  std::string path;  // relative to the run directory
  std::string kind;  // "csv" counts data rows; other kinds count bytes
  std::size_t count = 0;
};

struct RunManifest {
  std::string mode;
  std::string config;  // key-value echo, re-parseable
  std::vector<ManifestEntry> outputs;
  double wall_time = 0.0;
  nlohmann::json reports = nlohmann::json::object();

  void add_csv(const std::string& path, std::size_t rows) { outputs.push_back({path, "csv", rows}); }
  // Records a binary or text artifact already written under `dir`.
  void add_file(const std::filesystem::path& dir, const std::string& path,
                const std::string& kind) {
    outputs.push_back({path, kind, static_cast<std::size_t>(std::filesystem::file_size(dir / path))});
  }
};

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j;
  j["mode"] = m.mode;
  j["config"] = m.config;
  j["wall_time"] = m.wall_time;
  j["reports"] = m.reports;
  j["outputs"] = nlohmann::json::array();
  for (const auto& e : m.outputs) {
    nlohmann::json o{{"path", e.path}, {"kind", e.kind}};
    o[e.kind == "csv" ? "rows" : "bytes"] = e.count;
    j["outputs"].push_back(o);
  }
  return j;
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.mode = j.at("mode").get<std::string>();
    m.config = j.at("config").get<std::string>();
    m.wall_time = j.at("wall_time").get<double>();
    m.reports = j.at("reports");
    for (const auto& o : j.at("outputs")) {
      const std::string kind = o.at("kind").get<std::string>();
      m.outputs.push_back({o.at("path").get<std::string>(), kind,
                           o.at(kind == "csv" ? "rows" : "bytes").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

inline void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(m).dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

inline RunManifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("cannot parse " + path.string() + ": " + e.what());
  }
}

// Problems found when checking the manifest against the directory; empty when
// every listed file exists with the recorded size and nothing else is present.
inline std::vector<std::string> check_manifest(const std::filesystem::path& dir,
                                               const RunManifest& m) {
  std::vector<std::string> problems;
  std::vector<std::string> listed{"manifest.json"};
  for (const auto& e : m.outputs) {
    listed.push_back(e.path);
    const auto p = dir / e.path;
    if (!std::filesystem::exists(p)) {
      problems.push_back("missing " + e.path);
      continue;
    }
    std::size_t actual = 0;
    if (e.kind == "csv") {
      std::ifstream in(p);
      std::string line;
      while (std::getline(in, line)) ++actual;
      actual = actual > 0 ? actual - 1 : 0;
    } else {
      actual = static_cast<std::size_t>(std::filesystem::file_size(p));
    }
    if (actual != e.count) {
      problems.push_back(e.path + ": recorded " + std::to_string(e.count) + ", found " +
                         std::to_string(actual));
    }
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (std::find(listed.begin(), listed.end(), name) == listed.end()) {
      problems.push_back("unlisted artifact " + name);
    }
  }
  return problems;
}

}  // namespace convcool
