#pragma once

// Stage manifests written next to every milestone file. A manifest records
// the stage's effective configuration digest and a content digest per
// input and output, so a downstream stage can tell when an upstream file has
// changed since it was produced.

#include <chrono>
#include <ctime>
#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "revcf/error.hpp"
#include "revcf/io.hpp"

namespace revcf::manifest {

using json = nlohmann::json;

struct FileEntry {
  std::string path;
  std::string digest;
};

struct StageManifest {
  std::string stage;  // sample, preprocess, compose, weights, evaluate, report
  std::vector<FileEntry> inputs;
  std::vector<FileEntry> outputs;
  json config;
  std::string config_digest;
  std::string started_at;
  std::string finished_at;
};

// Stable: nlohmann::json objects keep keys sorted, so equal configurations
// serialize identically.
inline std::string config_digest(const json& config) { return io::hex64(io::fnv1a64(config.dump())); }

inline std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string manifest_path(const std::string& dir, const std::string& stage) {
  return (std::filesystem::path(dir) / (stage + ".manifest.json")).string();
}

inline json to_json(const StageManifest& m) {
  auto files = [](const std::vector<FileEntry>& v) {
    json a = json::array();
    for (const auto& f : v) a.push_back({{"path", f.path}, {"digest", f.digest}});
    return a;
  };
  return {{"stage", m.stage},           {"inputs", files(m.inputs)},       {"outputs", files(m.outputs)},
          {"config", m.config},         {"config_digest", m.config_digest}, {"started_at", m.started_at},
          {"finished_at", m.finished_at}};
}

inline StageManifest from_json(const json& j) {
  StageManifest m;
  m.stage = j.at("stage").get<std::string>();
  for (const auto& f : j.at("inputs")) m.inputs.push_back({f.at("path"), f.at("digest")});
  for (const auto& f : j.at("outputs")) m.outputs.push_back({f.at("path"), f.at("digest")});
  m.config = j.value("config", json::object());
  m.config_digest = j.value("config_digest", "");
  m.started_at = j.value("started_at", "");
  m.finished_at = j.value("finished_at", "");
  return m;
}

inline StageManifest read_manifest(const std::string& path) {
  try {
    return from_json(json::parse(io::read_file(path)));
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

// Every output must exist and be non-empty.
inline void write_manifest(const std::string& dir, StageManifest m) {
  for (auto& out : m.outputs) {
    std::error_code ec;
    auto size = std::filesystem::file_size(out.path, ec);
    if (ec || size == 0) throw DataError("stage output '" + out.path + "' is missing or empty");
    out.digest = io::file_digest(out.path);
  }
  m.config_digest = config_digest(m.config);
  m.finished_at = utc_now();
  io::write_file_atomic(manifest_path(dir, m.stage), to_json(m).dump(2) + "\n");
}

// Looks for a manifest in the input's directory that lists it as an output.
inline std::optional<StageManifest> find_producer(const std::string& input) {
  namespace fs = std::filesystem;
  fs::path dir = fs::path(input).parent_path();
  if (dir.empty()) dir = ".";
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return std::nullopt;
  const auto target = fs::weakly_canonical(input, ec);
  std::vector<fs::path> candidates;
  for (const auto& e : fs::directory_iterator(dir, ec))
    if (e.path().filename().string().ends_with(".manifest.json")) candidates.push_back(e.path());
  std::sort(candidates.begin(), candidates.end());
  for (const auto& p : candidates) {
    StageManifest m;
    try {
      m = read_manifest(p.string());
    } catch (const std::exception&) {
      continue;
    }
    for (const auto& out : m.outputs)
      if (fs::weakly_canonical(out.path, ec) == target) return m;
  }
  return std::nullopt;
}

// Records each input's digest and refuses inputs whose content no longer
// matches the digest their producing stage recorded, unless forced.
inline std::vector<FileEntry> check_inputs(const std::vector<std::string>& inputs, bool force) {
  std::vector<FileEntry> entries;
  for (const auto& in : inputs) {
    FileEntry entry{in, io::file_digest(in)};
    if (auto producer = find_producer(in)) {
      std::error_code ec;
      for (const auto& out : producer->outputs)
        if (std::filesystem::weakly_canonical(out.path, ec) == std::filesystem::weakly_canonical(in, ec) &&
            out.digest != entry.digest && !force)
          throw DataError("input '" + in + "' changed since stage '" + producer->stage +
                          "' produced it (config " + producer->config_digest + "); rerun that stage or pass --force");
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace revcf::manifest
