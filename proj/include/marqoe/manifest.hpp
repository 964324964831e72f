#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "marqoe/common.hpp"
#include "marqoe/config.hpp"

namespace marqoe {

inline constexpr const char* kArtifactName = "marqoe";
inline constexpr const char* kArtifactVersion = "0.1.0";

/// Writes manifest.json plus a byte-exact copy of the config into out_dir,
/// so the directory is self-describing and re-runnable.
inline void write_run_manifest(const std::filesystem::path& out_dir, const std::string& config_raw,
                               const std::string& command,
                               const std::vector<std::string>& outputs,
                               const nlohmann::json& extra = {}) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream cfg(out_dir / "config_used.toml", std::ios::binary);
    cfg << config_raw;
  }

  nlohmann::json j;
  j["schema_version"] = 1;
  j["artifact"] = {{"name", kArtifactName}, {"version", kArtifactVersion}};
  j["command"] = command;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(detail::fnv1a64(config_raw)));
  j["config_fnv1a64"] = hash;
  j["config_file"] = "config_used.toml";
  {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    j["created_utc"] = buf;
  }
  j["outputs"] = outputs;
  if (!extra.is_null() && !extra.empty()) j["extra"] = extra;

  std::ofstream out(out_dir / "manifest.json");
  out << j.dump(2) << "\n";
}

}  // namespace marqoe
