#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace lectio::cli {

struct InputHash {
  std::string path;
  std::string sha256;
};

// Written as manifest.json into every output directory.
struct RunManifest {
  std::string version;
  std::string subcommand;
  std::vector<std::pair<std::string, std::string>> config;  // flag -> value, sorted
  std::vector<InputHash> inputs;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
};

inline constexpr const char* kManifestName = "manifest.json";

// Regular files are hashed as-is; directories contribute their *.txt files.
std::vector<InputHash> hash_inputs(const std::vector<std::filesystem::path>& paths);

std::string utc_now();

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& dir);

// Recomputes input hashes; returns one message per mismatch or missing file.
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

}  // namespace lectio::cli
