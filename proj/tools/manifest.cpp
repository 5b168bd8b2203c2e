#include "manifest.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>

#include "json.hpp"
#include "lectio/error.hpp"
#include "lectio/hash.hpp"

namespace lectio::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::vector<InputHash> hash_inputs(const std::vector<fs::path>& paths) {
  std::vector<fs::path> files;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> txt;
      for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
          txt.push_back(entry.path());
        }
      }
      std::sort(txt.begin(), txt.end());
      files.insert(files.end(), txt.begin(), txt.end());
    } else {
      files.push_back(p);
    }
  }
  std::vector<InputHash> out;
  for (const auto& f : files) out.push_back({f.string(), sha256_file(f)});
  return out;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const fs::path& dir, const RunManifest& m) {
  ordered_json j;
  j["toolkit_version"] = m.version;
  j["subcommand"] = m.subcommand;
  j["config"] = ordered_json::object();
  for (const auto& [k, v] : m.config) j["config"][k] = v;
  j["inputs"] = ordered_json::array();
  for (const auto& in : m.inputs) j["inputs"].push_back({{"path", in.path}, {"sha256", in.sha256}});
  j["seed"] = m.seed;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  write_file_atomic(dir / kManifestName, j.dump(2) + "\n");
}

RunManifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifestName;
  try {
    const auto j = ordered_json::parse(read_file(path));
    RunManifest m;
    m.version = j.at("toolkit_version").get<std::string>();
    m.subcommand = j.at("subcommand").get<std::string>();
    for (const auto& [k, v] : j.at("config").items()) m.config.emplace_back(k, v.get<std::string>());
    for (const auto& in : j.at("inputs")) {
      m.inputs.push_back({in.at("path").get<std::string>(), in.at("sha256").get<std::string>()});
    }
    m.seed = j.at("seed").get<std::uint64_t>();
    m.started_at = j.at("started_at").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kParse, path.string() + ": " + ex.what());
  }
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
  std::vector<std::string> problems;
  for (const auto& in : read_manifest(dir).inputs) {
    if (!fs::exists(in.path)) {
      problems.push_back(in.path + ": missing");
    } else if (sha256_file(in.path) != in.sha256) {
      problems.push_back(in.path + ": hash changed");
    }
  }
  return problems;
}

}  // namespace lectio::cli
