#include "lectio/vocabulary.hpp"

#include <fstream>

#include "lectio/error.hpp"
#include "lectio/hash.hpp"

namespace lectio {

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words,
                                  NormalizationPolicy policy, bool allow_empty) {
  if (words.empty() && !allow_empty) {
    throw Error(ErrorCode::kBuild, "vocabulary is empty");
  }
  Vocabulary v;
  v.policy_ = policy;
  v.words_.reserve(words.size());
  std::vector<std::string> collisions;
  for (const std::string& raw : words) {
    std::string w = normalize_string(raw, policy);
    if (w.empty() || w.find(' ') != std::string::npos) {
      throw Error(ErrorCode::kBuild, "vocabulary entry '" + raw + "' is not a single word");
    }
    const auto id = static_cast<WordId>(v.words_.size());
    if (!v.ids_.emplace(w, id).second) {
      collisions.push_back("'" + raw + "' -> '" + w + "'");
      continue;
    }
    v.words_.push_back(std::move(w));
  }
  if (!collisions.empty()) {
    std::string msg = "duplicate vocabulary entries after normalization:";
    for (const auto& c : collisions) msg += " " + c;
    throw Error(ErrorCode::kBuild, msg);
  }

  std::string joined;
  for (const auto& w : v.words_) {
    joined += w;
    joined += '\n';
  }
  v.fingerprint_ = sha256_hex(joined);
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path, NormalizationPolicy policy) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open vocabulary " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    words.push_back(line);
  }
  return from_words(words, policy);
}

std::optional<WordId> Vocabulary::id_of(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::string out;
  for (const auto& w : words_) {
    out += w;
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace lectio
