#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lectio/text.hpp"

namespace lectio {

using WordId = std::uint32_t;

// Fixed word list with dense ids in insertion order.
class Vocabulary {
 public:
  // Normalizes every entry. Duplicates after normalization, entries with
  // inner whitespace, and (unless allow_empty) an empty list are build errors.
  static Vocabulary from_words(const std::vector<std::string>& words,
                               NormalizationPolicy policy = NormalizationPolicy::kCompose,
                               bool allow_empty = false);

  // One word per line; blank lines and lines starting with '#' are skipped.
  static Vocabulary load(const std::filesystem::path& path,
                         NormalizationPolicy policy = NormalizationPolicy::kCompose);

  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }
  const std::string& word(WordId id) const { return words_.at(id); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  std::optional<WordId> id_of(std::string_view word) const;
  bool contains(std::string_view word) const { return id_of(word).has_value(); }
  NormalizationPolicy policy() const noexcept { return policy_; }

  // Hex SHA-256 of the words in id order, each followed by '\n'.
  const std::string& fingerprint() const noexcept { return fingerprint_; }

  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> ids_;
  NormalizationPolicy policy_ = NormalizationPolicy::kCompose;
  std::string fingerprint_;
};

}  // namespace lectio
