#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace lectio {

// How raw text is canonicalized before any comparison. Two texts are only
// comparable when normalized under the same policy.
enum class NormalizationPolicy {
  kCompose,              // NFC; diacritics kept as part of the letter
  kDecomposeStripMarks,  // NFD, drop nonspacing marks, recompose
};

std::string_view to_string(NormalizationPolicy policy);
// Accepts "compose" and "decompose-strip-off". Throws Error(kConfig).
NormalizationPolicy parse_normalization_policy(std::string_view name);

class NormalizedText {
 public:
  NormalizedText() = default;

  const std::string& raw() const noexcept { return raw_; }
  const std::string& normalized() const noexcept { return normalized_; }
  NormalizationPolicy policy() const noexcept { return policy_; }
  bool empty() const noexcept { return normalized_.empty(); }

  friend bool operator==(const NormalizedText& a, const NormalizedText& b) {
    return a.policy_ == b.policy_ && a.normalized_ == b.normalized_;
  }

 private:
  friend NormalizedText normalize(std::string_view, NormalizationPolicy);

  std::string raw_;
  std::string normalized_;
  NormalizationPolicy policy_ = NormalizationPolicy::kCompose;
};

// Canonical composition per policy, whitespace runs collapsed to one ASCII
// space, ends trimmed. Throws Error(kDecode) naming the first bad byte.
NormalizedText normalize(std::string_view raw,
                         NormalizationPolicy policy = NormalizationPolicy::kCompose);

// Shorthand for normalize(raw, policy).normalized().
std::string normalize_string(std::string_view raw,
                             NormalizationPolicy policy = NormalizationPolicy::kCompose);

enum class TokenScheme {
  kWord,       // one token per word
  kCharacter,  // one token per codepoint
};

std::string_view to_string(TokenScheme scheme);

struct WordSpan {
  std::string doc_id;
  std::size_t word_index = 0;
  // UTF-8 byte offsets into the normalized text, half open.
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::string surface;
  std::vector<std::string> tokens;
  // Punctuation spans are indexed like words but never scored.
  bool punctuation = false;
};

// Whitespace/punctuation segmentation. Each punctuation codepoint becomes its
// own span, except apostrophes and hyphens joining two word characters.
std::vector<WordSpan> segment_words(const NormalizedText& text,
                                    std::string_view doc_id = {},
                                    TokenScheme scheme = TokenScheme::kWord);

std::vector<std::string> tokenize(std::string_view surface, TokenScheme scheme);
// Both schemes detokenize by plain concatenation.
std::string detokenize(const std::vector<std::string>& tokens);

// True for strings made only of punctuation codepoints.
bool is_punctuation(std::string_view word);

// Strict decoder: rejects overlongs, surrogates and truncated sequences.
std::u32string decode_utf8(std::string_view bytes);
std::string encode_utf8(std::u32string_view codepoints);
std::size_t codepoint_count(std::string_view bytes);

// Unit-cost edit distance over codepoints.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
std::size_t levenshtein(std::string_view a, std::string_view b);

}  // namespace lectio
