#include "lectio/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <numeric>

#include "lectio/error.hpp"

namespace lectio {
namespace {

bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }

bool is_punct(char32_t c) { return u_ispunct(static_cast<UChar32>(c)); }

bool is_word_char(char32_t c) { return !is_space(c) && !is_punct(c); }

// Punctuation that stays inside a word when flanked by word characters.
bool is_connector(char32_t c) {
  return c == U'\'' || c == U'’' || c == U'-' || c == U'‐';
}

const icu::Normalizer2& instance(bool compose) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = compose ? icu::Normalizer2::getNFCInstance(status)
                                      : icu::Normalizer2::getNFDInstance(status);
  if (U_FAILURE(status) || n == nullptr) {
    throw Error(ErrorCode::kConfig,
                std::string("ICU normalizer unavailable: ") + u_errorName(status));
  }
  return *n;
}

icu::UnicodeString apply(const icu::Normalizer2& n, const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = n.normalize(s, status);
  if (U_FAILURE(status)) {
    throw Error(ErrorCode::kDecode,
                std::string("normalization failed: ") + u_errorName(status));
  }
  return out;
}

std::u32string collapse_whitespace(std::u32string_view in) {
  std::u32string out;
  out.reserve(in.size());
  bool pending_space = false;
  for (char32_t c : in) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string_view to_string(NormalizationPolicy policy) {
  switch (policy) {
    case NormalizationPolicy::kCompose: return "compose";
    case NormalizationPolicy::kDecomposeStripMarks: return "decompose-strip-off";
  }
  return "compose";
}

NormalizationPolicy parse_normalization_policy(std::string_view name) {
  if (name == "compose") return NormalizationPolicy::kCompose;
  if (name == "decompose-strip-off") return NormalizationPolicy::kDecomposeStripMarks;
  throw Error(ErrorCode::kConfig,
              "unknown normalization policy '" + std::string(name) +
                  "' (expected compose or decompose-strip-off)");
}

std::string_view to_string(TokenScheme scheme) {
  return scheme == TokenScheme::kWord ? "word" : "char";
}

std::u32string decode_utf8(std::string_view bytes) {
  std::u32string out;
  out.reserve(bytes.size());
  auto fail = [](std::size_t offset, const char* what) {
    throw Error(ErrorCode::kDecode, "invalid UTF-8 at byte offset " +
                                        std::to_string(offset) + ": " + what);
  };
  std::size_t i = 0;
  while (i < bytes.size()) {
    const auto b0 = static_cast<unsigned char>(bytes[i]);
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    }
    std::size_t len = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if ((b0 & 0xE0) == 0xC0) {
      len = 2; cp = b0 & 0x1F; min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3; cp = b0 & 0x0F; min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4; cp = b0 & 0x07; min = 0x10000;
    } else {
      fail(i, "invalid lead byte");
    }
    if (i + len > bytes.size()) fail(i, "truncated sequence");
    for (std::size_t k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(bytes[i + k]);
      if ((b & 0xC0) != 0x80) fail(i + k, "invalid continuation byte");
      cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min) fail(i, "overlong encoding");
    if (cp > 0x10FFFF) fail(i, "codepoint beyond U+10FFFF");
    if (cp >= 0xD800 && cp <= 0xDFFF) fail(i, "surrogate codepoint");
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(std::u32string_view codepoints) {
  std::string out;
  out.reserve(codepoints.size());
  for (char32_t c : codepoints) {
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (c >> 12)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (c >> 18)));
      out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

std::size_t codepoint_count(std::string_view bytes) {
  return static_cast<std::size_t>(std::count_if(bytes.begin(), bytes.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

NormalizedText normalize(std::string_view raw, NormalizationPolicy policy) {
  const std::u32string decoded = decode_utf8(raw);

  icu::UnicodeString text = icu::UnicodeString::fromUTF32(
      reinterpret_cast<const UChar32*>(decoded.data()),
      static_cast<int32_t>(decoded.size()));
  if (policy == NormalizationPolicy::kCompose) {
    text = apply(instance(true), text);
  } else {
    icu::UnicodeString decomposed = apply(instance(false), text);
    icu::UnicodeString stripped;
    for (int32_t i = 0; i < decomposed.length();) {
      const UChar32 c = decomposed.char32At(i);
      if (u_charType(c) != U_NON_SPACING_MARK) stripped.append(c);
      i += U16_LENGTH(c);
    }
    text = apply(instance(true), stripped);
  }

  std::u32string composed(static_cast<std::size_t>(text.countChar32()), U'\0');
  UErrorCode status = U_ZERO_ERROR;
  text.toUTF32(reinterpret_cast<UChar32*>(composed.data()),
               static_cast<int32_t>(composed.size()), status);

  NormalizedText out;
  out.raw_ = std::string(raw);
  out.normalized_ = encode_utf8(collapse_whitespace(composed));
  out.policy_ = policy;
  return out;
}

std::string normalize_string(std::string_view raw, NormalizationPolicy policy) {
  return normalize(raw, policy).normalized();
}

bool is_punctuation(std::string_view word) {
  if (word.empty()) return false;
  const std::u32string cps = decode_utf8(word);
  return std::all_of(cps.begin(), cps.end(), is_punct);
}

std::vector<std::string> tokenize(std::string_view surface, TokenScheme scheme) {
  if (scheme == TokenScheme::kWord) return {std::string(surface)};
  std::vector<std::string> tokens;
  for (char32_t c : decode_utf8(surface)) tokens.push_back(encode_utf8(std::u32string(1, c)));
  return tokens;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  return std::accumulate(tokens.begin(), tokens.end(), std::string());
}

std::vector<WordSpan> segment_words(const NormalizedText& text, std::string_view doc_id,
                                    TokenScheme scheme) {
  const std::string& s = text.normalized();
  const std::u32string cps = decode_utf8(s);

  // Byte offset of every codepoint, plus the end sentinel.
  std::vector<std::size_t> offset(cps.size() + 1, 0);
  for (std::size_t i = 0, byte = 0; i < cps.size(); ++i) {
    offset[i] = byte;
    byte += encode_utf8(std::u32string_view(&cps[i], 1)).size();
    offset[i + 1] = byte;
  }

  std::vector<WordSpan> spans;
  auto emit = [&](std::size_t begin, std::size_t end, bool punct) {
    WordSpan span;
    span.doc_id = std::string(doc_id);
    span.word_index = spans.size();
    span.char_start = offset[begin];
    span.char_end = offset[end];
    span.surface = s.substr(span.char_start, span.char_end - span.char_start);
    span.tokens = tokenize(span.surface, scheme);
    span.punctuation = punct;
    spans.push_back(std::move(span));
  };

  std::size_t i = 0;
  while (i < cps.size()) {
    const char32_t c = cps[i];
    if (is_space(c)) {
      ++i;
    } else if (is_punct(c)) {
      emit(i, i + 1, true);
      ++i;
    } else {
      std::size_t j = i + 1;
      while (j < cps.size()) {
        if (is_word_char(cps[j])) {
          ++j;
        } else if (is_connector(cps[j]) && j + 1 < cps.size() && is_word_char(cps[j + 1])) {
          j += 2;
        } else {
          break;
        }
      }
      emit(i, j, false);
      i = j;
    }
  }
  return spans;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(std::u32string_view(decode_utf8(a)), std::u32string_view(decode_utf8(b)));
}

}  // namespace lectio
