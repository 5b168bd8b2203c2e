#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "lectio/text.hpp"
#include "lectio/vocabulary.hpp"

namespace lectio {

// A normalized, segmented text ready for scoring. `words` mirrors the span
// surfaces and is the context handed to providers.
struct Document {
  std::string id;
  NormalizedText text;
  std::vector<WordSpan> spans;
  std::vector<std::string> words;

  std::size_t lexical_count() const;
};

Document make_document(std::string id, std::string_view raw,
                       NormalizationPolicy policy = NormalizationPolicy::kCompose,
                       TokenScheme scheme = TokenScheme::kWord);

// Every regular *.txt file in `dir`, doc id = file stem, sorted by id.
std::vector<Document> load_corpus(const std::filesystem::path& dir,
                                  NormalizationPolicy policy = NormalizationPolicy::kCompose,
                                  TokenScheme scheme = TokenScheme::kWord);

// Lexical (non-punctuation) words in order of first appearance.
Vocabulary vocabulary_from_documents(const std::vector<Document>& docs,
                                     NormalizationPolicy policy = NormalizationPolicy::kCompose);

// Words joined by single spaces; re-segmenting it yields the same spans.
std::string render_words(const std::vector<std::string>& words);

}  // namespace lectio
