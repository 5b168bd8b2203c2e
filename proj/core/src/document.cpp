#include "lectio/document.hpp"

#include <algorithm>
#include <unordered_set>

#include "lectio/error.hpp"
#include "lectio/hash.hpp"

namespace lectio {

std::size_t Document::lexical_count() const {
  return static_cast<std::size_t>(
      std::count_if(spans.begin(), spans.end(), [](const WordSpan& s) { return !s.punctuation; }));
}

Document make_document(std::string id, std::string_view raw, NormalizationPolicy policy,
                       TokenScheme scheme) {
  Document doc;
  doc.id = std::move(id);
  doc.text = normalize(raw, policy);
  doc.spans = segment_words(doc.text, doc.id, scheme);
  doc.words.reserve(doc.spans.size());
  for (const auto& s : doc.spans) doc.words.push_back(s.surface);
  return doc;
}

std::vector<Document> load_corpus(const std::filesystem::path& dir, NormalizationPolicy policy,
                                  TokenScheme scheme) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "corpus directory " + dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.stem().string() < b.stem().string(); });
  std::vector<Document> docs;
  docs.reserve(files.size());
  for (const auto& f : files) {
    try {
      docs.push_back(make_document(f.stem().string(), read_file(f), policy, scheme));
    } catch (const Error& e) {
      throw Error(e.code(), f.string() + ": " + e.what());
    }
  }
  return docs;
}

Vocabulary vocabulary_from_documents(const std::vector<Document>& docs,
                                     NormalizationPolicy policy) {
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  for (const auto& d : docs) {
    for (const auto& s : d.spans) {
      if (!s.punctuation && seen.insert(s.surface).second) words.push_back(s.surface);
    }
  }
  return Vocabulary::from_words(words, policy);
}

std::string render_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace lectio
