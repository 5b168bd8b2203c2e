#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lectio/candidate_index.hpp"
#include "lectio/document.hpp"

namespace lectio {

inline constexpr std::string_view kDatasetSchema = "logion-errors/v1";

enum class Label { kError, kNonError, kPlausible, kUncertain };
enum class ErrorCategory { kDigitization, kPrint, kScribal };
enum class Provenance { kExpertLabeled, kPresumedNegative };

inline constexpr std::array<Label, 4> kAllLabels = {Label::kError, Label::kNonError,
                                                    Label::kPlausible, Label::kUncertain};
inline constexpr std::array<ErrorCategory, 3> kAllCategories = {
    ErrorCategory::kDigitization, ErrorCategory::kPrint, ErrorCategory::kScribal};

std::string_view to_string(Label label);
std::string_view to_string(ErrorCategory category);
std::string_view to_string(Provenance provenance);
// Throw Error(kSchema) on unknown names.
Label parse_label(std::string_view name);
ErrorCategory parse_category(std::string_view name);

struct LabeledExample {
  std::string doc_id;
  std::size_t word_index = 0;
  std::string surface;
  Label label = Label::kNonError;
  std::optional<ErrorCategory> category;  // present iff label == kError
  std::string expert_notes;
  std::optional<std::string> suggested_alternative;
  std::string context_text;
  std::optional<std::string> part;
  Provenance provenance = Provenance::kExpertLabeled;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

// Throws Error(kSchema) when the category/label invariant is broken.
void validate(const LabeledExample& example);

// One canonical JSON object, fields in fixed order, no trailing newline.
std::string to_json_line(const LabeledExample& example);
LabeledExample from_json_line(std::string_view line, const std::string& context);

struct DatasetSummary {
  // counts[label][category slot]; slot 3 counts rows without a category.
  std::array<std::array<std::size_t, 4>, 4> counts{};
  std::size_t total = 0;

  std::size_t label_count(Label label) const;
  std::size_t category_count(ErrorCategory category) const;
  std::size_t definitive() const;
  std::size_t positives() const { return label_count(Label::kError); }
};

DatasetSummary summarize(std::span<const LabeledExample> examples);
std::string format_summary(const DatasetSummary& summary);

// Validates the schema of every row and re-segments each context to check
// that word_index addresses surface. All bad rows are reported together.
std::vector<LabeledExample> load_dataset(
    const std::filesystem::path& path,
    NormalizationPolicy policy = NormalizationPolicy::kCompose);

void write_dataset(const std::filesystem::path& path, std::span<const LabeledExample> examples);
std::string serialize_dataset(std::span<const LabeledExample> examples);

// Maps free-text expert verdicts ("GOOD FLAG", ...) onto labels.
struct LabelMapping {
  std::map<std::string, Label> table;  // keys upper-case, trailing '.' removed

  static LabelMapping defaults();
  std::optional<Label> map(std::string_view verdict) const;
};

// Reads records keyed by the published field names ("Transmitted Word in
// Question", "Expert Label", "Model-Suggested Alternative", "Further Expert
// Notes", "Word Index in Text", "Text"); JSON array or JSON lines.
std::vector<LabeledExample> import_published(const std::filesystem::path& path,
                                             const LabelMapping& mapping = LabelMapping::defaults());

struct EvaluationExample {
  LabeledExample example;
  int y = 0;
};

struct EvaluationSet {
  std::vector<EvaluationExample> examples;

  std::size_t positives() const;
  std::size_t negatives() const;
};

// Drops plausible/uncertain rows. With expert_only the presumed negatives
// are left out.
EvaluationSet build_evaluation_set(std::span<const LabeledExample> expert,
                                   std::span<const LabeledExample> presumed_negatives,
                                   bool expert_only = false);

// Uniform sample without replacement over non-punctuation spans, returned in
// (doc_id, word_index) order. Throws Error(kSize) when n exceeds the corpus.
std::vector<LabeledExample> sample_presumed_negatives(std::span<const Document> docs,
                                                      std::size_t n, std::uint64_t seed);

enum class InjectionChannel { kCharSubstitute, kWordNeighborSwap };

std::string_view to_string(InjectionChannel channel);
InjectionChannel parse_injection_channel(std::string_view name);

struct InjectedError {
  std::size_t word_index = 0;
  std::string original;
  std::string corrupted;
};

struct Injection {
  std::vector<std::string> words;      // corrupted document
  std::vector<InjectedError> errors;   // ascending by word_index
  std::vector<std::size_t> skipped;    // selected but no applicable edit
};

// Each lexical word is selected independently with probability `rate`.
// char_substitute replaces one codepoint with a different alphabet letter;
// word_neighbor_swap substitutes a uniform member of W^1 minus the word
// itself (requires `index`). Throws Error(kSize) on an empty document.
Injection inject_artificial_errors(const Document& doc, double rate, InjectionChannel channel,
                                   std::uint64_t seed, const NeighborIndex* index,
                                   std::u32string_view alphabet);

// Letters (non-punctuation codepoints) used across the corpus, sorted.
std::u32string corpus_alphabet(std::span<const Document> docs);

std::string substitute_char(std::string_view word, std::size_t position, char32_t replacement);

}  // namespace lectio
