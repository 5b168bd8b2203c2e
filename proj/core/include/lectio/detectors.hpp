#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lectio/candidate_index.hpp"
#include "lectio/document.hpp"
#include "lectio/provider.hpp"

namespace lectio {

enum class DetectorKind { kCcr, kPllr, kDiscriminator, kLlm };
enum class TokenAggregation { kMax, kMean };

std::string_view to_string(DetectorKind kind);
// Throws Error(kConfig) for unknown names.
DetectorKind parse_detector_kind(std::string_view name);
std::string_view to_string(TokenAggregation aggregation);
TokenAggregation parse_token_aggregation(std::string_view name);

struct DetectorConfig {
  DetectorKind kind = DetectorKind::kCcr;
  std::size_t radius = 1;
  // Keep only candidates among the provider's top-b suggestions (the observed
  // word is always kept). Unset means exact enumeration.
  std::optional<std::size_t> beam_truncation;
  TokenAggregation aggregation = TokenAggregation::kMax;
  double zero_score = 0.0;

  // Throws Error(kConfig).
  void validate() const;
};

// T(w, i). Log-ratio scale for ccr/pllr, [0, 1] for discriminator and llm.
struct ErrorScore {
  std::string doc_id;
  std::size_t word_index = 0;
  std::string surface;
  double score = 0.0;
  std::string detector;
  std::optional<std::string> best_alternative;
  bool abstained = false;
};

ErrorScore ccr_score(const WordSpan& word, std::span<const std::string> context,
                     const Provider& provider, const NeighborIndex& index,
                     const DetectorConfig& config);

ErrorScore pllr_score(const WordSpan& word, std::span<const std::string> context,
                      const Provider& provider, const NeighborIndex& index,
                      const DetectorConfig& config);

ErrorScore discriminator_score(const WordSpan& word, std::span<const std::string> context,
                               const Provider& provider, const DetectorConfig& config);

// Scores one word of a document.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual ErrorScore score(const Document& doc, std::size_t word_index) const = 0;
  virtual std::string fingerprint() const = 0;
};

// ccr, pllr or discriminator; llm detectors come from the judge module.
// `index` may be null for the discriminator.
std::unique_ptr<Detector> make_detector(const DetectorConfig& config,
                                        std::shared_ptr<const Provider> provider,
                                        std::shared_ptr<const NeighborIndex> index);

std::string detector_fingerprint(const DetectorConfig& config, const Provider& provider);

// Every non-punctuation word, ordered by (doc_id, word_index). Words are
// scored on up to `threads` workers.
std::vector<ErrorScore> score_corpus(std::span<const Document> docs, const Detector& detector,
                                     std::size_t threads = 1);

// Descending by score, ties by (doc_id, word_index); min(top_n, count) rows.
void rank_scores(std::vector<ErrorScore>& scores);
std::vector<ErrorScore> rank_corpus(std::span<const Document> docs, const Detector& detector,
                                    std::size_t top_n, std::size_t threads = 1);

// Nine significant digits.
std::string format_score(double value);

// Header: doc_id,word_index,surface,score,detector,best_alternative
void write_scores_csv(std::ostream& out, std::span<const ErrorScore> scores);
std::vector<ErrorScore> read_scores_csv(const std::filesystem::path& path);

}  // namespace lectio
