#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lectio/provider.hpp"

namespace lectio {

// Bidirectional bigram reference model:
//
//   p(w | a, b) = (c(a,w) + 1) (c(w,b) + 1) / Z(a, b),   w in V
//
// where a and b are the left and right neighbors (document boundaries are
// padded with <s> and </s>) and Z sums the numerator over the vocabulary.
// Strings outside V, including OOV observed words, receive 1 / Z.
// Mask width is ignored: every width sees the same two neighbors.
class NgramProvider final : public Provider {
 public:
  std::string name() const override { return "ngram"; }
  Capabilities capabilities() const override { return {true, true, false}; }
  std::shared_ptr<const Vocabulary> vocabulary() const override { return vocab_; }

  ConditionalDistribution conditional(const ConditionalQuery& query) const override;
  std::vector<double> log_probabilities(const ConditionalQuery& query,
                                        std::span<const std::string_view> words) const override;
  PositionProbabilities position_probabilities(std::string_view doc_id,
                                               std::span<const std::string> context) const override;
  // Only the three positions around the substitution change; the rest cancel.
  double pseudo_likelihood_ratio(std::string_view doc_id, std::span<const std::string> context,
                                 const Variant& variant) const override;

  std::uint64_t bigram_count(std::string_view left, std::string_view right) const;
  std::uint64_t token_count() const noexcept { return tokens_; }

 private:
  friend class NgramTrainer;
  using Id = std::uint32_t;

  NgramProvider() = default;

  Id lookup(std::string_view word) const;
  std::uint64_t count(Id a, Id b) const;
  // Z(a, b) via the sparse expansion of the product.
  double normalizer(Id a, Id b) const;
  double weight(Id a, Id w, Id b) const;
  double position_log_prob(std::span<const std::string> seq, std::size_t j,
                           std::string_view override_word, std::size_t override_index) const;

  std::shared_ptr<const Vocabulary> vocab_;
  std::unordered_map<std::string, Id> ids_;  // vocabulary words first, then other strings
  Id bos_ = 0;
  Id eos_ = 0;
  Id unseen_ = 0;
  std::unordered_map<std::uint64_t, std::uint32_t> bigrams_;
  std::vector<std::vector<std::pair<Id, std::uint32_t>>> vocab_successors_;
  std::vector<std::uint64_t> out_to_vocab_;
  std::vector<std::uint64_t> in_from_vocab_;
  std::uint64_t tokens_ = 0;
};

// Single-use builder that accumulates bigram counts over training documents.
class NgramTrainer {
 public:
  explicit NgramTrainer(std::shared_ptr<const Vocabulary> vocab);

  void add_document(std::span<const std::string> words);
  std::shared_ptr<const NgramProvider> build();

 private:
  std::shared_ptr<NgramProvider> model_;
  bool built_ = false;
};

}  // namespace lectio
