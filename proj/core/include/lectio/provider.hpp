#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lectio/vocabulary.hpp"

namespace lectio {

struct Capabilities {
  bool conditional = false;
  bool pseudo_likelihood = false;
  bool replaced = false;
};

// A document's word surfaces with one position masked by `mask_width` slots.
struct ConditionalQuery {
  std::string_view doc_id;
  std::span<const std::string> context;
  std::size_t masked_index = 0;
  std::size_t mask_width = 1;
};

// Throws Error(kQuery) for an out-of-range index or zero mask width.
void validate(const ConditionalQuery& query);

struct ConditionalDistribution {
  // Descending by probability, ties by id.
  std::vector<std::pair<WordId, double>> support;
  double listed_mass = 0.0;
  bool truncated = false;
  // Probability assigned to any word absent from `support`.
  double floor = 0.0;

  double probability(WordId id) const;
};

struct PositionProbabilities {
  std::vector<double> per_position;
};

struct Variant {
  std::size_t index = 0;
  std::string word;
};

struct WordReplacedScores {
  std::vector<double> per_token;
  // Token strings as stored by the exporter; empty when it stored none.
  std::vector<std::string> tokens;
};

struct TokenReplacedScores {
  std::vector<WordReplacedScores> per_word;
};

// Source of model probabilities. Every method outside the declared
// capabilities throws Error(kCapability); nothing falls back silently.
class Provider {
 public:
  virtual ~Provider() = default;

  virtual std::string name() const = 0;
  virtual Capabilities capabilities() const = 0;

  // Vocabulary that WordIds in conditional() refer to; null when the
  // provider has no conditional capability.
  virtual std::shared_ptr<const Vocabulary> vocabulary() const { return nullptr; }

  virtual ConditionalDistribution conditional(const ConditionalQuery& query) const;

  // Natural-log probabilities of each word filling the masked slot. Words
  // outside the listed support receive the provider's floor.
  virtual std::vector<double> log_probabilities(const ConditionalQuery& query,
                                                std::span<const std::string_view> words) const;
  double log_probability(const ConditionalQuery& query, std::string_view word) const;

  // Mask widths available for confidence at a position.
  virtual std::vector<std::size_t> mask_widths(std::string_view doc_id,
                                               std::span<const std::string> context,
                                               std::size_t index) const;

  // Per-token p(t_j | t_-j) of the word at `index`, when the source exposes
  // sub-word conditionals.
  virtual std::optional<std::vector<double>> token_chances(std::string_view doc_id,
                                                           std::span<const std::string> context,
                                                           std::size_t index) const;
  virtual bool exposes_token_chances() const { return false; }

  virtual PositionProbabilities position_probabilities(
      std::string_view doc_id, std::span<const std::string> context) const;

  // log p̂ of the context, or of the context with `variant` substituted.
  virtual double pseudo_likelihood(std::string_view doc_id, std::span<const std::string> context,
                                   const Variant* variant = nullptr) const;

  // log p̂(variant) - log p̂(original).
  virtual double pseudo_likelihood_ratio(std::string_view doc_id,
                                         std::span<const std::string> context,
                                         const Variant& variant) const;

  virtual WordReplacedScores replaced_scores_at(std::string_view doc_id,
                                                std::span<const std::string> context,
                                                std::size_t index) const;
  TokenReplacedScores replaced_scores(std::string_view doc_id,
                                      std::span<const std::string> context) const;

 protected:
  [[noreturn]] void unsupported(std::string_view capability) const;
};

// p(w) = 1/V for every word.
class UniformProvider final : public Provider {
 public:
  explicit UniformProvider(std::shared_ptr<const Vocabulary> vocab);

  std::string name() const override { return "uniform"; }
  Capabilities capabilities() const override { return {true, false, false}; }
  std::shared_ptr<const Vocabulary> vocabulary() const override { return vocab_; }
  ConditionalDistribution conditional(const ConditionalQuery& query) const override;
  std::vector<double> log_probabilities(const ConditionalQuery& query,
                                        std::span<const std::string_view> words) const override;

 private:
  std::shared_ptr<const Vocabulary> vocab_;
};

}  // namespace lectio
