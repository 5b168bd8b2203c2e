#include "lectio/provider.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lectio/error.hpp"

namespace lectio {

void validate(const ConditionalQuery& query) {
  if (query.masked_index >= query.context.size()) {
    throw Error(ErrorCode::kQuery, "masked index " + std::to_string(query.masked_index) +
                                       " out of range for a context of " +
                                       std::to_string(query.context.size()) + " words");
  }
  if (query.mask_width == 0) throw Error(ErrorCode::kQuery, "mask width must be at least 1");
}

double ConditionalDistribution::probability(WordId id) const {
  for (const auto& [w, p] : support) {
    if (w == id) return p;
  }
  return floor;
}

void Provider::unsupported(std::string_view capability) const {
  throw Error(ErrorCode::kCapability,
              "provider '" + name() + "' does not support " + std::string(capability));
}

ConditionalDistribution Provider::conditional(const ConditionalQuery&) const {
  unsupported("conditional");
}

std::vector<double> Provider::log_probabilities(const ConditionalQuery&,
                                                std::span<const std::string_view>) const {
  unsupported("conditional");
}

double Provider::log_probability(const ConditionalQuery& query, std::string_view word) const {
  const std::string_view words[] = {word};
  return log_probabilities(query, words).front();
}

std::vector<std::size_t> Provider::mask_widths(std::string_view, std::span<const std::string>,
                                               std::size_t) const {
  if (!capabilities().conditional) unsupported("conditional");
  return {1};
}

std::optional<std::vector<double>> Provider::token_chances(std::string_view,
                                                           std::span<const std::string>,
                                                           std::size_t) const {
  if (!capabilities().conditional) unsupported("conditional");
  return std::nullopt;
}

PositionProbabilities Provider::position_probabilities(std::string_view,
                                                       std::span<const std::string>) const {
  unsupported("pseudo_likelihood");
}

double Provider::pseudo_likelihood(std::string_view doc_id, std::span<const std::string> context,
                                   const Variant* variant) const {
  if (!capabilities().pseudo_likelihood) unsupported("pseudo_likelihood");
  std::vector<std::string> seq(context.begin(), context.end());
  if (variant != nullptr) {
    if (variant->index >= seq.size()) {
      throw Error(ErrorCode::kQuery, "variant index out of range");
    }
    seq[variant->index] = variant->word;
  }
  const PositionProbabilities probs = position_probabilities(doc_id, seq);
  double total = 0.0;
  for (double p : probs.per_position) total += std::log(p);
  return total;
}

double Provider::pseudo_likelihood_ratio(std::string_view doc_id,
                                         std::span<const std::string> context,
                                         const Variant& variant) const {
  return pseudo_likelihood(doc_id, context, &variant) - pseudo_likelihood(doc_id, context);
}

WordReplacedScores Provider::replaced_scores_at(std::string_view, std::span<const std::string>,
                                                std::size_t) const {
  unsupported("replaced");
}

TokenReplacedScores Provider::replaced_scores(std::string_view doc_id,
                                              std::span<const std::string> context) const {
  TokenReplacedScores out;
  out.per_word.reserve(context.size());
  for (std::size_t i = 0; i < context.size(); ++i) {
    out.per_word.push_back(replaced_scores_at(doc_id, context, i));
  }
  return out;
}

UniformProvider::UniformProvider(std::shared_ptr<const Vocabulary> vocab)
    : vocab_(std::move(vocab)) {
  if (!vocab_ || vocab_->empty()) {
    throw Error(ErrorCode::kBuild, "uniform provider needs a non-empty vocabulary");
  }
}

ConditionalDistribution UniformProvider::conditional(const ConditionalQuery& query) const {
  validate(query);
  ConditionalDistribution d;
  const double p = 1.0 / static_cast<double>(vocab_->size());
  d.support.reserve(vocab_->size());
  for (WordId id = 0; id < vocab_->size(); ++id) d.support.emplace_back(id, p);
  d.listed_mass = 1.0;
  d.floor = p;
  return d;
}

std::vector<double> UniformProvider::log_probabilities(
    const ConditionalQuery& query, std::span<const std::string_view> words) const {
  validate(query);
  return std::vector<double>(words.size(), -std::log(static_cast<double>(vocab_->size())));
}

}  // namespace lectio
