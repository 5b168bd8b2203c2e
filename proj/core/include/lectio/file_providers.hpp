#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "lectio/provider.hpp"

namespace lectio {

// Top-N masked conditionals exported by an external model.
//
//   #mlm-logits v1 vocab=<sha256 of the vocabulary>
//   doc<TAB>index<TAB>mask_width<TAB>word:prob,word:prob,...
//
// Unlisted words receive (1 - listed mass) / (V - N), bounded below by
// kMinFloor so lookups stay finite. An optional token-chance file
// (doc<TAB>index<TAB>p1,p2,...) supplies sub-word p(t_j | t_-j).
class LogitsFileProvider final : public Provider {
 public:
  static constexpr double kMassTolerance = 1e-6;
  static constexpr double kMinFloor = 1e-30;

  static std::shared_ptr<const LogitsFileProvider> load(
      const std::filesystem::path& logits, std::shared_ptr<const Vocabulary> vocab,
      const std::optional<std::filesystem::path>& token_chances = std::nullopt);

  std::string name() const override { return "logits:" + source_; }
  Capabilities capabilities() const override { return {true, false, false}; }
  std::shared_ptr<const Vocabulary> vocabulary() const override { return vocab_; }

  ConditionalDistribution conditional(const ConditionalQuery& query) const override;
  std::vector<double> log_probabilities(const ConditionalQuery& query,
                                        std::span<const std::string_view> words) const override;
  std::vector<std::size_t> mask_widths(std::string_view doc_id,
                                       std::span<const std::string> context,
                                       std::size_t index) const override;
  std::optional<std::vector<double>> token_chances(std::string_view doc_id,
                                                   std::span<const std::string> context,
                                                   std::size_t index) const override;
  bool exposes_token_chances() const override { return !chances_.empty(); }

  std::size_t record_count() const noexcept { return records_.size(); }

 private:
  using Key = std::tuple<std::string, std::size_t, std::size_t>;

  const ConditionalDistribution& record(const ConditionalQuery& query) const;

  std::shared_ptr<const Vocabulary> vocab_;
  std::string source_;
  std::map<Key, ConditionalDistribution> records_;
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> chances_;
};

// Per-token replaced-token probabilities from a discriminator.
//
//   doc<TAB>index<TAB>p1,p2,...[<TAB>tok1 tok2 ...]
//
// The optional token column lets scoring verify the decomposition against
// the word it is applied to.
class DiscriminatorFileProvider final : public Provider {
 public:
  static std::shared_ptr<const DiscriminatorFileProvider> load(const std::filesystem::path& path);

  std::string name() const override { return "discriminator:" + source_; }
  Capabilities capabilities() const override { return {false, false, true}; }
  WordReplacedScores replaced_scores_at(std::string_view doc_id,
                                        std::span<const std::string> context,
                                        std::size_t index) const override;

 private:
  std::string source_;
  std::map<std::pair<std::string, std::size_t>, WordReplacedScores> records_;
};

// Pseudo-log-likelihoods exported by an external model.
//
//   doc<TAB>variant_index<TAB>variant_word<TAB>logp
//
// The unmodified sequence uses variant_index "*" and an empty word; a variant
// whose word equals the observed word resolves to that record.
class PseudoLikelihoodFileProvider final : public Provider {
 public:
  static std::shared_ptr<const PseudoLikelihoodFileProvider> load(
      const std::filesystem::path& path);

  std::string name() const override { return "pll:" + source_; }
  Capabilities capabilities() const override { return {false, true, false}; }
  double pseudo_likelihood(std::string_view doc_id, std::span<const std::string> context,
                           const Variant* variant = nullptr) const override;

 private:
  std::string source_;
  std::map<std::string, double> originals_;
  std::map<std::tuple<std::string, std::size_t, std::string>, double> variants_;
};

}  // namespace lectio
