#include "lectio/ngram_provider.hpp"

#include <algorithm>
#include <cmath>

#include "lectio/error.hpp"

namespace lectio {
namespace {

std::uint64_t key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

NgramTrainer::NgramTrainer(std::shared_ptr<const Vocabulary> vocab)
    : model_(new NgramProvider()) {
  if (!vocab || vocab->empty()) {
    throw Error(ErrorCode::kBuild, "n-gram trainer needs a non-empty vocabulary");
  }
  model_->vocab_ = std::move(vocab);
  const auto v = static_cast<NgramProvider::Id>(model_->vocab_->size());
  for (NgramProvider::Id id = 0; id < v; ++id) model_->ids_.emplace(model_->vocab_->word(id), id);
  model_->bos_ = v;
  model_->eos_ = v + 1;
  model_->unseen_ = v + 2;
}

void NgramTrainer::add_document(std::span<const std::string> words) {
  if (built_) throw Error(ErrorCode::kBuild, "n-gram trainer already built");
  auto& m = *model_;
  NgramProvider::Id prev = m.bos_;
  for (const std::string& w : words) {
    auto [it, inserted] = m.ids_.emplace(w, static_cast<NgramProvider::Id>(m.ids_.size() + 3));
    ++m.bigrams_[key(prev, it->second)];
    prev = it->second;
    ++m.tokens_;
  }
  ++m.bigrams_[key(prev, m.eos_)];
}

std::shared_ptr<const NgramProvider> NgramTrainer::build() {
  if (built_) throw Error(ErrorCode::kBuild, "n-gram trainer already built");
  built_ = true;
  auto& m = *model_;
  const std::size_t ids = m.ids_.size() + 3;
  const std::size_t v = m.vocab_->size();
  m.vocab_successors_.assign(ids, {});
  m.out_to_vocab_.assign(ids, 0);
  m.in_from_vocab_.assign(ids, 0);
  for (const auto& [k, c] : m.bigrams_) {
    const auto a = static_cast<NgramProvider::Id>(k >> 32);
    const auto b = static_cast<NgramProvider::Id>(k & 0xFFFFFFFFu);
    if (b < v) {
      m.vocab_successors_[a].emplace_back(b, c);
      m.out_to_vocab_[a] += c;
    }
    if (a < v) m.in_from_vocab_[b] += c;
  }
  for (auto& s : m.vocab_successors_) std::sort(s.begin(), s.end());
  return std::move(model_);
}

NgramProvider::Id NgramProvider::lookup(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? unseen_ : it->second;
}

std::uint64_t NgramProvider::count(Id a, Id b) const {
  auto it = bigrams_.find(key(a, b));
  return it == bigrams_.end() ? 0 : it->second;
}

std::uint64_t NgramProvider::bigram_count(std::string_view left, std::string_view right) const {
  auto side = [&](std::string_view w, Id boundary) {
    if (w == "<s>" || w == "</s>") return boundary;
    return lookup(w);
  };
  return count(side(left, bos_), side(right, eos_));
}

double NgramProvider::normalizer(Id a, Id b) const {
  double cross = 0.0;
  if (a < vocab_successors_.size()) {
    for (const auto& [w, c] : vocab_successors_[a]) {
      cross += static_cast<double>(c) * static_cast<double>(count(w, b));
    }
  }
  const double out = a < out_to_vocab_.size() ? static_cast<double>(out_to_vocab_[a]) : 0.0;
  const double in = b < in_from_vocab_.size() ? static_cast<double>(in_from_vocab_[b]) : 0.0;
  return cross + out + in + static_cast<double>(vocab_->size());
}

double NgramProvider::weight(Id a, Id w, Id b) const {
  return static_cast<double>(count(a, w) + 1) * static_cast<double>(count(w, b) + 1);
}

ConditionalDistribution NgramProvider::conditional(const ConditionalQuery& query) const {
  validate(query);
  const std::size_t i = query.masked_index;
  const Id a = i == 0 ? bos_ : lookup(query.context[i - 1]);
  const Id b = i + 1 == query.context.size() ? eos_ : lookup(query.context[i + 1]);

  ConditionalDistribution d;
  d.support.reserve(vocab_->size());
  double z = 0.0;
  for (Id w = 0; w < vocab_->size(); ++w) {
    const double u = weight(a, w, b);
    d.support.emplace_back(w, u);
    z += u;
  }
  for (auto& [w, p] : d.support) p /= z;
  std::sort(d.support.begin(), d.support.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second > y.second : x.first < y.first;
  });
  d.listed_mass = 1.0;
  d.floor = 1.0 / z;
  return d;
}

std::vector<double> NgramProvider::log_probabilities(
    const ConditionalQuery& query, std::span<const std::string_view> words) const {
  validate(query);
  const std::size_t i = query.masked_index;
  const Id a = i == 0 ? bos_ : lookup(query.context[i - 1]);
  const Id b = i + 1 == query.context.size() ? eos_ : lookup(query.context[i + 1]);
  const double log_z = std::log(normalizer(a, b));
  const Id v = static_cast<Id>(vocab_->size());
  std::vector<double> out;
  out.reserve(words.size());
  for (std::string_view word : words) {
    const Id w = lookup(word);
    out.push_back(w < v ? std::log(weight(a, w, b)) - log_z : -log_z);
  }
  return out;
}

double NgramProvider::position_log_prob(std::span<const std::string> seq, std::size_t j,
                                        std::string_view override_word,
                                        std::size_t override_index) const {
  auto at = [&](std::size_t k) -> std::string_view {
    return k == override_index ? override_word : std::string_view(seq[k]);
  };
  const Id a = j == 0 ? bos_ : lookup(at(j - 1));
  const Id b = j + 1 == seq.size() ? eos_ : lookup(at(j + 1));
  const Id w = lookup(at(j));
  const double log_z = std::log(normalizer(a, b));
  return w < vocab_->size() ? std::log(weight(a, w, b)) - log_z : -log_z;
}

PositionProbabilities NgramProvider::position_probabilities(
    std::string_view, std::span<const std::string> context) const {
  PositionProbabilities out;
  out.per_position.reserve(context.size());
  const std::size_t none = context.size();
  for (std::size_t j = 0; j < context.size(); ++j) {
    out.per_position.push_back(std::exp(position_log_prob(context, j, {}, none)));
  }
  return out;
}

double NgramProvider::pseudo_likelihood_ratio(std::string_view,
                                              std::span<const std::string> context,
                                              const Variant& variant) const {
  if (variant.index >= context.size()) {
    throw Error(ErrorCode::kQuery, "variant index out of range");
  }
  const std::size_t none = context.size();
  const std::size_t lo = variant.index == 0 ? 0 : variant.index - 1;
  const std::size_t hi = std::min(variant.index + 2, context.size());
  double delta = 0.0;
  for (std::size_t j = lo; j < hi; ++j) {
    delta += position_log_prob(context, j, variant.word, variant.index) -
             position_log_prob(context, j, {}, none);
  }
  return delta;
}

}  // namespace lectio
