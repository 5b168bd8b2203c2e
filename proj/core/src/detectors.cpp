#include "lectio/detectors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>
#include <unordered_set>

#include "csv.hpp"
#include "lectio/error.hpp"
#include "lectio/hash.hpp"
#include "parse_util.hpp"

namespace lectio {

std::string_view to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kCcr: return "ccr";
    case DetectorKind::kPllr: return "pllr";
    case DetectorKind::kDiscriminator: return "discriminator";
    case DetectorKind::kLlm: return "llm";
  }
  return "ccr";
}

DetectorKind parse_detector_kind(std::string_view name) {
  for (DetectorKind k : {DetectorKind::kCcr, DetectorKind::kPllr, DetectorKind::kDiscriminator,
                         DetectorKind::kLlm}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorCode::kConfig, "unknown detector '" + std::string(name) +
                                      "' (expected ccr, pllr, discriminator or llm)");
}

std::string_view to_string(TokenAggregation aggregation) {
  return aggregation == TokenAggregation::kMax ? "max" : "mean";
}

TokenAggregation parse_token_aggregation(std::string_view name) {
  if (name == "max") return TokenAggregation::kMax;
  if (name == "mean") return TokenAggregation::kMean;
  throw Error(ErrorCode::kConfig, "unknown token aggregation '" + std::string(name) + "'");
}

void DetectorConfig::validate() const {
  if (beam_truncation && *beam_truncation < 1) {
    throw Error(ErrorCode::kConfig, "beam truncation must be at least 1");
  }
  if (zero_score != 0.0) throw Error(ErrorCode::kConfig, "zero score is fixed at 0");
}

namespace {

ErrorScore blank_score(const WordSpan& word, const DetectorConfig& config) {
  ErrorScore s;
  s.doc_id = word.doc_id;
  s.word_index = word.word_index;
  s.surface = word.surface;
  s.score = config.zero_score;
  return s;
}

// Candidate words permitted at one mask width under beam truncation.
std::unordered_set<std::string_view> beam_words(const Provider& provider,
                                                const ConditionalQuery& query, std::size_t beam) {
  const auto vocab = provider.vocabulary();
  if (!vocab) {
    throw Error(ErrorCode::kCapability,
                "provider '" + provider.name() + "' has no vocabulary for beam truncation");
  }
  const ConditionalDistribution d = provider.conditional(query);
  std::unordered_set<std::string_view> out;
  for (std::size_t r = 0; r < d.support.size() && r < beam; ++r) {
    out.insert(vocab->word(d.support[r].first));
  }
  return out;
}

void rethrow_with_position(const Error& e, const WordSpan& word) {
  throw Error(e.code(), std::string(e.what()) + " [scoring doc " + word.doc_id + ", index " +
                            std::to_string(word.word_index) + "]");
}

}  // namespace

ErrorScore ccr_score(const WordSpan& word, std::span<const std::string> context,
                     const Provider& provider, const NeighborIndex& index,
                     const DetectorConfig& config) {
  ErrorScore out = blank_score(word, config);
  const CandidateSet candidates = index.neighbors(word.surface, config.radius);
  if (candidates.empty()) return out;

  const Vocabulary& vocab = index.vocabulary();
  const std::size_t i = word.word_index;
  try {
    double chance = 0.0;
    const auto tokens = provider.token_chances(word.doc_id, context, i);
    if (tokens && !tokens->empty()) {
      chance = std::log(*std::min_element(tokens->begin(), tokens->end()));
    } else {
      chance = provider.log_probability(ConditionalQuery{word.doc_id, context, i, 1}, word.surface);
    }

    double confidence = -std::numeric_limits<double>::infinity();
    std::optional<WordId> best;
    for (std::size_t width : provider.mask_widths(word.doc_id, context, i)) {
      const ConditionalQuery query{word.doc_id, context, i, width};
      std::vector<std::string_view> words;
      std::vector<WordId> ids;
      std::unordered_set<std::string_view> allowed;
      if (config.beam_truncation) allowed = beam_words(provider, query, *config.beam_truncation);
      for (const Candidate& c : candidates.members) {
        const std::string& w = vocab.word(c.id);
        if (config.beam_truncation && c.distance != 0 && !allowed.contains(w)) continue;
        words.push_back(w);
        ids.push_back(c.id);
      }
      if (words.empty()) continue;
      const std::vector<double> lp = provider.log_probabilities(query, words);
      for (std::size_t k = 0; k < lp.size(); ++k) {
        if (lp[k] > confidence) {
          confidence = lp[k];
          best = ids[k];
        }
      }
    }
    if (!best) return out;
    out.score = confidence - chance;
    out.best_alternative = vocab.word(*best);
  } catch (const Error& e) {
    rethrow_with_position(e, word);
  }
  return out;
}

ErrorScore pllr_score(const WordSpan& word, std::span<const std::string> context,
                      const Provider& provider, const NeighborIndex& index,
                      const DetectorConfig& config) {
  ErrorScore out = blank_score(word, config);
  if (!provider.capabilities().pseudo_likelihood) {
    throw Error(ErrorCode::kCapability,
                "provider '" + provider.name() + "' does not support pseudo_likelihood");
  }
  const CandidateSet candidates = index.neighbors(word.surface, config.radius);
  if (candidates.empty()) return out;

  const Vocabulary& vocab = index.vocabulary();
  double best = 0.0;  // the identity variant
  std::string alternative = word.surface;
  try {
    for (const Candidate& c : candidates.members) {
      const std::string& w = vocab.word(c.id);
      if (w == word.surface) continue;
      const double r =
          provider.pseudo_likelihood_ratio(word.doc_id, context, Variant{word.word_index, w});
      if (r > best) {
        best = r;
        alternative = w;
      }
    }
  } catch (const Error& e) {
    rethrow_with_position(e, word);
  }
  out.score = best;
  out.best_alternative = alternative;
  return out;
}

ErrorScore discriminator_score(const WordSpan& word, std::span<const std::string> context,
                               const Provider& provider, const DetectorConfig& config) {
  ErrorScore out = blank_score(word, config);
  WordReplacedScores scores;
  try {
    scores = provider.replaced_scores_at(word.doc_id, context, word.word_index);
  } catch (const Error& e) {
    rethrow_with_position(e, word);
  }

  auto both = [&] {
    std::string msg = " (stored tokens:";
    for (const auto& t : scores.tokens) msg += " [" + t + "]";
    msg += "; word tokens:";
    for (const auto& t : word.tokens) msg += " [" + t + "]";
    return msg + ")";
  };
  const std::string where =
      " for '" + word.surface + "' at doc " + word.doc_id + ", index " + std::to_string(word.word_index);
  if (scores.per_token.empty()) {
    throw Error(ErrorCode::kAlignment, "no token scores" + where + both());
  }
  if (!scores.tokens.empty()) {
    std::string joined;
    for (std::size_t t = 0; t < scores.tokens.size(); ++t) {
      std::string_view tok = scores.tokens[t];
      if (t > 0 && tok.starts_with("##")) tok.remove_prefix(2);
      joined += tok;
    }
    if (scores.tokens.size() != scores.per_token.size() || joined != word.surface) {
      throw Error(ErrorCode::kAlignment, "token decomposition mismatch" + where + both());
    }
  }

  if (config.aggregation == TokenAggregation::kMax) {
    out.score = *std::max_element(scores.per_token.begin(), scores.per_token.end());
  } else {
    double sum = 0.0;
    for (double p : scores.per_token) sum += p;
    out.score = sum / static_cast<double>(scores.per_token.size());
  }
  return out;
}

std::string detector_fingerprint(const DetectorConfig& config, const Provider& provider) {
  std::string fp(to_string(config.kind));
  switch (config.kind) {
    case DetectorKind::kCcr:
      fp += "/k=" + std::to_string(config.radius);
      fp += "/beam=" + (config.beam_truncation ? std::to_string(*config.beam_truncation)
                                               : std::string("exact"));
      fp += provider.exposes_token_chances() ? "/chance=token-min" : "/chance=word";
      break;
    case DetectorKind::kPllr:
      fp += "/k=" + std::to_string(config.radius);
      break;
    case DetectorKind::kDiscriminator:
      fp += "/agg=" + std::string(to_string(config.aggregation));
      break;
    case DetectorKind::kLlm:
      break;
  }
  return fp + "/provider=" + provider.name();
}

namespace {

class ProviderDetector final : public Detector {
 public:
  ProviderDetector(DetectorConfig config, std::shared_ptr<const Provider> provider,
                   std::shared_ptr<const NeighborIndex> index)
      : config_(config),
        provider_(std::move(provider)),
        index_(std::move(index)),
        fingerprint_(detector_fingerprint(config_, *provider_)) {}

  ErrorScore score(const Document& doc, std::size_t word_index) const override {
    const WordSpan& span = doc.spans.at(word_index);
    ErrorScore s;
    switch (config_.kind) {
      case DetectorKind::kCcr:
        s = ccr_score(span, doc.words, *provider_, *index_, config_);
        break;
      case DetectorKind::kPllr:
        s = pllr_score(span, doc.words, *provider_, *index_, config_);
        break;
      default:
        s = discriminator_score(span, doc.words, *provider_, config_);
    }
    s.detector = fingerprint_;
    return s;
  }

  std::string fingerprint() const override { return fingerprint_; }

 private:
  DetectorConfig config_;
  std::shared_ptr<const Provider> provider_;
  std::shared_ptr<const NeighborIndex> index_;
  std::string fingerprint_;
};

}  // namespace

std::unique_ptr<Detector> make_detector(const DetectorConfig& config,
                                        std::shared_ptr<const Provider> provider,
                                        std::shared_ptr<const NeighborIndex> index) {
  config.validate();
  if (!provider) throw Error(ErrorCode::kConfig, "detector needs a provider");
  switch (config.kind) {
    case DetectorKind::kCcr:
      if (!provider->capabilities().conditional) {
        throw Error(ErrorCode::kCapability,
                    "provider '" + provider->name() + "' does not support conditional");
      }
      break;
    case DetectorKind::kPllr:
      if (!provider->capabilities().pseudo_likelihood) {
        throw Error(ErrorCode::kCapability,
                    "provider '" + provider->name() + "' does not support pseudo_likelihood");
      }
      break;
    case DetectorKind::kDiscriminator:
      if (!provider->capabilities().replaced) {
        throw Error(ErrorCode::kCapability,
                    "provider '" + provider->name() + "' does not support replaced");
      }
      break;
    case DetectorKind::kLlm:
      throw Error(ErrorCode::kConfig, "llm detectors are built from a Judge");
  }
  if (config.kind != DetectorKind::kDiscriminator) {
    if (!index) throw Error(ErrorCode::kConfig, "detector needs a neighbor index");
    if (config.radius > index->max_radius()) {
      throw Error(ErrorCode::kUnsupportedRadius,
                  "radius " + std::to_string(config.radius) + " exceeds the index build radius " +
                      std::to_string(index->max_radius()));
    }
  }
  return std::make_unique<ProviderDetector>(config, std::move(provider), std::move(index));
}

std::vector<ErrorScore> score_corpus(std::span<const Document> docs, const Detector& detector,
                                     std::size_t threads) {
  std::vector<const Document*> order;
  for (const auto& d : docs) order.push_back(&d);
  std::sort(order.begin(), order.end(),
            [](const Document* a, const Document* b) { return a->id < b->id; });

  std::vector<std::pair<const Document*, std::size_t>> jobs;
  for (const Document* d : order) {
    for (const auto& s : d->spans) {
      if (!s.punctuation) jobs.emplace_back(d, s.word_index);
    }
  }

  std::vector<ErrorScore> out(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    while (!failed.load()) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        out[j] = detector.score(*jobs[j].first, jobs[j].second);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  threads = std::max<std::size_t>(1, threads);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
  return out;
}

void rank_scores(std::vector<ErrorScore>& scores) {
  std::sort(scores.begin(), scores.end(), [](const ErrorScore& a, const ErrorScore& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
    return a.word_index < b.word_index;
  });
}

std::vector<ErrorScore> rank_corpus(std::span<const Document> docs, const Detector& detector,
                                    std::size_t top_n, std::size_t threads) {
  std::vector<ErrorScore> scores = score_corpus(docs, detector, threads);
  rank_scores(scores);
  if (scores.size() > top_n) scores.resize(top_n);
  return scores;
}

std::string format_score(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value == 0.0 ? 0.0 : value);
  return buf;
}

void write_scores_csv(std::ostream& out, std::span<const ErrorScore> scores) {
  out << "doc_id,word_index,surface,score,detector,best_alternative\n";
  for (const ErrorScore& s : scores) {
    out << detail::csv_row({s.doc_id, std::to_string(s.word_index), s.surface,
                            format_score(s.score), s.detector, s.best_alternative.value_or("")});
  }
}

std::vector<ErrorScore> read_scores_csv(const std::filesystem::path& path) {
  const auto rows = detail::parse_csv(read_file(path), path);
  if (rows.empty() || rows[0] != std::vector<std::string>{"doc_id", "word_index", "surface",
                                                          "score", "detector",
                                                          "best_alternative"}) {
    throw Error(ErrorCode::kSchema, path.string() +
                                        ": expected header doc_id,word_index,surface,score,"
                                        "detector,best_alternative");
  }
  std::vector<ErrorScore> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string ctx = detail::where(path, r + 1);
    if (row.size() != 6) throw Error(ErrorCode::kParse, ctx + ": expected 6 fields");
    ErrorScore s;
    s.doc_id = row[0];
    s.word_index = detail::parse_size(row[1], ctx);
    s.surface = row[2];
    s.score = detail::parse_double(row[3], ctx);
    if (!std::isfinite(s.score)) throw Error(ErrorCode::kParse, ctx + ": score is not finite");
    s.detector = row[4];
    if (!row[5].empty()) s.best_alternative = row[5];
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace lectio
