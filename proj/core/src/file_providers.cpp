#include "lectio/file_providers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "lectio/error.hpp"
#include "parse_util.hpp"

namespace lectio {
namespace {

using detail::chomp;
using detail::parse_double;
using detail::parse_size;
using detail::split;
using detail::where;

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

std::vector<double> parse_probabilities(std::string_view field, const std::string& ctx,
                                        bool allow_zero) {
  std::vector<double> out;
  for (std::string_view item : split(field, ',')) {
    const double p = parse_double(item, ctx);
    if (!(p >= 0.0 && p <= 1.0) || (!allow_zero && p == 0.0)) {
      throw Error(ErrorCode::kParse, ctx + ": probability " + std::string(item) +
                                         (allow_zero ? " outside [0,1]" : " outside (0,1]"));
    }
    out.push_back(p);
  }
  return out;
}

std::string coverage_message(std::string_view what, std::string_view doc, std::size_t index) {
  return std::string(what) + " has no entry for (doc " + std::string(doc) + ", index " +
         std::to_string(index) + ")";
}

}  // namespace

std::shared_ptr<const LogitsFileProvider> LogitsFileProvider::load(
    const std::filesystem::path& logits, std::shared_ptr<const Vocabulary> vocab,
    const std::optional<std::filesystem::path>& token_chances) {
  if (!vocab || vocab->empty()) {
    throw Error(ErrorCode::kBuild, "logits provider needs a non-empty vocabulary");
  }
  auto p = std::shared_ptr<LogitsFileProvider>(new LogitsFileProvider());
  p->vocab_ = vocab;
  p->source_ = logits.filename().string();

  std::ifstream in = open(logits);
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kSchema, logits.string() + ": empty logits file");
  }
  {
    const std::string_view header = chomp(line);
    const std::string_view prefix = "#mlm-logits v1 vocab=";
    if (header.substr(0, prefix.size()) != prefix) {
      throw Error(ErrorCode::kSchema, where(logits, 1) +
                                          ": expected header '#mlm-logits v1 vocab=<sha256>'");
    }
    const std::string_view hash = header.substr(prefix.size());
    if (hash != vocab->fingerprint()) {
      throw Error(ErrorCode::kSchema, where(logits, 1) + ": vocabulary hash " +
                                          std::string(hash) + " does not match " +
                                          vocab->fingerprint());
    }
  }

  const double v = static_cast<double>(vocab->size());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view text = chomp(line);
    if (text.empty() || text.front() == '#') continue;
    const std::string ctx = where(logits, lineno);
    const auto fields = split(text, '\t');
    if (fields.size() != 4) throw Error(ErrorCode::kParse, ctx + ": expected 4 tab-separated fields");
    const std::size_t index = parse_size(fields[1], ctx);
    const std::size_t width = parse_size(fields[2], ctx);
    if (width == 0) throw Error(ErrorCode::kParse, ctx + ": mask width must be at least 1");

    ConditionalDistribution d;
    for (std::string_view entry : split(fields[3], ',')) {
      const std::size_t colon = entry.rfind(':');
      if (colon == std::string_view::npos || colon == 0) {
        throw Error(ErrorCode::kParse, ctx + ": malformed entry '" + std::string(entry) + "'");
      }
      const auto id = vocab->id_of(entry.substr(0, colon));
      if (!id) {
        throw Error(ErrorCode::kParse, ctx + ": word '" + std::string(entry.substr(0, colon)) +
                                           "' is not in the vocabulary");
      }
      const double prob = parse_probabilities(entry.substr(colon + 1), ctx, false).front();
      if (std::any_of(d.support.begin(), d.support.end(),
                      [&](const auto& s) { return s.first == *id; })) {
        throw Error(ErrorCode::kParse, ctx + ": word listed twice");
      }
      d.support.emplace_back(*id, prob);
      d.listed_mass += prob;
    }
    if (d.listed_mass > 1.0 + kMassTolerance) {
      throw Error(ErrorCode::kParse, ctx + ": listed probability mass exceeds 1");
    }
    std::sort(d.support.begin(), d.support.end(), [](const auto& x, const auto& y) {
      return x.second != y.second ? x.second > y.second : x.first < y.first;
    });
    const double n = static_cast<double>(d.support.size());
    d.truncated = n < v;
    d.floor = d.truncated ? std::max(kMinFloor, (1.0 - d.listed_mass) / (v - n)) : kMinFloor;
    Key key{std::string(fields[0]), index, width};
    if (!p->records_.emplace(std::move(key), std::move(d)).second) {
      throw Error(ErrorCode::kParse, ctx + ": duplicate (doc, index, mask_width) record");
    }
  }

  if (token_chances) {
    std::ifstream tin = open(*token_chances);
    lineno = 0;
    while (std::getline(tin, line)) {
      ++lineno;
      const std::string_view text = chomp(line);
      if (text.empty() || text.front() == '#') continue;
      const std::string ctx = where(*token_chances, lineno);
      const auto fields = split(text, '\t');
      if (fields.size() != 3) throw Error(ErrorCode::kParse, ctx + ": expected 3 tab-separated fields");
      p->chances_[{std::string(fields[0]), parse_size(fields[1], ctx)}] =
          parse_probabilities(fields[2], ctx, false);
    }
  }
  return p;
}

const ConditionalDistribution& LogitsFileProvider::record(const ConditionalQuery& query) const {
  validate(query);
  auto it = records_.find(Key{std::string(query.doc_id), query.masked_index, query.mask_width});
  if (it == records_.end()) {
    throw Error(ErrorCode::kCoverage,
                coverage_message("logits file " + source_ + " (mask width " +
                                     std::to_string(query.mask_width) + ")",
                                 query.doc_id, query.masked_index));
  }
  return it->second;
}

ConditionalDistribution LogitsFileProvider::conditional(const ConditionalQuery& query) const {
  return record(query);
}

std::vector<double> LogitsFileProvider::log_probabilities(
    const ConditionalQuery& query, std::span<const std::string_view> words) const {
  const ConditionalDistribution& d = record(query);
  std::vector<double> out;
  out.reserve(words.size());
  for (std::string_view w : words) {
    const auto id = vocab_->id_of(w);
    out.push_back(std::log(id ? d.probability(*id) : d.floor));
  }
  return out;
}

std::vector<std::size_t> LogitsFileProvider::mask_widths(std::string_view doc_id,
                                                         std::span<const std::string> context,
                                                         std::size_t index) const {
  validate(ConditionalQuery{doc_id, context, index, 1});
  std::vector<std::size_t> widths;
  const std::string doc(doc_id);
  for (auto it = records_.lower_bound(Key{doc, index, 0});
       it != records_.end() && std::get<0>(it->first) == doc && std::get<1>(it->first) == index;
       ++it) {
    widths.push_back(std::get<2>(it->first));
  }
  if (widths.empty()) {
    throw Error(ErrorCode::kCoverage, coverage_message("logits file " + source_, doc_id, index));
  }
  return widths;
}

std::optional<std::vector<double>> LogitsFileProvider::token_chances(
    std::string_view doc_id, std::span<const std::string> context, std::size_t index) const {
  validate(ConditionalQuery{doc_id, context, index, 1});
  auto it = chances_.find({std::string(doc_id), index});
  if (it == chances_.end()) return std::nullopt;
  return it->second;
}

std::shared_ptr<const DiscriminatorFileProvider> DiscriminatorFileProvider::load(
    const std::filesystem::path& path) {
  auto p = std::shared_ptr<DiscriminatorFileProvider>(new DiscriminatorFileProvider());
  p->source_ = path.filename().string();
  std::ifstream in = open(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view text = chomp(line);
    if (text.empty() || text.front() == '#') continue;
    const std::string ctx = where(path, lineno);
    const auto fields = split(text, '\t');
    if (fields.size() != 3 && fields.size() != 4) {
      throw Error(ErrorCode::kParse, ctx + ": expected 3 or 4 tab-separated fields");
    }
    WordReplacedScores scores;
    scores.per_token = parse_probabilities(fields[2], ctx, true);
    if (fields.size() == 4) {
      for (std::string_view tok : split(fields[3], ' ')) scores.tokens.emplace_back(tok);
    }
    if (!p->records_.emplace(std::pair{std::string(fields[0]), parse_size(fields[1], ctx)},
                             std::move(scores))
             .second) {
      throw Error(ErrorCode::kParse, ctx + ": duplicate (doc, index) record");
    }
  }
  return p;
}

WordReplacedScores DiscriminatorFileProvider::replaced_scores_at(
    std::string_view doc_id, std::span<const std::string> context, std::size_t index) const {
  validate(ConditionalQuery{doc_id, context, index, 1});
  auto it = records_.find({std::string(doc_id), index});
  if (it == records_.end()) {
    throw Error(ErrorCode::kCoverage,
                coverage_message("discriminator file " + source_, doc_id, index));
  }
  return it->second;
}

std::shared_ptr<const PseudoLikelihoodFileProvider> PseudoLikelihoodFileProvider::load(
    const std::filesystem::path& path) {
  auto p = std::shared_ptr<PseudoLikelihoodFileProvider>(new PseudoLikelihoodFileProvider());
  p->source_ = path.filename().string();
  std::ifstream in = open(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view text = chomp(line);
    if (text.empty() || text.front() == '#') continue;
    const std::string ctx = where(path, lineno);
    const auto fields = split(text, '\t');
    if (fields.size() != 4) throw Error(ErrorCode::kParse, ctx + ": expected 4 tab-separated fields");
    const double logp = parse_double(fields[3], ctx);
    if (!std::isfinite(logp) || logp > 0.0) {
      throw Error(ErrorCode::kParse, ctx + ": log-probability must be finite and <= 0");
    }
    bool inserted = false;
    if (fields[1] == "*") {
      inserted = p->originals_.emplace(std::string(fields[0]), logp).second;
    } else {
      inserted = p->variants_
                     .emplace(std::tuple{std::string(fields[0]), parse_size(fields[1], ctx),
                                         std::string(fields[2])},
                              logp)
                     .second;
    }
    if (!inserted) throw Error(ErrorCode::kParse, ctx + ": duplicate record");
  }
  return p;
}

double PseudoLikelihoodFileProvider::pseudo_likelihood(std::string_view doc_id,
                                                       std::span<const std::string> context,
                                                       const Variant* variant) const {
  if (variant != nullptr) {
    validate(ConditionalQuery{doc_id, context, variant->index, 1});
    if (variant->word != context[variant->index]) {
      auto it = variants_.find({std::string(doc_id), variant->index, variant->word});
      if (it == variants_.end()) {
        throw Error(ErrorCode::kCoverage,
                    coverage_message("pseudo-likelihood file " + source_ + " (variant '" +
                                         variant->word + "')",
                                     doc_id, variant->index));
      }
      return it->second;
    }
  }
  auto it = originals_.find(std::string(doc_id));
  if (it == originals_.end()) {
    throw Error(ErrorCode::kCoverage, "pseudo-likelihood file " + source_ +
                                          " has no original-sequence record for doc " +
                                          std::string(doc_id));
  }
  return it->second;
}

}  // namespace lectio
