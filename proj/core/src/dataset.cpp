#include "lectio/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"
#include "lectio/error.hpp"
#include "lectio/hash.hpp"
#include "parse_util.hpp"
#include "rng.hpp"

namespace lectio {

using ordered_json = nlohmann::ordered_json;

namespace {

// A record written under another schema version; aborts a load outright.
class SchemaVersionError : public Error {
 public:
  explicit SchemaVersionError(const std::string& message) : Error(ErrorCode::kSchema, message) {}
};

}  // namespace

std::string_view to_string(Label label) {
  switch (label) {
    case Label::kError: return "error";
    case Label::kNonError: return "non_error";
    case Label::kPlausible: return "plausible";
    case Label::kUncertain: return "uncertain";
  }
  return "non_error";
}

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kDigitization: return "digitization";
    case ErrorCategory::kPrint: return "print";
    case ErrorCategory::kScribal: return "scribal";
  }
  return "scribal";
}

std::string_view to_string(Provenance provenance) {
  return provenance == Provenance::kExpertLabeled ? "expert_labeled" : "presumed_negative";
}

Label parse_label(std::string_view name) {
  for (Label l : kAllLabels) {
    if (name == to_string(l)) return l;
  }
  throw Error(ErrorCode::kSchema, "unknown label '" + std::string(name) + "'");
}

ErrorCategory parse_category(std::string_view name) {
  for (ErrorCategory c : kAllCategories) {
    if (name == to_string(c)) return c;
  }
  throw Error(ErrorCode::kSchema, "unknown error category '" + std::string(name) + "'");
}

void validate(const LabeledExample& e) {
  if ((e.label == Label::kError) != e.category.has_value()) {
    throw Error(ErrorCode::kSchema,
                e.label == Label::kError
                    ? "label 'error' requires a category"
                    : "label '" + std::string(to_string(e.label)) + "' must not carry a category");
  }
}

std::string to_json_line(const LabeledExample& e) {
  ordered_json j;
  j["schema"] = kDatasetSchema;
  j["doc_id"] = e.doc_id;
  j["word_index"] = e.word_index;
  j["surface"] = e.surface;
  j["label"] = to_string(e.label);
  j["category"] = e.category ? ordered_json(to_string(*e.category)) : ordered_json(nullptr);
  j["expert_notes"] = e.expert_notes;
  j["suggested_alternative"] =
      e.suggested_alternative ? ordered_json(*e.suggested_alternative) : ordered_json(nullptr);
  j["context_text"] = e.context_text;
  if (e.part) j["part"] = *e.part;
  if (e.provenance != Provenance::kExpertLabeled) j["provenance"] = to_string(e.provenance);
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

LabeledExample from_json_line(std::string_view line, const std::string& context) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, context + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kSchema, context + ": record is not an object");
  const auto schema = j.find("schema");
  if (schema == j.end() || !schema->is_string()) {
    throw SchemaVersionError(context + ": missing schema field (expected " +
                             std::string(kDatasetSchema) + ")");
  }
  if (schema->get<std::string>() != kDatasetSchema) {
    throw SchemaVersionError(context + ": unsupported schema version '" +
                             schema->get<std::string>() + "' (expected " +
                             std::string(kDatasetSchema) + ")");
  }
  try {
    LabeledExample e;
    e.doc_id = j.at("doc_id").get<std::string>();
    e.word_index = j.at("word_index").get<std::size_t>();
    e.surface = j.at("surface").get<std::string>();
    e.label = parse_label(j.at("label").get<std::string>());
    if (auto c = j.find("category"); c != j.end() && !c->is_null()) {
      e.category = parse_category(c->get<std::string>());
    }
    e.expert_notes = j.value("expert_notes", std::string());
    if (auto a = j.find("suggested_alternative"); a != j.end() && !a->is_null()) {
      e.suggested_alternative = a->get<std::string>();
    }
    e.context_text = j.at("context_text").get<std::string>();
    if (auto p = j.find("part"); p != j.end() && !p->is_null()) e.part = p->get<std::string>();
    if (auto p = j.find("provenance"); p != j.end()) {
      const auto v = p->get<std::string>();
      if (v == "presumed_negative") {
        e.provenance = Provenance::kPresumedNegative;
      } else if (v != "expert_labeled") {
        throw Error(ErrorCode::kSchema, "unknown provenance '" + v + "'");
      }
    }
    validate(e);
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::kSchema, context + ": " + ex.what());
  } catch (const Error& ex) {
    throw Error(ex.code(), context + ": " + ex.what());
  }
}

std::size_t DatasetSummary::label_count(Label label) const {
  const auto& row = counts[static_cast<std::size_t>(label)];
  return row[0] + row[1] + row[2] + row[3];
}

std::size_t DatasetSummary::category_count(ErrorCategory category) const {
  std::size_t n = 0;
  for (const auto& row : counts) n += row[static_cast<std::size_t>(category)];
  return n;
}

std::size_t DatasetSummary::definitive() const {
  return label_count(Label::kError) + label_count(Label::kNonError);
}

DatasetSummary summarize(std::span<const LabeledExample> examples) {
  DatasetSummary s;
  for (const auto& e : examples) {
    const std::size_t slot = e.category ? static_cast<std::size_t>(*e.category) : 3;
    ++s.counts[static_cast<std::size_t>(e.label)][slot];
    ++s.total;
  }
  return s;
}

std::string format_summary(const DatasetSummary& s) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %12s %8s %8s %8s %8s\n", "label", "digitization", "print",
                "scribal", "none", "total");
  out += buf;
  std::array<std::size_t, 5> column{};
  for (Label l : kAllLabels) {
    const auto& row = s.counts[static_cast<std::size_t>(l)];
    const std::size_t total = s.label_count(l);
    std::snprintf(buf, sizeof buf, "%-10s %12zu %8zu %8zu %8zu %8zu\n",
                  std::string(to_string(l)).c_str(), row[0], row[1], row[2], row[3], total);
    out += buf;
    for (std::size_t c = 0; c < 4; ++c) column[c] += row[c];
    column[4] += total;
  }
  std::snprintf(buf, sizeof buf, "%-10s %12zu %8zu %8zu %8zu %8zu\n", "total", column[0],
                column[1], column[2], column[3], column[4]);
  out += buf;
  const std::size_t def = s.definitive();
  std::snprintf(buf, sizeof buf, "definitive %zu, positive fraction %zu/%zu = %.3f\n", def,
                s.positives(), def,
                def == 0 ? 0.0 : static_cast<double>(s.positives()) / static_cast<double>(def));
  out += buf;
  return out;
}

std::vector<LabeledExample> load_dataset(const std::filesystem::path& path,
                                         NormalizationPolicy policy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dataset " + path.string());

  std::vector<LabeledExample> out;
  std::vector<std::string> misaligned;
  std::vector<std::string> invalid;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view text = detail::chomp(line);
    if (text.empty()) continue;
    const std::string ctx = detail::where(path, lineno);
    LabeledExample e;
    try {
      e = from_json_line(text, ctx);
    } catch (const SchemaVersionError&) {
      throw;
    } catch (const Error& err) {
      invalid.push_back(err.what());
      continue;
    }
    const Document doc = make_document(e.doc_id, e.context_text, policy);
    const std::string surface = normalize_string(e.surface, policy);
    if (e.word_index >= doc.spans.size() || doc.spans[e.word_index].surface != surface) {
      misaligned.push_back(ctx + ": word_index " + std::to_string(e.word_index) + " addresses '" +
                           (e.word_index < doc.spans.size() ? doc.spans[e.word_index].surface
                                                            : std::string("<out of range>")) +
                           "', expected '" + e.surface + "'");
    }
    out.push_back(std::move(e));
  }
  if (!invalid.empty()) {
    std::string msg = std::to_string(invalid.size()) + " invalid row(s):";
    for (const auto& m : invalid) msg += "\n  " + m;
    throw Error(ErrorCode::kSchema, msg);
  }
  if (!misaligned.empty()) {
    std::string msg = std::to_string(misaligned.size()) + " row(s) fail word_index validation:";
    for (const auto& m : misaligned) msg += "\n  " + m;
    throw Error(ErrorCode::kAlignment, msg);
  }
  return out;
}

std::string serialize_dataset(std::span<const LabeledExample> examples) {
  std::string out;
  for (const auto& e : examples) {
    validate(e);
    out += to_json_line(e);
    out += '\n';
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, std::span<const LabeledExample> examples) {
  write_file_atomic(path, serialize_dataset(examples));
}

namespace {

std::string canonical_verdict(std::string_view verdict) {
  std::string s(verdict);
  while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.back())) || s.back() == '.')) {
    s.pop_back();
  }
  std::size_t start = 0;
  while (start < s.size() && std::isspace(static_cast<unsigned char>(s[start]))) ++start;
  s = s.substr(start);
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::optional<ErrorCategory> category_from_text(std::string_view text) {
  std::string lower(text);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::optional<ErrorCategory> found;
  std::size_t first = std::string::npos;
  const std::pair<std::string_view, ErrorCategory> keys[] = {
      {"digitization", ErrorCategory::kDigitization},
      {"digitisation", ErrorCategory::kDigitization},
      {"print", ErrorCategory::kPrint},
      {"scribal", ErrorCategory::kScribal}};
  for (const auto& [key, cat] : keys) {
    const std::size_t pos = lower.find(key);
    if (pos < first) {
      first = pos;
      found = cat;
    }
  }
  return found;
}

}  // namespace

LabelMapping LabelMapping::defaults() {
  LabelMapping m;
  m.table = {{"GOOD FLAG", Label::kError},        {"BAD FLAG", Label::kNonError},
             {"ERROR", Label::kError},            {"NON_ERROR", Label::kNonError},
             {"NOT AN ERROR", Label::kNonError},  {"PLAUSIBLE", Label::kPlausible},
             {"UNCERTAIN", Label::kUncertain}};
  return m;
}

std::optional<Label> LabelMapping::map(std::string_view verdict) const {
  auto it = table.find(canonical_verdict(verdict));
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::vector<LabeledExample> import_published(const std::filesystem::path& path,
                                             const LabelMapping& mapping) {
  const std::string text = read_file(path);
  std::vector<ordered_json> records;
  try {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') {
      for (auto& r : ordered_json::parse(text)) records.push_back(std::move(r));
    } else {
      std::size_t start = 0;
      while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        const std::string_view line = detail::chomp(std::string_view(text).substr(start, end - start));
        if (!line.empty()) records.push_back(ordered_json::parse(line));
        start = end + 1;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }

  for (const auto& [verdict, label] : mapping.table) {
    spdlog::debug("label mapping: '{}' -> {}", verdict, to_string(label));
  }

  std::vector<LabeledExample> out;
  std::vector<std::string> problems;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& j = records[r];
    const std::string ctx = path.string() + " record " + std::to_string(r + 1);
    try {
      LabeledExample e;
      e.doc_id = j.contains("Document") ? j.at("Document").get<std::string>()
                                        : "record-" + std::to_string(r + 1);
      e.surface = j.at("Transmitted Word in Question").get<std::string>();
      const std::string verdict = j.at("Expert Label").get<std::string>();
      const auto label = mapping.map(verdict);
      if (!label) throw Error(ErrorCode::kSchema, "unmapped expert label '" + verdict + "'");
      e.label = *label;
      e.expert_notes = j.value("Further Expert Notes", std::string());
      if (j.contains("Model-Suggested Alternative") &&
          !j.at("Model-Suggested Alternative").is_null()) {
        e.suggested_alternative = j.at("Model-Suggested Alternative").get<std::string>();
      }
      const auto& idx = j.at("Word Index in Text");
      e.word_index = idx.is_string() ? detail::parse_size(idx.get<std::string>(), ctx)
                                     : idx.get<std::size_t>();
      e.context_text = j.at("Text").get<std::string>();
      if (j.contains("Part")) e.part = j.at("Part").get<std::string>();
      if (e.label == Label::kError) {
        if (j.contains("Error Category")) {
          e.category = category_from_text(j.at("Error Category").get<std::string>());
        }
        if (!e.category) e.category = category_from_text(e.expert_notes);
        if (!e.category) throw Error(ErrorCode::kSchema, "error label without a recognizable category");
      }
      validate(e);
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      problems.push_back(ctx + ": " + ex.what());
    } catch (const Error& ex) {
      problems.push_back(ctx + ": " + ex.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " record(s) could not be imported:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw Error(ErrorCode::kSchema, msg);
  }
  return out;
}

std::size_t EvaluationSet::positives() const {
  return static_cast<std::size_t>(
      std::count_if(examples.begin(), examples.end(), [](const auto& e) { return e.y == 1; }));
}

std::size_t EvaluationSet::negatives() const { return examples.size() - positives(); }

EvaluationSet build_evaluation_set(std::span<const LabeledExample> expert,
                                   std::span<const LabeledExample> presumed_negatives,
                                   bool expert_only) {
  EvaluationSet set;
  for (const auto& e : expert) {
    if (expert_only && e.provenance == Provenance::kPresumedNegative) continue;
    if (e.label == Label::kError || e.label == Label::kNonError) {
      set.examples.push_back({e, e.label == Label::kError ? 1 : 0});
    }
  }
  if (!expert_only) {
    for (const auto& e : presumed_negatives) {
      LabeledExample n = e;
      n.label = Label::kNonError;
      n.category.reset();
      n.provenance = Provenance::kPresumedNegative;
      set.examples.push_back({std::move(n), 0});
    }
  }
  return set;
}

std::vector<LabeledExample> sample_presumed_negatives(std::span<const Document> docs,
                                                      std::size_t n, std::uint64_t seed) {
  std::vector<std::pair<const Document*, std::size_t>> pool;
  for (const auto& d : docs) {
    for (const auto& s : d.spans) {
      if (!s.punctuation) pool.emplace_back(&d, s.word_index);
    }
  }
  if (n > pool.size()) {
    throw Error(ErrorCode::kSize, "cannot sample " + std::to_string(n) + " words from a corpus of " +
                                      std::to_string(pool.size()) + " lexical words");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + detail::uniform_below(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    return a.first->id != b.first->id ? a.first->id < b.first->id : a.second < b.second;
  });

  std::vector<LabeledExample> out;
  out.reserve(n);
  for (const auto& [doc, index] : pool) {
    LabeledExample e;
    e.doc_id = doc->id;
    e.word_index = index;
    e.surface = doc->spans[index].surface;
    e.label = Label::kNonError;
    e.context_text = doc->text.normalized();
    e.provenance = Provenance::kPresumedNegative;
    out.push_back(std::move(e));
  }
  return out;
}

std::string_view to_string(InjectionChannel channel) {
  return channel == InjectionChannel::kCharSubstitute ? "char_substitute" : "word_neighbor_swap";
}

InjectionChannel parse_injection_channel(std::string_view name) {
  if (name == "char_substitute") return InjectionChannel::kCharSubstitute;
  if (name == "word_neighbor_swap") return InjectionChannel::kWordNeighborSwap;
  throw Error(ErrorCode::kConfig, "unknown injection channel '" + std::string(name) +
                                      "' (expected char_substitute or word_neighbor_swap)");
}

std::string substitute_char(std::string_view word, std::size_t position, char32_t replacement) {
  std::u32string cps = decode_utf8(word);
  if (position >= cps.size()) {
    throw Error(ErrorCode::kQuery, "character position out of range");
  }
  cps[position] = replacement;
  return encode_utf8(cps);
}

std::u32string corpus_alphabet(std::span<const Document> docs) {
  std::set<char32_t> letters;
  for (const auto& d : docs) {
    for (const auto& s : d.spans) {
      if (s.punctuation) continue;
      for (char32_t c : decode_utf8(s.surface)) {
        if (!is_punctuation(encode_utf8(std::u32string(1, c)))) letters.insert(c);
      }
    }
  }
  return std::u32string(letters.begin(), letters.end());
}

Injection inject_artificial_errors(const Document& doc, double rate, InjectionChannel channel,
                                   std::uint64_t seed, const NeighborIndex* index,
                                   std::u32string_view alphabet) {
  if (doc.spans.empty()) {
    throw Error(ErrorCode::kSize, "cannot inject errors into empty document " + doc.id);
  }
  if (!(rate > 0.0 && rate < 1.0)) {
    throw Error(ErrorCode::kConfig, "injection rate must lie in (0, 1)");
  }
  if (channel == InjectionChannel::kWordNeighborSwap && index == nullptr) {
    throw Error(ErrorCode::kConfig, "word_neighbor_swap needs a neighbor index");
  }
  if (channel == InjectionChannel::kWordNeighborSwap && index->max_radius() < 1) {
    throw Error(ErrorCode::kUnsupportedRadius, "word_neighbor_swap needs an index of radius >= 1");
  }
  if (channel == InjectionChannel::kCharSubstitute && alphabet.empty()) {
    throw Error(ErrorCode::kConfig, "char_substitute needs a non-empty alphabet");
  }

  Injection out;
  out.words = doc.words;
  std::mt19937_64 rng(seed);
  for (const WordSpan& span : doc.spans) {
    if (span.punctuation) continue;
    if (detail::uniform01(rng) >= rate) continue;

    std::optional<std::string> replacement;
    if (channel == InjectionChannel::kCharSubstitute) {
      const std::u32string cps = decode_utf8(span.surface);
      const std::size_t pos = detail::uniform_below(rng, cps.size());
      std::u32string choices;
      for (char32_t c : alphabet) {
        if (c != cps[pos]) choices.push_back(c);
      }
      if (!choices.empty()) {
        replacement = substitute_char(span.surface, pos, choices[detail::uniform_below(rng, choices.size())]);
      }
    } else {
      const CandidateSet set = index->neighbors(span.surface, 1);
      std::vector<WordId> others;
      for (const Candidate& c : set.members) {
        if (c.distance > 0) others.push_back(c.id);
      }
      if (!others.empty()) {
        replacement = index->vocabulary().word(others[detail::uniform_below(rng, others.size())]);
      }
    }

    if (!replacement) {
      spdlog::debug("inject: no applicable edit for '{}' at {}:{}", span.surface, doc.id,
                    span.word_index);
      out.skipped.push_back(span.word_index);
      continue;
    }
    out.errors.push_back({span.word_index, span.surface, *replacement});
    out.words[span.word_index] = *replacement;
  }
  return out;
}

}  // namespace lectio
