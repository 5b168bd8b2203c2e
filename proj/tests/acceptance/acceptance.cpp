// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exit status is
// non-zero if any criterion fails.

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "generators.hpp"
#include "json.hpp"
#include "lectio/dataset.hpp"
#include "lectio/detectors.hpp"
#include "lectio/error.hpp"
#include "lectio/eval.hpp"
#include "lectio/file_providers.hpp"
#include "lectio/ngram_provider.hpp"
#include "lectio/review.hpp"
#include "oracles.hpp"

namespace lectio {
namespace {

namespace fs = std::filesystem;
using testing::Gen;

// Pinned thresholds.
constexpr double kCcrTolerance = 1e-12;
constexpr double kPllrTolerance = 1e-9;
constexpr double kRocTolerance = 1e-9;
constexpr double kCcrMinAuroc = 0.80;
constexpr double kNullBandHalfWidth = 0.06;
constexpr double kDiscriminatorMinAuroc = 0.95;
constexpr double kInjectionRate = 0.02;
constexpr double kIndexBudgetSeconds = 60.0;
constexpr double kEndToEndBudgetSeconds = 600.0;
constexpr std::size_t kMinCorpusWords = 200000;

struct Outcome {
  enum Status { kPass, kFail, kSkip } status = kPass;
  std::string detail;
};

Outcome pass(std::string d) { return {Outcome::kPass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::kFail, std::move(d)}; }
Outcome skip(std::string d) { return {Outcome::kSkip, std::move(d)}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void check(const std::string& name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = fail(std::string("exception: ") + e.what());
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const char* tag = o.status == Outcome::kPass ? "PASS" : o.status == Outcome::kFail ? "FAIL" : "SKIP";
  if (o.status == Outcome::kFail) ++failures;
  std::printf("%s  %s: %s [%.1f s]\n", tag, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------

Outcome candidate_index_oracle() {
  const auto start = std::chrono::steady_clock::now();
  Gen gen(1001);
  const std::u32string* alphabets[] = {&testing::kSmallLatin, &testing::kLatin, &testing::kGreekMix};
  std::size_t checked = 0;
  std::size_t members = 0;
  for (int v = 0; v < 50; ++v) {
    const auto& alphabet = *alphabets[v % 3];
    const std::size_t n = gen.between(1, 5000);
    auto words = gen.vocabulary(n, alphabet, 1, 8);
    // Normalized and whitespace-free, as the vocabulary requires.
    std::vector<std::string> clean;
    std::set<std::string> seen;
    for (auto& w : words) {
      std::string s = normalize_string(w);
      if (s.empty() || s.find(' ') != std::string::npos || !seen.insert(s).second) continue;
      clean.push_back(s);
    }
    if (clean.empty()) clean.push_back("a");
    auto vocab = std::make_shared<const Vocabulary>(Vocabulary::from_words(clean));
    const auto index = NeighborIndex::build(vocab, 2);
    for (int q = 0; q < 200; ++q) {
      std::string query = normalize_string(gen.pick_or_new(clean, alphabet, 0.3));
      std::vector<std::size_t> dist(clean.size());
      for (std::size_t i = 0; i < clean.size(); ++i) {
        dist[i] = testing::dp_levenshtein(query, vocab->word(static_cast<WordId>(i)));
      }
      for (std::size_t k = 0; k <= 2; ++k) {
        std::vector<Candidate> want;
        for (std::size_t i = 0; i < dist.size(); ++i) {
          if (dist[i] <= k) want.push_back({static_cast<WordId>(i), dist[i]});
        }
        std::sort(want.begin(), want.end(), [](const Candidate& a, const Candidate& b) {
          return std::tie(a.distance, a.id) < std::tie(b.distance, b.id);
        });
        const auto got = index.neighbors(query, k);
        if (got.members != want) {
          return fail("vocabulary " + std::to_string(v) + ", query '" + query + "', k=" +
                      std::to_string(k) + ": " + std::to_string(got.size()) + " vs " +
                      std::to_string(want.size()) + " neighbors");
        }
        members += want.size();
        ++checked;
      }
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs >= kIndexBudgetSeconds) return fail("exact but took " + fmt("%.1f s", secs));
  return pass(std::to_string(checked) + " neighborhoods (" + std::to_string(members) +
              " members) identical to the DP scan, " + fmt("%.1f s", secs) + " < 60 s");
}

struct RandomModel {
  std::vector<std::string> words;
  std::vector<std::vector<std::string>> docs;
  std::shared_ptr<const NgramProvider> model;
  std::shared_ptr<const NeighborIndex> index;
};

RandomModel random_model(Gen& gen) {
  RandomModel m;
  m.words = gen.vocabulary(gen.between(2, 200), testing::kSmallLatin, 1, 4);
  m.docs.resize(gen.between(1, 3));
  for (auto& d : m.docs) {
    const std::size_t n = gen.between(5, 200);
    for (std::size_t i = 0; i < n; ++i) d.push_back(m.words[gen.below(m.words.size())]);
  }
  auto vocab = std::make_shared<const Vocabulary>(Vocabulary::from_words(m.words));
  NgramTrainer trainer(vocab);
  for (const auto& d : m.docs) trainer.add_document(d);
  m.model = trainer.build();
  m.index = std::make_shared<const NeighborIndex>(NeighborIndex::build(vocab, 2));
  return m;
}

WordSpan span_of(const std::vector<std::string>& context, std::size_t i) {
  WordSpan s;
  s.doc_id = "q";
  s.word_index = i;
  s.surface = context[i];
  s.tokens = {context[i]};
  return s;
}

Outcome ccr_equivalence() {
  Gen gen(2002);
  double worst = 0.0;
  std::size_t cases = 0;
  while (cases < 1000) {
    const auto m = random_model(gen);
    const testing::BigramOracle oracle(m.words, m.docs);
    for (int q = 0; q < 25 && cases < 1000; ++q, ++cases) {
      std::vector<std::string> context(gen.between(1, 8));
      for (auto& w : context) w = gen.pick_or_new(m.words, testing::kSmallLatin, 0.15);
      const std::size_t i = gen.below(context.size());
      DetectorConfig config;
      config.radius = gen.below(3);
      const auto got = ccr_score(span_of(context, i), context, *m.model, *m.index, config);
      const auto want = testing::ccr_by_enumeration(oracle, context, i, config.radius);
      const double diff = std::abs(got.score - want.score);
      worst = std::max(worst, diff);
      if (diff > kCcrTolerance || got.best_alternative.has_value() != want.best.has_value()) {
        return fail("case " + std::to_string(cases) + ": " + fmt("%.17g", got.score) + " vs " +
                    fmt("%.17g", want.score));
      }
    }
  }
  return pass("1000 cases, max |difference| " + fmt("%.3g", worst) + " <= 1e-12");
}

Outcome pllr_identity_bound() {
  Gen gen(3003);
  std::size_t cases = 0;
  std::size_t zero_cases = 0;
  while (cases < 1000) {
    const auto m = random_model(gen);
    for (int q = 0; q < 25 && cases < 1000; ++q, ++cases) {
      std::vector<std::string> context(gen.between(1, 8));
      for (auto& w : context) w = gen.pick_or_new(m.words, testing::kSmallLatin, 0.1);
      const std::size_t i = gen.below(context.size());
      DetectorConfig config;
      config.kind = DetectorKind::kPllr;
      config.radius = gen.below(3);
      const auto s = pllr_score(span_of(context, i), context, *m.model, *m.index, config);
      if (!(s.score >= 0.0)) return fail("negative PLLR " + fmt("%.17g", s.score));
      // Full-sequence pseudo-likelihood differences, not the local shortcut.
      double best = 0.0;
      const double base = m.model->pseudo_likelihood("q", context);
      for (const auto& c : m.index->neighbors(context[i], config.radius).members) {
        const Variant var{i, m.words[c.id]};
        best = std::max(best, m.model->pseudo_likelihood("q", context, &var) - base);
      }
      if (best <= 0.0) {
        ++zero_cases;
        if (s.score != 0.0) return fail("observed word maximizes but PLLR = " + fmt("%.17g", s.score));
      } else if (std::abs(s.score - best) > kPllrTolerance) {
        return fail("PLLR " + fmt("%.17g", s.score) + " vs max ratio " + fmt("%.17g", best));
      }
    }
  }
  return pass("1000 cases non-negative; " + std::to_string(zero_cases) +
              " cases where the observed word maximizes all score exactly 0");
}

Outcome roc_correctness() {
  Gen gen(4004);
  double worst = 0.0;
  for (int set = 0; set < 100; ++set) {
    const std::size_t n = gen.between(2, 500);
    std::vector<ScoredLabel> v(n);
    std::vector<std::pair<double, int>> pairs;
    const std::size_t levels = gen.between(1, 30);
    const bool discrete = gen.coin();
    for (std::size_t i = 0; i < n; ++i) {
      v[i].y = i < 2 ? static_cast<int>(i) : static_cast<int>(gen.coin(0.3));
      v[i].score = discrete ? static_cast<double>(gen.below(levels)) : gen.normal();
      pairs.emplace_back(v[i].score, v[i].y);
    }
    const auto c = roc(v);
    const double mw = testing::mann_whitney(pairs);
    worst = std::max(worst, std::abs(c.auroc - mw));
    if (std::abs(c.auroc - mw) > kRocTolerance) {
      return fail("set " + std::to_string(set) + ": " + fmt("%.17g", c.auroc) + " vs " + fmt("%.17g", mw));
    }
    std::vector<ScoredLabel> t = v;
    for (auto& s : t) s.score = std::exp(s.score / 8.0) * 5.0 - 2.0;
    const auto ct = roc(t);
    if (ct.auroc != c.auroc || ct.points.size() != c.points.size()) {
      return fail("monotone transform changed the curve in set " + std::to_string(set));
    }
    for (std::size_t i = 0; i < ct.points.size(); ++i) {
      if (ct.points[i].fpr != c.points[i].fpr || ct.points[i].tpr != c.points[i].tpr) {
        return fail("monotone transform moved a point in set " + std::to_string(set));
      }
    }
  }
  return pass("100 sets, max |AUROC - Mann-Whitney| " + fmt("%.3g", worst) +
              "; transformed curves identical");
}

// ---------------------------------------------------------------------------

Outcome synthetic_end_to_end() {
  const auto start = std::chrono::steady_clock::now();
  const fs::path path = testing::data_dir() / "moby_dick.txt";
  std::ifstream in(path, std::ios::binary);
  const std::string raw{std::istreambuf_iterator<char>(in), {}};
  const Document whole = make_document("moby", raw);
  const std::size_t lexical = whole.lexical_count();
  if (lexical < kMinCorpusWords) return fail("corpus has only " + std::to_string(lexical) + " words");

  // Halves by position; the second half is cut into 2000-token documents.
  const std::size_t mid = whole.words.size() / 2;
  const std::vector<std::string> first(whole.words.begin(), whole.words.begin() + mid);
  std::vector<Document> train = {make_document("train", render_words(first))};
  auto vocab = std::make_shared<const Vocabulary>(vocabulary_from_documents(train));
  NgramTrainer trainer(vocab);
  trainer.add_document(train[0].words);
  std::shared_ptr<const Provider> model = trainer.build();
  auto index = std::make_shared<const NeighborIndex>(NeighborIndex::build(vocab, 1));

  std::vector<Document> corrupted;
  std::map<std::pair<std::string, std::size_t>, int> truth;
  std::size_t injected = 0;
  for (std::size_t lo = mid, d = 0; lo < whole.words.size(); lo += 2000, ++d) {
    const std::size_t hi = std::min(whole.words.size(), lo + 2000);
    char id[16];
    std::snprintf(id, sizeof id, "test%03zu", d);
    const Document doc = make_document(id, render_words({whole.words.begin() + lo, whole.words.begin() + hi}));
    const auto inj = inject_artificial_errors(doc, kInjectionRate, InjectionChannel::kWordNeighborSwap,
                                              0x5eed + d, index.get(), U"");
    Document c = make_document(id, render_words(inj.words));
    for (const auto& s : c.spans) {
      if (!s.punctuation) truth[{c.id, s.word_index}] = 0;
    }
    for (const auto& e : inj.errors) truth[{c.id, e.word_index}] = 1;
    injected += inj.errors.size();
    corrupted.push_back(std::move(c));
  }

  auto auroc_of = [&](const std::vector<ErrorScore>& scores) {
    std::vector<ScoredLabel> v;
    for (const auto& s : scores) v.push_back({s.score, truth.at({s.doc_id, s.word_index})});
    return roc(v).auroc;
  };

  const auto ccr = make_detector(DetectorConfig{}, model, index);
  const double ccr_auroc = auroc_of(score_corpus(corrupted, *ccr, std::thread::hardware_concurrency()));

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ErrorScore> random_scores;
  for (const auto& [key, y] : truth) {
    ErrorScore s;
    s.doc_id = key.first;
    s.word_index = key.second;
    s.score = unit(rng);
    random_scores.push_back(s);
  }
  const double null_auroc = auroc_of(random_scores);

  // Replaced-token probabilities a strong discriminator might emit: logistic
  // of +-1.5 plus unit Gaussian noise per token.
  testing::TempDir dir;
  {
    std::ofstream out(dir / "replaced.tsv");
    std::normal_distribution<double> noise(0.0, 1.0);
    for (const auto& [key, y] : truth) {
      const double logit = (y ? 1.5 : -1.5) + noise(rng);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", 1.0 / (1.0 + std::exp(-logit)));
      out << key.first << '\t' << key.second << '\t' << buf << '\n';
    }
  }
  DetectorConfig dc;
  dc.kind = DetectorKind::kDiscriminator;
  const auto disc = make_detector(dc, DiscriminatorFileProvider::load(dir / "replaced.tsv"), nullptr);
  const double disc_auroc = auroc_of(score_corpus(corrupted, *disc, 1));

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string detail =
      std::to_string(lexical) + " words, " + std::to_string(injected) + " injected; CCR AUROC " +
      fmt("%.4f", ccr_auroc) + ", random " + fmt("%.4f", null_auroc) + ", discriminator " +
      fmt("%.4f", disc_auroc) + ", " + fmt("%.0f s", secs);
  const bool null_ok = std::abs(null_auroc - 0.5) <= kNullBandHalfWidth;
  if (ccr_auroc >= kCcrMinAuroc && ccr_auroc > 0.5 + kNullBandHalfWidth && null_ok &&
      disc_auroc >= kDiscriminatorMinAuroc && secs < kEndToEndBudgetSeconds) {
    return pass(detail);
  }
  return fail(detail);
}

// ---------------------------------------------------------------------------

bool published_counts_match(const DatasetSummary& s, std::string& detail) {
  detail = std::to_string(s.total) + " rows, " + std::to_string(s.definitive()) +
           " definitive, categories " +
           std::to_string(s.category_count(ErrorCategory::kDigitization)) + "/" +
           std::to_string(s.category_count(ErrorCategory::kPrint)) + "/" +
           std::to_string(s.category_count(ErrorCategory::kScribal)) + ", positives " +
           std::to_string(s.positives()) + "/" + std::to_string(s.definitive());
  return s.total == 1000 && s.definitive() == 763 &&
         s.category_count(ErrorCategory::kDigitization) == 42 &&
         s.category_count(ErrorCategory::kPrint) == 114 &&
         s.category_count(ErrorCategory::kScribal) == 61 && s.positives() == 217;
}

Outcome dataset_statistics() {
  const char* env = std::getenv("LECTIO_PUBLISHED_DATASET");
  if (!env || !*env) {
    return skip("published dataset not supplied (set LECTIO_PUBLISHED_DATASET to its path)");
  }
  std::vector<LabeledExample> rows;
  try {
    rows = load_dataset(env);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSchema) throw;
    rows = import_published(env);
  }
  std::string detail;
  return published_counts_match(summarize(rows), detail) ? pass(detail) : fail(detail);
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int cli(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  if (code != 0) throw std::runtime_error("lectio " + args.at(0) + " failed: " + err.str());
  return code;
}

Outcome determinism() {
  testing::TempDir dir;
  const fs::path path = testing::data_dir() / "moby_dick.txt";
  std::ifstream in(path, std::ios::binary);
  const Document whole = make_document("m", std::string{std::istreambuf_iterator<char>(in), {}});
  fs::create_directories(dir / "corpus");
  for (int d = 0; d < 5; ++d) {
    const auto b = whole.words.begin() + 20000 + d * 1500;
    std::ofstream(dir / "corpus" / ("part" + std::to_string(d) + ".txt")) << render_words({b, b + 1500});
  }

  std::vector<std::string> mismatches;
  auto same = [&](const fs::path& a, const fs::path& b) {
    if (slurp(a) != slurp(b) || slurp(a).empty()) mismatches.push_back(a.filename().string());
  };

  for (const char* run : {"inject1", "inject2"}) {
    cli({"--seed", "17", "inject", "--corpus", dir / "corpus", "--rate", "0.02", "--channel",
         "word_neighbor_swap", "--out", dir / run});
  }
  same(dir / "inject1" / "flags.csv", dir / "inject2" / "flags.csv");
  for (int d = 0; d < 5; ++d) {
    const std::string f = "part" + std::to_string(d) + ".txt";
    same(dir / "inject1" / "corpus" / f, dir / "inject2" / "corpus" / f);
  }

  for (const char* run : {"score1", "score2"}) {
    cli({"score", "--detector", "ccr", "--corpus", dir / "inject1" / "corpus", "--train",
         dir / "corpus", "--threads", "4", "--top-n", "100", "--out", dir / run});
  }
  same(dir / "score1" / "scores.csv", dir / "score2" / "scores.csv");
  same(dir / "score1" / "ranked.csv", dir / "score2" / "ranked.csv");

  // Injected words become the labeled errors.
  std::vector<LabeledExample> labels;
  std::istringstream flags(slurp(dir / "inject1" / "flags.csv"));
  std::string line;
  std::getline(flags, line);
  std::map<std::string, Document> docs;
  while (std::getline(flags, line)) {
    std::stringstream ss(line);
    std::string doc, idx, orig, corr;
    std::getline(ss, doc, ',');
    std::getline(ss, idx, ',');
    std::getline(ss, orig, ',');
    std::getline(ss, corr, ',');
    if (!docs.count(doc)) {
      docs.emplace(doc, make_document(doc, slurp(dir / "inject1" / "corpus" / (doc + ".txt"))));
    }
    LabeledExample e;
    e.doc_id = doc;
    e.word_index = std::stoul(idx);
    e.surface = corr;
    e.label = Label::kError;
    e.category = ErrorCategory::kDigitization;
    e.suggested_alternative = orig;
    e.context_text = docs.at(doc).text.normalized();
    labels.push_back(e);
  }
  write_dataset(dir / "labels.jsonl", labels);

  for (const char* run : {"eval1", "eval2"}) {
    cli({"--seed", "23", "evaluate", "--scores", dir / "score1" / "scores.csv", "--dataset",
         dir / "labels.jsonl", "--sample-negatives", "500", "--corpus", dir / "inject1" / "corpus",
         "--out", dir / run});
  }
  same(dir / "eval1" / "report.csv", dir / "eval2" / "report.csv");
  same(dir / "eval1" / "negatives.jsonl", dir / "eval2" / "negatives.jsonl");
  same(dir / "eval1" / "roc_ccr_k_1_beam_exact_chance_word_provider_ngram_overall.svg",
       dir / "eval2" / "roc_ccr_k_1_beam_exact_chance_word_provider_ngram_overall.svg");

  if (!mismatches.empty()) {
    std::string msg = "differs between reruns:";
    for (const auto& m : mismatches) msg += " " + m;
    return fail(msg);
  }
  return pass("inject, score (4 threads) and evaluate reruns byte-identical; " +
              std::to_string(labels.size()) + " injected errors, 500 sampled negatives");
}

// ---------------------------------------------------------------------------

Outcome review_round_trip() {
  testing::TempDir dir;
  std::vector<Document> docs = {make_document("d", "the cot sat")};
  ErrorScore flag;
  flag.doc_id = "d";
  flag.word_index = 1;
  flag.surface = "cot";
  flag.score = 2.0;
  auto store = std::make_shared<ReviewStore>(std::vector{flag}, docs, dir / "labels.jsonl");
  ReviewServerOptions options;
  options.port = 0;
  ReviewServer server(store, options);
  const int port = server.bind();
  std::thread thread([&] { server.run(); });
  httplib::Client client("127.0.0.1", port);
  const std::string body =
      R"({"doc":"d","index":1,"label":"error","category":"print","suggested_alternative":"cat"})";
  auto post = client.Post("/api/label", body, "application/json");
  auto again = client.Post("/api/label", body, "application/json");
  auto exported = client.Get("/api/export");
  server.stop();
  thread.join();
  if (!post || post->status != 200) return fail("label submission failed");
  if (!again || again->status != 409) return fail("stale resubmission was not rejected");
  if (!exported || exported->body != store->export_jsonl()) return fail("export mismatch");
  store->compact();
  if (load_dataset(dir / "labels.jsonl").size() != 1) return fail("compaction lost the label");
  return pass("label, conflict (409), export and compaction");
}

}  // namespace
}  // namespace lectio

int main() {
  using lectio::check;
  check("candidate-index oracle", lectio::candidate_index_oracle);
  check("CCR brute-force equivalence", lectio::ccr_equivalence);
  check("PLLR identity bound", lectio::pllr_identity_bound);
  check("ROC correctness", lectio::roc_correctness);
  check("synthetic end-to-end", lectio::synthetic_end_to_end);
  check("dataset statistics", lectio::dataset_statistics);
  check("determinism", lectio::determinism);
  check("review API round trip (supplementary)", lectio::review_round_trip);
  std::printf("%s\n", lectio::failures == 0 ? "acceptance: all criteria met or skipped"
                                            : "acceptance: FAILED");
  return lectio::failures == 0 ? 0 : 1;
}
