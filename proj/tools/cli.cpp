#include "cli.hpp"

#include <CLI11.hpp>
#include <pthread.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "lectio/candidate_index.hpp"
#include "lectio/dataset.hpp"
#include "lectio/detectors.hpp"
#include "lectio/document.hpp"
#include "lectio/error.hpp"
#include "lectio/eval.hpp"
#include "lectio/file_providers.hpp"
#include "lectio/hash.hpp"
#include "lectio/judge.hpp"
#include "lectio/ngram_provider.hpp"
#include "lectio/review.hpp"
#include "manifest.hpp"

#ifndef LECTIO_VERSION
#define LECTIO_VERSION "0.0.0"
#endif

namespace lectio::cli {
namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kNormalizations = {"compose", "decompose-strip-off"};

struct Globals {
  std::string config;
  std::uint64_t seed = 1;
  std::string log_level = "warn";
};

struct ScoreOptions {
  std::string corpus;
  std::string out;
  std::string provider = "ngram";
  std::string train;
  std::string logits;
  std::string token_chances;
  std::string replaced;
  std::string pll;
  std::string vocab;
  std::string detector;
  std::size_t radius = 1;
  std::optional<std::size_t> beam;
  std::string aggregation = "max";
  std::size_t top_n = 0;
  std::size_t threads = 1;
  std::string normalization = "compose";
  // llm
  std::string exemplars;
  std::string judge_model = "gpt-4";
  int judge_m = 5;
  double judge_temperature = 1.0;
  std::size_t judge_window = 50;
  std::size_t max_in_flight = 4;
  std::string audit;
  std::string replay;
};

struct EvaluateOptions {
  std::vector<std::string> scores;
  std::string dataset;
  std::string negatives;
  std::size_t sample_negatives = 0;
  std::string corpus;
  bool expert_only = false;
  std::string out;
  std::string normalization = "compose";
};

struct InjectOptions {
  std::string corpus;
  double rate = 0.0;
  std::string channel = "char_substitute";
  std::string vocab;
  std::string out;
  std::string normalization = "compose";
};

struct ReportOptions {
  std::string dataset;
  std::string published;
  std::string write;
  std::string normalization = "compose";
};

struct ServeOptions {
  std::string ranked;
  std::string corpus;
  std::string dataset;
  std::string bind = "127.0.0.1:8080";
  std::string static_dir;
  std::string secret;
  std::string normalization = "compose";
};

// key = value lines; '#' starts a comment, values may be quoted.
std::vector<std::pair<std::string, std::string>> load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
        value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    std::replace(key.begin(), key.end(), '_', '-');
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

NormalizationPolicy policy_of(const std::string& name) { return parse_normalization_policy(name); }

std::vector<std::pair<std::string, std::string>> resolved_options(const CLI::App& app,
                                                                  const CLI::App& sub) {
  std::map<std::string, std::string> values;
  auto collect = [&](const CLI::App& a) {
    for (const CLI::Option* opt : a.get_options()) {
      if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
      std::string value;
      if (opt->count() > 0) {
        const auto& results = opt->results();
        for (std::size_t i = 0; i < results.size(); ++i) value += (i ? "," : "") + results[i];
      } else {
        value = opt->get_default_str();
      }
      values[opt->get_lnames().front()] = value;
    }
  };
  collect(app);
  collect(sub);
  return {values.begin(), values.end()};
}

std::shared_ptr<const Vocabulary> shared_vocab(Vocabulary v) {
  return std::make_shared<const Vocabulary>(std::move(v));
}

std::vector<Document> load_corpus_checked(const std::string& dir, NormalizationPolicy policy) {
  auto docs = load_corpus(dir, policy);
  if (docs.empty()) throw Error(ErrorCode::kIo, "no *.txt documents in " + dir);
  return docs;
}

// ---------------------------------------------------------------------------
// score

int cmd_score(const ScoreOptions& o, const Globals& g, RunManifest& manifest, std::ostream& out) {
  const auto policy = policy_of(o.normalization);
  const auto docs = load_corpus_checked(o.corpus, policy);
  std::vector<fs::path> inputs = {o.corpus};

  std::shared_ptr<const Vocabulary> vocab;
  if (!o.vocab.empty()) {
    vocab = shared_vocab(Vocabulary::load(o.vocab, policy));
    inputs.push_back(o.vocab);
  }

  std::shared_ptr<const Provider> provider;
  const DetectorKind kind = parse_detector_kind(o.detector);
  if (kind != DetectorKind::kLlm) {
    if (o.provider == "ngram") {
      std::vector<Document> train_docs;
      if (!o.train.empty()) {
        train_docs = load_corpus_checked(o.train, policy);
        inputs.push_back(o.train);
      }
      const auto& training = o.train.empty() ? docs : train_docs;
      if (!vocab) vocab = shared_vocab(vocabulary_from_documents(training, policy));
      NgramTrainer trainer(vocab);
      for (const auto& d : training) trainer.add_document(d.words);
      provider = trainer.build();
    } else if (o.provider == "logits") {
      if (o.logits.empty() || !vocab) throw UsageError("--provider logits needs --logits and --vocab");
      std::optional<fs::path> chances;
      if (!o.token_chances.empty()) {
        chances = o.token_chances;
        inputs.push_back(o.token_chances);
      }
      provider = LogitsFileProvider::load(o.logits, vocab, chances);
      inputs.push_back(o.logits);
    } else if (o.provider == "disc") {
      if (o.replaced.empty()) throw UsageError("--provider disc needs --replaced");
      provider = DiscriminatorFileProvider::load(o.replaced);
      inputs.push_back(o.replaced);
    } else if (o.provider == "pll") {
      if (o.pll.empty() || !vocab) throw UsageError("--provider pll needs --pll and --vocab");
      provider = PseudoLikelihoodFileProvider::load(o.pll);
      inputs.push_back(o.pll);
    } else {
      if (!vocab) vocab = shared_vocab(vocabulary_from_documents(docs, policy));
      provider = std::make_shared<UniformProvider>(vocab);
    }
  }

  std::unique_ptr<Detector> detector;
  std::size_t threads = o.threads;
  if (kind == DetectorKind::kLlm) {
    if (o.exemplars.empty()) throw UsageError("--detector llm needs --exemplars");
    JudgeConfig jc;
    jc.m = o.judge_m;
    jc.exemplars = load_exemplars(o.exemplars);
    jc.model = o.judge_model;
    jc.temperature = o.judge_temperature;
    jc.window = o.judge_window;
    jc.max_in_flight = o.max_in_flight;
    inputs.push_back(o.exemplars);
    std::shared_ptr<ChatTransport> transport;
    if (!o.replay.empty()) {
      transport = std::make_shared<ReplayTransport>(o.replay);
      inputs.push_back(o.replay);
    } else if (!o.audit.empty()) {
      transport = std::make_shared<RecordingTransport>(make_http_transport(jc), o.audit);
    } else {
      transport = make_http_transport(jc);
    }
    auto judge = std::make_shared<const Judge>(std::move(jc), transport);
    detector = make_llm_detector(judge);
    threads = std::max(threads, o.max_in_flight);
  } else {
    DetectorConfig config;
    config.kind = kind;
    config.radius = o.radius;
    config.beam_truncation = o.beam;
    config.aggregation = parse_token_aggregation(o.aggregation);
    config.validate();
    std::shared_ptr<const NeighborIndex> index;
    if (kind != DetectorKind::kDiscriminator) {
      if (!vocab) vocab = provider->vocabulary();
      if (!vocab) throw UsageError("--detector " + o.detector + " needs --vocab for this provider");
      index = std::make_shared<const NeighborIndex>(
          NeighborIndex::build(vocab, std::max<std::size_t>(o.radius, 1)));
    }
    detector = make_detector(config, provider, index);
  }

  auto scores = score_corpus(docs, *detector, threads);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  {
    std::ostringstream csv;
    write_scores_csv(csv, scores);
    write_file_atomic(dir / "scores.csv", csv.str());
  }
  rank_scores(scores);
  if (o.top_n > 0 && scores.size() > o.top_n) scores.resize(o.top_n);
  {
    std::ostringstream csv;
    write_scores_csv(csv, scores);
    write_file_atomic(dir / "ranked.csv", csv.str());
  }
  manifest.inputs = hash_inputs(inputs);
  manifest.seed = g.seed;
  out << "scored " << docs.size() << " document(s) with " << detector->fingerprint() << " -> "
      << (dir / "scores.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

int cmd_evaluate(const EvaluateOptions& o, const Globals& g, RunManifest& manifest,
                 std::ostream& out) {
  const auto policy = policy_of(o.normalization);
  std::vector<fs::path> inputs = {o.dataset};
  const auto expert = load_dataset(o.dataset, policy);

  std::vector<LabeledExample> negatives;
  const fs::path dir = o.out;
  fs::create_directories(dir);
  if (!o.negatives.empty()) {
    negatives = load_dataset(o.negatives, policy);
    inputs.push_back(o.negatives);
  } else if (o.sample_negatives > 0) {
    if (o.corpus.empty()) throw UsageError("--sample-negatives needs --corpus");
    const auto docs = load_corpus_checked(o.corpus, policy);
    negatives = sample_presumed_negatives(docs, o.sample_negatives, g.seed);
    write_dataset(dir / "negatives.jsonl", negatives);
    inputs.push_back(o.corpus);
  }

  const EvaluationSet set = build_evaluation_set(expert, negatives, o.expert_only);
  std::vector<EvalReport> reports;
  for (const auto& path : o.scores) {
    const auto scores = read_scores_csv(path);
    inputs.push_back(path);
    EvalReport report;
    try {
      report = evaluate(scores, set);
    } catch (const Error& err) {
      throw Error(err.code(), path + ": " + err.what());
    }
    if (report.detector.empty()) report.detector = fs::path(path).stem().string();
    reports.push_back(std::move(report));
  }
  write_report_files(dir, reports);
  write_report_csv(out, reports);
  manifest.inputs = hash_inputs(inputs);
  manifest.seed = g.seed;
  return 0;
}

// ---------------------------------------------------------------------------
// inject

std::uint64_t doc_seed(std::uint64_t seed, const std::string& doc_id) {
  const std::string h = sha256_hex(doc_id);
  return seed ^ std::stoull(h.substr(0, 16), nullptr, 16);
}

int cmd_inject(const InjectOptions& o, const Globals& g, RunManifest& manifest, std::ostream& out) {
  const auto policy = policy_of(o.normalization);
  const auto docs = load_corpus_checked(o.corpus, policy);
  std::vector<fs::path> inputs = {o.corpus};
  const InjectionChannel channel = parse_injection_channel(o.channel);

  std::shared_ptr<const NeighborIndex> index;
  if (channel == InjectionChannel::kWordNeighborSwap) {
    std::shared_ptr<const Vocabulary> vocab;
    if (!o.vocab.empty()) {
      vocab = shared_vocab(Vocabulary::load(o.vocab, policy));
      inputs.push_back(o.vocab);
    } else {
      vocab = shared_vocab(vocabulary_from_documents(docs, policy));
    }
    index = std::make_shared<const NeighborIndex>(NeighborIndex::build(vocab, 1));
  }
  const std::u32string alphabet = corpus_alphabet(docs);

  const fs::path dir = o.out;
  fs::create_directories(dir / "corpus");
  std::ostringstream flags;
  flags << "doc_id,word_index,original,corrupted\n";
  std::size_t total = 0;
  std::size_t skipped = 0;
  for (const auto& d : docs) {
    const Injection inj = inject_artificial_errors(d, o.rate, channel, doc_seed(g.seed, d.id),
                                                   index.get(), alphabet);
    write_file_atomic(dir / "corpus" / (d.id + ".txt"), render_words(inj.words) + "\n");
    for (const auto& e : inj.errors) {
      flags << d.id << ',' << e.word_index << ',' << e.original << ',' << e.corrupted << '\n';
    }
    total += inj.errors.size();
    skipped += inj.skipped.size();
  }
  write_file_atomic(dir / "flags.csv", flags.str());
  manifest.inputs = hash_inputs(inputs);
  manifest.seed = g.seed;
  out << "injected " << total << " error(s) into " << docs.size() << " document(s)";
  if (skipped) out << " (" << skipped << " selected word(s) had no applicable edit)";
  out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// dataset-report

int cmd_report(const ReportOptions& o, std::ostream& out) {
  if (o.dataset.empty() == o.published.empty()) {
    throw UsageError("give exactly one of --dataset or --published");
  }
  std::vector<LabeledExample> rows = o.dataset.empty()
                                         ? import_published(o.published)
                                         : load_dataset(o.dataset, policy_of(o.normalization));
  if (!o.write.empty()) write_dataset(o.write, rows);
  out << format_summary(summarize(rows));
  return 0;
}

// ---------------------------------------------------------------------------
// serve

int cmd_serve(const ServeOptions& o, std::ostream& out) {
  const auto policy = policy_of(o.normalization);
  auto ranked = read_scores_csv(o.ranked);
  rank_scores(ranked);
  auto docs = load_corpus_checked(o.corpus, policy);
  auto store = std::make_shared<ReviewStore>(std::move(ranked), std::move(docs), o.dataset, policy);

  ReviewServerOptions so;
  const auto colon = o.bind.rfind(':');
  if (colon == std::string::npos) throw UsageError("--bind expects host:port");
  so.host = o.bind.substr(0, colon);
  try {
    so.port = std::stoi(o.bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("--bind expects host:port");
  }
  if (!o.static_dir.empty()) so.static_dir = o.static_dir;
  std::string secret = o.secret;
  if (secret.empty()) {
    if (const char* env = std::getenv("LECTIO_REVIEW_SECRET")) secret = env;
  }
  if (!secret.empty()) so.shared_secret = secret;

  // Handle SIGINT/SIGTERM on a dedicated thread so shutdown can compact.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);

  ReviewServer server(store, so);
  int port = 0;
  try {
    port = server.bind();
  } catch (...) {
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    throw;
  }
  out << "review service on http://" << so.host << ":" << port << "/\n" << std::flush;

  std::atomic<bool> done{false};
  std::thread watcher([&] {
    const timespec tick{0, 200'000'000};
    while (!done.load()) {
      if (sigtimedwait(&signals, nullptr, &tick) > 0) {
        spdlog::info("shutting down review service");
        server.stop();
        return;
      }
    }
  });
  server.run();
  done = true;
  watcher.join();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  store->compact();
  out << "labels saved to " << o.dataset << "\n";
  return 0;
}

void setup_logging(const std::string& level) {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_mt("lectio");
    spdlog::set_default_logger(l);
    return l;
  }();
  spdlog::set_level(spdlog::level::from_str(level));
}

bool truthy(const std::string& v) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s == "1" || s == "true" || s == "yes" || s == "on";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scores every word of a text for the likelihood of being a copying error.",
               "lectio"};
  app.set_version_flag("--version", LECTIO_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "key = value file supplying defaults for any flag");
  app.add_option("--seed", g.seed, "Seed for sampling and injection")->capture_default_str();
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}))
      ->capture_default_str();

  ScoreOptions so;
  auto* score = app.add_subcommand("score", "Score every word of a corpus");
  score->add_option("--corpus", so.corpus, "Directory of UTF-8 *.txt documents")
      ->required()
      ->check(CLI::ExistingDirectory);
  score->add_option("--out", so.out, "Output directory")->required();
  score->add_option("--detector", so.detector, "ccr, pllr, discriminator or llm")
      ->required()
      ->check(CLI::IsMember({"ccr", "pllr", "discriminator", "llm"}));
  score->add_option("--provider", so.provider, "ngram, logits, disc, pll or uniform")
      ->check(CLI::IsMember({"ngram", "logits", "disc", "pll", "uniform"}))
      ->capture_default_str();
  score->add_option("--train", so.train, "Training corpus for the n-gram provider")
      ->check(CLI::ExistingDirectory);
  score->add_option("--logits", so.logits, "Masked-LM logits file")->check(CLI::ExistingFile);
  score->add_option("--token-chances", so.token_chances, "Sub-word chance file")
      ->check(CLI::ExistingFile);
  score->add_option("--replaced", so.replaced, "Replaced-token score file")
      ->check(CLI::ExistingFile);
  score->add_option("--pll", so.pll, "Pseudo-likelihood file")->check(CLI::ExistingFile);
  score->add_option("--vocab", so.vocab, "Vocabulary file")->check(CLI::ExistingFile);
  score->add_option("--radius", so.radius, "Edit-distance radius k")
      ->check(CLI::Range(0, 2))
      ->capture_default_str();
  score->add_option("--beam", so.beam, "Keep only the provider's top-b suggestions");
  score->add_option("--aggregation", so.aggregation, "max or mean over sub-word tokens")
      ->check(CLI::IsMember({"max", "mean"}))
      ->capture_default_str();
  score->add_option("--top-n", so.top_n, "Rows in ranked.csv (0 = all)")->capture_default_str();
  score->add_option("--threads", so.threads, "Scoring threads")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();
  score->add_option("--normalization", so.normalization)
      ->check(CLI::IsMember(kNormalizations))
      ->capture_default_str();
  score->add_option("--exemplars", so.exemplars, "Judge exemplars (JSON lines)")
      ->check(CLI::ExistingFile);
  score->add_option("--judge-model", so.judge_model)->capture_default_str();
  score->add_option("--judge-m", so.judge_m, "Top of the judge's 1..m scale")
      ->check(CLI::Range(2, 100))
      ->capture_default_str();
  score->add_option("--judge-temperature", so.judge_temperature)->capture_default_str();
  score->add_option("--judge-window", so.judge_window, "Context words either side")
      ->capture_default_str();
  score->add_option("--max-in-flight", so.max_in_flight, "Concurrent judge requests")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();
  score->add_option("--audit", so.audit, "Append judge exchanges to this JSON-lines file");
  score->add_option("--replay", so.replay, "Answer judge requests from an audit file")
      ->check(CLI::ExistingFile);

  EvaluateOptions eo;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "ROC evaluation against labeled data");
  evaluate_cmd->add_option("--scores", eo.scores, "Score CSV (repeat for several detectors)")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--dataset", eo.dataset, "Labeled dataset (JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  auto* neg_file = evaluate_cmd->add_option("--negatives", eo.negatives,
                                            "Presumed negatives (JSON lines)")
                       ->check(CLI::ExistingFile);
  evaluate_cmd
      ->add_option("--sample-negatives", eo.sample_negatives,
                   "Sample this many presumed negatives from --corpus")
      ->excludes(neg_file);
  evaluate_cmd->add_option("--corpus", eo.corpus)->check(CLI::ExistingDirectory);
  evaluate_cmd->add_flag("--expert-only", eo.expert_only, "Leave presumed negatives out");
  evaluate_cmd->add_option("--out", eo.out, "Output directory")->required();
  evaluate_cmd->add_option("--normalization", eo.normalization)
      ->check(CLI::IsMember(kNormalizations))
      ->capture_default_str();

  InjectOptions io;
  auto* inject = app.add_subcommand("inject", "Corrupt a corpus with artificial errors");
  inject->add_option("--corpus", io.corpus)->required()->check(CLI::ExistingDirectory);
  inject->add_option("--rate", io.rate, "Per-word corruption probability")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  inject->add_option("--channel", io.channel, "char_substitute or word_neighbor_swap")
      ->check(CLI::IsMember({"char_substitute", "word_neighbor_swap"}))
      ->capture_default_str();
  inject->add_option("--vocab", io.vocab, "Vocabulary for word_neighbor_swap")
      ->check(CLI::ExistingFile);
  inject->add_option("--out", io.out)->required();
  inject->add_option("--normalization", io.normalization)
      ->check(CLI::IsMember(kNormalizations))
      ->capture_default_str();

  ReportOptions ro;
  auto* report = app.add_subcommand("dataset-report", "Label by category counts of a dataset");
  report->add_option("--dataset", ro.dataset, "Dataset in JSON lines")->check(CLI::ExistingFile);
  report->add_option("--published", ro.published, "Published dataset export to import")
      ->check(CLI::ExistingFile);
  report->add_option("--write", ro.write, "Write the (imported) rows as JSON lines");
  report->add_option("--normalization", ro.normalization)
      ->check(CLI::IsMember(kNormalizations))
      ->capture_default_str();

  ServeOptions sv;
  auto* serve = app.add_subcommand("serve", "Run the review service");
  serve->add_option("--ranked", sv.ranked, "Ranked score CSV")->required()->check(CLI::ExistingFile);
  serve->add_option("--corpus", sv.corpus)->required()->check(CLI::ExistingDirectory);
  serve->add_option("--dataset", sv.dataset, "Dataset file receiving labels")->required();
  serve->add_option("--bind", sv.bind, "host:port")->capture_default_str();
  serve->add_option("--static", sv.static_dir, "UI bundle directory")->check(CLI::ExistingDirectory);
  serve->add_option("--secret", sv.secret, "Shared secret for X-Review-Secret");
  serve->add_option("--normalization", sv.normalization)
      ->check(CLI::IsMember(kNormalizations))
      ->capture_default_str();

  try {
    // Config entries become trailing flags unless given on the command line.
    std::vector<std::string> argv = args;
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
      if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (!config_path.empty()) {
      CLI::App* sub = nullptr;
      for (const auto& a : args) {
        if (auto* s = app.get_subcommand_no_throw(a)) {
          sub = s;
          break;
        }
      }
      for (const auto& [key, value] : load_config(config_path)) {
        const std::string flag = "--" + key;
        const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
          return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (given || key == "config") continue;
        const CLI::Option* opt = sub ? sub->get_option_no_throw(flag) : nullptr;
        if (!opt) opt = app.get_option_no_throw(flag);
        if (!opt) {
          spdlog::debug("config key '{}' does not apply here", key);
          continue;
        }
        if (opt->get_expected_min() == 0) {
          if (truthy(value)) argv.push_back(flag);
        } else {
          argv.push_back(flag);
          argv.push_back(value);
        }
      }
    }
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitUsage;
  } catch (const UsageError& e) {
    err << "lectio: " << e.what() << "\n";
    return kExitUsage;
  }

  setup_logging(g.log_level);
  CLI::App* active = app.get_subcommands().front();
  RunManifest manifest;
  manifest.version = LECTIO_VERSION;
  manifest.subcommand = active->get_name();
  manifest.config = resolved_options(app, *active);
  manifest.started_at = utc_now();

  try {
    std::optional<fs::path> out_dir;
    int code = 0;
    if (active == score) {
      code = cmd_score(so, g, manifest, out);
      out_dir = so.out;
    } else if (active == evaluate_cmd) {
      code = cmd_evaluate(eo, g, manifest, out);
      out_dir = eo.out;
    } else if (active == inject) {
      code = cmd_inject(io, g, manifest, out);
      out_dir = io.out;
    } else if (active == report) {
      code = cmd_report(ro, out);
    } else {
      code = cmd_serve(sv, out);
    }
    if (out_dir) {
      manifest.finished_at = utc_now();
      write_manifest(*out_dir, manifest);
    }
    return code;
  } catch (const UsageError& e) {
    err << "lectio: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "lectio: " << to_string(e.code()) << " error: " << e.what() << "\n";
    return e.code() == ErrorCode::kCoverage ? kExitCoverage : kExitFailure;
  } catch (const std::exception& e) {
    err << "lectio: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace lectio::cli
