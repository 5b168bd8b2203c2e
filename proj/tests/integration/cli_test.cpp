#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "generators.hpp"
#include "json.hpp"
#include "lectio/dataset.hpp"
#include "lectio/detectors.hpp"
#include "manifest.hpp"

namespace lectio {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;
using testing::write_text;

struct RunResult {
  int code = 0;
  std::string out;
  std::string err;
};

RunResult lectio_run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  RunResult r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path fixture(const std::string& name) { return testing::data_dir() / "three_sentences" / name; }

TEST(CliScore, MatchesIndependentlyComputedGolden) {
  TempDir dir;
  const auto r = lectio_run({"score", "--detector", "ccr", "--corpus", fixture("corpus"), "--train",
                             fixture("train"), "--out", dir / "run"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto got = read_scores_csv(dir / "run" / "scores.csv");
  const auto want = read_scores_csv(testing::data_dir() / "golden" / "ccr_three_sentences.csv");
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].doc_id, want[i].doc_id);
    EXPECT_EQ(got[i].word_index, want[i].word_index);
    EXPECT_EQ(got[i].surface, want[i].surface);
    EXPECT_NEAR(got[i].score, want[i].score, 1e-8) << got[i].surface;
    EXPECT_EQ(got[i].detector, want[i].detector);
    EXPECT_EQ(got[i].best_alternative, want[i].best_alternative);
  }

  const auto ranked = read_scores_csv(dir / "run" / "ranked.csv");
  ASSERT_EQ(ranked.size(), got.size());
  EXPECT_EQ(ranked[0].surface, "cot");
  EXPECT_EQ(ranked[1].surface, "rat");
  EXPECT_EQ(ranked[2].surface, "hat");
}

TEST(CliScore, RerunsAreByteIdentical) {
  TempDir dir;
  for (const char* run : {"a", "b"}) {
    const auto r = lectio_run({"score", "--detector", "ccr", "--corpus", fixture("corpus"),
                               "--train", fixture("train"), "--radius", "2", "--threads", "3",
                               "--top-n", "5", "--out", dir / run});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(dir / "a" / "scores.csv"), slurp(dir / "b" / "scores.csv"));
  EXPECT_EQ(slurp(dir / "a" / "ranked.csv"), slurp(dir / "b" / "ranked.csv"));
  EXPECT_EQ(read_scores_csv(dir / "a" / "ranked.csv").size(), 5u);

  auto a = cli::read_manifest(dir / "a");
  auto b = cli::read_manifest(dir / "b");
  EXPECT_EQ(a.subcommand, "score");
  EXPECT_EQ(a.inputs.size(), 2u);
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    EXPECT_EQ(a.inputs[i].path, b.inputs[i].path);
    EXPECT_EQ(a.inputs[i].sha256, b.inputs[i].sha256);
  }
  std::map<std::string, std::string> ca(a.config.begin(), a.config.end());
  std::map<std::string, std::string> cb(b.config.begin(), b.config.end());
  EXPECT_EQ(ca.at("radius"), "2");
  ca.erase("out");
  cb.erase("out");
  EXPECT_EQ(ca, cb);
  EXPECT_FALSE(a.started_at.empty());
}

TEST(CliScore, UsageErrorsExitTwo) {
  TempDir dir;
  EXPECT_EQ(lectio_run({"score", "--detector", "bogus", "--corpus", fixture("corpus"), "--out",
                        dir / "x"})
                .code,
            2);
  EXPECT_EQ(lectio_run({"score", "--detector", "ccr", "--out", dir / "x"}).code, 2);
  EXPECT_EQ(lectio_run({"score", "--detector", "ccr", "--corpus", fixture("corpus"), "--out",
                        dir / "x", "--provider", "logits"})
                .code,
            2);
  EXPECT_EQ(lectio_run({}).code, 2);
  EXPECT_EQ(lectio_run({"frobnicate"}).code, 2);
  EXPECT_FALSE(fs::exists(dir / "x" / "scores.csv"));
  const auto v = lectio_run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("0.3.0"), std::string::npos) << v.out;
}

TEST(CliScore, MissingProviderRecordExitsThree) {
  TempDir dir;
  write_text(dir / "vocab.txt", "The\ncat\nsat\n");
  const auto vocab = Vocabulary::load(dir / "vocab.txt");
  write_text(dir / "m.logits", "#mlm-logits v1 vocab=" + vocab.fingerprint() +
                                   "\nfixture\t0\t1\tThe:0.9\n");
  const auto r = lectio_run({"score", "--detector", "ccr", "--provider", "logits", "--logits",
                             dir / "m.logits", "--vocab", dir / "vocab.txt", "--corpus",
                             fixture("corpus"), "--out", dir / "out"});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("coverage"), std::string::npos) << r.err;
}

TEST(CliScore, ManifestVerifiesInputs) {
  TempDir dir;
  fs::copy(fixture("corpus"), dir / "corpus");
  ASSERT_EQ(lectio_run({"score", "--detector", "ccr", "--corpus", dir / "corpus", "--out",
                        dir / "out"})
                .code,
            0);
  EXPECT_TRUE(cli::verify_manifest(dir / "out").empty());
  write_text(dir / "corpus" / "fixture.txt", "The cat sat.\n");
  const auto problems = cli::verify_manifest(dir / "out");
  ASSERT_EQ(problems.size(), 1u);
  EXPECT_NE(problems[0].find("hash changed"), std::string::npos);
}

TEST(CliConfig, CommandLineBeatsConfigFile) {
  TempDir dir;
  write_text(dir / "run.conf",
             "# defaults for the fixture\n"
             "detector = ccr\n"
             "radius = 2\n"
             "top_n = 3\n"
             "train = \"" + fixture("train").string() + "\"\n"
             "expert_only = true\n");
  const auto r = lectio_run({"--config", dir / "run.conf", "score", "--corpus", fixture("corpus"),
                             "--radius", "0", "--out", dir / "out"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = cli::read_manifest(dir / "out");
  std::map<std::string, std::string> config(m.config.begin(), m.config.end());
  EXPECT_EQ(config.at("radius"), "0");
  EXPECT_EQ(config.at("detector"), "ccr");
  EXPECT_EQ(config.at("top-n"), "3");
  EXPECT_EQ(config.count("expert-only"), 0u);
  EXPECT_EQ(read_scores_csv(dir / "out" / "ranked.csv").size(), 3u);
  EXPECT_NE(read_scores_csv(dir / "out" / "scores.csv")[0].detector.find("k=0"), std::string::npos);

  write_text(dir / "bad.conf", "radius 2\n");
  EXPECT_EQ(lectio_run({"--config", dir / "bad.conf", "score", "--detector", "ccr", "--corpus",
                        fixture("corpus"), "--out", dir / "out2"})
                .code,
            2);
}

// A corpus with one document and a dataset labeling some of its words.
class CliEvaluate : public ::testing::Test {
 protected:
  void SetUp() override {
    fs::create_directories(dir / "corpus");
    write_text(dir / "corpus" / "d.txt", text);
  }

  LabeledExample row(std::size_t index, Label label,
                     std::optional<ErrorCategory> c = std::nullopt) const {
    const Document doc = make_document("d", text);
    LabeledExample e;
    e.doc_id = "d";
    e.word_index = index;
    e.surface = doc.words.at(index);
    e.label = label;
    e.category = c;
    e.context_text = doc.text.normalized();
    return e;
  }

  void scores(const std::string& name, const std::vector<std::pair<std::size_t, double>>& s) {
    const Document doc = make_document("d", text);
    std::vector<ErrorScore> rows;
    for (auto [i, v] : s) {
      ErrorScore e;
      e.doc_id = "d";
      e.word_index = i;
      e.surface = doc.words[i];
      e.score = v;
      e.detector = name;
      rows.push_back(e);
    }
    std::ostringstream out;
    write_scores_csv(out, rows);
    write_text(dir / (name + ".csv"), out.str());
  }

  TempDir dir;
  std::string text = "alpha beta gamma delta epsilon zeta eta theta";
};

TEST_F(CliEvaluate, PerfectAndChanceDetectors) {
  write_dataset(dir / "labels.jsonl",
                std::vector{row(0, Label::kError, ErrorCategory::kPrint), row(1, Label::kNonError),
                            row(2, Label::kError, ErrorCategory::kScribal), row(3, Label::kNonError),
                            row(4, Label::kPlausible)});
  scores("perfect", {{0, 0.9}, {1, 0.1}, {2, 0.8}, {3, 0.2}});
  scores("chance", {{0, 0.8}, {1, 0.9}, {2, 0.3}, {3, 0.2}});
  const auto r = lectio_run({"evaluate", "--scores", dir / "perfect.csv", "--scores",
                             dir / "chance.csv", "--dataset", dir / "labels.jsonl", "--out",
                             dir / "eval"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("perfect,overall,1,1,2,2\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("chance,overall,0.5,0,2,2\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("perfect,print,1,1,1,2\n"), std::string::npos) << r.out;
  EXPECT_EQ(slurp(dir / "eval" / "report.csv"), r.out);
  EXPECT_TRUE(fs::exists(dir / "eval" / "roc_perfect_overall.svg"));
  EXPECT_TRUE(fs::exists(dir / "eval" / "manifest.json"));
}

TEST_F(CliEvaluate, SampledNegativesAndExpertOnly) {
  write_dataset(dir / "labels.jsonl",
                std::vector{row(0, Label::kError, ErrorCategory::kDigitization), row(1, Label::kNonError)});
  std::vector<std::pair<std::size_t, double>> all;
  for (std::size_t i = 0; i < 8; ++i) all.emplace_back(i, i == 0 ? 5.0 : 1.0 / (1.0 + i));
  scores("det", all);

  auto r = lectio_run({"--seed", "11", "evaluate", "--scores", dir / "det.csv", "--dataset",
                       dir / "labels.jsonl", "--sample-negatives", "4", "--corpus", dir / "corpus",
                       "--out", dir / "eval"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto negatives = load_dataset(dir / "eval" / "negatives.jsonl");
  EXPECT_EQ(negatives.size(), 4u);
  // A sampled negative may coincide with the labeled error, so only the
  // class sizes are fixed here.
  EXPECT_NE(r.out.find(",1,5\n"), std::string::npos) << r.out;

  r = lectio_run({"evaluate", "--scores", dir / "det.csv", "--dataset", dir / "labels.jsonl",
                  "--negatives", dir / "eval" / "negatives.jsonl", "--expert-only", "--out",
                  dir / "eval2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("det,overall,1,1,1,1\n"), std::string::npos) << r.out;

  EXPECT_EQ(lectio_run({"evaluate", "--scores", dir / "det.csv", "--dataset", dir / "labels.jsonl",
                        "--sample-negatives", "4", "--out", dir / "eval3"})
                .code,
            2);
}

TEST_F(CliEvaluate, MissingScoresExitThree) {
  write_dataset(dir / "labels.jsonl",
                std::vector{row(0, Label::kError, ErrorCategory::kPrint), row(5, Label::kNonError)});
  scores("partial", {{0, 1.0}});
  const auto r = lectio_run({"evaluate", "--scores", dir / "partial.csv", "--dataset",
                             dir / "labels.jsonl", "--out", dir / "eval"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("(d, 5)"), std::string::npos) << r.err;
}

TEST(CliInject, DeterministicWithExpectedRate) {
  TempDir dir;
  testing::Gen gen(83);
  const auto vocab = gen.vocabulary(400, testing::kSmallLatin, 2, 5);
  fs::create_directories(dir / "corpus");
  for (int d = 0; d < 4; ++d) {
    std::string text;
    for (int i = 0; i < 2500; ++i) text += vocab[gen.below(vocab.size())] + (i % 20 == 19 ? " .\n" : " ");
    write_text(dir / "corpus" / ("doc" + std::to_string(d) + ".txt"), text);
  }
  auto run = [&](const std::string& seed, const std::string& out, const std::string& channel) {
    return lectio_run({"--seed", seed, "inject", "--corpus", dir / "corpus", "--rate", "0.02",
                       "--channel", channel, "--out", dir / out});
  };
  ASSERT_EQ(run("5", "a", "word_neighbor_swap").code, 0);
  ASSERT_EQ(run("5", "b", "word_neighbor_swap").code, 0);
  ASSERT_EQ(run("6", "c", "word_neighbor_swap").code, 0);
  ASSERT_EQ(run("5", "d", "char_substitute").code, 0);

  const std::string flags = slurp(dir / "a" / "flags.csv");
  EXPECT_EQ(flags, slurp(dir / "b" / "flags.csv"));
  EXPECT_NE(flags, slurp(dir / "c" / "flags.csv"));
  EXPECT_EQ(slurp(dir / "a" / "corpus" / "doc2.txt"), slurp(dir / "b" / "corpus" / "doc2.txt"));

  // 10000 lexical words at rate 0.02: mean 200, sd 14.
  std::istringstream lines(flags);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "doc_id,word_index,original,corrupted");
  std::size_t n = 0;
  const std::set<std::string> known(vocab.begin(), vocab.end());
  while (std::getline(lines, line)) {
    ++n;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string part; std::getline(ss, part, ',');) f.push_back(part);
    ASSERT_EQ(f.size(), 4u) << line;
    EXPECT_NE(f[2], f[3]);
    EXPECT_TRUE(known.contains(f[3])) << f[3];
    const Document corrupted =
        make_document(f[0], slurp(dir / "a" / "corpus" / (f[0] + ".txt")));
    EXPECT_EQ(corrupted.words.at(std::stoul(f[1])), f[3]);
  }
  EXPECT_NEAR(static_cast<double>(n), 200.0, 45.0);
}

TEST(CliDatasetReport, SummaryAndImport) {
  TempDir dir;
  write_text(dir / "pub.json", R"([
    {"Transmitted Word in Question": "cot", "Expert Label": "GOOD FLAG",
     "Further Expert Notes": "scribal slip", "Word Index in Text": 1, "Text": "the cot sat"},
    {"Transmitted Word in Question": "sat", "Expert Label": "BAD FLAG",
     "Word Index in Text": 2, "Text": "the cot sat"}])");
  auto r = lectio_run({"dataset-report", "--published", dir / "pub.json", "--write",
                       dir / "rows.jsonl"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("definitive 2, positive fraction 1/2 = 0.500"), std::string::npos) << r.out;
  r = lectio_run({"dataset-report", "--dataset", dir / "rows.jsonl"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("scribal"), std::string::npos);
  EXPECT_EQ(lectio_run({"dataset-report"}).code, 2);
  EXPECT_EQ(lectio_run({"dataset-report", "--dataset", dir / "rows.jsonl", "--published",
                        dir / "pub.json"})
                .code,
            2);
}

}  // namespace
}  // namespace lectio
