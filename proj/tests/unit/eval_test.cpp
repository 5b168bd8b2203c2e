#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "generators.hpp"
#include "lectio/error.hpp"
#include "lectio/eval.hpp"
#include "oracles.hpp"

namespace lectio {
namespace {

std::vector<ScoredLabel> labels(std::initializer_list<std::pair<double, int>> pairs) {
  std::vector<ScoredLabel> out;
  for (auto [s, y] : pairs) out.push_back({s, y});
  return out;
}

TEST(Roc, PerfectInvertedAndConstant) {
  EXPECT_EQ(roc(labels({{0.9, 1}, {0.8, 1}, {0.2, 0}, {0.1, 0}})).auroc, 1.0);
  EXPECT_EQ(roc(labels({{0.1, 1}, {0.2, 1}, {0.8, 0}, {0.9, 0}})).auroc, 0.0);
  EXPECT_EQ(roc(labels({{0.5, 1}, {0.5, 0}, {0.5, 0}})).auroc, 0.5);
}

TEST(Roc, InterleavedQuadrupleIsChance) {
  const auto c = roc(labels({{0.8, 1}, {0.9, 0}, {0.3, 1}, {0.2, 0}}));
  EXPECT_EQ(c.auroc, 0.5);
  EXPECT_EQ(c.n_pos, 2u);
  EXPECT_EQ(c.n_neg, 2u);
}

TEST(Roc, TieBlockMovesDiagonally) {
  const auto c = roc(labels({{2.0, 1}, {1.0, 1}, {1.0, 0}, {0.0, 0}}));
  ASSERT_EQ(c.points.size(), 4u);
  EXPECT_EQ(c.points[0].fpr, 0.0);
  EXPECT_EQ(c.points[1].tpr, 0.5);
  EXPECT_EQ(c.points[1].fpr, 0.0);
  EXPECT_EQ(c.points[2].tpr, 1.0);
  EXPECT_EQ(c.points[2].fpr, 0.5);
  EXPECT_EQ(c.points[3].fpr, 1.0);
  EXPECT_EQ(c.auroc, 0.875);
}

TEST(Roc, DegenerateInputs) {
  auto code = [](std::vector<ScoredLabel> v) {
    try {
      roc(v);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIo;
  };
  EXPECT_EQ(code(labels({{1.0, 1}, {2.0, 1}})), ErrorCode::kDegenerateInput);
  EXPECT_EQ(code(labels({{1.0, 0}})), ErrorCode::kDegenerateInput);
  EXPECT_EQ(code(labels({{NAN, 0}, {1.0, 1}})), ErrorCode::kDegenerateInput);
  EXPECT_EQ(code(labels({{INFINITY, 0}, {1.0, 1}})), ErrorCode::kDegenerateInput);
}

TEST(Roc, AreaEqualsMannWhitneyWithTies) {
  testing::Gen gen(73);
  for (int round = 0; round < 500; ++round) {
    const std::size_t n = gen.between(2, 200);
    std::vector<ScoredLabel> v(n);
    std::vector<std::pair<double, int>> pairs;
    const std::size_t levels = gen.between(1, 12);
    for (std::size_t i = 0; i < n; ++i) {
      v[i].y = i == 0 ? 1 : (i == 1 ? 0 : static_cast<int>(gen.coin(0.3)));
      v[i].score = gen.coin(0.5) ? static_cast<double>(gen.below(levels)) : gen.normal();
      pairs.emplace_back(v[i].score, v[i].y);
    }
    const auto c = roc(v);
    ASSERT_NEAR(c.auroc, testing::mann_whitney(pairs), 1e-12);
    ASSERT_GE(c.auroc, 0.0);
    ASSERT_LE(c.auroc, 1.0);

    // Strictly increasing transforms leave the curve alone; negation mirrors it.
    std::vector<ScoredLabel> shifted = v;
    std::vector<ScoredLabel> negated = v;
    for (auto& s : shifted) s.score = std::exp(s.score / 4.0) + 3.0;
    for (auto& s : negated) s.score = -s.score;
    ASSERT_NEAR(roc(shifted).auroc, c.auroc, 1e-12);
    ASSERT_NEAR(roc(negated).auroc, 1.0 - c.auroc, 1e-12);

    const auto& pts = c.points;
    ASSERT_EQ(pts.front().fpr, 0.0);
    ASSERT_EQ(pts.back().fpr, 1.0);
    ASSERT_EQ(pts.back().tpr, 1.0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      ASSERT_GE(pts[i].fpr, pts[i - 1].fpr);
      ASSERT_GE(pts[i].tpr, pts[i - 1].tpr);
    }
  }
}

TEST(TprAtFpr, ConservativeWithoutInterpolation) {
  // 10 negatives, 4 positives.
  std::vector<ScoredLabel> v;
  for (int i = 0; i < 10; ++i) v.push_back({static_cast<double>(i), 0});
  v.push_back({9.5, 1});
  v.push_back({8.5, 1});
  v.push_back({7.5, 1});
  v.push_back({0.5, 1});
  const auto c = roc(v);
  EXPECT_EQ(tpr_at_fpr(c, 0.0), 0.25);
  EXPECT_EQ(tpr_at_fpr(c, 0.10), 0.5);
  EXPECT_EQ(tpr_at_fpr(c, 0.15), 0.5);
  EXPECT_EQ(tpr_at_fpr(c, 0.20), 0.75);
  EXPECT_EQ(tpr_at_fpr(c, 0.85), 0.75);
  EXPECT_EQ(tpr_at_fpr(c, 0.90), 1.0);
  EXPECT_EQ(tpr_at_fpr(c, 1.0), 1.0);
}

TEST(TprAtFpr, MatchesScanAndIsMonotone) {
  testing::Gen gen(79);
  for (int round = 0; round < 200; ++round) {
    std::vector<ScoredLabel> v(gen.between(2, 80));
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = {static_cast<double>(gen.below(10)), i < 2 ? static_cast<int>(i) : static_cast<int>(gen.coin())};
    }
    const auto c = roc(v);
    double prev = 0.0;
    for (int k = 0; k <= 20; ++k) {
      const double f = k / 20.0;
      double want = 0.0;
      for (const auto& p : c.points) {
        if (static_cast<double>(p.fp) <= f * static_cast<double>(c.n_neg) + 1e-9) {
          want = std::max(want, p.tpr);
        }
      }
      const double got = tpr_at_fpr(c, f);
      ASSERT_EQ(got, want) << f;
      ASSERT_GE(got, prev);
      prev = got;
    }
  }
}

ErrorScore scored(std::string doc, std::size_t index, double s) {
  ErrorScore e;
  e.doc_id = std::move(doc);
  e.word_index = index;
  e.score = s;
  e.detector = "ccr/k=1/provider=x";
  return e;
}

EvaluationExample labeled(std::string doc, std::size_t index, int y,
                          std::optional<ErrorCategory> c = std::nullopt) {
  EvaluationExample ex;
  ex.example.doc_id = std::move(doc);
  ex.example.word_index = index;
  ex.example.label = y ? Label::kError : Label::kNonError;
  ex.example.category = c;
  ex.y = y;
  return ex;
}

TEST(Evaluate, SlicesByCategoryKeepAllNegatives) {
  EvaluationSet set;
  set.examples = {labeled("a", 0, 1, ErrorCategory::kPrint), labeled("a", 1, 1, ErrorCategory::kScribal),
                  labeled("a", 2, 0), labeled("b", 0, 0)};
  const std::vector<ErrorScore> scores = {scored("a", 0, 5.0), scored("a", 1, 0.5),
                                          scored("a", 2, 1.0), scored("b", 0, 0.0),
                                          scored("z", 9, 100.0)};
  const auto r = evaluate(scores, set);
  EXPECT_EQ(r.detector, "ccr/k=1/provider=x");
  ASSERT_EQ(r.slices.size(), 3u);
  EXPECT_EQ(r.slices[0].name, "overall");
  EXPECT_EQ(r.slices[0].curve.auroc, 0.75);
  EXPECT_EQ(r.slices[1].name, "print");
  EXPECT_EQ(r.slices[1].curve.auroc, 1.0);
  EXPECT_EQ(r.slices[1].curve.n_neg, 2u);
  EXPECT_EQ(r.slices[2].name, "scribal");
  EXPECT_EQ(r.slices[2].curve.auroc, 0.5);

  std::ostringstream csv;
  write_report_csv(csv, std::vector{r});
  EXPECT_EQ(csv.str(),
            "detector,slice,auroc,tpr_at_0.10,n_pos,n_neg\n"
            "ccr/k=1/provider=x,overall,0.75,0.5,2,2\n"
            "ccr/k=1/provider=x,print,1,1,1,2\n"
            "ccr/k=1/provider=x,scribal,0.5,0,1,2\n");
}

TEST(Evaluate, MissingScoresListed) {
  EvaluationSet set;
  set.examples = {labeled("a", 0, 1, ErrorCategory::kPrint), labeled("a", 4, 0), labeled("c", 2, 0)};
  try {
    evaluate(std::vector{scored("a", 0, 1.0)}, set);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCoverage);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(a, 4)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(c, 2)"), std::string::npos) << msg;
  }
}

TEST(Report, FilesAndSvgDeterministic) {
  EvaluationSet set;
  set.examples = {labeled("a", 0, 1, ErrorCategory::kDigitization), labeled("a", 1, 0)};
  const auto r = evaluate(std::vector{scored("a", 0, 2.0), scored("a", 1, 1.0)}, set);
  EXPECT_EQ(roc_svg(r, r.slices[0]), roc_svg(r, r.slices[0]));
  EXPECT_NE(roc_svg(r, r.slices[0]).find("AUROC 1.0000"), std::string::npos);
  EXPECT_EQ(sanitize_name("ccr/k=1/provider=logits:m.tsv"), "ccr_k_1_provider_logits_m.tsv");

  testing::TempDir dir;
  write_report_files(dir.path(), std::vector{r});
  EXPECT_TRUE(std::filesystem::exists(dir / "report.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "roc_ccr_k_1_provider_x_overall.svg"));
  EXPECT_TRUE(std::filesystem::exists(dir / "roc_ccr_k_1_provider_x_digitization.svg"));
}

}  // namespace
}  // namespace lectio
