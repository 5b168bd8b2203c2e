#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lectio/dataset.hpp"
#include "lectio/detectors.hpp"

namespace lectio {

struct ScoredLabel {
  double score = 0.0;
  int y = 0;
};

struct RocPoint {
  std::size_t fp = 0;
  std::size_t tp = 0;
  double fpr = 0.0;
  double tpr = 0.0;
};

// Threshold sweep from (0,0) to (1,1). Examples sharing a score enter the
// positive class together, so a tie block moves the curve diagonally.
struct RocCurve {
  std::vector<RocPoint> points;
  double auroc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

// Throws Error(kDegenerateInput) unless both classes are present.
RocCurve roc(std::span<const ScoredLabel> scores);

double trapezoid_area(std::span<const RocPoint> points);

// TPR of the best operating point whose FPR does not exceed `fpr`; no
// interpolation.
double tpr_at_fpr(const RocCurve& curve, double fpr);

struct EvalSlice {
  std::string name;  // "overall" or an error category
  RocCurve curve;
  std::map<double, double> tpr_at;
};

struct EvalReport {
  std::string detector;
  std::vector<EvalSlice> slices;  // overall first, then categories with positives
};

inline const std::vector<double> kDefaultFprKeys = {0.10};

// Every evaluation example must have a score; missing ones raise
// Error(kCoverage) listing each (doc, index). Category slices keep all
// negatives and restrict positives to that category.
EvalReport evaluate(std::span<const ErrorScore> scores, const EvaluationSet& set,
                    const std::vector<double>& fpr_keys = kDefaultFprKeys);

// detector,slice,auroc,tpr_at_0.10,n_pos,n_neg
void write_report_csv(std::ostream& out, std::span<const EvalReport> reports,
                      const std::vector<double>& fpr_keys = kDefaultFprKeys);

// Self-contained, byte-deterministic plot of one slice.
std::string roc_svg(const EvalReport& report, const EvalSlice& slice);

// File-system safe form of a detector fingerprint.
std::string sanitize_name(std::string_view name);

// report.csv plus roc_<detector>_<slice>.svg for every slice.
void write_report_files(const std::filesystem::path& dir, std::span<const EvalReport> reports,
                        const std::vector<double>& fpr_keys = kDefaultFprKeys);

}  // namespace lectio
