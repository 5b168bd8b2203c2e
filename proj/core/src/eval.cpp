#include "lectio/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "csv.hpp"
#include "lectio/error.hpp"
#include "lectio/hash.hpp"

namespace lectio {

RocCurve roc(std::span<const ScoredLabel> scores) {
  RocCurve curve;
  for (const auto& s : scores) {
    if (!std::isfinite(s.score)) throw Error(ErrorCode::kDegenerateInput, "non-finite score");
    (s.y == 1 ? curve.n_pos : curve.n_neg)++;
  }
  if (curve.n_pos == 0 || curve.n_neg == 0) {
    throw Error(ErrorCode::kDegenerateInput,
                "ROC needs both classes (positives " + std::to_string(curve.n_pos) +
                    ", negatives " + std::to_string(curve.n_neg) + ")");
  }
  std::vector<ScoredLabel> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });

  const auto pos = static_cast<double>(curve.n_pos);
  const auto neg = static_cast<double>(curve.n_neg);
  curve.points.push_back(RocPoint{});
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      (sorted[j].y == 1 ? tp : fp)++;
      ++j;
    }
    curve.points.push_back(RocPoint{fp, tp, static_cast<double>(fp) / neg,
                                    static_cast<double>(tp) / pos});
    i = j;
  }
  curve.auroc = trapezoid_area(curve.points);
  return curve;
}

double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

double tpr_at_fpr(const RocCurve& curve, double fpr) {
  if (fpr >= 1.0) return 1.0;
  // Integer comparison avoids admitting a point through rounding.
  const auto allowed = static_cast<std::size_t>(
      std::floor(std::max(0.0, fpr) * static_cast<double>(curve.n_neg) + 1e-9));
  double best = 0.0;
  for (const auto& p : curve.points) {
    if (p.fp <= allowed) best = std::max(best, p.tpr);
  }
  return best;
}

EvalReport evaluate(std::span<const ErrorScore> scores, const EvaluationSet& set,
                    const std::vector<double>& fpr_keys) {
  std::map<std::pair<std::string, std::size_t>, const ErrorScore*> by_key;
  std::string detector;
  for (const auto& s : scores) {
    by_key[{s.doc_id, s.word_index}] = &s;
    if (detector.empty()) detector = s.detector;
  }

  std::vector<ScoredLabel> all;
  std::vector<std::optional<ErrorCategory>> categories;
  std::vector<std::string> missing;
  for (const auto& ex : set.examples) {
    auto it = by_key.find({ex.example.doc_id, ex.example.word_index});
    if (it == by_key.end()) {
      missing.push_back("(" + ex.example.doc_id + ", " + std::to_string(ex.example.word_index) + ")");
      continue;
    }
    all.push_back({it->second->score, ex.y});
    categories.push_back(ex.y == 1 ? ex.example.category : std::nullopt);
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " evaluation example(s) have no score:";
    for (const auto& m : missing) msg += " " + m;
    throw Error(ErrorCode::kCoverage, msg);
  }

  EvalReport report;
  report.detector = detector;
  auto add_slice = [&](std::string name, const std::vector<ScoredLabel>& data) {
    EvalSlice slice;
    slice.name = std::move(name);
    slice.curve = roc(data);
    for (double f : fpr_keys) slice.tpr_at[f] = tpr_at_fpr(slice.curve, f);
    report.slices.push_back(std::move(slice));
  };
  add_slice("overall", all);
  for (ErrorCategory c : kAllCategories) {
    std::vector<ScoredLabel> data;
    bool has_positive = false;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (all[i].y == 0) {
        data.push_back(all[i]);
      } else if (categories[i] == c) {
        data.push_back(all[i]);
        has_positive = true;
      }
    }
    if (has_positive) add_slice(std::string(to_string(c)), data);
  }
  return report;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fpr_label(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "tpr_at_%.2f", f);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports,
                      const std::vector<double>& fpr_keys) {
  std::vector<std::string> header = {"detector", "slice", "auroc"};
  for (double f : fpr_keys) header.push_back(fpr_label(f));
  header.push_back("n_pos");
  header.push_back("n_neg");
  out << detail::csv_row(header);
  for (const auto& r : reports) {
    for (const auto& s : r.slices) {
      std::vector<std::string> row = {r.detector, s.name, format_score(s.curve.auroc)};
      for (double f : fpr_keys) row.push_back(format_score(s.tpr_at.at(f)));
      row.push_back(std::to_string(s.curve.n_pos));
      row.push_back(std::to_string(s.curve.n_neg));
      out << detail::csv_row(row);
    }
  }
}

std::string sanitize_name(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-';
    out += ok ? c : '_';
  }
  return out;
}

std::string roc_svg(const EvalReport& report, const EvalSlice& slice) {
  constexpr double kSize = 360.0;
  constexpr double kMargin = 50.0;
  auto x = [&](double fpr) { return fixed(kMargin + fpr * kSize, 2); };
  auto y = [&](double tpr) { return fixed(kMargin + (1.0 - tpr) * kSize, 2); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"460\" height=\"470\" "
         "viewBox=\"0 0 460 470\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"460\" height=\"470\" fill=\"white\"/>\n";
  svg << "<text x=\"230\" y=\"20\" text-anchor=\"middle\">" << xml_escape(report.detector)
      << "</text>\n";
  svg << "<text x=\"230\" y=\"36\" text-anchor=\"middle\">" << xml_escape(slice.name)
      << ": AUROC " << fixed(slice.curve.auroc, 4) << " (n_pos " << slice.curve.n_pos
      << ", n_neg " << slice.curve.n_neg << ")</text>\n";
  svg << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kSize
      << "\" height=\"" << kSize << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 10; t += 2) {
    const double v = t / 10.0;
    svg << "<text x=\"" << x(v) << "\" y=\"" << fixed(kMargin + kSize + 16, 2)
        << "\" text-anchor=\"middle\">" << fixed(v, 1) << "</text>\n";
    svg << "<text x=\"" << fixed(kMargin - 6, 2) << "\" y=\"" << y(v)
        << "\" text-anchor=\"end\" dominant-baseline=\"middle\">" << fixed(v, 1) << "</text>\n";
  }
  svg << "<text x=\"230\" y=\"" << fixed(kMargin + kSize + 34, 2)
      << "\" text-anchor=\"middle\">false positive rate</text>\n";
  svg << "<text x=\"14\" y=\"230\" text-anchor=\"middle\" transform=\"rotate(-90 14 230)\">"
         "true positive rate</text>\n";
  svg << "<line x1=\"" << x(0) << "\" y1=\"" << y(0) << "\" x2=\"" << x(1) << "\" y2=\"" << y(1)
      << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  svg << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < slice.curve.points.size(); ++i) {
    if (i) svg << ' ';
    svg << x(slice.curve.points[i].fpr) << ',' << y(slice.curve.points[i].tpr);
  }
  svg << "\"/>\n</svg>\n";
  return svg.str();
}

void write_report_files(const std::filesystem::path& dir, std::span<const EvalReport> reports,
                        const std::vector<double>& fpr_keys) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  write_report_csv(csv, reports, fpr_keys);
  write_file_atomic(dir / "report.csv", csv.str());
  for (const auto& r : reports) {
    for (const auto& s : r.slices) {
      write_file_atomic(dir / ("roc_" + sanitize_name(r.detector) + "_" + s.name + ".svg"),
                        roc_svg(r, s));
    }
  }
}

}  // namespace lectio
