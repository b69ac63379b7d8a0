#include "roitrack/metric.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "roitrack/error.hpp"

namespace roitrack::metric {
namespace {

double overlap_1d(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

GtMatrix rasterize_gt(const BBox& box, const Window& window) {
  if (!(window.w > 0.0 && window.h > 0.0)) {
    throw ParameterError("rasterize_gt: window must have positive width and height");
  }
  GtMatrix gt;
  const double cell_w = window.w / static_cast<double>(kRoiSide);
  const double cell_h = window.h / static_cast<double>(kRoiSide);
  const double x0 = window.left();
  const double y0 = window.top();
  std::array<double, kRoiSide> cover_x{};
  std::array<double, kRoiSide> cover_y{};
  for (std::size_t i = 0; i < kRoiSide; ++i) {
    const double cx0 = x0 + static_cast<double>(i) * cell_w;
    const double cy0 = y0 + static_cast<double>(i) * cell_h;
    cover_x[i] = overlap_1d(cx0, cx0 + cell_w, box.x, box.x + box.w) / cell_w;
    cover_y[i] = overlap_1d(cy0, cy0 + cell_h, box.y, box.y + box.h) / cell_h;
  }
  // The tolerance absorbs roundoff on cells split exactly in half.
  constexpr double kHalfCover = 0.5 - 1e-9;
  for (std::size_t r = 0; r < kRoiSide; ++r) {
    for (std::size_t c = 0; c < kRoiSide; ++c) {
      gt(r, c) = cover_y[r] * cover_x[c] >= kHalfCover ? 1 : 0;
    }
  }
  return gt;
}

double heatmap_iou(const GtMatrix& truth, const RoiMatrix& estimate) {
  double dot = 0.0;
  double truth_sum = 0.0;
  double estimate_sum = 0.0;
  for (std::size_t i = 0; i < kRoiCells; ++i) {
    const double p = truth.cells[i];
    dot += p * estimate.cells[i];
    truth_sum += p;
    estimate_sum += estimate.cells[i];
  }
  const double denom = truth_sum - dot + estimate_sum;
  return denom > 0.0 ? dot / denom : 0.0;
}

double overlap_to_iou(double overlap) {
  if (!(overlap >= 0.0 && overlap <= 1.0)) {
    throw ParameterError("overlap_to_iou: overlap must lie in [0,1]");
  }
  return overlap / (2.0 - overlap);
}

double box_iou(const BBox& a, const BBox& b) {
  const double inter = overlap_1d(a.x, a.x + a.w, b.x, b.x + b.w) * overlap_1d(a.y, a.y + a.h, b.y, b.y + b.h);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

SequenceScore make_sequence_score(std::string name, std::vector<double> scores, std::size_t first_frame,
                                  std::size_t empty_frames) {
  SequenceScore s;
  s.name = std::move(name);
  s.first_frame = first_frame;
  s.empty_frames = empty_frames;
  s.frame_scores = std::move(scores);
  double acc = 0.0;
  for (double v : s.frame_scores) acc += v;
  s.mean = s.frame_scores.empty() ? 0.0 : acc / static_cast<double>(s.frame_scores.size());
  return s;
}

ScoreReport score_sequence(std::span<const GtMatrix> truth, std::span<const RoiMatrix> estimates,
                           std::string name, std::size_t first_frame) {
  if (truth.size() != estimates.size()) {
    throw ParameterError("score_sequence: count mismatch, " + std::to_string(truth.size()) +
                         " ground-truth matrices vs " + std::to_string(estimates.size()) + " estimates");
  }
  if (truth.empty()) throw ParameterError("score_sequence: no frames to score");
  std::vector<double> scores;
  scores.reserve(truth.size());
  std::size_t empty = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].sum() == 0.0 && estimates[i].sum() == 0.0) ++empty;
    scores.push_back(heatmap_iou(truth[i], estimates[i]));
  }
  ScoreReport report;
  report.sequences.push_back(make_sequence_score(std::move(name), std::move(scores), first_frame, empty));
  recompute_aggregate(report);
  return report;
}

void recompute_aggregate(ScoreReport& report) {
  double acc = 0.0;
  std::size_t scored = 0;
  report.frame_count = 0;
  for (const SequenceScore& s : report.sequences) {
    report.frame_count += s.frame_scores.size();
    if (s.frame_scores.empty()) continue;
    acc += s.mean;
    ++scored;
  }
  report.dataset_mean = scored ? acc / static_cast<double>(scored) : 0.0;
}

ScoreReport merge_reports(std::span<const ScoreReport> reports) {
  ScoreReport merged;
  if (!reports.empty()) merged.metric = reports.front().metric;
  for (const ScoreReport& r : reports) {
    merged.sequences.insert(merged.sequences.end(), r.sequences.begin(), r.sequences.end());
  }
  recompute_aggregate(merged);
  return merged;
}

void write_report_csv(std::ostream& out, const ScoreReport& report) {
  out << "sequence,frame_index,score\n";
  for (const SequenceScore& s : report.sequences) {
    for (std::size_t i = 0; i < s.frame_scores.size(); ++i) {
      out << s.name << ',' << (s.first_frame + i) << ',' << format_double(s.frame_scores[i]) << '\n';
    }
  }
  for (const SequenceScore& s : report.sequences) {
    out << s.name << ",mean," << format_double(s.mean) << '\n';
    out << s.name << ",frames," << s.frame_scores.size() << '\n';
    out << s.name << ",empty_frames," << s.empty_frames << '\n';
  }
  out << "*,metric," << report.metric << '\n';
  out << "*,dataset_mean," << format_double(report.dataset_mean) << '\n';
  out << "*,frames," << report.frame_count << '\n';
}

void write_report_table(std::ostream& out, const ScoreReport& report) {
  char line[160];
  std::snprintf(line, sizeof(line), "%-32s %8s %10s %6s\n", "sequence", "frames", report.metric.c_str(), "empty");
  out << line;
  for (const SequenceScore& s : report.sequences) {
    std::snprintf(line, sizeof(line), "%-32s %8zu %10.4f %6zu%s\n", s.name.c_str(), s.frame_scores.size(), s.mean,
                  s.empty_frames, s.frame_scores.empty() ? "  (init only)" : "");
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-32s %8zu %10.4f\n", "dataset mean", report.frame_count, report.dataset_mean);
  out << line;
}

}  // namespace roitrack::metric
