#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "roitrack/geometry.hpp"

namespace roitrack::metric {

/// Cell (r,c) is 1 iff the box covers at least half of that cell's area,
/// with the window split into a 28x28 grid. Throws ParameterError for a
/// window of non-positive size.
GtMatrix rasterize_gt(const BBox& box, const Window& window);

/// Soft heatmap overlap (P.P^)/(P.1 - P.P^ + P^.1). Equals set IoU when both
/// arguments are binary. Returns 0 when both are empty.
double heatmap_iou(const GtMatrix& truth, const RoiMatrix& estimate);

/// Converts a mutual overlap fraction o to IoU: o / (2 - o).
double overlap_to_iou(double overlap);

/// Standard box intersection-over-union; 0 when the union is empty.
double box_iou(const BBox& a, const BBox& b);

struct SequenceScore {
  std::string name;
  std::vector<double> frame_scores;
  /// Index into the sequence of the first scored frame (frame 0 is the init frame).
  std::size_t first_frame = 1;
  double mean = 0.0;
  /// Frames where both matrices were empty and scored 0 by convention.
  std::size_t empty_frames = 0;
};

struct ScoreReport {
  std::string metric = "heatmap_iou";
  std::vector<SequenceScore> sequences;
  /// Mean of the per-sequence means over sequences with at least one scored frame.
  double dataset_mean = 0.0;
  std::size_t frame_count = 0;
};

/// Per-frame heatmap_iou plus the mean. Throws ParameterError on a length
/// mismatch or empty input.
ScoreReport score_sequence(std::span<const GtMatrix> truth, std::span<const RoiMatrix> estimates,
                           std::string name = "sequence", std::size_t first_frame = 1);

/// Builds a report from precomputed per-frame scores (e.g. box overlaps).
SequenceScore make_sequence_score(std::string name, std::vector<double> scores, std::size_t first_frame,
                                  std::size_t empty_frames = 0);

/// Concatenates the sequences of several reports and recomputes the aggregate.
ScoreReport merge_reports(std::span<const ScoreReport> reports);
void recompute_aggregate(ScoreReport& report);

/// CSV: header "sequence,frame_index,score", one line per scored frame, then
/// per-sequence "mean"/"empty_frames" rows and dataset rows keyed "*".
void write_report_csv(std::ostream& out, const ScoreReport& report);
void write_report_table(std::ostream& out, const ScoreReport& report);

}  // namespace roitrack::metric
