#pragma once

#include <cstddef>
#include <vector>

#include "roitrack/controller.hpp"
#include "roitrack/extractor.hpp"
#include "roitrack/geometry.hpp"
#include "roitrack/image.hpp"
#include "roitrack/metric.hpp"
#include "roitrack/sequence.hpp"

namespace roitrack::pipeline {

struct TrackerConfig {
  double grow_threshold = 0.75;
  double shrink_threshold = 0.25;
  double grow_factor = 1.4142135623730951;
  double shrink_factor = 0.7071067811865476;
  double bin_threshold = 0.5;
  double activity_threshold = 2.0;
  /// Re-encode the template every n tracked frames; 0 keeps the first one.
  std::size_t template_update_n = 0;
  extractor::BranchThresholds branch_thresholds{};
  double min_window = 16.0;
  /// Upper window bound as a multiple of the frame dimension.
  double max_window_factor = 4.0;
};

/// Throws ParameterError when the invariants between fields do not hold.
void validate(const TrackerConfig& config);

/// Controller parameters for a frame of the given size.
controller::ControllerConfig controller_config(const TrackerConfig& config, std::size_t frame_w, std::size_t frame_h);

struct TrackerState {
  Window window;
  extractor::TemplateFeatures template_feats;
  std::size_t frame_index = 0;
  bool lost = false;
  controller::SizeEstimate last_estimate;
  /// Last confidently predicted box; repeated while lost.
  BBox last_box;
  std::size_t frame_width = 0;
  std::size_t frame_height = 0;
};

/// Source of RoI matrices for the tracker: the trained model, or the
/// ground-truth oracle used to test the controller in isolation.
class RoiExtractor {
 public:
  virtual ~RoiExtractor() = default;
  virtual extractor::TemplateFeatures encode(const Image& frame, const BBox& box) const = 0;
  virtual RoiMatrix extract(const Image& frame, const Window& window, const extractor::TemplateFeatures& feats,
                            std::size_t frame_index) const = 0;
};

class ModelExtractor final : public RoiExtractor {
 public:
  ModelExtractor(const extractor::ModelParams& params, extractor::BranchThresholds thresholds = {})
      : params_(params), thresholds_(thresholds) {}
  extractor::TemplateFeatures encode(const Image& frame, const BBox& box) const override;
  RoiMatrix extract(const Image& frame, const Window& window, const extractor::TemplateFeatures& feats,
                    std::size_t frame_index) const override;

 private:
  const extractor::ModelParams& params_;
  extractor::BranchThresholds thresholds_;
};

/// Returns the rasterized ground truth of frame_index; ignores pixels.
class OracleExtractor final : public RoiExtractor {
 public:
  explicit OracleExtractor(std::vector<BBox> truth) : truth_(std::move(truth)) {}
  extractor::TemplateFeatures encode(const Image&, const BBox&) const override { return {}; }
  RoiMatrix extract(const Image& frame, const Window& window, const extractor::TemplateFeatures& feats,
                    std::size_t frame_index) const override;

 private:
  std::vector<BBox> truth_;
};

/// Window centered on the box at twice its size (clamped), template from the box.
/// Throws ParameterError for a box without positive area.
TrackerState init_tracker(const RoiExtractor& source, const Image& first_frame, const BBox& init_box,
                          const TrackerConfig& config);
TrackerState init_tracker(const extractor::ModelParams& params, const Image& first_frame, const BBox& init_box,
                          const TrackerConfig& config);

struct FrameResult {
  TrackerState state;
  BBox pred_box;
  RoiMatrix roi;
  /// Window the RoI matrix was extracted from.
  Window window;
};

/// Tracks one frame. Throws ParameterError when the frame size differs from
/// the one seen at init.
FrameResult track_frame(const TrackerState& state, const Image& frame, const RoiExtractor& source,
                        const TrackerConfig& config);
FrameResult track_frame(const TrackerState& state, const Image& frame, const extractor::ModelParams& params,
                        const TrackerConfig& config);

struct RunResult {
  /// One box per frame; frame 0 holds the init box.
  std::vector<BBox> boxes;
  /// One entry per tracked frame (frames 1..N-1).
  std::vector<RoiMatrix> rois;
  std::vector<Window> windows;
  std::vector<bool> lost;
  metric::ScoreReport report;
  /// Template features after the last frame (for update-period tests).
  extractor::TemplateFeatures final_template;
};

/// Initializes on frame 0 with its ground-truth box and tracks the rest,
/// scoring each tracked frame's RoI matrix against the ground truth
/// rasterized in the same window.
RunResult run_sequence(const RoiExtractor& source, const SequenceRecord& seq, const TrackerConfig& config);
RunResult run_sequence(const extractor::ModelParams& params, const SequenceRecord& seq, const TrackerConfig& config);

}  // namespace roitrack::pipeline
