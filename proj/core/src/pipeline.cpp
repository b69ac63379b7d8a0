#include "roitrack/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "roitrack/error.hpp"
#include "roitrack/synth.hpp"

namespace roitrack::pipeline {
namespace {

Window box_window(const BBox& box) { return {box.center_x(), box.center_y(), box.w, box.h}; }

}  // namespace

void validate(const TrackerConfig& c) {
  if (!(0.0 < c.shrink_threshold && c.shrink_threshold < c.grow_threshold && c.grow_threshold < 1.0)) {
    throw ParameterError("tracker config: need 0 < shrink_threshold < grow_threshold < 1");
  }
  if (!(c.grow_factor > 0.0 && c.shrink_factor > 0.0)) throw ParameterError("tracker config: scale factors must be > 0");
  if (!(c.bin_threshold > 0.0 && c.bin_threshold < 1.0)) throw ParameterError("tracker config: bin_threshold must lie in (0,1)");
  if (!(c.activity_threshold >= 0.0)) throw ParameterError("tracker config: activity_threshold must be >= 0");
  if (!(c.min_window > 0.0 && c.max_window_factor > 0.0)) throw ParameterError("tracker config: window bounds must be > 0");
  if (!(c.branch_thresholds.small > 0.0 && c.branch_thresholds.small < c.branch_thresholds.medium)) {
    throw ParameterError("tracker config: need 0 < branch_small < branch_medium");
  }
}

controller::ControllerConfig controller_config(const TrackerConfig& c, std::size_t frame_w, std::size_t frame_h) {
  controller::ControllerConfig cc;
  cc.grow_threshold = c.grow_threshold;
  cc.shrink_threshold = c.shrink_threshold;
  cc.grow_factor = c.grow_factor;
  cc.shrink_factor = c.shrink_factor;
  cc.bin_threshold = c.bin_threshold;
  cc.activity_threshold = c.activity_threshold;
  cc.min_w = cc.min_h = c.min_window;
  cc.max_w = std::max(c.min_window, c.max_window_factor * static_cast<double>(frame_w));
  cc.max_h = std::max(c.min_window, c.max_window_factor * static_cast<double>(frame_h));
  return cc;
}

extractor::TemplateFeatures ModelExtractor::encode(const Image& frame, const BBox& box) const {
  return extractor::encode_template(params_, crop_and_resize(frame, box_window(box), extractor::kTemplateSize));
}

RoiMatrix ModelExtractor::extract(const Image& frame, const Window& window, const extractor::TemplateFeatures& feats,
                                  std::size_t) const {
  const extractor::BranchId branch = extractor::select_branch(window.w, window.h, thresholds_);
  return extractor::extract_roi_matrix(params_, crop_and_resize(frame, window, extractor::input_size(branch)), feats,
                                       branch);
}

RoiMatrix OracleExtractor::extract(const Image&, const Window& window, const extractor::TemplateFeatures&,
                                   std::size_t frame_index) const {
  return synth::oracle_heatmap(truth_.at(frame_index), window);
}

TrackerState init_tracker(const RoiExtractor& source, const Image& first_frame, const BBox& init_box,
                          const TrackerConfig& config) {
  validate(config);
  if (!(init_box.w > 0.0 && init_box.h > 0.0) || !std::isfinite(init_box.x) || !std::isfinite(init_box.y)) {
    throw ParameterError("init_tracker: initial box must have positive width and height");
  }
  if (first_frame.empty()) throw ParameterError("init_tracker: empty first frame");
  const controller::ControllerConfig cc = controller_config(config, first_frame.width(), first_frame.height());
  TrackerState s;
  s.frame_width = first_frame.width();
  s.frame_height = first_frame.height();
  s.window = {init_box.center_x(), init_box.center_y(), std::clamp(2.0 * init_box.w, cc.min_w, cc.max_w),
              std::clamp(2.0 * init_box.h, cc.min_h, cc.max_h)};
  s.template_feats = source.encode(first_frame, init_box);
  s.last_box = init_box;
  s.last_estimate = {init_box.w, init_box.h, 0.0};
  return s;
}

TrackerState init_tracker(const extractor::ModelParams& params, const Image& first_frame, const BBox& init_box,
                          const TrackerConfig& config) {
  return init_tracker(ModelExtractor(params, config.branch_thresholds), first_frame, init_box, config);
}

FrameResult track_frame(const TrackerState& state, const Image& frame, const RoiExtractor& source,
                        const TrackerConfig& config) {
  if (frame.width() != state.frame_width || frame.height() != state.frame_height) {
    throw ParameterError("track_frame: frame size " + std::to_string(frame.width()) + "x" +
                         std::to_string(frame.height()) + " differs from " + std::to_string(state.frame_width) + "x" +
                         std::to_string(state.frame_height));
  }
  FrameResult r;
  r.window = state.window;
  r.state = state;
  r.state.frame_index = state.frame_index + 1;
  r.roi = source.extract(frame, state.window, state.template_feats, r.state.frame_index);

  const controller::StepResult step =
      controller::step(state.window, r.roi, controller_config(config, state.frame_width, state.frame_height));
  r.state.window = step.window;
  r.state.lost = step.lost;
  if (!step.lost) {
    r.state.last_estimate = step.estimate;
    r.state.last_box = {step.window.cx - 0.5 * step.estimate.obj_w, step.window.cy - 0.5 * step.estimate.obj_h,
                        step.estimate.obj_w, step.estimate.obj_h};
  }
  r.pred_box = r.state.last_box;
  if (config.template_update_n > 0 && r.state.frame_index % config.template_update_n == 0) {
    r.state.template_feats = source.encode(frame, r.pred_box);
  }
  return r;
}

FrameResult track_frame(const TrackerState& state, const Image& frame, const extractor::ModelParams& params,
                        const TrackerConfig& config) {
  return track_frame(state, frame, ModelExtractor(params, config.branch_thresholds), config);
}

RunResult run_sequence(const RoiExtractor& source, const SequenceRecord& seq, const TrackerConfig& config) {
  if (seq.frames.empty()) throw ParameterError("run_sequence: empty sequence");
  if (seq.boxes.size() != seq.frames.size()) {
    throw ParameterError("run_sequence: count mismatch, " + std::to_string(seq.frames.size()) + " frames vs " +
                         std::to_string(seq.boxes.size()) + " boxes");
  }
  RunResult run;
  TrackerState state = init_tracker(source, seq.frames[0], seq.boxes[0], config);
  run.boxes.push_back(seq.boxes[0]);
  std::vector<GtMatrix> truth;
  for (std::size_t t = 1; t < seq.size(); ++t) {
    FrameResult fr = track_frame(state, seq.frames[t], source, config);
    truth.push_back(metric::rasterize_gt(seq.boxes[t], fr.window));
    run.boxes.push_back(fr.pred_box);
    run.rois.push_back(fr.roi);
    run.windows.push_back(fr.window);
    run.lost.push_back(fr.state.lost);
    state = std::move(fr.state);
  }
  if (truth.empty()) {
    run.report.sequences.push_back(metric::make_sequence_score(seq.name, {}, 1));
    metric::recompute_aggregate(run.report);
  } else {
    run.report = metric::score_sequence(truth, run.rois, seq.name, 1);
  }
  run.final_template = state.template_feats;
  return run;
}

RunResult run_sequence(const extractor::ModelParams& params, const SequenceRecord& seq, const TrackerConfig& config) {
  return run_sequence(ModelExtractor(params, config.branch_thresholds), seq, config);
}

}  // namespace roitrack::pipeline
