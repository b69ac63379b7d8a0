#include <gtest/gtest.h>

#include <cmath>

#include "roitrack/error.hpp"
#include "roitrack/extractor.hpp"
#include "roitrack/image.hpp"
#include "roitrack/pipeline.hpp"
#include "roitrack/rng.hpp"
#include "roitrack/synth.hpp"

using namespace roitrack;
using namespace roitrack::pipeline;

namespace {

// Ground-truth boxes over blank frames: the oracle ignores pixels.
SequenceRecord box_sequence(std::vector<BBox> boxes, std::size_t fw = 256, std::size_t fh = 256) {
  SequenceRecord s;
  s.name = "boxes";
  s.boxes = std::move(boxes);
  s.frames.assign(s.boxes.size(), Image(fw, fh, 0.5f));
  return s;
}

SequenceRecord scene_boxes(const synth::SceneConfig& c) {
  const synth::SceneRenderer r(c);
  std::vector<BBox> boxes;
  for (std::size_t t = 0; t < c.length; ++t) boxes.push_back(r.target_box(t));
  return box_sequence(std::move(boxes), c.frame_width, c.frame_height);
}

// Oracle that records every template refresh.
class RecordingOracle final : public RoiExtractor {
 public:
  explicit RecordingOracle(std::vector<BBox> truth) : oracle_(std::move(truth)) {}
  extractor::TemplateFeatures encode(const Image& frame, const BBox& box) const override {
    encodes.push_back(box);
    return oracle_.encode(frame, box);
  }
  RoiMatrix extract(const Image& frame, const Window& window, const extractor::TemplateFeatures& feats,
                    std::size_t frame_index) const override {
    return oracle_.extract(frame, window, feats, frame_index);
  }
  mutable std::vector<BBox> encodes;

 private:
  OracleExtractor oracle_;
};

}  // namespace

TEST(CropAndResize, FullFrameIsIdentity) {
  Rng rng(1);
  Image square(16, 16);
  for (float& v : square.data()) v = static_cast<float>(rng.uniform());
  EXPECT_EQ(crop_and_resize(square, {8, 8, 16, 16}, 16), square);
}

TEST(CropAndResize, ConstantFrameGivesConstantCrop) {
  const Image frame(40, 30, 0.3f);
  for (const Window& w : {Window{20, 15, 10, 10}, Window{-50, 90, 300, 7}, Window{39.5, 0.2, 1.3, 2.7}}) {
    const Image crop = crop_and_resize(frame, w, 13);
    for (float v : crop.data()) EXPECT_FLOAT_EQ(v, 0.3f);
  }
}

TEST(CropAndResize, CheckerboardUpsampling) {
  Image board(2, 2);
  for (std::size_t c = 0; c < 3; ++c) board.at(0, 0, c) = board.at(1, 1, c) = 1.0f;
  const Image up = crop_and_resize(board, {1, 1, 2, 2}, 4);
  // Sample positions fall at -0.25, 0.25, 0.75, 1.25 in pixel-index space;
  // edge replication clamps the outer ones.
  const double weight[4] = {0.0, 0.25, 0.75, 1.0};
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) {
      const double wx = weight[x], wy = weight[y];
      const double expected = (1 - wx) * (1 - wy) + wx * wy;
      EXPECT_NEAR(up.at(x, y, 0), expected, 1e-6) << x << "," << y;
    }
  }
}

TEST(CropAndResize, OutsideSamplesReplicateEdges) {
  Image frame(4, 1);
  for (std::size_t x = 0; x < 4; ++x) frame.at(x, 0, 0) = static_cast<float>(x) / 3.0f;
  const Image left = crop_and_resize(frame, {-100, 0.5, 10, 1}, 3);
  for (std::size_t x = 0; x < 3; ++x) EXPECT_EQ(left.at(x, 1, 0), 0.0f);
  const Image right = crop_and_resize(frame, {200, 0.5, 10, 1}, 3);
  for (std::size_t x = 0; x < 3; ++x) EXPECT_EQ(right.at(x, 0, 0), 1.0f);
}

TEST(CropAndResize, Errors) {
  EXPECT_THROW(crop_and_resize(Image{}, {0, 0, 1, 1}, 4), ParameterError);
  EXPECT_THROW(crop_and_resize(Image(4, 4), {0, 0, 0, 1}, 4), ParameterError);
  EXPECT_THROW(crop_and_resize(Image(4, 4), {0, 0, 1, 1}, 0), ParameterError);
}

TEST(TrackerConfig, Validation) {
  EXPECT_NO_THROW(validate(TrackerConfig{}));
  TrackerConfig c;
  c.shrink_threshold = 0.8;
  EXPECT_THROW(validate(c), ParameterError);
  c = TrackerConfig{};
  c.grow_factor = 0.0;
  EXPECT_THROW(validate(c), ParameterError);
  c = TrackerConfig{};
  c.branch_thresholds.small = 200.0;
  EXPECT_THROW(validate(c), ParameterError);
}

TEST(InitTracker, WindowIsTwiceTheBox) {
  const OracleExtractor oracle({});
  const TrackerState s = init_tracker(oracle, Image(200, 200), {50, 50, 40, 30}, TrackerConfig{});
  EXPECT_EQ(s.window, (Window{70, 65, 80, 60}));
  EXPECT_EQ(s.frame_index, 0u);
  EXPECT_FALSE(s.lost);
}

TEST(InitTracker, MinimumWindowClamp) {
  const OracleExtractor oracle({});
  const TrackerState s = init_tracker(oracle, Image(200, 200), {10, 10, 4, 4}, TrackerConfig{});
  EXPECT_EQ(s.window.w, 16.0);
  EXPECT_EQ(s.window.h, 16.0);
}

TEST(InitTracker, DegenerateBoxIsParameterError) {
  const OracleExtractor oracle({});
  EXPECT_THROW(init_tracker(oracle, Image(20, 20), {1, 1, 0, 5}, TrackerConfig{}), ParameterError);
  EXPECT_THROW(init_tracker(oracle, Image(20, 20), {1, 1, 5, -1}, TrackerConfig{}), ParameterError);
}

TEST(InitTracker, ModelInitIsDeterministic) {
  const extractor::ModelParams p = extractor::build_model(3);
  const Image frame = synth::gen_sequence([] {
                        synth::SceneConfig c;
                        c.frame_width = c.frame_height = 96;
                        c.length = 1;
                        c.initial_box = {30, 30, 24, 24};
                        return c;
                      }())
                          .frames[0];
  const TrackerState a = init_tracker(p, frame, {30, 30, 24, 24}, TrackerConfig{});
  const TrackerState b = init_tracker(p, frame, {30, 30, 24, 24}, TrackerConfig{});
  EXPECT_EQ(a.template_feats, b.template_feats);
  EXPECT_EQ(a.window, b.window);
}

TEST(TrackFrame, FrameSizeChangeIsParameterError) {
  const OracleExtractor oracle({{10, 10, 20, 20}, {10, 10, 20, 20}});
  const TrackerState s = init_tracker(oracle, Image(64, 64), {10, 10, 20, 20}, TrackerConfig{});
  EXPECT_THROW(track_frame(s, Image(64, 63), oracle, TrackerConfig{}), ParameterError);
}

TEST(TrackFrame, StaticTargetIsAFixedPoint) {
  const BBox box{50, 50, 40, 30};
  const SequenceRecord seq = box_sequence(std::vector<BBox>(100, box), 200, 200);
  const RunResult run = run_sequence(OracleExtractor(seq.boxes), seq, TrackerConfig{});
  for (const Window& w : run.windows) EXPECT_EQ(w, (Window{70, 65, 80, 60}));
  for (std::size_t t = 1; t < run.boxes.size(); ++t) EXPECT_EQ(run.boxes[t], box);
  EXPECT_DOUBLE_EQ(run.report.dataset_mean, 1.0);
}

TEST(TrackFrame, FollowsConstantVelocityTarget) {
  std::vector<BBox> boxes;
  for (int t = 0; t < 100; ++t) boxes.push_back({20.0 + 2.0 * t, 100, 30, 30});
  const SequenceRecord seq = box_sequence(boxes, 400, 256);
  const RunResult run = run_sequence(OracleExtractor(seq.boxes), seq, TrackerConfig{});
  for (std::size_t t = 1; t < seq.size(); ++t) {
    EXPECT_TRUE(run.windows[t - 1].contains(boxes[t].center_x(), boxes[t].center_y())) << t;
    EXPECT_FALSE(run.lost[t - 1]);
  }
}

TEST(TrackFrame, PredictedBoxIsCenteredOnWindow) {
  const SequenceRecord seq = box_sequence({{40, 40, 30, 20}, {43, 41, 30, 20}});
  const OracleExtractor oracle(seq.boxes);
  const TrackerState s = init_tracker(oracle, seq.frames[0], seq.boxes[0], TrackerConfig{});
  const FrameResult r = track_frame(s, seq.frames[1], oracle, TrackerConfig{});
  EXPECT_EQ(r.state.frame_index, 1u);
  EXPECT_DOUBLE_EQ(r.pred_box.center_x(), r.state.window.cx);
  EXPECT_DOUBLE_EQ(r.pred_box.center_y(), r.state.window.cy);
  EXPECT_EQ(r.pred_box.w, r.state.last_estimate.obj_w);
  EXPECT_EQ(r.pred_box.h, r.state.last_estimate.obj_h);
}

TEST(TrackFrame, LostRepeatsLastBox) {
  // Target jumps far away: the oracle heatmap is empty.
  const SequenceRecord seq = box_sequence({{40, 40, 30, 20}, {200, 200, 30, 20}, {200, 200, 30, 20}});
  const RunResult run = run_sequence(OracleExtractor(seq.boxes), seq, TrackerConfig{});
  EXPECT_TRUE(run.lost[0]);
  EXPECT_TRUE(run.lost[1]);
  EXPECT_EQ(run.boxes[1], seq.boxes[0]);
  EXPECT_EQ(run.boxes[2], seq.boxes[0]);
  EXPECT_EQ(run.windows[1], run.windows[0]);
}

TEST(TemplateUpdate, ZeroPeriodNeverRefreshes) {
  const SequenceRecord seq = scene_boxes(synth::sample_scene(5, 0));
  const RecordingOracle oracle(seq.boxes);
  run_sequence(oracle, seq, TrackerConfig{});
  EXPECT_EQ(oracle.encodes.size(), 1u);
}

TEST(TemplateUpdate, RefreshesFromPredictedBoxEveryN) {
  const SequenceRecord seq = scene_boxes(synth::sample_scene(5, 1));
  const RecordingOracle oracle(seq.boxes);
  TrackerConfig c;
  c.template_update_n = 10;
  const RunResult run = run_sequence(oracle, seq, c);
  ASSERT_EQ(oracle.encodes.size(), 1u + (seq.size() - 1) / 10);
  for (std::size_t k = 1; k < oracle.encodes.size(); ++k) EXPECT_EQ(oracle.encodes[k], run.boxes[10 * k]);
}

TEST(TemplateUpdate, ModelTemplateConstantWithoutRefresh) {
  synth::SceneConfig sc;
  sc.frame_width = sc.frame_height = 96;
  sc.length = 12;
  sc.initial_box = {30, 30, 24, 24};
  sc.distractor_count = 1;
  const SequenceRecord seq = synth::gen_sequence(sc);
  const extractor::ModelParams p = extractor::build_model(4);
  const TrackerState init = init_tracker(p, seq.frames[0], seq.boxes[0], TrackerConfig{});
  const RunResult fixed = run_sequence(p, seq, TrackerConfig{});
  EXPECT_EQ(fixed.final_template, init.template_feats);
  TrackerConfig c;
  c.template_update_n = 5;
  const RunResult refreshed = run_sequence(p, seq, c);
  EXPECT_NE(refreshed.final_template, init.template_feats);
}

TEST(RunSequence, SingleFrameReportsInitOnly) {
  const SequenceRecord seq = box_sequence({{10, 10, 20, 20}});
  const RunResult run = run_sequence(OracleExtractor(seq.boxes), seq, TrackerConfig{});
  EXPECT_EQ(run.boxes.size(), 1u);
  EXPECT_TRUE(run.rois.empty());
  ASSERT_EQ(run.report.sequences.size(), 1u);
  EXPECT_TRUE(run.report.sequences[0].frame_scores.empty());
  EXPECT_EQ(run.report.frame_count, 0u);
}

TEST(RunSequence, RejectsMalformedRecords) {
  SequenceRecord empty;
  EXPECT_THROW(run_sequence(OracleExtractor({}), empty, TrackerConfig{}), ParameterError);
  SequenceRecord bad = box_sequence({{10, 10, 20, 20}, {10, 10, 20, 20}});
  bad.boxes.pop_back();
  EXPECT_THROW(run_sequence(OracleExtractor(bad.boxes), bad, TrackerConfig{}), ParameterError);
}

TEST(RunSequence, OracleScoresHighOnSyntheticMotion) {
  for (std::size_t i = 0; i < 10; ++i) {
    const SequenceRecord seq = scene_boxes(synth::sample_scene(21, i));
    const RunResult run = run_sequence(OracleExtractor(seq.boxes), seq, TrackerConfig{});
    EXPECT_GE(run.report.dataset_mean, 0.8) << "scene " << i;
  }
}

TEST(RunSequence, OracleKeepsTargetInsideWindow) {
  // Velocity bound 3 px stays below lambda/2 = w/8 for windows of at least 24 px.
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    synth::DatasetOptions o;
    o.occlusion_probability = 0.0;
    const SequenceRecord seq = scene_boxes(synth::sample_scene(seed, 0, o));
    const RunResult run = run_sequence(OracleExtractor(seq.boxes), seq, TrackerConfig{});
    for (std::size_t t = 1; t < seq.size(); ++t) {
      ASSERT_TRUE(run.windows[t - 1].contains(seq.boxes[t].center_x(), seq.boxes[t].center_y()))
          << "seed " << seed << " frame " << t;
    }
  }
}

TEST(RunSequence, WindowFollowsScaleRampInSqrtTwoSteps) {
  synth::SceneConfig c;
  c.length = 51;
  c.max_velocity = 0.0;
  c.scale_ramp = 1.014;
  c.initial_box = {113, 113, 30, 30};
  const SequenceRecord seq = scene_boxes(c);
  const RunResult run = run_sequence(OracleExtractor(seq.boxes), seq, TrackerConfig{});
  double prev = 60.0;
  int grows = 0;
  for (const Window& w : run.windows) {
    const double r = w.w / prev;
    EXPECT_TRUE(std::abs(r - 1.0) < 1e-12 || std::abs(r - std::sqrt(2.0)) < 1e-12) << r;
    grows += r > 1.0 ? 1 : 0;
    prev = w.w;
  }
  EXPECT_GE(grows, 1);
  // The window that scored the last frame.
  const BBox last = seq.boxes.back();
  const Window& final_window = run.windows.back();
  EXPECT_GE(last.w / final_window.w, 0.25);
  EXPECT_LE(last.w / final_window.w, 0.75);
  EXPECT_GE(last.h / final_window.h, 0.25);
  EXPECT_LE(last.h / final_window.h, 0.75);
}

TEST(RunSequence, Deterministic) {
  const SequenceRecord seq = scene_boxes(synth::sample_scene(8, 3));
  const RunResult a = run_sequence(OracleExtractor(seq.boxes), seq, TrackerConfig{});
  const RunResult b = run_sequence(OracleExtractor(seq.boxes), seq, TrackerConfig{});
  EXPECT_EQ(a.boxes, b.boxes);
  EXPECT_EQ(a.report.sequences[0].frame_scores, b.report.sequences[0].frame_scores);
}

TEST(RunSequence, WindowStaysWithinBounds) {
  const TrackerConfig cfg;
  for (std::size_t i = 0; i < 5; ++i) {
    const SequenceRecord seq = scene_boxes(synth::sample_scene(30, i));
    const RunResult run = run_sequence(OracleExtractor(seq.boxes), seq, cfg);
    const controller::ControllerConfig cc = controller_config(cfg, 256, 256);
    for (const Window& w : run.windows) {
      EXPECT_GE(w.w, cc.min_w);
      EXPECT_LE(w.w, cc.max_w);
      EXPECT_GE(w.h, cc.min_h);
      EXPECT_LE(w.h, cc.max_h);
    }
  }
}
