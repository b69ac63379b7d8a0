#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "roitrack/geometry.hpp"
#include "roitrack/image.hpp"
#include "roitrack/sequence.hpp"

namespace roitrack::synth {

struct SceneConfig {
  std::size_t frame_width = 256;
  std::size_t frame_height = 256;
  std::size_t length = 100;
  std::uint64_t seed = 1;
  /// Seeds the target's appearance independently of its motion.
  std::uint64_t target_seed = 1;
  BBox initial_box{112.0, 112.0, 32.0, 32.0};
  std::size_t distractor_count = 0;
  /// 0: distractor colors kept a fixed margin away from the target's;
  /// 1: distractor textures drawn from the target's own distribution.
  double similarity = 0.0;
  /// Per-axis bound on the target center's displacement, pixels per frame.
  double max_velocity = 3.0;
  /// Box size multiplier applied every frame.
  double scale_ramp = 1.0;
  std::size_t occlusion_start = 0;
  std::size_t occlusion_length = 0;
  /// Fraction of the target box width hidden by the occluder.
  double occlusion_coverage = 0.0;
  double clutter = 0.3;
  double sensor_noise = 0.02;
  /// Disables border reflection so the target may leave the frame.
  bool allow_exit = false;
};

/// Throws ParameterError on invalid fields or a target larger than the frame.
void validate(const SceneConfig& config);

/// Procedural texture evaluated in normalized box coordinates.
struct Texture {
  std::array<float, 3> base{};
  std::array<float, 3> accent{};
  int pattern = 0;
  double frequency = 3.0;
  double orientation = 0.0;
  double contrast = 0.5;
  bool ellipse = false;
  std::uint64_t noise_seed = 0;

  /// Color at (u,v) in [0,1]^2, or nullopt outside the shape.
  std::optional<std::array<float, 3>> sample(double u, double v) const;
};

/// Holds everything needed to render any frame of one scene on demand:
/// the static background, object textures and all trajectories.
class SceneRenderer {
 public:
  explicit SceneRenderer(const SceneConfig& config);

  const SceneConfig& config() const { return config_; }
  std::size_t length() const { return config_.length; }
  BBox target_box(std::size_t t) const { return target_path_.at(t); }
  BBox distractor_box(std::size_t d, std::size_t t) const { return distractor_paths_.at(d).at(t); }
  const Texture& target_texture() const { return target_texture_; }
  const Texture& distractor_texture(std::size_t d) const { return distractor_textures_.at(d); }
  bool occluded(std::size_t t) const;

  /// Frame t, quantized to 8-bit levels so lossless export is exact.
  Image render(std::size_t t) const;

 private:
  SceneConfig config_;
  Image background_;
  Texture target_texture_;
  std::vector<Texture> distractor_textures_;
  std::vector<BBox> target_path_;
  std::vector<std::vector<BBox>> distractor_paths_;
};

SequenceRecord gen_sequence(const SceneConfig& config);

/// Knobs for sampling many varied scenes.
struct DatasetOptions {
  std::size_t frame_size = 256;
  std::size_t length = 100;
  std::size_t min_distractors = 1;
  std::size_t max_distractors = 3;
  double similarity = 0.7;
  double min_target = 20.0;
  double max_target = 44.0;
  double max_velocity = 3.0;
  double clutter = 0.4;
  /// Probability that a scene contains an occlusion interval.
  double occlusion_probability = 0.25;
};

/// Deterministic scene config for dataset member `index` of `seed`.
SceneConfig sample_scene(std::uint64_t seed, std::size_t index, const DatasetOptions& options = {});

/// Lazily renders frames of a list of scenes; keeps one renderer cached.
/// Not safe for concurrent use.
class SyntheticSource final : public SequenceSource {
 public:
  explicit SyntheticSource(std::vector<SceneConfig> scenes);
  std::size_t sequence_count() const override { return scenes_.size(); }
  std::size_t length(std::size_t s) const override { return scenes_.at(s).length; }
  Image frame(std::size_t s, std::size_t i) const override;
  BBox box(std::size_t s, std::size_t i) const override;
  const SceneConfig& scene(std::size_t s) const { return scenes_.at(s); }

 private:
  const SceneRenderer& renderer(std::size_t s) const;

  std::vector<SceneConfig> scenes_;
  mutable std::size_t cached_index_ = static_cast<std::size_t>(-1);
  mutable std::unique_ptr<SceneRenderer> cached_;
};

/// Perfect-extractor stand-in: the rasterized ground truth as a heatmap.
RoiMatrix oracle_heatmap(const BBox& box, const Window& window);

/// Frame with a translucent red heat overlay inside the window, the window
/// outline in yellow and the predicted box in green.
Image render_overlay(const Image& frame, const Window& window, const RoiMatrix& roi, const BBox& pred_box);

}  // namespace roitrack::synth
