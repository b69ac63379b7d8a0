#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "roitrack/geometry.hpp"
#include "roitrack/image.hpp"
#include "roitrack/sequence.hpp"
#include "roitrack/tensor.hpp"

// The RoI extractor: three resolution-specific image branches, a template
// branch whose features are concatenated into whichever image branch is
// active, and a shared head emitting a 28x28 sigmoid heatmap.
//
//   B224: 224 -conv s2-> 112 -conv s2-> 56 -conv s2-> 28   (3->16->32->32)
//   B112: 112 -conv s2-> 56 -conv s2-> 28                  (3->16->32)
//   B56:   56 -conv s2-> 28                                (3->32)
//   template: 56 -conv s2-> 28 -conv s2-> 14 -bilinear-> 28 (3->16->16)
//   head: concat(32+16) -conv-> 32 -conv-> 1 -> sigmoid
//
// All convolutions are 3x3 with padding 1 followed by ReLU, except the last
// head layer.
namespace roitrack::extractor {

enum class BranchId : std::uint8_t { B224 = 0, B112 = 1, B56 = 2 };

inline constexpr std::array<BranchId, 3> kAllBranches{BranchId::B224, BranchId::B112, BranchId::B56};
inline constexpr std::size_t kTemplateSize = 56;
inline constexpr std::size_t kBranchChannels = 32;
inline constexpr std::size_t kTemplateChannels = 16;

std::size_t input_size(BranchId branch);
const char* branch_name(BranchId branch);

struct BranchThresholds {
  double small = 64.0;
  double medium = 128.0;
};

/// B56 when max(w,h) <= small, B112 when <= medium, else B224.
BranchId select_branch(double window_w, double window_h, const BranchThresholds& thresholds = {});

enum class LayerGroup : std::uint32_t { B224 = 0, B112 = 1, B56 = 2, Template = 3, Head = 4 };

struct LayerSpec {
  LayerGroup group;
  std::uint32_t out_channels;
  std::uint32_t in_channels;
  std::uint32_t kernel;
  std::uint32_t stride;
  std::uint32_t padding;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// The fixed layer list, in serialization order.
const std::vector<LayerSpec>& architecture();

struct ConvLayer {
  Tensor weight;
  Tensor bias;
  int stride = 1;
  int padding = 1;

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct ModelParams {
  std::array<std::vector<ConvLayer>, 3> branches;
  std::vector<ConvLayer> template_branch;
  std::vector<ConvLayer> head;

  /// Every weight and bias in architecture() order (weight before bias).
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::size_t parameter_count() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Gradients share the parameter layout.
using ModelGrads = ModelParams;

/// Seeded initialization, weights uniform in +-sqrt(6/fan_in), biases zero.
ModelParams build_model(std::uint64_t seed);
ModelGrads zeros_like(const ModelParams& params);

/// p - lr * g for every tensor; throws TrainingError on non-finite gradients.
ModelParams sgd_step(ModelParams params, const ModelGrads& grads, double learning_rate);

struct TemplateFeatures {
  /// [16,28,28], ready for concatenation.
  Tensor maps;
  std::size_t source_width = 0;
  std::size_t source_height = 0;

  friend bool operator==(const TemplateFeatures&, const TemplateFeatures&) = default;
};

/// Image to a [3,H,W] tensor with values shifted to [-0.5, 0.5].
Tensor image_to_tensor(const Image& image);

/// The template must already be kTemplateSize square (ShapeError otherwise).
TemplateFeatures encode_template(const ModelParams& params, const Image& templ);

/// The crop must match input_size(branch) (ShapeError otherwise).
RoiMatrix extract_roi_matrix(const ModelParams& params, const Image& crop, const TemplateFeatures& features,
                             BranchId branch);

/// One supervised frame: a branch-sized crop and its 28x28 target.
struct TrainingFrame {
  Image crop;
  BranchId branch = BranchId::B56;
  RoiMatrix target;
};

struct BatchGradient {
  double loss = 0.0;  ///< Mean per-frame MSE.
  ModelGrads grads;
};

/// Loss and exact gradient of the mean per-frame MSE over a batch that
/// shares one template.
BatchGradient batch_gradient(const ModelParams& params, const Image& templ, std::span<const TrainingFrame> frames);

enum class Optimizer { Sgd, Adam };
/// Cosine anneals the step size from learning_rate to zero over the run.
enum class LrSchedule { Constant, Cosine };

struct TrainOptions {
  int epochs = 10;
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 1e-3;
  LrSchedule schedule = LrSchedule::Cosine;
  /// Heavy-ball momentum for Sgd; ignored by Adam.
  double momentum = 0.0;
  /// Adam moment decay rates.
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 1;
  std::size_t batch_frames = 15;
  /// Batches drawn from each sequence per epoch.
  std::size_t batches_per_sequence = 3;
  /// Window size relative to the box, sampled log-uniformly per axis.
  double window_scale_min = 1.4;
  double window_scale_max = 3.0;
  /// Window center jitter as a fraction of the box size.
  double center_jitter = 0.25;
  BranchThresholds thresholds{};
  std::function<void(int epoch, double mean_loss)> on_epoch;
};

struct TrainResult {
  ModelParams params;
  /// Mean batch loss per epoch.
  std::vector<double> loss_history;
};

/// Each batch is batch_frames consecutive frames of one sequence with the
/// template cropped from the first of them; sequences shorter than a batch
/// are sampled with replacement (kept in order). Deterministic given seed.
TrainResult train(ModelParams params, const SequenceSource& data, const TrainOptions& options);

/// Writes the binary model file. Throws IoError on failure.
void save_model(const ModelParams& params, const std::filesystem::path& path);
/// Throws FormatError naming the offending field for malformed files.
ModelParams load_model(const std::filesystem::path& path);

}  // namespace roitrack::extractor
