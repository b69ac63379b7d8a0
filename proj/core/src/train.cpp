#include <algorithm>
#include <cmath>
#include <numeric>

#include "roitrack/error.hpp"
#include "roitrack/extractor.hpp"
#include "roitrack/metric.hpp"
#include "roitrack/rng.hpp"

namespace roitrack::extractor {
namespace {

constexpr double kMinWindow = 16.0;
constexpr double kAdamEpsilon = 1e-8;

std::vector<std::size_t> batch_indices(std::size_t length, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> idx(batch);
  if (length >= batch) {
    const std::size_t start = rng.below(length - batch + 1);
    std::iota(idx.begin(), idx.end(), start);
  } else {
    for (std::size_t& i : idx) i = rng.below(length);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

Window box_window(const BBox& box) {
  return {box.center_x(), box.center_y(), std::max(box.w, 1.0), std::max(box.h, 1.0)};
}

Window jittered_window(const BBox& box, const TrainOptions& opt, Rng& rng) {
  const double lo = std::log(opt.window_scale_min);
  const double hi = std::log(opt.window_scale_max);
  Window w;
  w.w = std::max(kMinWindow, box.w * std::exp(rng.uniform(lo, hi)));
  w.h = std::max(kMinWindow, box.h * std::exp(rng.uniform(lo, hi)));
  w.cx = box.center_x() + rng.uniform(-opt.center_jitter, opt.center_jitter) * box.w;
  w.cy = box.center_y() + rng.uniform(-opt.center_jitter, opt.center_jitter) * box.h;
  return w;
}

void validate(const TrainOptions& opt, const SequenceSource& data) {
  if (opt.epochs < 0) throw ParameterError("train: epochs must be >= 0");
  if (!(opt.learning_rate >= 0.0)) throw ParameterError("train: learning rate must be >= 0");
  if (!(opt.momentum >= 0.0 && opt.momentum < 1.0)) throw ParameterError("train: momentum must lie in [0,1)");
  if (!(opt.beta1 >= 0.0 && opt.beta1 < 1.0 && opt.beta2 >= 0.0 && opt.beta2 < 1.0)) {
    throw ParameterError("train: Adam betas must lie in [0,1)");
  }
  if (opt.batch_frames == 0 || opt.batches_per_sequence == 0) throw ParameterError("train: empty batches");
  if (!(opt.window_scale_min > 0.0 && opt.window_scale_min <= opt.window_scale_max)) {
    throw ParameterError("train: invalid window scale range");
  }
  if (data.sequence_count() == 0) throw ParameterError("train: no sequences");
  for (std::size_t s = 0; s < data.sequence_count(); ++s) {
    if (data.length(s) == 0) throw ParameterError("train: sequence " + std::to_string(s) + " has no frames");
  }
}

}  // namespace

TrainResult train(ModelParams params, const SequenceSource& data, const TrainOptions& options) {
  validate(options, data);
  Rng rng(options.seed);
  TrainResult result;
  ModelGrads velocity = zeros_like(params);
  ModelGrads second = zeros_like(params);
  std::size_t step = 0;

  std::vector<std::size_t> order(data.sequence_count());
  std::iota(order.begin(), order.end(), 0);

  const double total_steps =
      static_cast<double>(options.epochs) * static_cast<double>(order.size() * options.batches_per_sequence);
  const double pi = std::acos(-1.0);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t s : order) {
      for (std::size_t b = 0; b < options.batches_per_sequence; ++b) {
        const std::vector<std::size_t> idx = batch_indices(data.length(s), options.batch_frames, rng);

        std::vector<TrainingFrame> frames;
        frames.reserve(idx.size());
        Image templ;
        for (std::size_t k = 0; k < idx.size(); ++k) {
          const Image frame = data.frame(s, idx[k]);
          const BBox box = data.box(s, idx[k]);
          if (k == 0) templ = crop_and_resize(frame, box_window(box), kTemplateSize);
          const Window window = jittered_window(box, options, rng);
          TrainingFrame tf;
          tf.branch = select_branch(window.w, window.h, options.thresholds);
          tf.crop = crop_and_resize(frame, window, input_size(tf.branch));
          tf.target = roitrack::to_roi(metric::rasterize_gt(box, window));
          frames.push_back(std::move(tf));
        }

        BatchGradient g = batch_gradient(params, templ, frames);
        if (!std::isfinite(g.loss)) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", sequence " +
                              std::to_string(s) + ", frames " + std::to_string(idx.front()) + ".." +
                              std::to_string(idx.back()));
        }
        const double lr = options.schedule == LrSchedule::Cosine
                              ? options.learning_rate * 0.5 * (1.0 + std::cos(pi * static_cast<double>(step) / total_steps))
                              : options.learning_rate;
        ++step;
        if (options.optimizer == Optimizer::Adam) {
          std::vector<Tensor*> p = params.tensors();
          std::vector<Tensor*> m = velocity.tensors();
          std::vector<Tensor*> v = second.tensors();
          std::vector<const Tensor*> gt = static_cast<const ModelGrads&>(g.grads).tensors();
          const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(step));
          const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(step));
          for (std::size_t t = 0; t < p.size(); ++t) {
            if (!gt[t]->all_finite()) throw TrainingError("non-finite gradient for parameter tensor " + std::to_string(t));
            for (std::size_t e = 0; e < p[t]->size(); ++e) {
              const double ge = (*gt[t])[e];
              double& me = (*m[t])[e];
              double& ve = (*v[t])[e];
              me = options.beta1 * me + (1.0 - options.beta1) * ge;
              ve = options.beta2 * ve + (1.0 - options.beta2) * ge * ge;
              (*p[t])[e] -= lr * (me / c1) / (std::sqrt(ve / c2) + kAdamEpsilon);
            }
          }
        } else if (options.momentum > 0.0) {
          std::vector<Tensor*> v = velocity.tensors();
          std::vector<const Tensor*> gt = static_cast<const ModelGrads&>(g.grads).tensors();
          for (std::size_t t = 0; t < v.size(); ++t) {
            for (std::size_t e = 0; e < v[t]->size(); ++e) (*v[t])[e] = options.momentum * (*v[t])[e] + (*gt[t])[e];
          }
          params = sgd_step(std::move(params), velocity, lr);
        } else {
          params = sgd_step(std::move(params), g.grads, lr);
        }
        epoch_loss += g.loss;
        ++batches;
      }
    }
    const double mean = epoch_loss / static_cast<double>(batches);
    result.loss_history.push_back(mean);
    if (options.on_epoch) options.on_epoch(epoch + 1, mean);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace roitrack::extractor
