#include "roitrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "roitrack/config_file.hpp"
#include "roitrack/error.hpp"
#include "roitrack/metric.hpp"
#include "roitrack/rng.hpp"

namespace roitrack::synth {
namespace {

using Color = std::array<float, 3>;

constexpr int kPatternCount = 4;
constexpr double kColorMargin = 0.35;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double hash01(std::uint64_t seed, std::int64_t x, std::int64_t y) {
  const std::uint64_t h = mix_seed(mix_seed(seed, static_cast<std::uint64_t>(x)), static_cast<std::uint64_t>(y));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

// Lattice value noise in [0,1].
double value_noise(std::uint64_t seed, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double tx = smooth(x - fx);
  const double ty = smooth(y - fy);
  const double a = hash01(seed, ix, iy);
  const double b = hash01(seed, ix + 1, iy);
  const double c = hash01(seed, ix, iy + 1);
  const double d = hash01(seed, ix + 1, iy + 1);
  return (a + tx * (b - a)) + ty * ((c + tx * (d - c)) - (a + tx * (b - a)));
}

double color_distance(const Color& a, const Color& b) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(s);
}

Color random_color(Rng& rng) {
  return {static_cast<float>(rng.uniform(0.05, 0.95)), static_cast<float>(rng.uniform(0.05, 0.95)),
          static_cast<float>(rng.uniform(0.05, 0.95))};
}

Color lerp(const Color& a, const Color& b, double t) {
  Color out{};
  for (int c = 0; c < 3; ++c) out[c] = static_cast<float>((1.0 - t) * a[c] + t * b[c]);
  return out;
}

Texture random_texture(Rng& rng) {
  Texture t;
  t.base = random_color(rng);
  t.accent = random_color(rng);
  t.pattern = static_cast<int>(rng.below(kPatternCount));
  t.frequency = rng.uniform(1.5, 4.0);
  t.orientation = rng.uniform(0.0, std::numbers::pi);
  t.contrast = rng.uniform(0.3, 0.7);
  t.ellipse = rng.uniform() < 0.5;
  t.noise_seed = rng.next_u64();
  return t;
}

// Average color over the texture's shape on a coarse grid.
Color mean_color(const Texture& tex) {
  constexpr int kGrid = 16;
  std::array<double, 3> acc{};
  int n = 0;
  for (int i = 0; i < kGrid; ++i) {
    for (int j = 0; j < kGrid; ++j) {
      const auto c = tex.sample((i + 0.5) / kGrid, (j + 0.5) / kGrid);
      if (!c) continue;
      for (int k = 0; k < 3; ++k) acc[k] += (*c)[k];
      ++n;
    }
  }
  return {static_cast<float>(acc[0] / n), static_cast<float>(acc[1] / n), static_cast<float>(acc[2] / n)};
}

// Similarity s blends every appearance parameter of a texture whose mean
// color is at least kColorMargin from the target's toward the target's own;
// at s = 1 only the noise seed differs.
Texture blend_distractor_texture(const Texture& target, double s, Rng& rng) {
  const Color target_mean = mean_color(target);
  Texture other = random_texture(rng);
  for (int attempt = 0; attempt < 64 && color_distance(mean_color(other), target_mean) < kColorMargin; ++attempt) {
    other = random_texture(rng);
  }
  if (color_distance(mean_color(other), target_mean) < kColorMargin) {
    for (int c = 0; c < 3; ++c) other.base[c] = other.accent[c] = target_mean[c] < 0.5f ? 0.95f : 0.05f;
  }
  Texture t;
  t.base = lerp(other.base, target.base, s);
  t.accent = lerp(other.accent, target.accent, s);
  t.pattern = rng.uniform() < s ? target.pattern : other.pattern;
  t.frequency = (1.0 - s) * other.frequency + s * target.frequency;
  t.orientation = (1.0 - s) * other.orientation + s * target.orientation;
  t.contrast = (1.0 - s) * other.contrast + s * target.contrast;
  t.ellipse = rng.uniform() < s ? target.ellipse : other.ellipse;
  t.noise_seed = rng.next_u64();
  return t;
}

void paint(Image& img, const BBox& box, const Texture& tex) {
  if (!(box.w > 0.0 && box.h > 0.0)) return;
  const auto x0 = static_cast<long>(std::max(0.0, std::floor(box.x)));
  const auto y0 = static_cast<long>(std::max(0.0, std::floor(box.y)));
  const auto x1 = static_cast<long>(std::min(static_cast<double>(img.width()), std::ceil(box.x + box.w)));
  const auto y1 = static_cast<long>(std::min(static_cast<double>(img.height()), std::ceil(box.y + box.h)));
  for (long y = y0; y < y1; ++y) {
    const double v = (static_cast<double>(y) + 0.5 - box.y) / box.h;
    if (v < 0.0 || v >= 1.0) continue;
    for (long x = x0; x < x1; ++x) {
      const double u = (static_cast<double>(x) + 0.5 - box.x) / box.w;
      if (u < 0.0 || u >= 1.0) continue;
      if (const auto c = tex.sample(u, v)) {
        for (std::size_t ch = 0; ch < 3; ++ch) {
          img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), ch) = (*c)[ch];
        }
      }
    }
  }
}

double clamp_axis(double center, double half, double extent) {
  if (2.0 * half >= extent) return 0.5 * extent;
  return std::clamp(center, half, extent - half);
}

// Smooth bounded random walk with border reflection.
std::vector<BBox> random_walk(const SceneConfig& cfg, BBox start, double ramp, Rng& rng) {
  std::vector<BBox> path;
  path.reserve(cfg.length);
  const double vmax = cfg.max_velocity;
  const double fw = static_cast<double>(cfg.frame_width);
  const double fh = static_cast<double>(cfg.frame_height);
  double vx = rng.uniform(-vmax, vmax);
  double vy = rng.uniform(-vmax, vmax);
  double cx = start.center_x();
  double cy = start.center_y();
  double w = start.w;
  double h = start.h;
  for (std::size_t t = 0; t < cfg.length; ++t) {
    path.push_back({cx - 0.5 * w, cy - 0.5 * h, w, h});
    vx = std::clamp(vx + 0.35 * vmax * rng.normal(), -vmax, vmax);
    vy = std::clamp(vy + 0.35 * vmax * rng.normal(), -vmax, vmax);
    w = std::min(w * ramp, fw);
    h = std::min(h * ramp, fh);
    double nx = cx + vx;
    double ny = cy + vy;
    if (!cfg.allow_exit) {
      const double lo_x = 0.5 * w, hi_x = fw - 0.5 * w;
      const double lo_y = 0.5 * h, hi_y = fh - 0.5 * h;
      if (nx < lo_x) nx = 2.0 * lo_x - nx, vx = -vx;
      if (nx > hi_x) nx = 2.0 * hi_x - nx, vx = -vx;
      if (ny < lo_y) ny = 2.0 * lo_y - ny, vy = -vy;
      if (ny > hi_y) ny = 2.0 * hi_y - ny, vy = -vy;
      nx = clamp_axis(nx, 0.5 * w, fw);
      ny = clamp_axis(ny, 0.5 * h, fh);
    }
    cx += std::clamp(nx - cx, -vmax, vmax);
    cy += std::clamp(ny - cy, -vmax, vmax);
  }
  return path;
}

Image make_background(const SceneConfig& cfg, Rng& rng) {
  Image bg(cfg.frame_width, cfg.frame_height);
  const Color base = lerp(random_color(rng), Color{0.5f, 0.5f, 0.5f}, 0.4);
  std::array<std::uint64_t, 6> seeds{};
  for (auto& s : seeds) s = rng.next_u64();
  const double low_amp = 0.45 * cfg.clutter;
  const double mid_amp = 0.25 * cfg.clutter;
  for (std::size_t y = 0; y < cfg.frame_height; ++y) {
    for (std::size_t x = 0; x < cfg.frame_width; ++x) {
      const double fx = static_cast<double>(x);
      const double fy = static_cast<double>(y);
      for (std::size_t c = 0; c < 3; ++c) {
        const double low = value_noise(seeds[c], fx / 48.0, fy / 48.0) - 0.5;
        const double mid = value_noise(seeds[c + 3], fx / 9.0, fy / 9.0) - 0.5;
        bg.at(x, y, c) = static_cast<float>(std::clamp(base[c] + low_amp * low + mid_amp * mid, 0.0, 1.0));
      }
    }
  }
  const auto blobs = static_cast<std::size_t>(std::lround(cfg.clutter * 10.0));
  for (std::size_t i = 0; i < blobs; ++i) {
    const double w = rng.uniform(6.0, 36.0);
    const double h = rng.uniform(6.0, 36.0);
    const BBox box{rng.uniform(-w / 2, static_cast<double>(cfg.frame_width) - w / 2),
                   rng.uniform(-h / 2, static_cast<double>(cfg.frame_height) - h / 2), w, h};
    Texture tex = random_texture(rng);
    tex.base = lerp(tex.base, base, 0.35);
    tex.accent = lerp(tex.accent, base, 0.35);
    paint(bg, box, tex);
  }
  return bg;
}

void require(bool ok, const char* message) {
  if (!ok) throw ParameterError(std::string("scene config: ") + message);
}

}  // namespace

std::optional<std::array<float, 3>> Texture::sample(double u, double v) const {
  if (ellipse) {
    const double du = u - 0.5;
    const double dv = v - 0.5;
    if (4.0 * (du * du + dv * dv) > 1.0) return std::nullopt;
  }
  double s = 0.0;
  switch (pattern) {
    case 0:
      s = 0.5 + 0.5 * std::sin(kTwoPi * frequency * (u * std::cos(orientation) + v * std::sin(orientation)));
      break;
    case 1:
      s = static_cast<double>((static_cast<long>(std::floor(frequency * u)) +
                               static_cast<long>(std::floor(frequency * v))) & 1);
      break;
    case 2:
      s = 0.5 + 0.5 * std::cos(kTwoPi * frequency * std::hypot(u - 0.5, v - 0.5));
      break;
    default:
      s = value_noise(noise_seed ^ 0x5bd1e995ULL, 2.0 * frequency * u, 2.0 * frequency * v);
      break;
  }
  const double grain = value_noise(noise_seed, 10.0 * u, 10.0 * v) - 0.5;
  std::array<float, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double val = base[c] + contrast * s * (accent[c] - base[c]) + 0.12 * grain;
    out[c] = static_cast<float>(std::clamp(val, 0.0, 1.0));
  }
  return out;
}

void validate(const SceneConfig& c) {
  require(c.frame_width > 0 && c.frame_height > 0, "frame size must be positive");
  require(c.length > 0, "length must be positive");
  require(c.initial_box.w > 0.0 && c.initial_box.h > 0.0, "initial box must have positive size");
  require(c.initial_box.w <= static_cast<double>(c.frame_width) &&
              c.initial_box.h <= static_cast<double>(c.frame_height),
          "target larger than frame");
  require(c.similarity >= 0.0 && c.similarity <= 1.0, "similarity must lie in [0,1]");
  require(c.clutter >= 0.0 && c.clutter <= 1.0, "clutter must lie in [0,1]");
  require(c.occlusion_coverage >= 0.0 && c.occlusion_coverage <= 1.0, "occlusion coverage must lie in [0,1]");
  require(c.sensor_noise >= 0.0 && c.sensor_noise <= 1.0, "sensor noise must lie in [0,1]");
  require(std::isfinite(c.max_velocity) && c.max_velocity >= 0.0, "velocity bound must be finite and >= 0");
  require(std::isfinite(c.scale_ramp) && c.scale_ramp > 0.0, "scale ramp must be finite and positive");
}

SceneRenderer::SceneRenderer(const SceneConfig& config) : config_(config) {
  validate(config_);
  Rng appearance(mix_seed(config_.target_seed, 0xa11ce));
  target_texture_ = random_texture(appearance);

  Rng scene(mix_seed(config_.seed, 0x5ce7e));
  background_ = make_background(config_, scene);

  Rng motion(mix_seed(config_.seed, 0x3071));
  target_path_ = random_walk(config_, config_.initial_box, config_.scale_ramp, motion);

  const double fw = static_cast<double>(config_.frame_width);
  const double fh = static_cast<double>(config_.frame_height);
  for (std::size_t d = 0; d < config_.distractor_count; ++d) {
    distractor_textures_.push_back(blend_distractor_texture(target_texture_, config_.similarity, scene));
    const double w = std::min(fw, config_.initial_box.w * scene.uniform(0.8, 1.2));
    const double h = std::min(fh, config_.initial_box.h * scene.uniform(0.8, 1.2));
    BBox start{};
    for (int attempt = 0; attempt < 32; ++attempt) {
      start = {scene.uniform(0.0, fw - w), scene.uniform(0.0, fh - h), w, h};
      if (metric::box_iou(start, config_.initial_box) == 0.0) break;
    }
    SceneConfig walk = config_;
    walk.allow_exit = false;
    distractor_paths_.push_back(random_walk(walk, start, 1.0, motion));
  }
}

bool SceneRenderer::occluded(std::size_t t) const {
  return config_.occlusion_coverage > 0.0 && t >= config_.occlusion_start &&
         t < config_.occlusion_start + config_.occlusion_length;
}

Image SceneRenderer::render(std::size_t t) const {
  if (t >= config_.length) throw ParameterError("frame index out of range");
  Image img = background_;
  for (std::size_t d = 0; d < distractor_paths_.size(); ++d) paint(img, distractor_paths_[d][t], distractor_textures_[d]);
  const BBox box = target_path_[t];
  paint(img, box, target_texture_);
  if (occluded(t)) {
    Texture occluder;
    occluder.base = {0.45f, 0.45f, 0.42f};
    occluder.accent = {0.3f, 0.3f, 0.3f};
    occluder.pattern = 0;
    occluder.frequency = 2.0;
    occluder.contrast = 0.6;
    occluder.noise_seed = config_.seed;
    paint(img, {box.x - 2.0, box.y - 0.1 * box.h, config_.occlusion_coverage * box.w + 2.0, 1.2 * box.h}, occluder);
  }
  if (config_.sensor_noise > 0.0) {
    const std::uint64_t frame_seed = mix_seed(config_.seed, 0x70000 + t);
    std::span<float> px = img.data();
    for (std::size_t i = 0; i < px.size(); ++i) {
      const double n = hash01(frame_seed, static_cast<std::int64_t>(i), 0) - 0.5;
      px[i] = static_cast<float>(std::clamp(px[i] + 2.0 * config_.sensor_noise * n, 0.0, 1.0));
    }
  }
  quantize_8bit(img);
  return img;
}

SequenceRecord gen_sequence(const SceneConfig& config) {
  const SceneRenderer renderer(config);
  SequenceRecord rec;
  rec.name = "synth_" + std::to_string(config.seed);
  rec.config_echo = config::to_text(config);
  rec.frames.reserve(config.length);
  for (std::size_t t = 0; t < config.length; ++t) {
    rec.frames.push_back(renderer.render(t));
    rec.boxes.push_back(renderer.target_box(t));
  }
  return rec;
}

SceneConfig sample_scene(std::uint64_t seed, std::size_t index, const DatasetOptions& o) {
  Rng rng(mix_seed(seed, index));
  SceneConfig c;
  c.frame_width = c.frame_height = o.frame_size;
  c.length = o.length;
  c.seed = mix_seed(seed, 1000003 + index);
  c.target_seed = rng.next_u64();
  const double fs = static_cast<double>(o.frame_size);
  const double w = rng.uniform(o.min_target, o.max_target);
  const double h = std::clamp(w * std::exp(rng.uniform(-0.35, 0.35)), o.min_target, o.max_target);
  c.initial_box = {rng.uniform(0.1 * fs, 0.9 * fs - w), rng.uniform(0.1 * fs, 0.9 * fs - h), w, h};
  c.distractor_count = o.min_distractors + rng.below(o.max_distractors - o.min_distractors + 1);
  c.similarity = o.similarity;
  c.max_velocity = o.max_velocity;
  c.clutter = o.clutter;
  if (rng.uniform() < o.occlusion_probability) {
    c.occlusion_start = rng.below(std::max<std::size_t>(o.length, 2) / 2) + 1;
    c.occlusion_length = 5 + rng.below(10);
    c.occlusion_coverage = rng.uniform(0.2, 0.5);
  }
  return c;
}

SyntheticSource::SyntheticSource(std::vector<SceneConfig> scenes) : scenes_(std::move(scenes)) {
  for (const SceneConfig& s : scenes_) validate(s);
}

const SceneRenderer& SyntheticSource::renderer(std::size_t s) const {
  if (!cached_ || cached_index_ != s) {
    cached_ = std::make_unique<SceneRenderer>(scenes_.at(s));
    cached_index_ = s;
  }
  return *cached_;
}

Image SyntheticSource::frame(std::size_t s, std::size_t i) const { return renderer(s).render(i); }

BBox SyntheticSource::box(std::size_t s, std::size_t i) const { return renderer(s).target_box(i); }

RoiMatrix oracle_heatmap(const BBox& box, const Window& window) {
  return to_roi(metric::rasterize_gt(box, window));
}

Image render_overlay(const Image& frame, const Window& window, const RoiMatrix& roi, const BBox& pred_box) {
  Image out = frame;
  const long fw = static_cast<long>(frame.width());
  const long fh = static_cast<long>(frame.height());
  const double side = static_cast<double>(kRoiSide);
  constexpr Color kHeat{1.0f, 0.1f, 0.05f};
  if (window.w > 0.0 && window.h > 0.0) {
    const long x0 = std::max(0L, static_cast<long>(std::floor(window.left())));
    const long y0 = std::max(0L, static_cast<long>(std::floor(window.top())));
    const long x1 = std::min(fw, static_cast<long>(std::ceil(window.left() + window.w)));
    const long y1 = std::min(fh, static_cast<long>(std::ceil(window.top() + window.h)));
    for (long y = y0; y < y1; ++y) {
      const double v = (static_cast<double>(y) + 0.5 - window.top()) / window.h;
      if (v < 0.0 || v >= 1.0) continue;
      const auto row = static_cast<std::size_t>(v * side);
      for (long x = x0; x < x1; ++x) {
        const double u = (static_cast<double>(x) + 0.5 - window.left()) / window.w;
        if (u < 0.0 || u >= 1.0) continue;
        const double heat = std::clamp(roi(row, static_cast<std::size_t>(u * side)), 0.0, 1.0);
        if (heat <= 0.0) continue;
        const double alpha = 0.55 * heat;
        for (std::size_t c = 0; c < 3; ++c) {
          float& p = out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), c);
          p = static_cast<float>((1.0 - alpha) * p + alpha * kHeat[c]);
        }
      }
    }
  }
  auto outline = [&](double left, double top, double w, double h, const Color& color) {
    const long x0 = std::lround(left);
    const long y0 = std::lround(top);
    const long x1 = std::lround(left + w) - 1;
    const long y1 = std::lround(top + h) - 1;
    auto put = [&](long x, long y) {
      if (x < 0 || y < 0 || x >= fw || y >= fh) return;
      for (std::size_t c = 0; c < 3; ++c) out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), c) = color[c];
    };
    for (long x = x0; x <= x1; ++x) put(x, y0), put(x, y1);
    for (long y = y0; y <= y1; ++y) put(x0, y), put(x1, y);
  };
  outline(window.left(), window.top(), window.w, window.h, {1.0f, 0.9f, 0.1f});
  outline(pred_box.x, pred_box.y, pred_box.w, pred_box.h, {0.1f, 1.0f, 0.2f});
  return out;
}

}  // namespace roitrack::synth
