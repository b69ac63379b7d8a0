#include "roitrack/config_file.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "roitrack/error.hpp"

namespace roitrack::config {
namespace {

using Setter = std::function<void(const std::string&)>;
using Schema = std::map<std::string, Setter>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw FormatError("not a number: '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw FormatError("not a non-negative integer: '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw FormatError("not a boolean: '" + v + "'");
}

template <typename T>
Setter size_field(T& field) {
  return [&field](const std::string& v) { field = static_cast<T>(to_u64(v)); };
}

extractor::Optimizer parse_optimizer(const std::string& v) {
  if (v == "sgd") return extractor::Optimizer::Sgd;
  if (v == "adam") return extractor::Optimizer::Adam;
  throw FormatError("optimizer must be 'sgd' or 'adam', got '" + v + "'");
}

extractor::LrSchedule parse_schedule(const std::string& v) {
  if (v == "constant") return extractor::LrSchedule::Constant;
  if (v == "cosine") return extractor::LrSchedule::Cosine;
  throw FormatError("schedule must be 'constant' or 'cosine', got '" + v + "'");
}

Setter real_field(double& field) {
  return [&field](const std::string& v) { field = to_double(v); };
}

void apply_schema(const Entries& entries, const Schema& schema, const char* what) {
  for (const Entry& e : entries) {
    const auto it = schema.find(e.key);
    if (it == schema.end()) {
      throw FormatError("unknown " + std::string(what) + " key '" + e.key + "' on line " + std::to_string(e.line));
    }
    try {
      it->second(e.value);
    } catch (const FormatError& err) {
      throw FormatError("bad value for '" + e.key + "' on line " + std::to_string(e.line) + ": " + err.what());
    }
  }
}

std::string fmt(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace

Entries parse(std::istream& in, const std::string& source_name) {
  Entries out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(source_name + ": line " + std::to_string(n) + " is not key=value");
    }
    Entry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), n};
    if (e.key.empty()) throw FormatError(source_name + ": empty key on line " + std::to_string(n));
    out.push_back(std::move(e));
  }
  return out;
}

Entries read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse(in, path.string());
}

void apply(const Entries& entries, synth::SceneConfig& s) {
  const Schema schema = {
      {"frame_width", size_field(s.frame_width)},
      {"frame_height", size_field(s.frame_height)},
      {"length", size_field(s.length)},
      {"seed", size_field(s.seed)},
      {"target_seed", size_field(s.target_seed)},
      {"box_x", real_field(s.initial_box.x)},
      {"box_y", real_field(s.initial_box.y)},
      {"box_w", real_field(s.initial_box.w)},
      {"box_h", real_field(s.initial_box.h)},
      {"distractor_count", size_field(s.distractor_count)},
      {"similarity", real_field(s.similarity)},
      {"max_velocity", real_field(s.max_velocity)},
      {"scale_ramp", real_field(s.scale_ramp)},
      {"occlusion_start", size_field(s.occlusion_start)},
      {"occlusion_length", size_field(s.occlusion_length)},
      {"occlusion_coverage", real_field(s.occlusion_coverage)},
      {"clutter", real_field(s.clutter)},
      {"sensor_noise", real_field(s.sensor_noise)},
      {"allow_exit", [&s](const std::string& v) { s.allow_exit = to_bool(v); }},
  };
  apply_schema(entries, schema, "scene");
}

void apply(const Entries& entries, pipeline::TrackerConfig& t) {
  const Schema schema = {
      {"grow_threshold", real_field(t.grow_threshold)},
      {"shrink_threshold", real_field(t.shrink_threshold)},
      {"grow_factor", real_field(t.grow_factor)},
      {"shrink_factor", real_field(t.shrink_factor)},
      {"bin_threshold", real_field(t.bin_threshold)},
      {"activity_threshold", real_field(t.activity_threshold)},
      {"template_update_n", size_field(t.template_update_n)},
      {"branch_small", real_field(t.branch_thresholds.small)},
      {"branch_medium", real_field(t.branch_thresholds.medium)},
      {"min_window", real_field(t.min_window)},
      {"max_window_factor", real_field(t.max_window_factor)},
  };
  apply_schema(entries, schema, "tracker");
}

void apply(const Entries& entries, extractor::TrainOptions& o) {
  const Schema schema = {
      {"epochs", [&o](const std::string& v) { o.epochs = static_cast<int>(to_u64(v)); }},
      {"learning_rate", real_field(o.learning_rate)},
      {"schedule", [&o](const std::string& v) { o.schedule = parse_schedule(v); }},
      {"optimizer", [&o](const std::string& v) { o.optimizer = parse_optimizer(v); }},
      {"momentum", real_field(o.momentum)},
      {"beta1", real_field(o.beta1)},
      {"beta2", real_field(o.beta2)},
      {"seed", size_field(o.seed)},
      {"batch_frames", size_field(o.batch_frames)},
      {"batches_per_sequence", size_field(o.batches_per_sequence)},
      {"window_scale_min", real_field(o.window_scale_min)},
      {"window_scale_max", real_field(o.window_scale_max)},
      {"center_jitter", real_field(o.center_jitter)},
      {"branch_small", real_field(o.thresholds.small)},
      {"branch_medium", real_field(o.thresholds.medium)},
  };
  apply_schema(entries, schema, "training");
}

std::string to_text(const synth::SceneConfig& s) {
  std::ostringstream out;
  out << "frame_width = " << s.frame_width << "\n"
      << "frame_height = " << s.frame_height << "\n"
      << "length = " << s.length << "\n"
      << "seed = " << s.seed << "\n"
      << "target_seed = " << s.target_seed << "\n"
      << "box_x = " << fmt(s.initial_box.x) << "\n"
      << "box_y = " << fmt(s.initial_box.y) << "\n"
      << "box_w = " << fmt(s.initial_box.w) << "\n"
      << "box_h = " << fmt(s.initial_box.h) << "\n"
      << "distractor_count = " << s.distractor_count << "\n"
      << "similarity = " << fmt(s.similarity) << "\n"
      << "max_velocity = " << fmt(s.max_velocity) << "\n"
      << "scale_ramp = " << fmt(s.scale_ramp) << "\n"
      << "occlusion_start = " << s.occlusion_start << "\n"
      << "occlusion_length = " << s.occlusion_length << "\n"
      << "occlusion_coverage = " << fmt(s.occlusion_coverage) << "\n"
      << "clutter = " << fmt(s.clutter) << "\n"
      << "sensor_noise = " << fmt(s.sensor_noise) << "\n"
      << "allow_exit = " << (s.allow_exit ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace roitrack::config
