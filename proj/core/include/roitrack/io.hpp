#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "roitrack/geometry.hpp"
#include "roitrack/image.hpp"
#include "roitrack/metric.hpp"
#include "roitrack/sequence.hpp"

// On-disk formats. A sequence directory holds lexicographically ordered
// frame images (png, jpg) and groundtruth.txt with one "x,y,w,h" line per
// frame. See docs/formats.md.
namespace roitrack::io {

namespace fs = std::filesystem;

inline constexpr const char* kGroundTruthFile = "groundtruth.txt";
inline constexpr const char* kSceneConfigFile = "scene.cfg";

/// Decodes PNG or JPEG to [0,1] RGB. Throws FormatError when unreadable.
Image read_image(const fs::path& path);
/// Lossless 8-bit RGB PNG.
void write_png(const fs::path& path, const Image& image);

/// Parses "x,y,w,h"; line_no only feeds the error message.
BBox parse_box_line(std::string_view line, std::size_t line_no);
std::string format_box_line(const BBox& box);
std::vector<BBox> read_boxes(const fs::path& path);
/// Shortest round-trip formatting; an empty list yields an empty file.
void write_boxes(const fs::path& path, std::span<const BBox> boxes);

std::vector<fs::path> list_frames(const fs::path& dir);

/// Throws FormatError on a frame/ground-truth count mismatch, a malformed
/// line (naming its number) or an unreadable image.
SequenceRecord load_sequence(const fs::path& dir);
/// Writes NNNNNNNN.png frames (1-based), groundtruth.txt and, for synthetic
/// records, scene.cfg.
void export_sequence(const SequenceRecord& seq, const fs::path& dir);

/// `root` itself when it is a sequence directory, else its immediate
/// subdirectories that are, sorted.
std::vector<fs::path> find_sequence_dirs(const fs::path& root);

/// Frames are decoded on access; ground truth is read up front.
class DirectorySource final : public SequenceSource {
 public:
  explicit DirectorySource(std::vector<fs::path> dirs);
  std::size_t sequence_count() const override { return sequences_.size(); }
  std::size_t length(std::size_t s) const override { return sequences_.at(s).boxes.size(); }
  Image frame(std::size_t s, std::size_t i) const override { return read_image(sequences_.at(s).frames.at(i)); }
  BBox box(std::size_t s, std::size_t i) const override { return sequences_.at(s).boxes.at(i); }

 private:
  struct Entry {
    std::vector<fs::path> frames;
    std::vector<BBox> boxes;
  };
  std::vector<Entry> sequences_;
};

/// Per-frame extractor output: the window it was computed in and the matrix.
struct RoiDump {
  std::size_t frame_index = 0;
  Window window;
  RoiMatrix roi;
};

/// CSV, one frame per line: frame_index,cx,cy,w,h then 784 row-major values.
void write_rois(const fs::path& path, std::span<const RoiDump> rois);
std::vector<RoiDump> read_rois(const fs::path& path);

void write_report(const fs::path& path, const metric::ScoreReport& report);

}  // namespace roitrack::io
