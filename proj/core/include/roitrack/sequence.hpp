#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "roitrack/geometry.hpp"
#include "roitrack/image.hpp"

namespace roitrack {

/// Ordered frames with one ground-truth box per frame.
struct SequenceRecord {
  std::string name;
  std::vector<Image> frames;
  std::vector<BBox> boxes;
  /// key=value text of the generating scene config, empty for real data.
  std::string config_echo;

  std::size_t size() const { return frames.size(); }
};

/// Random access to frames of many sequences without holding them all in
/// memory. Training reads only the frames of the batch it is building.
class SequenceSource {
 public:
  virtual ~SequenceSource() = default;
  virtual std::size_t sequence_count() const = 0;
  virtual std::size_t length(std::size_t sequence) const = 0;
  virtual Image frame(std::size_t sequence, std::size_t index) const = 0;
  virtual BBox box(std::size_t sequence, std::size_t index) const = 0;
};

/// Adapts in-memory records.
class RecordSource final : public SequenceSource {
 public:
  explicit RecordSource(std::span<const SequenceRecord> records) : records_(records) {}
  std::size_t sequence_count() const override { return records_.size(); }
  std::size_t length(std::size_t s) const override { return records_[s].size(); }
  Image frame(std::size_t s, std::size_t i) const override { return records_[s].frames[i]; }
  BBox box(std::size_t s, std::size_t i) const override { return records_[s].boxes[i]; }

 private:
  std::span<const SequenceRecord> records_;
};

}  // namespace roitrack
