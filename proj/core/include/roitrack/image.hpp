#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "roitrack/geometry.hpp"

namespace roitrack {

/// Interleaved RGB image with channel values in [0,1].
class Image {
 public:
  static constexpr std::size_t kChannels = 3;

  Image() = default;
  Image(std::size_t width, std::size_t height, float fill = 0.0f)
      : width_(width), height_(height), data_(width * height * kChannels, fill) {}

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  bool empty() const { return data_.empty(); }

  float& at(std::size_t x, std::size_t y, std::size_t c) { return data_[(y * width_ + x) * kChannels + c]; }
  float at(std::size_t x, std::size_t y, std::size_t c) const {
    return data_[(y * width_ + x) * kChannels + c];
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<float> data_;
};

/// Bilinearly samples the window region into an out_size x out_size image.
/// Pixel centers sit at half-integer positions; samples falling outside the
/// frame replicate the nearest edge pixel.
Image crop_and_resize(const Image& frame, const Window& window, std::size_t out_size);

/// Rounds every channel to the nearest multiple of 1/255.
void quantize_8bit(Image& image);

}  // namespace roitrack
