#include "roitrack/image.hpp"

#include <algorithm>
#include <cmath>

#include "roitrack/error.hpp"

namespace roitrack {
namespace {

struct Tap {
  std::size_t lo, hi;
  float frac;
};

std::vector<Tap> taps(double origin, double extent, std::size_t out, std::size_t limit) {
  std::vector<Tap> result(out);
  const double scale = extent / static_cast<double>(out);
  const double max_coord = static_cast<double>(limit - 1);
  for (std::size_t i = 0; i < out; ++i) {
    double src = origin + (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, max_coord);
    const auto lo = static_cast<std::size_t>(src);
    result[i] = {lo, std::min(lo + 1, limit - 1), static_cast<float>(src - static_cast<double>(lo))};
  }
  return result;
}

}  // namespace

Image crop_and_resize(const Image& frame, const Window& window, std::size_t out_size) {
  if (frame.empty()) throw ParameterError("crop_and_resize on an empty frame");
  if (out_size == 0) throw ParameterError("crop_and_resize output size must be positive");
  if (!(window.w > 0.0 && window.h > 0.0)) throw ParameterError("crop_and_resize window must have positive size");

  const std::vector<Tap> xs = taps(window.left(), window.w, out_size, frame.width());
  const std::vector<Tap> ys = taps(window.top(), window.h, out_size, frame.height());
  Image out(out_size, out_size);
  const std::span<const float> src = frame.data();
  const std::size_t stride = frame.width() * Image::kChannels;
  float* dst = out.data().data();
  for (const Tap& ty : ys) {
    const float* row_lo = src.data() + ty.lo * stride;
    const float* row_hi = src.data() + ty.hi * stride;
    for (const Tap& tx : xs) {
      const std::size_t a = tx.lo * Image::kChannels;
      const std::size_t b = tx.hi * Image::kChannels;
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        const float top = row_lo[a + c] + tx.frac * (row_lo[b + c] - row_lo[a + c]);
        const float bot = row_hi[a + c] + tx.frac * (row_hi[b + c] - row_hi[a + c]);
        *dst++ = top + ty.frac * (bot - top);
      }
    }
  }
  return out;
}

void quantize_8bit(Image& image) {
  for (float& v : image.data()) {
    v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  }
}

}  // namespace roitrack
