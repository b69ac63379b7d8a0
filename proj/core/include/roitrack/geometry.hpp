#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace roitrack {

/// Axis-aligned box, top-left corner plus size, in frame pixels.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double center_x() const { return x + 0.5 * w; }
  double center_y() const { return y + 0.5 * h; }
  double area() const { return w * h; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Search window: center and size in frame pixels. May extend past the frame.
struct Window {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double left() const { return cx - 0.5 * w; }
  double top() const { return cy - 0.5 * h; }
  bool contains(double x, double y) const {
    return x >= left() && x <= left() + w && y >= top() && y <= top() + h;
  }

  friend bool operator==(const Window&, const Window&) = default;
};

inline constexpr std::size_t kRoiSide = 28;
inline constexpr std::size_t kRoiCells = kRoiSide * kRoiSide;

/// 28x28 grid laid over a window; row index runs down, column index right.
template <typename T>
struct RoiGrid {
  std::array<T, kRoiCells> cells{};

  T& operator()(std::size_t row, std::size_t col) { return cells[row * kRoiSide + col]; }
  T operator()(std::size_t row, std::size_t col) const { return cells[row * kRoiSide + col]; }

  double sum() const {
    double s = 0.0;
    for (T v : cells) s += static_cast<double>(v);
    return s;
  }

  friend bool operator==(const RoiGrid&, const RoiGrid&) = default;
};

/// Per-cell object-presence scores in [0,1].
using RoiMatrix = RoiGrid<double>;
/// Binary ground-truth occupancy.
using GtMatrix = RoiGrid<std::uint8_t>;

inline RoiMatrix to_roi(const GtMatrix& gt) {
  RoiMatrix out;
  for (std::size_t i = 0; i < kRoiCells; ++i) out.cells[i] = gt.cells[i];
  return out;
}

}  // namespace roitrack
