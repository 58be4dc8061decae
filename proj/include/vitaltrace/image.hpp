#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vitaltrace/error.hpp"

namespace vitaltrace {

// RGB frame, one byte per sample, row-major with top-left origin.
struct Frame {
  int width = 0;
  int height = 0;
  std::size_t index = 0;
  std::vector<std::uint8_t> red;
  std::vector<std::uint8_t> green;
  std::vector<std::uint8_t> blue;

  Frame() = default;
  Frame(int w, int h, std::size_t idx = 0)
      : width(w),
        height(h),
        index(idx),
        red(static_cast<std::size_t>(w) * h),
        green(static_cast<std::size_t>(w) * h),
        blue(static_cast<std::size_t>(w) * h) {
    detail::require(w > 0 && h > 0, "Frame: dimensions must be positive");
  }

  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width) * height;
  }

  bool operator==(const Frame&) const = default;
};

// Luminance image with values in [0, 1].
struct GrayFrame {
  int width = 0;
  int height = 0;
  std::size_t index = 0;
  std::vector<float> luma;

  GrayFrame() = default;
  GrayFrame(int w, int h, float fill = 0.0f, std::size_t idx = 0)
      : width(w), height(h), index(idx), luma(static_cast<std::size_t>(w) * h, fill) {
    detail::require(w > 0 && h > 0, "GrayFrame: dimensions must be positive");
  }

  float& at(int x, int y) { return luma[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const {
    return luma[static_cast<std::size_t>(y) * width + x];
  }

  bool operator==(const GrayFrame&) const = default;
};

namespace detail {

// Bilinear sample of a row-major plane; coordinates are clamped to the
// edge pixels before interpolation.
template <typename T>
inline double sample_bilinear(std::span<const T> plane, int width, int height,
                              double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const auto at = [&](int xx, int yy) {
    return static_cast<double>(plane[static_cast<std::size_t>(yy) * width + xx]);
  };
  const double top = at(x0, y0) + fx * (at(x1, y0) - at(x0, y0));
  const double bottom = at(x0, y1) + fx * (at(x1, y1) - at(x0, y1));
  return top + fy * (bottom - top);
}

}  // namespace detail

}  // namespace vitaltrace
