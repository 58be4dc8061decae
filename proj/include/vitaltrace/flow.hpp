#pragma once

// Dense optical flow between a fixed reference frame and a target frame.
//
// Coarse-to-fine Horn-Schunck: at every pyramid level the target is warped
// by the current flow, the brightness-constancy term is linearized around
// it, and the increment is solved with red-black SOR sweeps. Intensities are
// handled on the 0-255 scale, so `smoothness_weight` is in gray levels per
// pixel.
//
// The flow convention is reference(x, y) ~= target(x + u, y + v): flow is
// indexed in reference coordinates and points to where the material moved.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "vitaltrace/error.hpp"
#include "vitaltrace/image.hpp"

namespace vitaltrace {

struct FlowParams {
  int pyramid_levels = 4;
  double downscale_factor = 0.5;
  double smoothness_weight = 10.0;
  int iterations_per_level = 100;
  // Relinearizations per level.
  int warps_per_level = 1;
  // When extracting signals, seed each frame with the previous frame's flow
  // (the reference stays the first frame).
  bool warm_start = true;

  bool operator==(const FlowParams&) const = default;
};

inline void validate(const FlowParams& p) {
  detail::require(p.pyramid_levels >= 1, "FlowParams: pyramid_levels must be >= 1");
  detail::require(p.smoothness_weight > 0.0, "FlowParams: smoothness_weight must be > 0");
  detail::require(p.iterations_per_level >= 1,
                  "FlowParams: iterations_per_level must be >= 1");
  detail::require(p.downscale_factor > 0.0 && p.downscale_factor < 1.0,
                  "FlowParams: downscale_factor must be in (0, 1)");
  detail::require(p.warps_per_level >= 1, "FlowParams: warps_per_level must be >= 1");
}

struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w),
        height(h),
        u(static_cast<std::size_t>(w) * h, 0.0f),
        v(static_cast<std::size_t>(w) * h, 0.0f) {}

  // Uniform field.
  static FlowField constant(int w, int h, float du, float dv) {
    FlowField f(w, h);
    std::fill(f.u.begin(), f.u.end(), du);
    std::fill(f.v.begin(), f.v.end(), dv);
    return f;
  }

  double sample_u(double x, double y) const {
    return detail::sample_bilinear<float>(u, width, height, x, y);
  }
  double sample_v(double x, double y) const {
    return detail::sample_bilinear<float>(v, width, height, x, y);
  }

  bool operator==(const FlowField&) const = default;
};

namespace detail {

inline int scaled_extent(int extent, double factor, int level) {
  return static_cast<int>(std::lround(extent * std::pow(factor, level)));
}

inline std::vector<float> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
  std::vector<float> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * i * i / (sigma * sigma));
    k[i + radius] = static_cast<float>(w);
    sum += w;
  }
  for (auto& w : k) w = static_cast<float>(w / sum);
  return k;
}

// Separable blur with clamp-to-edge borders.
inline std::vector<float> blur(std::span<const float> in, int w, int h,
                               std::span<const float> kernel) {
  const int r = static_cast<int>(kernel.size() / 2);
  std::vector<float> tmp(in.size());
  std::vector<float> out(in.size());
  for (int y = 0; y < h; ++y) {
    const float* row = in.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -r; i <= r; ++i) acc += kernel[i + r] * row[std::clamp(x + i, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -r; i <= r; ++i)
        acc += kernel[i + r] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

// Bilinear resampling onto a (dw, dh) grid with pixel-center alignment.
inline std::vector<float> resample(std::span<const float> in, int sw, int sh, int dw,
                                   int dh) {
  std::vector<float> out(static_cast<std::size_t>(dw) * dh);
  const double sx = static_cast<double>(sw) / dw;
  const double sy = static_cast<double>(sh) / dh;
  for (int y = 0; y < dh; ++y)
    for (int x = 0; x < dw; ++x)
      out[static_cast<std::size_t>(y) * dw + x] = static_cast<float>(
          sample_bilinear<float>(in, sw, sh, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5));
  return out;
}

inline FlowField resample_flow(const FlowField& f, int dw, int dh) {
  FlowField out(dw, dh);
  out.u = resample(f.u, f.width, f.height, dw, dh);
  out.v = resample(f.v, f.width, f.height, dw, dh);
  const auto su = static_cast<float>(static_cast<double>(dw) / f.width);
  const auto sv = static_cast<float>(static_cast<double>(dh) / f.height);
  for (auto& x : out.u) x *= su;
  for (auto& x : out.v) x *= sv;
  return out;
}

inline void warp_plane(std::span<const float> in, int w, int h, std::span<const float> u,
                       std::span<const float> v, std::span<float> out) {
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      out[i] = static_cast<float>(sample_bilinear<float>(in, w, h, x + u[i], y + v[i]));
    }
}

// Five-point central derivative with clamped borders, scaled to gray levels.
inline void gradients(std::span<const float> img, int w, int h, std::span<float> gx,
                      std::span<float> gy) {
  constexpr float kScale = 255.0f / 12.0f;
  const auto at = [&](int x, int y) {
    return img[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = kScale * (at(x - 2, y) - 8.0f * at(x - 1, y) + 8.0f * at(x + 1, y) - at(x + 2, y));
      gy[i] = kScale * (at(x, y - 2) - 8.0f * at(x, y - 1) + 8.0f * at(x, y + 1) - at(x, y + 2));
    }
}

constexpr float kSorRelaxation = 1.8f;

// Refines (u, v) at one pyramid level in place.
inline void solve_level(const GrayFrame& ref, const GrayFrame& target, FlowField& flow,
                        const FlowParams& params) {
  const int w = ref.width;
  const int h = ref.height;
  const std::size_t n = ref.luma.size();
  const float alpha2 = static_cast<float>(params.smoothness_weight * params.smoothness_weight);

  std::vector<float> warped(n), rx(n), ry(n), tx(n), ty(n);
  std::vector<float> ix(n), iy(n), c(n), inv(n);
  gradients(ref.luma, w, h, rx, ry);

  for (int pass = 0; pass < params.warps_per_level; ++pass) {
    warp_plane(target.luma, w, h, flow.u, flow.v, warped);
    gradients(warped, w, h, tx, ty);
    for (std::size_t i = 0; i < n; ++i) {
      ix[i] = 0.5f * (rx[i] + tx[i]);
      iy[i] = 0.5f * (ry[i] + ty[i]);
      const float it = 255.0f * (warped[i] - ref.luma[i]);
      c[i] = it - ix[i] * flow.u[i] - iy[i] * flow.v[i];
      inv[i] = 1.0f / (alpha2 + ix[i] * ix[i] + iy[i] * iy[i]);
    }

    float* u = flow.u.data();
    float* v = flow.v.data();
    const auto update = [&](std::size_t i, float ubar, float vbar) {
      const float t = (ix[i] * ubar + iy[i] * vbar + c[i]) * inv[i];
      u[i] += kSorRelaxation * (ubar - ix[i] * t - u[i]);
      v[i] += kSorRelaxation * (vbar - iy[i] * t - v[i]);
    };
    const auto update_border = [&](int x, int y) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      float su = 0.0f, sv = 0.0f;
      int count = 0;
      const auto add = [&](int xx, int yy) {
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) return;
        const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
        su += u[j];
        sv += v[j];
        ++count;
      };
      add(x - 1, y);
      add(x + 1, y);
      add(x, y - 1);
      add(x, y + 1);
      if (count == 0) return;
      update(i, su / count, sv / count);
    };

    for (int iter = 0; iter < params.iterations_per_level; ++iter) {
      for (int color = 0; color < 2; ++color) {
        for (int y = 0; y < h; ++y) {
          const bool border_row = (y == 0 || y == h - 1);
          for (int x = (y + color) & 1; x < w; x += 2) {
            if (border_row || x == 0 || x == w - 1) {
              update_border(x, y);
              continue;
            }
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const float ubar = 0.25f * (u[i - 1] + u[i + 1] + u[i - w] + u[i + w]);
            const float vbar = 0.25f * (v[i - 1] + v[i + 1] + v[i - w] + v[i + w]);
            update(i, ubar, vbar);
          }
        }
      }
    }
  }
}

inline void require_finite(const FlowField& f) {
  for (std::size_t i = 0; i < f.u.size(); ++i)
    if (!std::isfinite(f.u[i]) || !std::isfinite(f.v[i]))
      throw NumericalError("optical flow produced a non-finite value");
}

}  // namespace detail

// Gaussian pyramid, finest level first.
inline std::vector<GrayFrame> build_pyramid(const GrayFrame& frame, const FlowParams& params) {
  validate(params);
  const int coarse_w = detail::scaled_extent(frame.width, params.downscale_factor,
                                             params.pyramid_levels - 1);
  const int coarse_h = detail::scaled_extent(frame.height, params.downscale_factor,
                                             params.pyramid_levels - 1);
  detail::require(coarse_w >= 8 && coarse_h >= 8,
                  "build_pyramid: frame too small for " +
                      std::to_string(params.pyramid_levels) + " levels (coarsest " +
                      std::to_string(coarse_w) + "x" + std::to_string(coarse_h) + ")");
  const double f = params.downscale_factor;
  const auto kernel = detail::gaussian_kernel(0.6 * std::sqrt(1.0 / (f * f) - 1.0));

  std::vector<GrayFrame> levels;
  levels.reserve(params.pyramid_levels);
  levels.push_back(frame);
  for (int k = 1; k < params.pyramid_levels; ++k) {
    const GrayFrame& prev = levels.back();
    const int w = detail::scaled_extent(frame.width, f, k);
    const int h = detail::scaled_extent(frame.height, f, k);
    const auto smooth = detail::blur(prev.luma, prev.width, prev.height, kernel);
    GrayFrame next(w, h, 0.0f, frame.index);
    next.luma = detail::resample(smooth, prev.width, prev.height, w, h);
    levels.push_back(std::move(next));
  }
  return levels;
}

inline GrayFrame warp(const GrayFrame& frame, const FlowField& flow) {
  detail::require(frame.width == flow.width && frame.height == flow.height,
                  "warp: frame and flow dimensions differ");
  GrayFrame out(frame.width, frame.height, 0.0f, frame.index);
  detail::warp_plane(frame.luma, frame.width, frame.height, flow.u, flow.v, out.luma);
  return out;
}

// Holds the reference pyramid so that many targets can be matched against
// the same first frame.
class FlowEstimator {
 public:
  FlowEstimator(const GrayFrame& reference, const FlowParams& params)
      : params_(params), ref_levels_(build_pyramid(reference, params)) {}

  const FlowParams& params() const noexcept { return params_; }
  int width() const noexcept { return ref_levels_.front().width; }
  int height() const noexcept { return ref_levels_.front().height; }

  // `init`, when given, is a full-resolution starting estimate: the target is
  // pre-warped by it and only the residual is solved coarse-to-fine.
  FlowField estimate(const GrayFrame& target, const FlowField* init = nullptr) const {
    detail::require(target.width == width() && target.height == height(),
                    "estimate_flow: reference and target dimensions differ");
    if (init) {
      detail::require(init->width == width() && init->height == height(),
                      "estimate_flow: initial flow dimensions differ");
      const GrayFrame stabilized = warp(target, *init);
      const FlowField residual = solve(stabilized);
      FlowField total(width(), height());
      for (int y = 0; y < height(); ++y)
        for (int x = 0; x < width(); ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * width() + x;
          const double px = x + residual.u[i];
          const double py = y + residual.v[i];
          total.u[i] = static_cast<float>(residual.u[i] + init->sample_u(px, py));
          total.v[i] = static_cast<float>(residual.v[i] + init->sample_v(px, py));
        }
      detail::require_finite(total);
      return total;
    }
    FlowField flow = solve(target);
    detail::require_finite(flow);
    return flow;
  }

 private:
  FlowField solve(const GrayFrame& target) const {
    const auto tgt_levels = build_pyramid(target, params_);
    const int coarsest = params_.pyramid_levels - 1;
    FlowField flow(ref_levels_[coarsest].width, ref_levels_[coarsest].height);
    for (int k = coarsest; k >= 0; --k) {
      const GrayFrame& r = ref_levels_[k];
      if (flow.width != r.width || flow.height != r.height)
        flow = detail::resample_flow(flow, r.width, r.height);
      detail::solve_level(r, tgt_levels[k], flow, params_);
    }
    return flow;
  }

  FlowParams params_;
  std::vector<GrayFrame> ref_levels_;
};

inline FlowField estimate_flow(const GrayFrame& reference, const GrayFrame& target,
                               const FlowParams& params) {
  detail::require(reference.width == target.width && reference.height == target.height,
                  "estimate_flow: reference and target dimensions differ");
  return FlowEstimator(reference, params).estimate(target);
}

}  // namespace vitaltrace
