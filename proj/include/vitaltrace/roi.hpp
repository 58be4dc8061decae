#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <ranges>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "vitaltrace/error.hpp"
#include "vitaltrace/flow.hpp"
#include "vitaltrace/image.hpp"
#include "vitaltrace/media_io.hpp"

namespace vitaltrace {

// Rectangle in first-frame pixel coordinates. The lattice built on it spans
// the closed extent [x0, x0 + w] x [y0, y0 + h].
struct RoiRect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  bool operator==(const RoiRect&) const = default;
};

inline void validate(const RoiRect& r, int frame_width, int frame_height) {
  detail::require(r.w >= 8 && r.h >= 8, "RoiRect: w and h must be >= 8");
  detail::require(r.x0 >= 0 && r.y0 >= 0 && r.x0 + r.w <= frame_width - 1 &&
                      r.y0 + r.h <= frame_height - 1,
                  "RoiRect " + std::to_string(r.x0) + "," + std::to_string(r.y0) + "," +
                      std::to_string(r.w) + "," + std::to_string(r.h) +
                      " does not fit inside a " + std::to_string(frame_width) + "x" +
                      std::to_string(frame_height) + " frame");
}

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

struct RoiGrid {
  std::vector<Point> points;
  RoiRect origin_rect;
  double spacing = 1.0;
};

inline constexpr std::size_t kMinGridPoints = 16;

namespace detail {

inline std::vector<Point> lattice(const RoiRect& rect, double spacing) {
  // Tolerate representation error when w is a multiple of spacing.
  const int nx = static_cast<int>(std::floor(rect.w / spacing + 1e-9)) + 1;
  const int ny = static_cast<int>(std::floor(rect.h / spacing + 1e-9)) + 1;
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) pts.push_back({rect.x0 + i * spacing, rect.y0 + j * spacing});
  return pts;
}

}  // namespace detail

inline RoiGrid make_grid(const RoiRect& rect, double spacing) {
  detail::require(spacing >= 1.0, "make_grid: spacing must be >= 1");
  detail::require(rect.w > 0 && rect.h > 0, "make_grid: empty rectangle");
  auto pts = detail::lattice(rect, spacing);
  detail::require(pts.size() >= kMinGridPoints,
                  "make_grid: lattice has " + std::to_string(pts.size()) +
                      " points, at least 16 required");
  return {std::move(pts), rect, spacing};
}

struct TrackedGrid {
  RoiGrid grid;
  std::vector<bool> flagged;  // point was clamped to the frame
  std::size_t flagged_count = 0;
  bool degraded = false;      // more than 20% of points flagged
};

// Positions are the frame-0 lattice displaced by the flow relative to
// frame 0, never integrated across frames.
inline TrackedGrid track_grid(const RoiGrid& grid, const FlowField& flow) {
  TrackedGrid out;
  out.grid.origin_rect = grid.origin_rect;
  out.grid.spacing = grid.spacing;
  const auto base = detail::lattice(grid.origin_rect, grid.spacing);
  out.grid.points.reserve(base.size());
  out.flagged.reserve(base.size());
  const double xmax = flow.width - 1;
  const double ymax = flow.height - 1;
  for (const Point& p : base) {
    detail::require(p.x >= 0 && p.y >= 0 && p.x <= xmax && p.y <= ymax,
                    "track_grid: grid point outside flow bounds");
    Point q{p.x + flow.sample_u(p.x, p.y), p.y + flow.sample_v(p.x, p.y)};
    const bool outside = q.x < 0 || q.y < 0 || q.x > xmax || q.y > ymax;
    if (outside) {
      q.x = std::clamp(q.x, 0.0, xmax);
      q.y = std::clamp(q.y, 0.0, ymax);
      ++out.flagged_count;
    }
    out.flagged.push_back(outside);
    out.grid.points.push_back(q);
  }
  out.degraded = out.flagged_count * 5 > base.size();
  return out;
}

enum class SignalKind { MotionVertical, ColorWeighted };

// Component of the displacement that forms a motion signal. `XY` sums both
// components and is meant for scenes with horizontal and vertical periodic
// motion in the same region.
enum class MotionAxis { X, Y, XY };

inline std::string to_string(SignalKind k) {
  return k == SignalKind::MotionVertical ? "motion-vertical" : "color-weighted";
}

inline SignalKind parse_signal_kind(std::string_view s) {
  if (s == "motion-vertical" || s == "motion") return SignalKind::MotionVertical;
  if (s == "color-weighted" || s == "color") return SignalKind::ColorWeighted;
  throw ContractError("unknown signal kind '" + std::string(s) + "'");
}

inline std::string to_string(MotionAxis a) {
  switch (a) {
    case MotionAxis::X: return "x";
    case MotionAxis::Y: return "y";
    case MotionAxis::XY: return "xy";
  }
  return "y";
}

inline MotionAxis parse_motion_axis(std::string_view s) {
  if (s == "x") return MotionAxis::X;
  if (s == "y") return MotionAxis::Y;
  if (s == "xy") return MotionAxis::XY;
  throw ContractError("unknown motion axis '" + std::string(s) + "'");
}

struct RawSignal {
  std::vector<double> samples;
  double fs = 0.0;
  SignalKind kind = SignalKind::MotionVertical;

  bool operator==(const RawSignal&) const = default;
};

struct ExtractOptions {
  SignalKind kind = SignalKind::MotionVertical;
  MotionAxis axis = MotionAxis::Y;
  std::array<double, 3> weights{1.0, 1.0, 1.0};
  FlowParams flow;
  double fs = 30.0;
};

struct ExtractResult {
  std::vector<RawSignal> signals;  // one per grid
  std::vector<std::string> warnings;
};

// Called with (frame index, flow relative to frame 0) for every frame.
using FlowObserver = std::function<void(std::size_t, const FlowField&)>;

namespace detail {

inline double motion_sample(const RoiGrid& origin, const TrackedGrid& tracked,
                            MotionAxis axis) {
  const auto base = lattice(origin.origin_rect, origin.spacing);
  double sum = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double dx = tracked.grid.points[i].x - base[i].x;
    const double dy = tracked.grid.points[i].y - base[i].y;
    sum += axis == MotionAxis::X ? dx : axis == MotionAxis::Y ? dy : dx + dy;
  }
  return sum / static_cast<double>(base.size());
}

inline double color_sample(const Frame& frame, const TrackedGrid& tracked,
                           const std::array<double, 3>& w) {
  double r = 0.0, g = 0.0, b = 0.0;
  for (const Point& p : tracked.grid.points) {
    r += sample_bilinear<std::uint8_t>(frame.red, frame.width, frame.height, p.x, p.y);
    g += sample_bilinear<std::uint8_t>(frame.green, frame.width, frame.height, p.x, p.y);
    b += sample_bilinear<std::uint8_t>(frame.blue, frame.width, frame.height, p.x, p.y);
  }
  const auto n = static_cast<double>(tracked.grid.points.size());
  return w[0] * (r / n) + w[1] * (g / n) + w[2] * (b / n);
}

template <typename F>
const GrayFrame& as_gray(const F& frame, GrayFrame& scratch) {
  if constexpr (std::is_same_v<std::remove_cvref_t<F>, GrayFrame>) {
    return frame;
  } else {
    scratch = to_gray(frame);
    return scratch;
  }
}

}  // namespace detail

// Single pass over a frame sequence producing one raw signal per grid. All
// grids share the per-frame flow against the first frame. Accepts ranges of
// Frame, or of GrayFrame for motion signals.
template <std::ranges::input_range Frames>
ExtractResult extract_signals(Frames&& frames, std::span<const RoiGrid> grids,
                              const ExtractOptions& opts, const FlowObserver& observer = {}) {
  using FrameT = std::remove_cvref_t<std::ranges::range_reference_t<Frames>>;
  static_assert(std::is_same_v<FrameT, Frame> || std::is_same_v<FrameT, GrayFrame>,
                "extract_signals expects a range of Frame or GrayFrame");
  validate(opts.flow);
  detail::require(opts.fs > 0.0, "extract_signals: fs must be > 0");
  detail::require(!grids.empty(), "extract_signals: no grids");
  if (opts.kind == SignalKind::ColorWeighted) {
    if constexpr (!std::is_same_v<FrameT, Frame>)
      throw ContractError("extract_signals: color signals need RGB frames");
    for (double w : opts.weights)
      detail::require(std::isfinite(w), "extract_signals: weights must be finite");
  }

  ExtractResult result;
  result.signals.assign(grids.size(), RawSignal{{}, opts.fs, opts.kind});
  std::vector<std::size_t> degraded_frames(grids.size(), 0);

  std::optional<FlowEstimator> estimator;
  FlowField previous;
  GrayFrame scratch;
  std::size_t t = 0;
  for (const auto& frame : frames) {
    const GrayFrame& gray = detail::as_gray(frame, scratch);
    FlowField flow;
    if (t == 0) {
      estimator.emplace(gray, opts.flow);
      flow = FlowField(gray.width, gray.height);
    } else {
      const bool seed = opts.flow.warm_start && t > 1;
      flow = estimator->estimate(gray, seed ? &previous : nullptr);
    }
    if (observer) observer(t, flow);

    for (std::size_t g = 0; g < grids.size(); ++g) {
      const TrackedGrid tracked = track_grid(grids[g], flow);
      if (tracked.degraded) ++degraded_frames[g];
      double sample = 0.0;
      if (opts.kind == SignalKind::MotionVertical) {
        sample = t == 0 ? 0.0 : detail::motion_sample(grids[g], tracked, opts.axis);
      } else if constexpr (std::is_same_v<FrameT, Frame>) {
        sample = detail::color_sample(frame, tracked, opts.weights);
      }
      result.signals[g].samples.push_back(sample);
    }
    previous = std::move(flow);
    ++t;
  }
  detail::require(t >= 2, "extract_signals: need at least 2 frames");
  for (std::size_t g = 0; g < grids.size(); ++g)
    if (degraded_frames[g] > 0)
      result.warnings.push_back("roi " + std::to_string(g + 1) +
                                ": tracking degraded (>20% of points left the frame) in " +
                                std::to_string(degraded_frames[g]) + " frames");
  return result;
}

template <std::ranges::input_range Frames>
RawSignal extract_motion_signal(Frames&& frames, const RoiGrid& grid, const FlowParams& params,
                                double fs, MotionAxis axis = MotionAxis::Y) {
  ExtractOptions opts;
  opts.kind = SignalKind::MotionVertical;
  opts.axis = axis;
  opts.flow = params;
  opts.fs = fs;
  return extract_signals(std::forward<Frames>(frames), std::span(&grid, 1), opts)
      .signals.front();
}

template <std::ranges::input_range Frames>
RawSignal extract_color_signal(Frames&& frames, const RoiGrid& grid,
                               const std::array<double, 3>& weights, const FlowParams& params,
                               double fs) {
  ExtractOptions opts;
  opts.kind = SignalKind::ColorWeighted;
  opts.weights = weights;
  opts.flow = params;
  opts.fs = fs;
  return extract_signals(std::forward<Frames>(frames), std::span(&grid, 1), opts)
      .signals.front();
}

}  // namespace vitaltrace
