#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <ranges>

#include "support.hpp"

using namespace vitaltrace;

namespace {

// Small oscillating-patch scene, cheap enough for unit tests.
SynthSpec small_scene(double bpm, double drift = 0.0) {
  SynthSpec s;
  s.width = 128;
  s.height = 96;
  s.duration_s = 12.0;
  s.planned_window_s = 4.0;
  s.patch = {24, 20, 80, 50};
  s.freq_trace_bpm = FrequencySchedule::constant(bpm);
  s.amplitude = 2.0;
  s.drift_per_frame = drift;
  s.seed = 3;
  return s;
}

std::vector<GrayFrame> gray_frames(const SynthVideo& v) {
  std::vector<GrayFrame> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(to_gray(v.frame(i)));
  return out;
}

double dominant_bpm(const std::vector<double>& x, double fs, double* amplitude = nullptr) {
  // Direct DFT scan on a fine grid; the signals here are short.
  const double mean = [&] {
    double m = 0.0;
    for (double v : x) m += v;
    return m / static_cast<double>(x.size());
  }();
  double best = 0.0, best_mag = -1.0;
  for (double bpm = 5.0; bpm <= 120.0; bpm += 0.05) {
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double ph = 2.0 * std::numbers::pi * bpm / 60.0 * static_cast<double>(n) / fs;
      re += (x[n] - mean) * std::cos(ph);
      im += (x[n] - mean) * std::sin(ph);
    }
    const double mag = std::hypot(re, im);
    if (mag > best_mag) {
      best_mag = mag;
      best = bpm;
    }
  }
  if (amplitude) *amplitude = 2.0 * best_mag / static_cast<double>(x.size());
  return best;
}

}  // namespace

TEST(MakeGrid, MinimalGrid) {
  const auto g = make_grid({0, 0, 10, 10}, 10.0 / 3.0);
  EXPECT_EQ(g.points.size(), 16u);
  EXPECT_DOUBLE_EQ(g.points.front().x, 0.0);
  EXPECT_DOUBLE_EQ(g.points.back().x, 10.0);
  EXPECT_DOUBLE_EQ(g.points.back().y, 10.0);
}

TEST(MakeGrid, TooFewPoints) { EXPECT_THROW(make_grid({0, 0, 30, 20}, 10.0), ContractError); }

TEST(MakeGrid, CountsAndRowMajor) {
  const auto g = make_grid({5, 7, 40, 40}, 5.0);
  ASSERT_EQ(g.points.size(), 81u);
  for (const auto& p : g.points) {
    EXPECT_GE(p.x, 5.0);
    EXPECT_LE(p.x, 45.0);
    EXPECT_GE(p.y, 7.0);
    EXPECT_LE(p.y, 47.0);
  }
  EXPECT_DOUBLE_EQ(g.points[1].x, 10.0);
  EXPECT_DOUBLE_EQ(g.points[1].y, 7.0);
  EXPECT_DOUBLE_EQ(g.points[9].y, 12.0);
}

TEST(MakeGrid, RejectsBadSpacing) { EXPECT_THROW(make_grid({0, 0, 40, 40}, 0.5), ContractError); }

TEST(RoiRect, Validation) {
  EXPECT_NO_THROW(validate(RoiRect{0, 0, 8, 8}, 16, 16));
  EXPECT_THROW(validate(RoiRect{0, 0, 7, 8}, 16, 16), ContractError);
  EXPECT_THROW(validate(RoiRect{10, 0, 8, 8}, 16, 16), ContractError);
  EXPECT_THROW(validate(RoiRect{-1, 0, 8, 8}, 16, 16), ContractError);
}

TEST(TrackGrid, ZeroAndUniformFlow) {
  const auto g = make_grid({10, 10, 20, 20}, 5.0);
  const auto same = track_grid(g, FlowField(64, 64));
  for (std::size_t i = 0; i < g.points.size(); ++i) EXPECT_EQ(same.grid.points[i], g.points[i]);
  EXPECT_EQ(same.flagged_count, 0u);

  const auto down = track_grid(g, FlowField::constant(64, 64, 0.0f, 2.0f));
  for (std::size_t i = 0; i < g.points.size(); ++i) {
    EXPECT_DOUBLE_EQ(down.grid.points[i].x, g.points[i].x);
    EXPECT_DOUBLE_EQ(down.grid.points[i].y, g.points[i].y + 2.0);
  }
}

TEST(TrackGrid, PositionsAreNotAccumulated) {
  auto g = make_grid({10, 10, 20, 20}, 5.0);
  const auto flow = FlowField::constant(64, 64, 1.0f, 0.0f);
  const auto once = track_grid(g, flow);
  const auto again = track_grid(once.grid, flow);
  EXPECT_EQ(once.grid.points, again.grid.points);
}

TEST(TrackGrid, OutOfFrameClampedAndFlagged) {
  const auto g = make_grid({40, 10, 20, 20}, 5.0);
  const auto t = track_grid(g, FlowField::constant(64, 64, 10.0f, 0.0f));
  EXPECT_GT(t.flagged_count, 0u);
  EXPECT_TRUE(t.degraded);
  for (const auto& p : t.grid.points) EXPECT_LE(p.x, 63.0);
  const auto mild = track_grid(g, FlowField::constant(64, 64, 3.5f, 0.0f));
  EXPECT_LE(static_cast<double>(mild.flagged_count), 0.2 * g.points.size());
  EXPECT_FALSE(mild.degraded);
}

TEST(ExtractMotion, StaticSceneIsZero) {
  const auto frame = vt_test::PeriodicTexture(96, 80, 2).render();
  const std::vector<GrayFrame> frames(5, frame);
  const auto s = extract_motion_signal(frames, make_grid({20, 20, 40, 30}, 4.0), FlowParams{}, 30.0);
  ASSERT_EQ(s.samples.size(), 5u);
  EXPECT_EQ(s.samples[0], 0.0);
  for (double v : s.samples) EXPECT_LE(std::abs(v), 0.05);
  EXPECT_EQ(s.kind, SignalKind::MotionVertical);
  EXPECT_EQ(s.fs, 30.0);
}

TEST(ExtractMotion, NeedsTwoFrames) {
  const std::vector<GrayFrame> one(1, GrayFrame(64, 64, 0.5f));
  EXPECT_THROW(extract_motion_signal(one, make_grid({8, 8, 20, 20}, 4.0), FlowParams{}, 30.0),
               ContractError);
}

TEST(ExtractMotion, OscillatingPatch) {
  const SynthVideo video(small_scene(25.0));
  const auto frames = gray_frames(video);
  const auto grid = make_grid({44, 30, 40, 30}, 4.0);
  const auto s = extract_motion_signal(frames, grid, FlowParams{}, 30.0);
  double amp = 0.0;
  EXPECT_NEAR(dominant_bpm(s.samples, 30.0, &amp), 25.0, 60.0 / 12.0);
  EXPECT_NEAR(amp, 2.0, 0.3);
  // Tracked grid centroid follows the patch.
  double worst = 0.0;
  for (std::size_t i = 0; i < video.size(); ++i)
    worst = std::max(worst, std::abs(s.samples[i] - video.displacement(i)));
  EXPECT_LE(worst, 0.3);
}

TEST(ExtractMotion, DriftPlusOscillation) {
  const SynthVideo video(small_scene(25.0, 0.05));
  const auto s = extract_motion_signal(gray_frames(video), make_grid({44, 30, 40, 30}, 4.0),
                                       FlowParams{}, 30.0);
  // Tracking error accumulates with the drift, so the bound grows with it.
  for (std::size_t i = 0; i < video.size(); i += 30)
    EXPECT_NEAR(s.samples[i], video.displacement(i), 0.3 + 0.06 * video.displacement(i)) << i;
}

TEST(ExtractMotion, RigidTranslationDetrendsFlat) {
  const vt_test::PeriodicTexture tex(96, 80, 12);
  std::vector<GrayFrame> frames;
  for (int i = 0; i < 90; ++i) frames.push_back(tex.render(0.0, 0.02 * i));
  const auto s = extract_motion_signal(frames, make_grid({24, 24, 40, 30}, 4.0), FlowParams{}, 30.0);
  const auto d = detrend(s.samples, 30.0, 2.0);
  double m = 0.0, v = 0.0;
  for (double x : d) m += x;
  m /= d.size();
  for (double x : d) v += (x - m) * (x - m);
  EXPECT_LE(std::sqrt(v / d.size()), 0.1);
}

TEST(ExtractColor, ConstantGray) {
  Frame f(32, 32);
  std::fill(f.red.begin(), f.red.end(), 128);
  std::fill(f.green.begin(), f.green.end(), 128);
  std::fill(f.blue.begin(), f.blue.end(), 128);
  const std::vector<Frame> frames(3, f);
  const auto grid = make_grid({4, 4, 20, 20}, 4.0);
  const auto s = extract_color_signal(frames, grid, {1.0, 1.0, 1.0}, FlowParams{.pyramid_levels = 2}, 30.0);
  for (double v : s.samples) EXPECT_DOUBLE_EQ(v, 384.0);
  EXPECT_EQ(s.kind, SignalKind::ColorWeighted);
  const auto z = extract_color_signal(frames, grid, {0.0, 0.0, 0.0}, FlowParams{.pyramid_levels = 2}, 30.0);
  for (double v : z.samples) EXPECT_EQ(v, 0.0);
}

TEST(ExtractColor, ChannelSumIdentityAndPulse) {
  SynthSpec spec = small_scene(75.0);
  spec.scenario = Scenario::PulseColor;
  spec.amplitude = 1.5;
  const SynthVideo video(spec);
  std::vector<Frame> frames;
  for (std::size_t i = 0; i < video.size(); ++i) frames.push_back(video.frame(i));
  const auto grid = make_grid({40, 30, 40, 30}, 4.0);
  const FlowParams p;
  const auto all = extract_color_signal(frames, grid, {1, 1, 1}, p, 30.0);
  const auto r = extract_color_signal(frames, grid, {1, 0, 0}, p, 30.0);
  const auto g = extract_color_signal(frames, grid, {0, 1, 0}, p, 30.0);
  const auto b = extract_color_signal(frames, grid, {0, 0, 1}, p, 30.0);
  for (std::size_t i = 0; i < all.samples.size(); ++i)
    EXPECT_NEAR(all.samples[i], r.samples[i] + g.samples[i] + b.samples[i], 1e-9);

  // Flow reads part of the brightness change as motion, and the tracked points
  // then follow the texture against it, so the recovered tone is attenuated.
  double amp = 0.0;
  EXPECT_NEAR(dominant_bpm(g.samples, 30.0, &amp), 75.0, 60.0 / 12.0);
  EXPECT_GT(amp, 0.3);
  EXPECT_LT(amp, 1.6);
}

TEST(ExtractSignals, SharedPassMatchesSingle) {
  const SynthVideo video(small_scene(30.0));
  const auto frames = gray_frames(video);
  const std::vector<RoiGrid> grids{make_grid({30, 25, 30, 30}, 4.0), make_grid({60, 30, 36, 30}, 4.0)};
  ExtractOptions opts;
  const auto both = extract_signals(frames, grids, opts);
  ASSERT_EQ(both.signals.size(), 2u);
  EXPECT_EQ(both.signals[1], extract_motion_signal(frames, grids[1], FlowParams{}, 30.0));
}

TEST(SignalKindNames, RoundTrip) {
  EXPECT_EQ(parse_signal_kind(to_string(SignalKind::ColorWeighted)), SignalKind::ColorWeighted);
  EXPECT_EQ(parse_motion_axis("xy"), MotionAxis::XY);
  EXPECT_THROW(parse_signal_kind("thermal"), ContractError);
}
