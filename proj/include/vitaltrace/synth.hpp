#pragma once

// Synthetic scenes with known embedded rates: a textured "belly" patch that
// moves vertically, an optional "hand" patch oscillating horizontally on top
// of it, or a static "skin" region whose color is modulated. Every frame is
// a pure function of the spec and its index.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <ranges>
#include <string>
#include <string_view>
#include <vector>
#include <utility>

#include "vitaltrace/amtc.hpp"
#include "vitaltrace/error.hpp"
#include "vitaltrace/image.hpp"
#include "vitaltrace/media_io.hpp"
#include "vitaltrace/roi.hpp"

namespace vitaltrace {

enum class Scenario { BreathingMotion, PulseColor, PattingPlusBreath };

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::BreathingMotion: return "breathing-motion";
    case Scenario::PulseColor: return "pulse-color";
    case Scenario::PattingPlusBreath: return "patting-plus-breath";
  }
  return "breathing-motion";
}

inline Scenario parse_scenario(std::string_view s) {
  if (s == "breathing-motion") return Scenario::BreathingMotion;
  if (s == "pulse-color") return Scenario::PulseColor;
  if (s == "patting-plus-breath") return Scenario::PattingPlusBreath;
  throw SpecError("unknown scenario '" + std::string(s) + "'");
}

// Piecewise-linear rate schedule in bpm; constant before the first and
// after the last knot.
class FrequencySchedule {
 public:
  struct Knot {
    double time_s;
    double bpm;
    bool operator==(const Knot&) const = default;
  };

  FrequencySchedule() : knots_{{0.0, 25.0}} {}
  explicit FrequencySchedule(std::vector<Knot> knots) : knots_(std::move(knots)) {
    if (knots_.empty()) throw SpecError("frequency schedule needs at least one knot");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
      if (!(knots_[i].bpm > 0.0)) throw SpecError("frequency schedule rates must be > 0");
      if (i > 0 && !(knots_[i].time_s > knots_[i - 1].time_s))
        throw SpecError("frequency schedule knot times must increase");
    }
  }
  static FrequencySchedule constant(double bpm) { return FrequencySchedule({{0.0, bpm}}); }
  static FrequencySchedule ramp(double from_bpm, double to_bpm, double duration_s) {
    return FrequencySchedule({{0.0, from_bpm}, {duration_s, to_bpm}});
  }

  const std::vector<Knot>& knots() const noexcept { return knots_; }

  double bpm_at(double t) const {
    if (t <= knots_.front().time_s) return knots_.front().bpm;
    if (t >= knots_.back().time_s) return knots_.back().bpm;
    std::size_t i = 1;
    while (knots_[i].time_s < t) ++i;
    const Knot& a = knots_[i - 1];
    const Knot& b = knots_[i];
    return a.bpm + (b.bpm - a.bpm) * (t - a.time_s) / (b.time_s - a.time_s);
  }

  // Number of cycles elapsed in [0, t]: the integral of bpm / 60.
  double cycles(double t) const { return (integral(t) - integral(0.0)) / 60.0; }

  double min_bpm() const {
    return std::ranges::min(knots_, {}, &Knot::bpm).bpm;
  }
  double max_bpm() const {
    return std::ranges::max(knots_, {}, &Knot::bpm).bpm;
  }

  bool operator==(const FrequencySchedule&) const = default;

 private:
  // Antiderivative of bpm_at, anchored at the first knot.
  double integral(double t) const {
    const Knot& first = knots_.front();
    if (t <= first.time_s) return first.bpm * (t - first.time_s);
    double acc = 0.0;
    for (std::size_t i = 1; i < knots_.size(); ++i) {
      const Knot& a = knots_[i - 1];
      const Knot& b = knots_[i];
      const double end = std::min(t, b.time_s);
      const double fa = a.bpm;
      const double fe = a.bpm + (b.bpm - a.bpm) * (end - a.time_s) / (b.time_s - a.time_s);
      acc += 0.5 * (fa + fe) * (end - a.time_s);
      if (t <= b.time_s) return acc;
    }
    return acc + knots_.back().bpm * (t - knots_.back().time_s);
  }

  std::vector<Knot> knots_;
};

struct SynthSpec {
  Scenario scenario = Scenario::BreathingMotion;
  double duration_s = 60.0;
  double fps = 30.0;
  int width = 320;
  int height = 240;
  FrequencySchedule freq_trace_bpm;
  double amplitude = 2.0;        // px (motion) or gray levels (color)
  double drift_per_frame = 0.0;  // px or gray levels per frame
  double noise_sigma = 0.0;      // gray levels
  std::optional<double> interference_freq_bpm;
  double interference_amplitude = 0.0;  // px of horizontal hand motion
  std::uint64_t seed = 1;

  // Scene layout, frame-0 coordinates.
  RoiRect patch{90, 30, 140, 110};
  RoiRect hand{130, 60, 60, 50};
  double texture_contrast = 120.0;
  int texture_cell = 4;
  // Spectrogram window the video is meant for; the video must span two.
  double planned_window_s = 10.0;
  // Tracking band the schedule must stay inside, when known.
  std::optional<std::pair<double, double>> planned_band_bpm;

  std::size_t frame_count() const {
    return static_cast<std::size_t>(std::llround(duration_s * fps));
  }
};

struct SignalSynthSpec {
  FrequencySchedule freq_trace_bpm;
  double fs = 30.0;
  double duration_s = 60.0;
  double amplitude = 1.0;
  double drift = 0.0;  // per sample
  double noise_sigma = 0.0;
  std::optional<double> interference_freq_bpm;
  double interference_amplitude = 0.0;
  std::uint64_t seed = 1;
};

struct SynthSignal {
  RawSignal signal;
  FrequencyTrace truth;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Multi-octave value noise in [level - contrast/2, level + contrast/2].
inline std::vector<double> value_noise(int w, int h, int cell, double level, double contrast,
                                       std::uint64_t seed) {
  std::vector<double> img(static_cast<std::size_t>(w) * h, 0.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double weight = 1.0;
  for (int c = std::max(1, cell); c <= 4 * std::max(1, cell); c *= 2) {
    const int gw = w / c + 2;
    const int gh = h / c + 2;
    std::vector<double> grid(static_cast<std::size_t>(gw) * gh);
    for (auto& g : grid) g = uni(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img[static_cast<std::size_t>(y) * w + x] +=
            weight * sample_bilinear<double>(grid, gw, gh, static_cast<double>(x) / c,
                                             static_cast<double>(y) / c);
    weight *= 0.7;
  }
  const auto [lo, hi] = std::ranges::minmax(img);
  const double span = hi > lo ? hi - lo : 1.0;
  for (auto& v : img) v = level + contrast * ((v - lo) / span - 0.5);
  return img;
}

// Coverage of a w x h box whose top-left sits at (0, 0), sampled at local
// coordinates (lx, ly) with bilinear edges.
inline double box_coverage(int w, int h, double lx, double ly) {
  const auto axis = [](double p, int n) {
    if (p <= -1.0 || p >= n) return 0.0;
    if (p < 0.0) return 1.0 + p;
    if (p > n - 1) return n - p;
    return 1.0;
  };
  return axis(lx, w) * axis(ly, h);
}

inline std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace detail

// Deterministic renderer for one synthetic video plus its ground truth.
class SynthVideo {
 public:
  explicit SynthVideo(SynthSpec spec) : spec_(std::move(spec)) {
    check();
    const std::uint64_t s = spec_.seed;
    background_ = detail::value_noise(spec_.width, spec_.height, spec_.texture_cell, 110.0,
                                      spec_.texture_contrast, detail::mix_seed(s, 1));
    patch_ = detail::value_noise(spec_.patch.w, spec_.patch.h, spec_.texture_cell, 135.0,
                                 spec_.texture_contrast, detail::mix_seed(s, 2));
    if (spec_.scenario == Scenario::PattingPlusBreath)
      hand_ = detail::value_noise(spec_.hand.w, spec_.hand.h, spec_.texture_cell, 150.0,
                                  spec_.texture_contrast, detail::mix_seed(s, 3));
  }

  const SynthSpec& spec() const noexcept { return spec_; }
  std::size_t size() const { return spec_.frame_count(); }

  SequenceManifest manifest() const {
    return {spec_.fps, size(), spec_.width, spec_.height, "frame_%06d.ppm"};
  }

  double time_of(std::size_t i) const { return static_cast<double>(i) / spec_.fps; }

  double modulation(std::size_t i) const {
    return spec_.amplitude *
           std::sin(2.0 * std::numbers::pi * spec_.freq_trace_bpm.cycles(time_of(i)));
  }

  // Vertical patch displacement (px) or color modulation (gray levels).
  double displacement(std::size_t i) const {
    if (spec_.scenario == Scenario::PulseColor) return modulation(i);
    return modulation(i) + spec_.drift_per_frame * static_cast<double>(i);
  }

  double hand_offset(std::size_t i) const {
    if (!spec_.interference_freq_bpm) return 0.0;
    return spec_.interference_amplitude *
           std::sin(2.0 * std::numbers::pi * *spec_.interference_freq_bpm * time_of(i) / 60.0);
  }

  FrequencyTrace truth_trace() const {
    FrequencyTrace t;
    for (std::size_t i = 0; i < size(); ++i) {
      t.time_axis.push_back(time_of(i));
      t.freqs_bpm.push_back(spec_.freq_trace_bpm.bpm_at(time_of(i)));
    }
    return t;
  }

  RawSignal truth_signal() const {
    RawSignal s{{}, spec_.fps,
                spec_.scenario == Scenario::PulseColor ? SignalKind::ColorWeighted
                                                       : SignalKind::MotionVertical};
    for (std::size_t i = 0; i < size(); ++i) s.samples.push_back(displacement(i));
    return s;
  }

  Frame frame(std::size_t i) const {
    Frame f(spec_.width, spec_.height, i);
    std::mt19937_64 rng(detail::mix_seed(spec_.seed, 1000 + i));
    std::normal_distribution<double> noise(0.0, 1.0);
    const double sigma = spec_.noise_sigma;
    const bool pulse = spec_.scenario == Scenario::PulseColor;
    const double dy = pulse ? 0.0 : displacement(i);
    const double m = pulse ? modulation(i) : 0.0;
    const double light = pulse ? spec_.drift_per_frame * static_cast<double>(i) : 0.0;
    const double hx = hand_offset(i);
    const RoiRect& p = spec_.patch;
    const RoiRect& h = spec_.hand;

    for (int y = 0; y < spec_.height; ++y) {
      for (int x = 0; x < spec_.width; ++x) {
        const std::size_t k = static_cast<std::size_t>(y) * spec_.width + x;
        double r = background_[k], g = r, b = r;

        const double plx = x - p.x0;
        const double ply = y - p.y0 - dy;
        const double pa = detail::box_coverage(p.w, p.h, plx, ply);
        if (pa > 0.0) {
          const double v = detail::sample_bilinear<double>(patch_, p.w, p.h, plx, ply);
          if (pulse) {
            // Skin tint plus the pulse: full amplitude in green, half in red.
            r += pa * (v + 25.0 + 0.5 * m - r);
            g += pa * (v + m - g);
            b += pa * (v - 20.0 - b);
          } else {
            r += pa * (v - r);
            g += pa * (v - g);
            b += pa * (v - b);
          }
        }
        if (!hand_.empty()) {
          const double hlx = x - h.x0 - hx;
          const double hly = y - h.y0 - dy;
          const double ha = detail::box_coverage(h.w, h.h, hlx, hly);
          if (ha > 0.0) {
            const double v = detail::sample_bilinear<double>(hand_, h.w, h.h, hlx, hly);
            r += ha * (v - r);
            g += ha * (v - g);
            b += ha * (v - b);
          }
        }
        if (sigma > 0.0) {
          r += sigma * noise(rng);
          g += sigma * noise(rng);
          b += sigma * noise(rng);
        }
        f.red[k] = detail::quantize(r + light);
        f.green[k] = detail::quantize(g + light);
        f.blue[k] = detail::quantize(b + light);
      }
    }
    return f;
  }

  // Lazy view over all frames.
  auto frames() const {
    return std::views::iota(std::size_t{0}, size()) |
           std::views::transform([this](std::size_t i) { return frame(i); });
  }

 private:
  void check() const {
    const SynthSpec& s = spec_;
    if (!(s.fps > 0.0) || !(s.duration_s > 0.0)) throw SpecError("fps and duration must be > 0");
    if (s.width < 16 || s.height < 16) throw SpecError("frame must be at least 16x16");
    if (!(s.amplitude > 0.0)) throw SpecError("amplitude must be > 0");
    if (s.planned_band_bpm) {
      const auto [lo, hi] = *s.planned_band_bpm;
      if (s.freq_trace_bpm.min_bpm() < lo || s.freq_trace_bpm.max_bpm() > hi)
        throw SpecError("frequency schedule leaves the planned band");
    }
    if (!(s.noise_sigma >= 0.0)) throw SpecError("noise_sigma must be >= 0");
    if (!(s.texture_contrast >= 30.0)) throw SpecError("texture_contrast must be >= 30");
    const auto window = static_cast<std::size_t>(std::llround(s.planned_window_s * s.fps));
    if (s.frame_count() < 2 * window)
      throw SpecError("video must span at least two spectrogram windows (" +
                      std::to_string(2 * window) + " frames)");
    const auto inside = [&](const RoiRect& r, double ylo, double yhi, double xlo, double xhi) {
      return r.x0 + xlo >= 0.0 && r.x0 + r.w + xhi <= s.width - 1 && r.y0 + ylo >= 0.0 &&
             r.y0 + r.h + yhi <= s.height - 1;
    };
    if (s.scenario == Scenario::PulseColor) {
      if (!inside(s.patch, 0, 0, 0, 0)) throw SpecError("skin region leaves the frame");
      const double drift_lo = std::min(0.0, s.drift_per_frame * static_cast<double>(s.frame_count()));
      const double drift_hi = std::max(0.0, s.drift_per_frame * static_cast<double>(s.frame_count()));
      const double half = 0.5 * s.texture_contrast;
      // Darkest and brightest rendered values before noise: background at
      // 110 +- half, skin at 135 +- half with its tint and modulation.
      const double lo = std::min(110.0 - half, 135.0 - half - 20.0 - s.amplitude) + drift_lo;
      const double hi = std::max(110.0 + half, 135.0 + half + 25.0 + s.amplitude) + drift_hi;
      if (lo < 0.0 || hi > 255.0)
        throw SpecError("color modulation and illumination drift exceed channel head-room");
      return;
    }
    double ymin = 0.0, ymax = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      const double d = displacement(i);
      ymin = std::min(ymin, d);
      ymax = std::max(ymax, d);
    }
    if (!inside(s.patch, ymin, ymax, 0, 0)) throw SpecError("patch leaves the frame bounds");
    if (s.scenario == Scenario::PattingPlusBreath) {
      if (!s.interference_freq_bpm || !(*s.interference_freq_bpm > 0.0))
        throw SpecError("patting scenario needs interference_freq_bpm > 0");
      const double a = std::abs(s.interference_amplitude);
      if (!inside(s.hand, ymin, ymax, -a, a)) throw SpecError("hand patch leaves the frame bounds");
    }
  }

  SynthSpec spec_;
  std::vector<double> background_;
  std::vector<double> patch_;
  std::vector<double> hand_;
};

inline SynthVideo synth_breathing_video(const SynthSpec& spec) {
  if (spec.scenario == Scenario::PulseColor)
    throw SpecError("synth_breathing_video: scenario must be breathing-motion or patting-plus-breath");
  return SynthVideo(spec);
}

inline SynthVideo synth_pulse_video(const SynthSpec& spec) {
  if (spec.scenario != Scenario::PulseColor)
    throw SpecError("synth_pulse_video: scenario must be pulse-color");
  return SynthVideo(spec);
}

// amplitude * sin(phase) [+ interference tone] + drift * n + N(0, sigma^2).
inline SynthSignal synth_signal(const SignalSynthSpec& spec) {
  detail::require(spec.fs > 0.0, "synth_signal: fs must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.fs));
  std::mt19937_64 rng(detail::mix_seed(spec.seed, 7));
  std::normal_distribution<double> noise(0.0, 1.0);
  SynthSignal out;
  out.signal.fs = spec.fs;
  out.signal.kind = SignalKind::MotionVertical;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.fs;
    double v = spec.amplitude *
               std::sin(2.0 * std::numbers::pi * spec.freq_trace_bpm.cycles(t));
    if (spec.interference_freq_bpm)
      v += spec.interference_amplitude *
           std::sin(2.0 * std::numbers::pi * *spec.interference_freq_bpm * t / 60.0);
    v += spec.drift * static_cast<double>(i);
    if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise(rng);
    out.signal.samples.push_back(v);
    out.truth.time_axis.push_back(t);
    out.truth.freqs_bpm.push_back(spec.freq_trace_bpm.bpm_at(t));
  }
  return out;
}

}  // namespace vitaltrace
