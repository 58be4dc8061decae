#pragma once

// TOML configuration for the pipeline and the synthetic scene generator.
// Relative paths are resolved against the directory holding the config file.
//
//   [input]    manifest
//   [output]   dir
//   [roi]      rects = ["x0,y0,w,h", ...] (or integer arrays), spacing
//   [signal]   kind, axis, weights
//   [flow] [refine] [spectral] [amtc] [eval] [synth]

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <toml.hpp>

#include "vitaltrace/amtc.hpp"
#include "vitaltrace/error.hpp"
#include "vitaltrace/flow.hpp"
#include "vitaltrace/refine.hpp"
#include "vitaltrace/roi.hpp"
#include "vitaltrace/spectral.hpp"
#include "vitaltrace/synth.hpp"

namespace vitaltrace {

enum class TrackMode { Offline, Online };

inline std::string to_string(TrackMode m) { return m == TrackMode::Offline ? "offline" : "online"; }

inline TrackMode parse_track_mode(std::string_view s) {
  if (s == "offline") return TrackMode::Offline;
  if (s == "online") return TrackMode::Online;
  throw ContractError("unknown tracking mode '" + std::string(s) + "'");
}

inline constexpr std::size_t kMaxRois = 3;

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir = "out";

  std::vector<RoiRect> rois;
  double grid_spacing = 4.0;

  SignalKind kind = SignalKind::MotionVertical;
  MotionAxis axis = MotionAxis::Y;
  std::array<double, 3> weights{1.0, 1.0, 1.0};

  FlowParams flow;
  RefineParams refine;
  SpectrogramParams spectral;
  AmtcParams amtc;
  TrackMode track_mode = TrackMode::Offline;

  std::optional<std::filesystem::path> reference;
  double max_lag_s = 0.0;

  bool dump_flow = false;

  std::optional<SynthSpec> synth;
};

// Parameter-level checks; paths are checked separately because a config
// that only describes a synthetic scene has no input yet.
inline void validate(const PipelineConfig& c) {
  detail::require(!c.rois.empty() && c.rois.size() <= kMaxRois,
                  "config: need 1 to 3 ROI rectangles, got " + std::to_string(c.rois.size()));
  detail::require(c.grid_spacing >= 1.0, "config: roi.spacing must be >= 1");
  validate(c.flow);
  validate(c.refine);
  validate(c.amtc);
  detail::require(c.max_lag_s >= 0.0, "config: eval.max_lag_s must be >= 0");
}

inline void check_paths(const PipelineConfig& c) {
  if (!std::filesystem::exists(c.manifest))
    throw DataError("manifest not found: " + c.manifest.string());
  if (c.reference && !std::filesystem::exists(*c.reference))
    throw DataError("reference not found: " + c.reference->string());
}

inline RoiRect parse_rect(std::string_view text) {
  std::array<int, 4> v{};
  std::size_t pos = 0;
  for (int k = 0; k < 4; ++k) {
    const auto comma = text.find(',', pos);
    const auto field = text.substr(pos, comma == std::string_view::npos ? comma : comma - pos);
    try {
      std::size_t used = 0;
      v[k] = std::stoi(std::string(field), &used);
      if (used != field.size() && field.find_first_not_of(' ', used) != std::string_view::npos)
        throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("ROI '" + std::string(text) + "' is not x0,y0,w,h");
    }
    if ((k < 3) == (comma == std::string_view::npos))
      throw ConfigError("ROI '" + std::string(text) + "' is not x0,y0,w,h");
    pos = comma + 1;
  }
  return {v[0], v[1], v[2], v[3]};
}

namespace detail {

class TomlReader {
 public:
  TomlReader(const toml::table& root, std::filesystem::path base)
      : root_(root), base_(std::move(base)) {}

  const toml::table* section(std::string_view name) {
    const auto* node = root_.get(name);
    if (!node) return nullptr;
    const auto* t = node->as_table();
    if (!t) throw ConfigError("config: [" + std::string(name) + "] must be a table");
    return t;
  }

  template <typename T>
  void get(const toml::table* t, std::string_view section, std::string_view key, T& out) {
    if (!t) return;
    const auto* node = t->get(key);
    if (!node) return;
    const std::string where = std::string(section) + "." + std::string(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (auto v = node->value<bool>()) return void(out = *v);
    } else if constexpr (std::is_integral_v<T>) {
      if (auto v = node->value<std::int64_t>()) {
        if constexpr (std::is_unsigned_v<T>)
          if (*v < 0) throw ConfigError("config: " + where + " must be >= 0");
        return void(out = static_cast<T>(*v));
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (auto v = node->value<double>()) return void(out = *v);
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (auto v = node->value<std::string>()) return void(out = *v);
    }
    throw ConfigError("config: " + where + " has the wrong type");
  }

  std::optional<std::string> string(const toml::table* t, std::string_view section,
                                    std::string_view key) {
    if (!t || !t->contains(key)) return std::nullopt;
    std::string s;
    get(t, section, key, s);
    return s;
  }

  std::filesystem::path path(const std::string& s) const {
    std::filesystem::path p(s);
    return p.is_absolute() ? p : base_ / p;
  }

  std::vector<double> numbers(const toml::table* t, std::string_view section,
                              std::string_view key) {
    std::vector<double> out;
    if (!t || !t->contains(key)) return out;
    const auto* arr = t->get(key)->as_array();
    const std::string where = std::string(section) + "." + std::string(key);
    if (!arr) throw ConfigError("config: " + where + " must be an array of numbers");
    for (const auto& n : *arr) {
      auto v = n.value<double>();
      if (!v) throw ConfigError("config: " + where + " must be an array of numbers");
      out.push_back(*v);
    }
    return out;
  }

  void reject_unknown(const toml::table* t, std::string_view section,
                      std::initializer_list<std::string_view> known) {
    if (!t) return;
    const std::set<std::string_view> allowed(known);
    for (const auto& [k, v] : *t)
      if (!allowed.count(k.str()))
        throw ConfigError("config: unknown key " + std::string(section) + "." +
                          std::string(k.str()));
  }

 private:
  const toml::table& root_;
  std::filesystem::path base_;
};

inline RoiRect rect_from_node(const toml::node& n, std::string_view where) {
  if (auto s = n.value<std::string>()) return parse_rect(*s);
  if (const auto* arr = n.as_array(); arr && arr->size() == 4) {
    std::array<int, 4> v{};
    for (std::size_t k = 0; k < 4; ++k) {
      auto x = (*arr)[k].value<std::int64_t>();
      if (!x) throw ConfigError("config: " + std::string(where) + " entries must be integers");
      v[k] = static_cast<int>(*x);
    }
    return {v[0], v[1], v[2], v[3]};
  }
  throw ConfigError("config: " + std::string(where) + " must be \"x0,y0,w,h\" or [x0,y0,w,h]");
}

inline SynthSpec synth_from_toml(TomlReader& r, const toml::table* t) {
  SynthSpec s;
  r.reject_unknown(t, "synth",
                   {"scenario", "duration_s", "fps", "width", "height", "freq_bpm", "freq_knots",
                    "amplitude", "drift_per_frame", "noise_sigma", "interference_freq_bpm",
                    "interference_amplitude", "seed", "patch", "hand", "texture_contrast",
                    "texture_cell", "planned_window_s", "planned_band_bpm"});
  if (auto sc = r.string(t, "synth", "scenario")) s.scenario = parse_scenario(*sc);
  r.get(t, "synth", "duration_s", s.duration_s);
  r.get(t, "synth", "fps", s.fps);
  r.get(t, "synth", "width", s.width);
  r.get(t, "synth", "height", s.height);
  r.get(t, "synth", "amplitude", s.amplitude);
  r.get(t, "synth", "drift_per_frame", s.drift_per_frame);
  r.get(t, "synth", "noise_sigma", s.noise_sigma);
  r.get(t, "synth", "interference_amplitude", s.interference_amplitude);
  r.get(t, "synth", "seed", s.seed);
  r.get(t, "synth", "texture_contrast", s.texture_contrast);
  r.get(t, "synth", "texture_cell", s.texture_cell);
  r.get(t, "synth", "planned_window_s", s.planned_window_s);
  if (t && t->contains("interference_freq_bpm")) {
    double f = 0.0;
    r.get(t, "synth", "interference_freq_bpm", f);
    s.interference_freq_bpm = f;
  }
  if (const auto band = r.numbers(t, "synth", "planned_band_bpm"); !band.empty()) {
    if (band.size() != 2) throw ConfigError("config: synth.planned_band_bpm must hold 2 numbers");
    s.planned_band_bpm = std::pair{band[0], band[1]};
  }
  if (t && t->contains("patch")) s.patch = rect_from_node(*t->get("patch"), "synth.patch");
  if (t && t->contains("hand")) s.hand = rect_from_node(*t->get("hand"), "synth.hand");

  // freq_bpm = [start, end] ramps over the duration; freq_knots gives
  // explicit [time_s, bpm] pairs.
  const auto freq = r.numbers(t, "synth", "freq_bpm");
  if (t && t->contains("freq_knots")) {
    const auto* arr = t->get("freq_knots")->as_array();
    if (!arr) throw ConfigError("config: synth.freq_knots must be an array of [time_s, bpm]");
    std::vector<FrequencySchedule::Knot> knots;
    for (const auto& n : *arr) {
      const auto* pair = n.as_array();
      if (!pair || pair->size() != 2 || !(*pair)[0].value<double>() || !(*pair)[1].value<double>())
        throw ConfigError("config: synth.freq_knots must be an array of [time_s, bpm]");
      knots.push_back({*(*pair)[0].value<double>(), *(*pair)[1].value<double>()});
    }
    s.freq_trace_bpm = FrequencySchedule(std::move(knots));
  } else if (freq.size() == 1) {
    s.freq_trace_bpm = FrequencySchedule::constant(freq[0]);
  } else if (freq.size() == 2) {
    s.freq_trace_bpm = FrequencySchedule::ramp(freq[0], freq[1], s.duration_s);
  } else {
    throw ConfigError("config: synth.freq_bpm must hold 1 or 2 values (or use freq_knots)");
  }
  return s;
}

}  // namespace detail

inline PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                                   std::string_view source = "config") {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
        << e.description();
    throw ConfigError(msg.str());
  }

  for (const auto& [k, v] : root) {
    static const std::set<std::string_view> sections{
        "input", "output", "roi", "signal", "flow", "refine", "spectral", "amtc", "eval", "synth"};
    if (!sections.count(k.str()))
      throw ConfigError("config: unknown section [" + std::string(k.str()) + "]");
  }

  detail::TomlReader r(root, base_dir);
  PipelineConfig c;

  const auto* input = r.section("input");
  r.reject_unknown(input, "input", {"manifest"});
  if (auto m = r.string(input, "input", "manifest")) c.manifest = r.path(*m);

  const auto* output = r.section("output");
  r.reject_unknown(output, "output", {"dir", "dump_flow"});
  c.output_dir = r.path(r.string(output, "output", "dir").value_or("out"));
  r.get(output, "output", "dump_flow", c.dump_flow);

  const auto* roi = r.section("roi");
  r.reject_unknown(roi, "roi", {"rects", "spacing"});
  r.get(roi, "roi", "spacing", c.grid_spacing);
  if (roi && roi->contains("rects")) {
    const auto* arr = roi->get("rects")->as_array();
    if (!arr) throw ConfigError("config: roi.rects must be an array");
    for (const auto& n : *arr) c.rois.push_back(detail::rect_from_node(n, "roi.rects"));
  }

  const auto* signal = r.section("signal");
  r.reject_unknown(signal, "signal", {"kind", "axis", "weights"});
  try {
    if (auto k = r.string(signal, "signal", "kind")) c.kind = parse_signal_kind(*k);
    if (auto a = r.string(signal, "signal", "axis")) c.axis = parse_motion_axis(*a);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (const auto w = r.numbers(signal, "signal", "weights"); !w.empty()) {
    if (w.size() != 3) throw ConfigError("config: signal.weights must hold 3 numbers");
    c.weights = {w[0], w[1], w[2]};
  }

  const auto* flow = r.section("flow");
  r.reject_unknown(flow, "flow",
                   {"pyramid_levels", "downscale_factor", "smoothness_weight",
                    "iterations_per_level", "warps_per_level", "warm_start"});
  r.get(flow, "flow", "pyramid_levels", c.flow.pyramid_levels);
  r.get(flow, "flow", "downscale_factor", c.flow.downscale_factor);
  r.get(flow, "flow", "smoothness_weight", c.flow.smoothness_weight);
  r.get(flow, "flow", "iterations_per_level", c.flow.iterations_per_level);
  r.get(flow, "flow", "warps_per_level", c.flow.warps_per_level);
  r.get(flow, "flow", "warm_start", c.flow.warm_start);

  const auto* refine = r.section("refine");
  r.reject_unknown(refine, "refine",
                   {"detrend", "detrend_window_s", "clip", "clip_limit", "standardize",
                    "std_window_s", "zero_variance_epsilon"});
  r.get(refine, "refine", "detrend", c.refine.detrend);
  r.get(refine, "refine", "detrend_window_s", c.refine.detrend_window_s);
  r.get(refine, "refine", "clip", c.refine.clip);
  r.get(refine, "refine", "clip_limit", c.refine.clip_limit);
  r.get(refine, "refine", "standardize", c.refine.standardize);
  r.get(refine, "refine", "std_window_s", c.refine.std_window_s);
  r.get(refine, "refine", "zero_variance_epsilon", c.refine.zero_variance_epsilon);

  const auto* spectral = r.section("spectral");
  r.reject_unknown(spectral, "spectral",
                   {"window_s", "overlap_fraction", "fft_points", "band_lo_bpm", "band_hi_bpm",
                    "window_function"});
  r.get(spectral, "spectral", "window_s", c.spectral.window_s);
  r.get(spectral, "spectral", "overlap_fraction", c.spectral.overlap_fraction);
  r.get(spectral, "spectral", "fft_points", c.spectral.fft_points);
  r.get(spectral, "spectral", "band_lo_bpm", c.spectral.band_lo_bpm);
  r.get(spectral, "spectral", "band_hi_bpm", c.spectral.band_hi_bpm);
  try {
    if (auto w = r.string(spectral, "spectral", "window_function"))
      c.spectral.window_function = parse_window_function(*w);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  const auto* amtc = r.section("amtc");
  r.reject_unknown(amtc, "amtc",
                   {"lambda", "backtrack_len", "num_traces", "suppression_halfwidth_bins", "mode"});
  r.get(amtc, "amtc", "lambda", c.amtc.jump_penalty_lambda);
  r.get(amtc, "amtc", "backtrack_len", c.amtc.backtrack_len);
  r.get(amtc, "amtc", "num_traces", c.amtc.num_traces);
  r.get(amtc, "amtc", "suppression_halfwidth_bins", c.amtc.suppression_halfwidth_bins);
  try {
    if (auto m = r.string(amtc, "amtc", "mode")) c.track_mode = parse_track_mode(*m);
  } catch (const ContractError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  const auto* eval = r.section("eval");
  r.reject_unknown(eval, "eval", {"reference", "max_lag_s"});
  if (auto ref = r.string(eval, "eval", "reference")) c.reference = r.path(*ref);
  r.get(eval, "eval", "max_lag_s", c.max_lag_s);

  if (const auto* synth = r.section("synth")) {
    try {
      c.synth = detail::synth_from_toml(r, synth);
    } catch (const ContractError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path(), path.string());
}

}  // namespace vitaltrace
