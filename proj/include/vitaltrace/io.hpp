#pragma once

// File formats shared by the CLI stages. Numbers are written in shortest
// round-trip form, so a stage reading a file sees exactly the doubles the
// previous stage held in memory.

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "vitaltrace/amtc.hpp"
#include "vitaltrace/error.hpp"
#include "vitaltrace/eval.hpp"
#include "vitaltrace/flow.hpp"
#include "vitaltrace/media_io.hpp"
#include "vitaltrace/refine.hpp"
#include "vitaltrace/roi.hpp"
#include "vitaltrace/spectral.hpp"
#include "vitaltrace/synth.hpp"

namespace vitaltrace {

namespace fs = std::filesystem;

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

inline double parse_number(std::string_view s, const fs::path& file, std::size_t line) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError(file.string() + ":" + std::to_string(line) + ": not a number '" +
                    std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(const fs::path& path, bool has_header = true) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (has_header && table.header.empty() && table.rows.empty()) {
      for (auto c : cells) table.header.emplace_back(c);
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (auto c : cells) row.push_back(parse_number(c, path, lineno));
    if (!table.rows.empty() && row.size() != table.rows.front().size())
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace detail

// ---- parameter blocks as JSON ------------------------------------------------

inline nlohmann::json to_json(const FlowParams& p) {
  return {{"pyramid_levels", p.pyramid_levels},
          {"downscale_factor", p.downscale_factor},
          {"smoothness_weight", p.smoothness_weight},
          {"iterations_per_level", p.iterations_per_level},
          {"warps_per_level", p.warps_per_level},
          {"warm_start", p.warm_start}};
}

inline nlohmann::json to_json(const RefineParams& p) {
  return {{"detrend", p.detrend},
          {"detrend_window_s", p.detrend_window_s},
          {"clip", p.clip},
          {"clip_limit", p.clip_limit},
          {"standardize", p.standardize},
          {"std_window_s", p.std_window_s},
          {"zero_variance_epsilon", p.zero_variance_epsilon}};
}

inline RefineParams refine_params_from_json(const nlohmann::json& j) {
  RefineParams p;
  p.detrend = j.value("detrend", p.detrend);
  p.detrend_window_s = j.value("detrend_window_s", p.detrend_window_s);
  p.clip = j.value("clip", p.clip);
  p.clip_limit = j.value("clip_limit", p.clip_limit);
  p.standardize = j.value("standardize", p.standardize);
  p.std_window_s = j.value("std_window_s", p.std_window_s);
  p.zero_variance_epsilon = j.value("zero_variance_epsilon", p.zero_variance_epsilon);
  return p;
}

inline nlohmann::json to_json(const SpectrogramParams& p) {
  return {{"window_s", p.window_s},
          {"overlap_fraction", p.overlap_fraction},
          {"fft_points", p.fft_points},
          {"band_lo_bpm", p.band_lo_bpm},
          {"band_hi_bpm", p.band_hi_bpm},
          {"window_function", to_string(p.window_function)}};
}

inline nlohmann::json to_json(const AmtcParams& p) {
  return {{"jump_penalty_lambda", p.jump_penalty_lambda},
          {"backtrack_len", p.backtrack_len},
          {"num_traces", p.num_traces},
          {"suppression_halfwidth_bins", p.suppression_halfwidth_bins}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"rmse_bpm", r.rmse_bpm},
          {"sd_abs_error_bpm", r.sd_abs_error_bpm},
          {"me_rate_percent", r.me_rate_percent},
          {"applied_lag_s", r.applied_lag_s},
          {"n_samples", r.n_samples},
          {"definitions",
           {{"error", "est - ref on the coarser common time grid"},
            {"rmse_bpm", "sqrt(mean(error^2))"},
            {"sd_abs_error_bpm", "population standard deviation of |error|"},
            {"me_rate_percent", "100 * mean(|error| / ref)"}}}};
}

// ---- signals -------------------------------------------------------------------

inline fs::path sidecar_path(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".json");
  return p;
}

inline void write_signal_csv(const fs::path& path, const std::vector<double>& samples, double fs) {
  auto out = detail::open_out(path);
  out << "index,time_s,value\n";
  for (std::size_t i = 0; i < samples.size(); ++i)
    out << i << ',' << detail::format_number(static_cast<double>(i) / fs) << ','
        << detail::format_number(samples[i]) << '\n';
}

inline void write_raw_signal(const fs::path& path, const RawSignal& s) {
  write_signal_csv(path, s.samples, s.fs);
  detail::write_json(sidecar_path(path), {{"fs", s.fs}, {"kind", to_string(s.kind)}});
}

inline void write_refined_signal(const fs::path& path, const RefinedSignal& s) {
  write_signal_csv(path, s.samples, s.fs);
  detail::write_json(sidecar_path(path), {{"fs", s.fs}, {"refine", to_json(s.provenance)}});
}

struct LoadedSignal {
  std::vector<double> samples;
  double fs = 0.0;
  nlohmann::json meta;
};

// Reads `index,time_s,value`. The sampling rate comes from the sidecar JSON
// when present, otherwise from the time column.
inline LoadedSignal read_signal(const fs::path& path) {
  const auto table = detail::read_csv(path);
  if (table.header.size() != 3 || table.header[0] != "index" || table.header[1] != "time_s" ||
      table.header[2] != "value")
    throw DataError(path.string() + ": expected header index,time_s,value");
  LoadedSignal s;
  for (const auto& row : table.rows) s.samples.push_back(row[2]);
  if (fs::exists(sidecar_path(path))) {
    s.meta = detail::read_json(sidecar_path(path));
    s.fs = s.meta.value("fs", 0.0);
  }
  if (!(s.fs > 0.0) && table.rows.size() >= 2) {
    const double dt = (table.rows.back()[1] - table.rows.front()[1]) /
                      static_cast<double>(table.rows.size() - 1);
    if (dt > 0.0) s.fs = 1.0 / dt;
  }
  if (!(s.fs > 0.0)) throw DataError(path.string() + ": cannot determine sampling rate");
  return s;
}

inline RawSignal read_raw_signal(const fs::path& path) {
  auto s = read_signal(path);
  RawSignal raw{std::move(s.samples), s.fs, SignalKind::MotionVertical};
  if (s.meta.contains("kind")) raw.kind = parse_signal_kind(s.meta["kind"].get<std::string>());
  return raw;
}

inline RefinedSignal read_refined_signal(const fs::path& path) {
  auto s = read_signal(path);
  RefinedSignal r{std::move(s.samples), s.fs, {}};
  if (s.meta.contains("refine")) r.provenance = refine_params_from_json(s.meta["refine"]);
  return r;
}

// ---- spectrogram ---------------------------------------------------------------

inline void write_spectrogram(const fs::path& dir, const Spectrogram& spec,
                              const SpectrogramParams& params) {
  auto out = detail::open_out(dir / "spec.csv");
  for (std::size_t t = 0; t < spec.columns(); ++t) {
    for (std::size_t b = 0; b < spec.bins(); ++b) {
      if (b) out << ',';
      out << detail::format_number(spec.at(t, b));
    }
    out << '\n';
  }
  detail::write_json(dir / "spec_meta.json", {{"fs", spec.fs},
                                              {"columns", spec.columns()},
                                              {"bins", spec.bins()},
                                              {"time_axis_s", spec.time_axis},
                                              {"freq_axis_bpm", spec.freq_axis_bpm},
                                              {"time_convention", "window center"},
                                              {"params", to_json(params)}});
}

inline Spectrogram read_spectrogram(const fs::path& dir) {
  const auto meta = detail::read_json(dir / "spec_meta.json");
  Spectrogram spec;
  try {
    spec.fs = meta.at("fs").get<double>();
    spec.time_axis = meta.at("time_axis_s").get<std::vector<double>>();
    spec.freq_axis_bpm = meta.at("freq_axis_bpm").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / "spec_meta.json").string() + ": " + e.what());
  }
  const auto table = detail::read_csv(dir / "spec.csv", false);
  if (table.rows.size() != spec.columns())
    throw DataError((dir / "spec.csv").string() + ": row count does not match time axis");
  for (const auto& row : table.rows) {
    if (row.size() != spec.bins())
      throw DataError((dir / "spec.csv").string() + ": column count does not match frequency axis");
    spec.magnitudes.insert(spec.magnitudes.end(), row.begin(), row.end());
  }
  return spec;
}

// ---- traces --------------------------------------------------------------------

// `time_s,freq_bpm,score_contrib`; score_contrib is the column's magnitude
// minus the jump penalty paid to reach it, so the column sums to the score.
inline void write_trace(const fs::path& path, const FrequencyTrace& trace, const Spectrogram& spec,
                        double lambda) {
  auto out = detail::open_out(path);
  out << "time_s,freq_bpm,score_contrib\n";
  for (std::size_t t = 0; t < trace.size(); ++t) {
    double contrib = spec.at(t, trace.bins[t]);
    if (t > 0) {
      const std::size_t a = trace.bins[t - 1], b = trace.bins[t];
      contrib -= lambda * static_cast<double>(a > b ? a - b : b - a);
    }
    out << detail::format_number(trace.time_axis[t]) << ','
        << detail::format_number(trace.freqs_bpm[t]) << ',' << detail::format_number(contrib)
        << '\n';
  }
}

inline void write_truth_trace(const fs::path& path, const FrequencyTrace& trace) {
  auto out = detail::open_out(path);
  out << "time_s,freq_bpm\n";
  for (std::size_t t = 0; t < trace.size(); ++t)
    out << detail::format_number(trace.time_axis[t]) << ','
        << detail::format_number(trace.freqs_bpm[t]) << '\n';
}

// Reads a rate trace (`time_s,<rate>[,...]`) or breath/beat events
// (`event_time_s`), converting events with 10 s sliding windows.
inline FrequencyTrace read_reference(const fs::path& path) {
  const auto table = detail::read_csv(path);
  if (table.header.empty()) throw DataError(path.string() + ": missing header");
  if (table.header.size() == 1 && table.header[0] == "event_time_s") {
    std::vector<double> events;
    for (const auto& row : table.rows) events.push_back(row[0]);
    try {
      return events_to_rate(std::move(events));
    } catch (const ContractError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  if (table.header.size() < 2 || table.header[0] != "time_s")
    throw DataError(path.string() + ": expected header time_s,value_bpm or event_time_s");
  FrequencyTrace trace;
  for (const auto& row : table.rows) {
    trace.time_axis.push_back(row[0]);
    trace.freqs_bpm.push_back(row[1]);
  }
  if (trace.size() < 2) throw DataError(path.string() + ": need at least 2 rows");
  return trace;
}

// ---- flow dumps ----------------------------------------------------------------

inline void write_plane_csv(const fs::path& path, const std::vector<float>& plane, int width) {
  auto out = detail::open_out(path);
  const auto n = plane.size();
  for (std::size_t i = 0; i < n; ++i) {
    out << detail::format_number(static_cast<double>(plane[i]));
    out << (((i + 1) % static_cast<std::size_t>(width)) == 0 ? '\n' : ',');
  }
}

inline void write_flow(const fs::path& dir, const FlowField& flow) {
  write_plane_csv(dir / "u.csv", flow.u, flow.width);
  write_plane_csv(dir / "v.csv", flow.v, flow.width);
}

// ---- synthetic video -------------------------------------------------------------

// Writes manifest.json, the PPM frames, truth_trace.csv and truth_signal.csv.
inline void write_synth_video(const SynthVideo& video, const fs::path& dir) {
  fs::create_directories(dir);
  const auto manifest = video.manifest();
  save_manifest(manifest, dir / "manifest.json");
  for (std::size_t i = 0; i < video.size(); ++i)
    write_ppm(video.frame(i), dir / frame_file_name(manifest.frame_name_pattern, i));
  write_truth_trace(dir / "truth_trace.csv", video.truth_trace());
  const auto truth = video.truth_signal();
  write_signal_csv(dir / "truth_signal.csv", truth.samples, truth.fs);
}

}  // namespace vitaltrace
