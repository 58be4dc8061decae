#pragma once

// End-to-end orchestration: frames -> raw signals -> refined signals ->
// spectrograms -> traces [-> metrics], with every intermediate written under
// the output directory:
//
//   <out>/run_meta.json
//   <out>/roi_<k>/raw_signal.csv (+ .json)
//   <out>/roi_<k>/refined_signal.csv (+ .json)
//   <out>/roi_<k>/spec.csv, spec_meta.json
//   <out>/roi_<k>/trace_<n>.csv
//   <out>/roi_<k>/eval.json            when a reference is configured
//   <out>/flow/frame_<i>/{u,v}.csv     when flow dumps are requested
//
// ROI numbering is 1-based and follows the order in the config.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vitaltrace/amtc.hpp"
#include "vitaltrace/config.hpp"
#include "vitaltrace/error.hpp"
#include "vitaltrace/eval.hpp"
#include "vitaltrace/io.hpp"
#include "vitaltrace/media_io.hpp"
#include "vitaltrace/refine.hpp"
#include "vitaltrace/roi.hpp"
#include "vitaltrace/spectral.hpp"

namespace vitaltrace {

struct RunOptions {
  std::optional<std::size_t> roi_index;  // 1-based; all ROIs when empty
  bool disable_detrend = false;
  bool disable_clip = false;
  bool disable_standardize = false;
};

struct RoiOutcome {
  std::size_t roi_index = 0;  // 1-based
  RawSignal raw;
  RefinedSignal refined;
  Spectrogram spec;
  TraceSet traces;
  std::optional<EvalReport> report;
};

struct RunResult {
  std::vector<RoiOutcome> rois;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, double>> timings_s;
};

// Worker count from VITALTRACE_THREADS, else the hardware concurrency.
inline std::size_t thread_budget() {
  if (const char* env = std::getenv("VITALTRACE_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

// Runs `fn` with the stage name prepended to any library error, keeping the
// error category so the caller can still map it to an exit code.
template <typename F>
auto in_stage(const std::string& stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(stage + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(stage + ": " + e.what());
  } catch (const ContractError& e) {
    throw ContractError(stage + ": " + e.what());
  }
}

// Calls fn(i) for i in [0, n) on up to `threads` workers.
inline void parallel_for(std::size_t n, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline std::string roi_dir_name(std::size_t index) { return "roi_" + std::to_string(index); }

inline std::string flow_dir_name(std::size_t frame) {
  std::string digits = std::to_string(frame);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return "frame_" + digits;
}

}  // namespace detail

// 1-based indices of the ROIs a run processes.
inline std::vector<std::size_t> selected_rois(const PipelineConfig& c, const RunOptions& opts) {
  std::vector<std::size_t> out;
  if (opts.roi_index) {
    detail::require(*opts.roi_index >= 1 && *opts.roi_index <= c.rois.size(),
                    "--roi-index " + std::to_string(*opts.roi_index) + " is outside 1.." +
                        std::to_string(c.rois.size()));
    out.push_back(*opts.roi_index);
  } else {
    for (std::size_t k = 1; k <= c.rois.size(); ++k) out.push_back(k);
  }
  return out;
}

inline RefineParams effective_refine(const PipelineConfig& c, const RunOptions& opts) {
  RefineParams p = c.refine;
  if (opts.disable_detrend) p.detrend = false;
  if (opts.disable_clip) p.clip = false;
  if (opts.disable_standardize) p.standardize = false;
  return p;
}

// Raw signals for the selected ROIs from one pass over the sequence.
inline ExtractResult extract_stage(const PipelineConfig& c, const std::vector<std::size_t>& rois,
                                   const FlowObserver& observer = {}) {
  FrameSequence frames(c.manifest);
  const auto& m = frames.manifest();
  std::vector<RoiGrid> grids;
  for (std::size_t k : rois) {
    validate(c.rois[k - 1], m.width, m.height);
    grids.push_back(make_grid(c.rois[k - 1], c.grid_spacing));
  }
  ExtractOptions opts;
  opts.kind = c.kind;
  opts.axis = c.axis;
  opts.weights = c.weights;
  opts.flow = c.flow;
  opts.fs = m.fps;
  return extract_signals(frames, grids, opts, observer);
}

// Traces in extraction order. Online mode runs the causal tracker on each
// successively suppressed spectrogram.
inline TraceSet track_stage(const Spectrogram& spec, const AmtcParams& params, TrackMode mode) {
  if (mode == TrackMode::Offline) return extract_traces(spec, params);
  validate(params);
  TraceSet out;
  Spectrogram work = spec;
  for (std::size_t k = 0; k < params.num_traces; ++k) {
    if (std::all_of(work.magnitudes.begin(), work.magnitudes.end(),
                    [](double m) { return m == 0.0; })) {
      out.warnings.push_back("spectrogram exhausted after " + std::to_string(k) + " of " +
                             std::to_string(params.num_traces) + " traces");
      break;
    }
    FrequencyTrace trace = track_online(work, params);
    work = suppress_trace(work, trace, params.suppression_halfwidth_bins);
    out.traces.push_back(std::move(trace));
  }
  return out;
}

inline void write_traces(const std::filesystem::path& dir, const TraceSet& set,
                         const Spectrogram& spec, double lambda) {
  for (std::size_t n = 0; n < set.traces.size(); ++n)
    write_trace(dir / ("trace_" + std::to_string(n + 1) + ".csv"), set.traces[n], spec, lambda);
}

inline EvalReport evaluate(const FrequencyTrace& est, const FrequencyTrace& ref,
                           double max_lag_s) {
  const double lag = max_lag_s > 0.0 ? align(est, ref, max_lag_s) : 0.0;
  return compute_metrics(est, ref, lag);
}

inline nlohmann::json run_meta(const PipelineConfig& c, const RunOptions& opts,
                               const RunResult& result) {
  nlohmann::json rois = nlohmann::json::array();
  for (std::size_t k : selected_rois(c, opts)) {
    const RoiRect& r = c.rois[k - 1];
    rois.push_back({{"index", k}, {"x0", r.x0}, {"y0", r.y0}, {"w", r.w}, {"h", r.h}});
  }
  nlohmann::json timings = nlohmann::json::object();
  for (const auto& [stage, s] : result.timings_s) timings[stage] = s;
  nlohmann::json meta = {
      {"input", {{"manifest", c.manifest.string()}}},
      {"roi", {{"rects", rois}, {"spacing", c.grid_spacing}}},
      {"signal",
       {{"kind", to_string(c.kind)}, {"axis", to_string(c.axis)}, {"weights", c.weights}}},
      {"flow", to_json(c.flow)},
      {"refine", to_json(effective_refine(c, opts))},
      {"spectral", to_json(c.spectral)},
      {"amtc", to_json(c.amtc)},
      {"tracking_mode", to_string(c.track_mode)},
      {"eval",
       {{"reference", c.reference ? nlohmann::json(c.reference->string()) : nlohmann::json()},
        {"max_lag_s", c.max_lag_s}}},
      {"warnings", result.warnings},
      {"stage_timings_s", timings}};
  return meta;
}

// Runs every stage and writes all artifacts. `log` receives one line per
// completed stage, in stage order.
inline RunResult run_pipeline(const PipelineConfig& c, const RunOptions& opts = {},
                              std::ostream* log = nullptr) {
  detail::in_stage("config", [&] {
    validate(c);
    check_paths(c);
    validate(effective_refine(c, opts));
  });
  const auto rois = detail::in_stage("config", [&] { return selected_rois(c, opts); });
  const auto say = [&](const std::string& line) {
    if (log) *log << line << std::endl;
  };

  RunResult result;
  detail::Stopwatch clock;
  std::filesystem::create_directories(c.output_dir);

  FlowObserver observer;
  if (c.dump_flow)
    observer = [&](std::size_t i, const FlowField& f) {
      write_flow(c.output_dir / "flow" / detail::flow_dir_name(i), f);
    };
  auto extracted = detail::in_stage("extract", [&] { return extract_stage(c, rois, observer); });
  result.warnings.insert(result.warnings.end(), extracted.warnings.begin(),
                         extracted.warnings.end());
  result.timings_s.emplace_back("extract", clock.lap());
  say("extract: " + std::to_string(rois.size()) + " signal(s), " +
      std::to_string(extracted.signals.front().samples.size()) + " samples");

  std::optional<FrequencyTrace> reference;
  if (c.reference)
    reference = detail::in_stage("eval", [&] { return read_reference(*c.reference); });

  const RefineParams refine_params = effective_refine(c, opts);
  result.rois.resize(rois.size());
  detail::parallel_for(rois.size(), thread_budget(), [&](std::size_t i) {
    RoiOutcome& out = result.rois[i];
    out.roi_index = rois[i];
    out.raw = std::move(extracted.signals[i]);
    const auto dir = c.output_dir / detail::roi_dir_name(out.roi_index);
    write_raw_signal(dir / "raw_signal.csv", out.raw);
    out.refined = detail::in_stage("refine", [&] { return refine(out.raw, refine_params); });
    write_refined_signal(dir / "refined_signal.csv", out.refined);
    out.spec = detail::in_stage("spectrogram", [&] { return spectrogram(out.refined, c.spectral); });
    write_spectrogram(dir, out.spec, c.spectral);
    out.traces = detail::in_stage("track", [&] { return track_stage(out.spec, c.amtc, c.track_mode); });
    write_traces(dir, out.traces, out.spec, c.amtc.jump_penalty_lambda);
    if (reference) {
      out.report = detail::in_stage(
          "eval", [&] { return evaluate(out.traces.traces.front(), *reference, c.max_lag_s); });
      auto report = to_json(*out.report);
      report["refine"] = to_json(refine_params);
      report["spectral"] = to_json(c.spectral);
      report["amtc"] = to_json(c.amtc);
      detail::write_json(dir / "eval.json", report);
    }
  });
  result.timings_s.emplace_back("refine+spectrogram+track+eval", clock.lap());

  for (const auto& out : result.rois) {
    for (const auto& w : out.traces.warnings)
      result.warnings.push_back("roi " + std::to_string(out.roi_index) + ": " + w);
    std::ostringstream line;
    line << "roi " << out.roi_index << ": " << out.spec.columns() << " columns x "
         << out.spec.bins() << " bins, " << out.traces.traces.size() << " trace(s)";
    if (out.report)
      line << ", rmse " << out.report->rmse_bpm << " bpm, me_rate " << out.report->me_rate_percent
           << " %";
    say(line.str());
  }
  for (const auto& w : result.warnings) say("warning: " + w);

  detail::write_json(c.output_dir / "run_meta.json", run_meta(c, opts, result));
  return result;
}

}  // namespace vitaltrace
