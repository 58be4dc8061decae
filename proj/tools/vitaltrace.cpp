// vitaltrace: command-line front end. Each subcommand reads one stage's
// inputs and writes its outputs; `run` chains all of them.
//
// Exit codes: 0 success, 1 usage or configuration, 2 data, 3 numerical.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vitaltrace.hpp"

namespace fs = std::filesystem;
using namespace vitaltrace;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

int cmd_synth(const std::string& config_path, const std::optional<std::string>& scenario,
              const std::optional<std::uint64_t>& seed, const std::string& out) {
  const auto cfg = config_or_default(config_path);
  SynthSpec spec = cfg.synth.value_or(SynthSpec{});
  if (!cfg.synth) spec.freq_trace_bpm = FrequencySchedule::ramp(20.0, 35.0, spec.duration_s);
  if (scenario) spec.scenario = parse_scenario(*scenario);
  if (seed) spec.seed = *seed;
  if (!spec.planned_band_bpm)
    spec.planned_band_bpm = std::pair{cfg.spectral.band_lo_bpm, cfg.spectral.band_hi_bpm};
  const fs::path dir = out.empty() ? cfg.output_dir : fs::path(out);
  const SynthVideo video(spec);
  write_synth_video(video, dir);
  std::cout << "synth: " << video.size() << " frames (" << to_string(spec.scenario) << ") -> "
            << dir.string() << std::endl;
  return kOk;
}

int cmd_flow(const std::string& config_path, std::string manifest, std::size_t frame,
             const std::string& out) {
  const auto cfg = config_or_default(config_path);
  if (manifest.empty()) manifest = cfg.manifest.string();
  if (manifest.empty()) throw ConfigError("flow: no manifest (use --manifest or [input].manifest)");
  if (!fs::exists(manifest)) throw DataError("manifest not found: " + manifest);
  const FrameSequence frames{fs::path(manifest)};
  if (frame >= frames.size())
    throw ContractError("flow: frame " + std::to_string(frame) + " outside 0.." +
                        std::to_string(frames.size() - 1));
  const auto flow = estimate_flow(to_gray(frames.read(0)), to_gray(frames.read(frame)), cfg.flow);
  write_flow(out, flow);
  std::cout << "flow: frame 0 -> " << frame << " written to " << out << std::endl;
  return kOk;
}

int cmd_extract(const std::string& config_path, const RunOptions& opts, const std::string& out,
                bool dump_flow) {
  auto cfg = load_config(config_path);
  if (!out.empty()) cfg.output_dir = out;
  validate(cfg);
  check_paths(cfg);
  const auto rois = selected_rois(cfg, opts);
  FlowObserver observer;
  if (dump_flow || cfg.dump_flow)
    observer = [&](std::size_t i, const FlowField& f) {
      write_flow(cfg.output_dir / "flow" / detail::flow_dir_name(i), f);
    };
  const auto result = extract_stage(cfg, rois, observer);
  for (std::size_t i = 0; i < rois.size(); ++i)
    write_raw_signal(cfg.output_dir / detail::roi_dir_name(rois[i]) / "raw_signal.csv",
                     result.signals[i]);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "extract: " << rois.size() << " signal(s) -> " << cfg.output_dir.string()
            << std::endl;
  return kOk;
}

int cmd_refine(const std::string& config_path, const RunOptions& opts, const std::string& in,
               const std::string& out) {
  const auto cfg = config_or_default(config_path);
  const RawSignal raw = read_raw_signal(in);
  const auto refined = refine(raw, effective_refine(cfg, opts));
  write_refined_signal(out, refined);
  std::cout << "refine: " << refined.samples.size() << " samples -> " << out << std::endl;
  return kOk;
}

int cmd_spectrogram(const std::string& config_path, const std::string& in,
                    const std::string& out) {
  const auto cfg = config_or_default(config_path);
  const auto refined = read_refined_signal(in);
  const auto spec = spectrogram(refined, cfg.spectral);
  write_spectrogram(out, spec, cfg.spectral);
  std::cout << "spectrogram: " << spec.columns() << " columns x " << spec.bins() << " bins -> "
            << out << std::endl;
  return kOk;
}

int cmd_track(const std::string& config_path, const std::optional<std::string>& mode,
              const std::string& in, const std::string& out) {
  const auto cfg = config_or_default(config_path);
  const auto spec = read_spectrogram(in);
  const TrackMode m = mode ? parse_track_mode(*mode) : cfg.track_mode;
  const auto set = track_stage(spec, cfg.amtc, m);
  write_traces(out, set, spec, cfg.amtc.jump_penalty_lambda);
  for (const auto& w : set.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "track: " << set.traces.size() << " trace(s) -> " << out << std::endl;
  return kOk;
}

int cmd_eval(const std::string& est_path, const std::string& ref_path, double max_lag_s,
             const std::string& out) {
  const auto est = read_reference(est_path);
  const auto ref = read_reference(ref_path);
  const auto report = evaluate(est, ref, max_lag_s);
  const auto j = to_json(report);
  if (!out.empty()) detail::write_json(out, j);
  std::cout << j.dump(2) << std::endl;
  return kOk;
}

int cmd_run(const std::string& config_path, const RunOptions& opts) {
  const auto cfg = load_config(config_path);
  run_pipeline(cfg, opts, &std::cout);
  std::cout << "run: outputs in " << cfg.output_dir.string() << std::endl;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Breathing and heart rate traces from video via optical flow and spectral tracking"};
  app.require_subcommand(1);

  std::string config_path, in, out, manifest, est, ref;
  std::optional<std::string> scenario, mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> roi_index;
  std::size_t frame = 1;
  double max_lag_s = 0.0;
  bool disable_detrend = false, disable_clip = false, disable_standardize = false;
  bool dump_flow = false;

  const auto add_refine_flags = [&](CLI::App* sub) {
    sub->add_flag("--disable-detrend", disable_detrend, "Skip moving-average detrending");
    sub->add_flag("--disable-clip", disable_clip, "Skip amplitude clipping");
    sub->add_flag("--disable-standardize", disable_standardize,
                  "Skip windowed standardization");
  };

  auto* synth = app.add_subcommand("synth", "Render a synthetic video with ground truth");
  synth->add_option("--config", config_path, "TOML config with a [synth] section")
      ->check(CLI::ExistingFile);
  synth->add_option("--scenario", scenario,
                    "breathing-motion | pulse-color | patting-plus-breath");
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--out", out, "Output directory (default: [output].dir)");

  auto* flow = app.add_subcommand("flow", "Dense flow from frame 0 to one frame");
  flow->add_option("--config", config_path, "TOML config")->check(CLI::ExistingFile);
  flow->add_option("--manifest", manifest, "Sequence manifest (default: [input].manifest)");
  flow->add_option("--frame", frame, "Target frame index")->required();
  flow->add_option("--out", out, "Directory for u.csv and v.csv")->required();

  auto* extract = app.add_subcommand("extract", "Raw ROI signals from a frame sequence");
  extract->add_option("--config", config_path, "TOML config")->required()->check(CLI::ExistingFile);
  extract->add_option("--roi-index", roi_index, "Process only this ROI (1-based)");
  extract->add_option("--out", out, "Output directory (default: [output].dir)");
  extract->add_flag("--dump-flow", dump_flow, "Write u.csv/v.csv for every frame");

  auto* refine_cmd = app.add_subcommand("refine", "Detrend, clip and standardize a raw signal");
  refine_cmd->add_option("--config", config_path, "TOML config")->check(CLI::ExistingFile);
  refine_cmd->add_option("--in", in, "Raw signal CSV")->required()->check(CLI::ExistingFile);
  refine_cmd->add_option("--out", out, "Refined signal CSV")->required();
  add_refine_flags(refine_cmd);

  auto* spec_cmd = app.add_subcommand("spectrogram", "Band-limited spectrogram of a refined signal");
  spec_cmd->add_option("--config", config_path, "TOML config")->check(CLI::ExistingFile);
  spec_cmd->add_option("--in", in, "Refined signal CSV")->required()->check(CLI::ExistingFile);
  spec_cmd->add_option("--out", out, "Output directory for spec.csv and spec_meta.json")
      ->required();

  auto* track = app.add_subcommand("track", "Frequency traces from a saved spectrogram");
  track->add_option("--config", config_path, "TOML config")->check(CLI::ExistingFile);
  track->add_option("--in", in, "Directory holding spec.csv and spec_meta.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  track->add_option("--out", out, "Output directory for trace_<n>.csv")->required();
  track->add_option("--mode", mode, "offline | online (default: [amtc].mode)");

  auto* eval_cmd = app.add_subcommand("eval", "Compare an estimated trace with a reference");
  eval_cmd->add_option("--est", est, "Estimated trace CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--ref", ref, "Reference CSV (time_s,value_bpm or event_time_s)")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--max-lag", max_lag_s, "Search lags up to this many seconds (0: none)")
      ->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--out", out, "Write the report JSON here as well");

  auto* run = app.add_subcommand("run", "Full pipeline from a config file");
  run->add_option("--config", config_path, "TOML config")->required()->check(CLI::ExistingFile);
  run->add_option("--roi-index", roi_index, "Process only this ROI (1-based)");
  add_refine_flags(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  RunOptions opts;
  opts.roi_index = roi_index;
  opts.disable_detrend = disable_detrend;
  opts.disable_clip = disable_clip;
  opts.disable_standardize = disable_standardize;

  try {
    if (*synth) return cmd_synth(config_path, scenario, seed, out);
    if (*flow) return cmd_flow(config_path, manifest, frame, out);
    if (*extract) return cmd_extract(config_path, opts, out, dump_flow);
    if (*refine_cmd) return cmd_refine(config_path, opts, in, out);
    if (*spec_cmd) return cmd_spectrogram(config_path, in, out);
    if (*track) return cmd_track(config_path, mode, in, out);
    if (*eval_cmd) return cmd_eval(est, ref, max_lag_s, out);
    if (*run) return cmd_run(config_path, opts);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
