#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fftw3.h>

#include "vitaltrace/error.hpp"
#include "vitaltrace/refine.hpp"

namespace vitaltrace {

enum class WindowFunction { Hann, Rectangular };

inline std::string to_string(WindowFunction w) {
  return w == WindowFunction::Hann ? "hann" : "rectangular";
}

inline WindowFunction parse_window_function(std::string_view s) {
  if (s == "hann") return WindowFunction::Hann;
  if (s == "rectangular" || s == "boxcar") return WindowFunction::Rectangular;
  throw ContractError("unknown window function '" + std::string(s) + "'");
}

struct SpectrogramParams {
  double window_s = 10.0;
  double overlap_fraction = 0.98;
  std::size_t fft_points = 2048;
  double band_lo_bpm = 15.0;
  double band_hi_bpm = 50.0;
  WindowFunction window_function = WindowFunction::Hann;

  bool operator==(const SpectrogramParams&) const = default;
};

// Time x frequency magnitudes, stored row-major: row t holds the retained
// bins of the window centered at time_axis[t] (seconds).
struct Spectrogram {
  std::vector<double> magnitudes;
  std::vector<double> time_axis;
  std::vector<double> freq_axis_bpm;
  double fs = 0.0;

  std::size_t columns() const noexcept { return time_axis.size(); }
  std::size_t bins() const noexcept { return freq_axis_bpm.size(); }
  double& at(std::size_t t, std::size_t b) { return magnitudes[t * bins() + b]; }
  double at(std::size_t t, std::size_t b) const { return magnitudes[t * bins() + b]; }
  std::span<const double> column(std::size_t t) const {
    return std::span(magnitudes).subspan(t * bins(), bins());
  }

  bool operator==(const Spectrogram&) const = default;
};

struct FrameLayout {
  std::size_t window = 0;
  std::size_t hop = 0;
  std::size_t columns = 0;
};

inline FrameLayout frame_layout(std::size_t n, double fs, const SpectrogramParams& p) {
  detail::require(fs > 0.0, "spectrogram: fs must be > 0");
  detail::require(p.window_s > 0.0, "spectrogram: window_s must be > 0");
  detail::require(p.overlap_fraction >= 0.0 && p.overlap_fraction < 1.0,
                  "spectrogram: overlap_fraction must be in [0, 1)");
  const auto w = static_cast<std::size_t>(std::llround(p.window_s * fs));
  detail::require(w >= 2, "spectrogram: window shorter than 2 samples");
  const auto hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(w) * (1.0 - p.overlap_fraction))));
  detail::require(n >= w, "spectrogram: signal of " + std::to_string(n) +
                              " samples is shorter than one window (" + std::to_string(w) +
                              ")");
  return {w, hop, (n - w) / hop + 1};
}

namespace detail {

inline std::vector<double> taper(std::size_t w, WindowFunction kind) {
  std::vector<double> out(w, 1.0);
  if (kind == WindowFunction::Hann && w > 1)
    for (std::size_t i = 0; i < w; ++i)
      out[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                    static_cast<double>(w - 1));
  return out;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

// The FFTW planner is not reentrant; plan creation and destruction are
// serialized so transforms can run on several threads.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    if (!in_ || !out_) throw std::bad_alloc();
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(), out_.get(), FFTW_ESTIMATE);
    if (!plan_) throw NumericalError("FFTW could not plan a transform of size " + std::to_string(n));
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }

  std::span<double> input() { return {in_.get(), n_}; }

  // Magnitude of bin k after execute().
  double magnitude(std::size_t k) const { return std::hypot(out_.get()[k][0], out_.get()[k][1]); }

  void execute() { fftw_execute(plan_); }

 private:
  std::size_t n_;
  std::unique_ptr<double, FftwDeleter> in_;
  std::unique_ptr<fftw_complex, FftwDeleter> out_;
  fftw_plan plan_ = nullptr;
};

}  // namespace detail

inline double bin_frequency_bpm(std::size_t k, double fs, std::size_t fft_points) {
  return static_cast<double>(k) * fs * 60.0 / static_cast<double>(fft_points);
}

// Short-time magnitude spectrum restricted to the configured band, each
// column scaled so that its maximum is 1.
inline Spectrogram spectrogram(std::span<const double> signal, double fs,
                               const SpectrogramParams& p) {
  const FrameLayout layout = frame_layout(signal.size(), fs, p);
  detail::require(p.fft_points >= layout.window,
                  "spectrogram: fft_points must be >= window samples");
  detail::require(p.band_lo_bpm > 0.0 && p.band_lo_bpm < p.band_hi_bpm,
                  "spectrogram: need 0 < band_lo_bpm < band_hi_bpm");

  Spectrogram spec;
  spec.fs = fs;
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k <= p.fft_points / 2; ++k) {
    const double f = bin_frequency_bpm(k, fs, p.fft_points);
    if (f >= p.band_lo_bpm && f <= p.band_hi_bpm) {
      keep.push_back(k);
      spec.freq_axis_bpm.push_back(f);
    }
  }
  detail::require(!keep.empty(), "spectrogram: band contains no FFT bins");

  const auto window = detail::taper(layout.window, p.window_function);
  detail::RealFft fft(p.fft_points);
  spec.magnitudes.assign(layout.columns * keep.size(), 0.0);
  for (std::size_t c = 0; c < layout.columns; ++c) {
    const std::size_t start = c * layout.hop;
    auto in = fft.input();
    std::fill(in.begin(), in.end(), 0.0);
    for (std::size_t i = 0; i < layout.window; ++i) in[i] = window[i] * signal[start + i];
    fft.execute();
    double peak = 0.0;
    for (std::size_t b = 0; b < keep.size(); ++b) {
      const double m = fft.magnitude(keep[b]);
      spec.at(c, b) = m;
      peak = std::max(peak, m);
    }
    if (peak > 0.0)
      for (std::size_t b = 0; b < keep.size(); ++b) spec.at(c, b) /= peak;
    spec.time_axis.push_back((static_cast<double>(start) + 0.5 * static_cast<double>(layout.window)) / fs);
  }
  return spec;
}

inline Spectrogram spectrogram(const RefinedSignal& signal, const SpectrogramParams& p) {
  return spectrogram(signal.samples, signal.fs, p);
}

// Keeps the bins with lo <= f <= hi; magnitudes are not renormalized.
inline Spectrogram restrict_band(const Spectrogram& spec, double lo_bpm, double hi_bpm) {
  std::vector<std::size_t> keep;
  for (std::size_t b = 0; b < spec.bins(); ++b)
    if (spec.freq_axis_bpm[b] >= lo_bpm && spec.freq_axis_bpm[b] <= hi_bpm) keep.push_back(b);
  detail::require(!keep.empty(), "restrict_band: band [" + std::to_string(lo_bpm) + ", " +
                                     std::to_string(hi_bpm) +
                                     "] bpm does not intersect the frequency axis");
  Spectrogram out;
  out.fs = spec.fs;
  out.time_axis = spec.time_axis;
  for (std::size_t b : keep) out.freq_axis_bpm.push_back(spec.freq_axis_bpm[b]);
  out.magnitudes.reserve(spec.columns() * keep.size());
  for (std::size_t t = 0; t < spec.columns(); ++t)
    for (std::size_t b : keep) out.magnitudes.push_back(spec.at(t, b));
  return out;
}

}  // namespace vitaltrace
