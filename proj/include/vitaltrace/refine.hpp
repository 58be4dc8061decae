#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "vitaltrace/error.hpp"
#include "vitaltrace/roi.hpp"

namespace vitaltrace {

struct RefineParams {
  double detrend_window_s = 2.0;
  double clip_limit = 1.0;
  double std_window_s = 4.0;
  double zero_variance_epsilon = 1e-8;
  bool detrend = true;
  bool clip = true;
  bool standardize = true;

  bool operator==(const RefineParams&) const = default;
};

inline void validate(const RefineParams& p) {
  detail::require(p.detrend_window_s > 0.0, "RefineParams: detrend_window_s must be > 0");
  detail::require(p.clip_limit > 0.0, "RefineParams: clip_limit must be > 0");
  detail::require(p.std_window_s > 0.0, "RefineParams: std_window_s must be > 0");
  detail::require(p.zero_variance_epsilon > 0.0,
                  "RefineParams: zero_variance_epsilon must be > 0");
}

struct RefinedSignal {
  std::vector<double> samples;
  double fs = 0.0;
  RefineParams provenance;

  bool operator==(const RefinedSignal&) const = default;
};

// Subtracts a centered moving average. The half-width is floor(w / 2) with
// w = round(window_s * fs); near the ends it shrinks symmetrically so every
// window stays centered on its sample.
inline std::vector<double> detrend(const std::vector<double>& x, double fs, double window_s) {
  const std::size_t n = x.size();
  detail::require(n >= 2, "detrend: signal needs at least 2 samples");
  detail::require(fs > 0.0 && window_s > 0.0, "detrend: fs and window must be > 0");
  const auto w = static_cast<std::size_t>(std::llround(window_s * fs));
  detail::require(w >= 2 && w <= n, "detrend: window of " + std::to_string(w) +
                                        " samples outside [2, " + std::to_string(n) + "]");
  const std::size_t half = w / 2;
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t h = std::min({half, t, n - 1 - t});
    double sum = 0.0;
    for (std::size_t i = t - h; i <= t + h; ++i) sum += x[i];
    out[t] = x[t] - sum / static_cast<double>(2 * h + 1);
  }
  return out;
}

inline RawSignal detrend(const RawSignal& s, double window_s) {
  return {detrend(s.samples, s.fs, window_s), s.fs, s.kind};
}

inline std::vector<double> clip(const std::vector<double>& x, double limit) {
  detail::require(limit > 0.0, "clip: limit must be > 0");
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(),
                 [limit](double v) { return std::min(limit, std::max(-limit, v)); });
  return out;
}

inline RawSignal clip(const RawSignal& s, double limit) {
  return {clip(s.samples, limit), s.fs, s.kind};
}

// Overlap-add of every length-L window standardized to zero mean and unit
// (population) variance; windows whose std falls below epsilon contribute
// zeros.
inline std::vector<double> standardize_windows(const std::vector<double>& x, double fs,
                                               double window_s, double epsilon) {
  const std::size_t n = x.size();
  detail::require(fs > 0.0 && window_s > 0.0, "standardize_windows: bad fs or window");
  detail::require(epsilon > 0.0, "standardize_windows: epsilon must be > 0");
  const auto len = static_cast<std::size_t>(std::llround(window_s * fs));
  detail::require(len >= 2 && len <= n, "standardize_windows: window of " +
                                            std::to_string(len) + " samples outside [2, " +
                                            std::to_string(n) + "]");
  std::vector<double> acc(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (std::size_t s = 0; s + len <= n; ++s) {
    double mean = 0.0;
    for (std::size_t i = s; i < s + len; ++i) mean += x[i];
    mean /= static_cast<double>(len);
    double var = 0.0;
    for (std::size_t i = s; i < s + len; ++i) var += (x[i] - mean) * (x[i] - mean);
    const double sd = std::sqrt(var / static_cast<double>(len));
    if (sd >= epsilon)
      for (std::size_t i = s; i < s + len; ++i) acc[i] += (x[i] - mean) / sd;
    for (std::size_t i = s; i < s + len; ++i) ++count[i];
  }
  for (std::size_t t = 0; t < n; ++t) acc[t] /= static_cast<double>(count[t]);
  return acc;
}

// detrend -> clip -> standardize, each stage skippable through the params.
// With standardization disabled the samples stay in native units.
inline RefinedSignal refine(const RawSignal& raw, const RefineParams& params) {
  validate(params);
  std::vector<double> x = raw.samples;
  if (params.detrend) x = detrend(x, raw.fs, params.detrend_window_s);
  if (params.clip) x = clip(x, params.clip_limit);
  if (params.standardize)
    x = standardize_windows(x, raw.fs, params.std_window_s, params.zero_variance_epsilon);
  return {std::move(x), raw.fs, params};
}

}  // namespace vitaltrace
