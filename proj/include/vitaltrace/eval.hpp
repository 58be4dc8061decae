#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "vitaltrace/amtc.hpp"
#include "vitaltrace/error.hpp"

namespace vitaltrace {

struct EvalReport {
  double rmse_bpm = 0.0;
  double sd_abs_error_bpm = 0.0;
  double me_rate_percent = 0.0;
  double applied_lag_s = 0.0;
  std::size_t n_samples = 0;
};

// Minimum aligned overlap, in seconds, for alignment and metrics.
inline constexpr double kMinOverlapS = 10.0;

namespace detail {

inline double mean_step(const std::vector<double>& t) {
  require(t.size() >= 2, "trace needs at least 2 samples");
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  require(dt > 0.0, "trace time axis must be increasing");
  return dt;
}

// Linear interpolation of (t, y) at x; x must lie inside [t.front(), t.back()].
inline double interpolate(const std::vector<double>& t, const std::vector<double>& y, double x) {
  if (x <= t.front()) return y.front();
  if (x >= t.back()) return y.back();
  const auto it = std::upper_bound(t.begin(), t.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - t.begin());
  const std::size_t lo = hi - 1;
  const double f = (x - t[lo]) / (t[hi] - t[lo]);
  return y[lo] + f * (y[hi] - y[lo]);
}

// Paired samples on the coarser of the two sampling grids, with the
// reference read `lag_s` seconds later than the estimate.
struct Pairs {
  std::vector<double> est;
  std::vector<double> ref;
  double dt = 0.0;

  double duration() const { return est.empty() ? 0.0 : dt * static_cast<double>(est.size() - 1); }
};

inline Pairs pair_up(const FrequencyTrace& est, const FrequencyTrace& ref, double lag_s) {
  require(est.time_axis.size() == est.freqs_bpm.size() &&
              ref.time_axis.size() == ref.freqs_bpm.size(),
          "trace time axis and values differ in length");
  Pairs p;
  p.dt = std::max(mean_step(est.time_axis), mean_step(ref.time_axis));
  const double t0 = est.time_axis.front();
  const double t1 = est.time_axis.back();
  const double slack = 1e-9 * p.dt;
  const auto steps = static_cast<std::size_t>(std::floor((t1 - t0) / p.dt + 1e-9));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = t0 + static_cast<double>(k) * p.dt;
    const double tr = t + lag_s;
    if (tr < ref.time_axis.front() - slack || tr > ref.time_axis.back() + slack) continue;
    p.est.push_back(interpolate(est.time_axis, est.freqs_bpm, t));
    p.ref.push_back(interpolate(ref.time_axis, ref.freqs_bpm, tr));
  }
  return p;
}

inline double variance(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

// Lag (seconds, a multiple of the common sample period) in [-max_lag, max_lag]
// maximizing the Pearson correlation between est(t) and ref(t + lag).
// Ties prefer the smaller |lag|, then the negative one.
inline double align(const FrequencyTrace& est, const FrequencyTrace& ref, double max_lag_s) {
  detail::require(max_lag_s >= 0.0, "align: max_lag_s must be >= 0");
  detail::require(detail::variance(ref.freqs_bpm) > 0.0,
                  "align: reference trace is constant, correlation undefined");
  detail::require(detail::variance(est.freqs_bpm) > 0.0,
                  "align: estimated trace is constant, correlation undefined");
  const double dt = std::max(detail::mean_step(est.time_axis), detail::mean_step(ref.time_axis));
  const auto max_steps = static_cast<long>(std::floor(max_lag_s / dt + 1e-9));

  bool found = false;
  double best_lag = 0.0;
  double best_r = -std::numeric_limits<double>::infinity();
  // Visit 0, -1, +1, -2, +2, ... so strict improvement implements the tie rule.
  for (long step = 0; step <= max_steps; ++step) {
    for (long sign : {-1L, 1L}) {
      if (step == 0 && sign == 1) continue;
      const double lag = static_cast<double>(sign * step) * dt;
      const auto pairs = detail::pair_up(est, ref, lag);
      if (pairs.est.size() < 2 || pairs.duration() < kMinOverlapS - 1e-9) continue;
      const double r = detail::pearson(pairs.est, pairs.ref);
      if (std::isnan(r)) continue;
      found = true;
      if (r > best_r) {
        best_r = r;
        best_lag = lag;
      }
    }
  }
  detail::require(found, "align: no lag leaves >= 10 s of overlap with defined correlation");
  return best_lag;
}

// RMSE, population SD of |error| and mean relative error (percent) over the
// aligned overlap, with error = est - ref.
inline EvalReport compute_metrics(const FrequencyTrace& est, const FrequencyTrace& ref,
                                  double lag_s) {
  const auto pairs = detail::pair_up(est, ref, lag_s);
  detail::require(pairs.est.size() >= 2 && pairs.duration() >= kMinOverlapS - 1e-9,
                  "compute_metrics: aligned overlap shorter than 10 s");
  const auto n = static_cast<double>(pairs.est.size());
  double se = 0.0, sa = 0.0, rel = 0.0;
  for (std::size_t i = 0; i < pairs.est.size(); ++i) {
    detail::require(pairs.ref[i] > 0.0,
                    "compute_metrics: reference rate must be > 0 for relative error");
    const double e = pairs.est[i] - pairs.ref[i];
    se += e * e;
    sa += std::abs(e);
    rel += std::abs(e) / pairs.ref[i];
  }
  const double mean_abs = sa / n;
  double sd = 0.0;
  for (std::size_t i = 0; i < pairs.est.size(); ++i) {
    const double d = std::abs(pairs.est[i] - pairs.ref[i]) - mean_abs;
    sd += d * d;
  }
  EvalReport r;
  r.rmse_bpm = std::sqrt(se / n);
  r.sd_abs_error_bpm = std::sqrt(sd / n);
  r.me_rate_percent = 100.0 * rel / n;
  r.applied_lag_s = lag_s;
  r.n_samples = pairs.est.size();
  return r;
}

// Rate trace from event timestamps: windows of `window_s` centered every
// `step_s`; each window with k >= 2 events yields 60 (k - 1) / (last - first).
inline FrequencyTrace events_to_rate(std::vector<double> events, double window_s = 10.0,
                                     double step_s = 1.0) {
  std::sort(events.begin(), events.end());
  detail::require(events.size() >= 2, "events_to_rate: need at least 2 events");
  FrequencyTrace out;
  const double half = 0.5 * window_s;
  for (double c = events.front() + half; c <= events.back() - half + 1e-9; c += step_s) {
    const auto lo = std::lower_bound(events.begin(), events.end(), c - half);
    const auto hi = std::lower_bound(events.begin(), events.end(), c + half);
    const auto k = hi - lo;
    if (k < 2) continue;
    const double span = *(hi - 1) - *lo;
    if (span <= 0.0) continue;
    out.time_axis.push_back(c);
    out.freqs_bpm.push_back(60.0 * static_cast<double>(k - 1) / span);
  }
  detail::require(out.time_axis.size() >= 2, "events_to_rate: too few events for a rate trace");
  return out;
}

}  // namespace vitaltrace
