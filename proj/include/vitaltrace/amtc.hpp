#pragma once

// Frequency-trace tracking on a spectrogram by dynamic programming.
//
// A trace picks one bin per column; its objective is the sum of the picked
// magnitudes minus lambda times the total absolute bin jump. The transition
// max over the previous column, max_b' D[b'] - lambda |b - b'|, is computed
// with one ascending and one descending scan, so a column costs O(F).
// Ties go to the lower bin index at every decision.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "vitaltrace/error.hpp"
#include "vitaltrace/spectral.hpp"

namespace vitaltrace {

struct AmtcParams {
  double jump_penalty_lambda = 0.15;
  std::size_t backtrack_len = 10;
  std::size_t num_traces = 1;
  std::size_t suppression_halfwidth_bins = 3;

  bool operator==(const AmtcParams&) const = default;
};

inline void validate(const AmtcParams& p) {
  detail::require(p.jump_penalty_lambda >= 0.0 && std::isfinite(p.jump_penalty_lambda),
                  "AmtcParams: lambda must be finite and >= 0");
  detail::require(p.backtrack_len >= 1, "AmtcParams: backtrack_len must be >= 1");
  detail::require(p.num_traces >= 1, "AmtcParams: num_traces must be >= 1");
  detail::require(p.suppression_halfwidth_bins >= 1,
                  "AmtcParams: suppression_halfwidth_bins must be >= 1");
}

struct FrequencyTrace {
  std::vector<std::size_t> bins;
  std::vector<double> freqs_bpm;
  std::vector<double> time_axis;
  double score = 0.0;

  std::size_t size() const noexcept { return freqs_bpm.size(); }

  bool operator==(const FrequencyTrace&) const = default;
};

namespace detail {

// One DP step: given the previous column's cumulative scores, fills the
// best predecessor of every bin and the new cumulative scores.
class TransitionScan {
 public:
  void step(std::span<const double> prev, std::span<const double> column, double lambda,
            std::span<double> next, std::span<std::size_t> from) {
    const std::size_t f = prev.size();
    up_.resize(f);
    // Ascending scan: best predecessor among b' <= b. Equal candidates keep
    // the earlier (lower) index.
    std::size_t best = 0;
    for (std::size_t b = 0; b < f; ++b) {
      if (b > 0 && prev[b] > prev[best] - lambda * static_cast<double>(b - best)) best = b;
      up_[b] = best;
    }
    // Descending scan over b' >= b; on ties the lower index wins, which
    // scanning downward means replacing on >=.
    best = f - 1;
    for (std::size_t i = f; i-- > 0;) {
      if (prev[i] >= prev[best] - lambda * static_cast<double>(best - i)) best = i;
      const std::size_t lo = up_[i];
      const double lo_val = prev[lo] - lambda * static_cast<double>(i - lo);
      const double hi_val = prev[best] - lambda * static_cast<double>(best - i);
      const bool take_lo = lo_val >= hi_val;
      from[i] = take_lo ? lo : best;
      next[i] = column[i] + (take_lo ? lo_val : hi_val);
    }
  }

 private:
  std::vector<std::size_t> up_;
};

inline std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline FrequencyTrace make_trace(const Spectrogram& spec, std::vector<std::size_t> bins,
                                 double score) {
  FrequencyTrace t;
  t.freqs_bpm.reserve(bins.size());
  for (std::size_t b : bins) t.freqs_bpm.push_back(spec.freq_axis_bpm[b]);
  t.bins = std::move(bins);
  t.time_axis = spec.time_axis;
  t.score = score;
  return t;
}

}  // namespace detail

// Objective of a bin path, accumulated column by column exactly as the DP
// accumulates it.
inline double path_score(const Spectrogram& spec, std::span<const std::size_t> bins,
                         double lambda) {
  detail::require(bins.size() == spec.columns(), "path_score: length mismatch");
  double acc = spec.at(0, bins[0]);
  for (std::size_t t = 1; t < bins.size(); ++t) {
    const auto jump = static_cast<double>(bins[t] > bins[t - 1] ? bins[t] - bins[t - 1]
                                                                : bins[t - 1] - bins[t]);
    acc = spec.at(t, bins[t]) + (acc - lambda * jump);
  }
  return acc;
}

// Globally optimal trace over the whole spectrogram.
inline FrequencyTrace track_trace(const Spectrogram& spec, const AmtcParams& params) {
  validate(params);
  detail::require(spec.columns() >= 1 && spec.bins() >= 2,
                  "track_trace: spectrogram needs >= 1 column and >= 2 bins");
  const std::size_t cols = spec.columns();
  const std::size_t f = spec.bins();
  std::vector<double> score(spec.column(0).begin(), spec.column(0).end());
  std::vector<double> next(f);
  std::vector<std::size_t> from(cols * f, 0);
  detail::TransitionScan scan;
  for (std::size_t t = 1; t < cols; ++t) {
    scan.step(score, spec.column(t), params.jump_penalty_lambda, next,
              std::span(from).subspan(t * f, f));
    score.swap(next);
  }
  std::vector<std::size_t> bins(cols);
  bins[cols - 1] = detail::argmax_lowest(score);
  const double total = score[bins[cols - 1]];
  for (std::size_t t = cols - 1; t > 0; --t) bins[t - 1] = from[t * f + bins[t]];
  return detail::make_trace(spec, std::move(bins), total);
}

// Causal tracker: after each pushed column the newest estimate is the DP
// argmax and the previous `backtrack_len` estimates are revised along the
// backpointers. Older estimates are frozen.
class OnlineTracker {
 public:
  OnlineTracker(std::vector<double> freq_axis_bpm, const AmtcParams& params)
      : freq_axis_(std::move(freq_axis_bpm)), params_(params) {
    validate(params_);
    detail::require(freq_axis_.size() >= 2, "OnlineTracker: need >= 2 bins");
  }

  // Returns the estimates after incorporating `column`.
  const std::vector<std::size_t>& push(std::span<const double> column, double time_s) {
    const std::size_t f = freq_axis_.size();
    detail::require(column.size() == f, "OnlineTracker: column size mismatch");
    if (score_.empty()) {
      score_.assign(column.begin(), column.end());
    } else {
      next_.resize(f);
      from_.emplace_back(f);
      scan_.step(score_, column, params_.jump_penalty_lambda, next_, from_.back());
      score_.swap(next_);
    }
    time_axis_.push_back(time_s);

    const std::size_t t = time_axis_.size() - 1;
    estimates_.push_back(detail::argmax_lowest(score_));
    std::size_t cur = estimates_[t];
    const std::size_t depth = std::min(params_.backtrack_len, t);
    for (std::size_t k = 1; k <= depth; ++k) {
      cur = from_[t - k][cur];  // from_[j] links column j+1 to column j
      estimates_[t - k] = cur;
    }
    return estimates_;
  }

  // Estimates at indices below this are frozen.
  std::size_t frozen_count() const noexcept {
    const std::size_t n = estimates_.size();
    return n > params_.backtrack_len ? n - params_.backtrack_len : 0;
  }

  const std::vector<std::size_t>& estimates() const noexcept { return estimates_; }

  // Current estimates. `score` is the DP optimum for the columns seen so
  // far; it equals the objective of the estimates only while nothing has
  // been frozen off the optimal path.
  FrequencyTrace trace() const {
    FrequencyTrace t;
    t.bins = estimates_;
    for (std::size_t b : estimates_) t.freqs_bpm.push_back(freq_axis_[b]);
    t.time_axis = time_axis_;
    t.score = score_.empty() ? 0.0 : score_[estimates_.back()];
    return t;
  }

 private:
  std::vector<double> freq_axis_;
  AmtcParams params_;
  detail::TransitionScan scan_;
  std::vector<double> score_, next_;
  std::vector<std::vector<std::size_t>> from_;
  std::vector<std::size_t> estimates_;
  std::vector<double> time_axis_;
};

inline FrequencyTrace track_online(const Spectrogram& spec, const AmtcParams& params) {
  detail::require(spec.columns() >= 1 && spec.bins() >= 2,
                  "track_online: spectrogram needs >= 1 column and >= 2 bins");
  OnlineTracker tracker(spec.freq_axis_bpm, params);
  for (std::size_t t = 0; t < spec.columns(); ++t) tracker.push(spec.column(t), spec.time_axis[t]);
  FrequencyTrace out = tracker.trace();
  out.score = path_score(spec, out.bins, params.jump_penalty_lambda);
  return out;
}

// Zeros bins within +-halfwidth of the trace in every column.
inline Spectrogram suppress_trace(const Spectrogram& spec, const FrequencyTrace& trace,
                                  std::size_t halfwidth) {
  detail::require(trace.bins.size() == spec.columns(),
                  "suppress_trace: trace length does not match spectrogram");
  Spectrogram out = spec;
  for (std::size_t t = 0; t < spec.columns(); ++t) {
    const std::size_t c = trace.bins[t];
    const std::size_t lo = c > halfwidth ? c - halfwidth : 0;
    const std::size_t hi = std::min(spec.bins() - 1, c + halfwidth);
    for (std::size_t b = lo; b <= hi; ++b) out.at(t, b) = 0.0;
  }
  return out;
}

struct TraceSet {
  std::vector<FrequencyTrace> traces;  // extraction order, strongest first
  std::vector<std::string> warnings;
};

inline TraceSet extract_traces(const Spectrogram& spec, const AmtcParams& params) {
  validate(params);
  TraceSet out;
  Spectrogram work = spec;
  for (std::size_t k = 0; k < params.num_traces; ++k) {
    const bool empty = std::all_of(work.magnitudes.begin(), work.magnitudes.end(),
                                   [](double m) { return m == 0.0; });
    if (empty) {
      out.warnings.push_back("spectrogram exhausted after " + std::to_string(k) + " of " +
                             std::to_string(params.num_traces) + " traces");
      break;
    }
    FrequencyTrace trace = track_trace(work, params);
    work = suppress_trace(work, trace, params.suppression_halfwidth_bins);
    out.traces.push_back(std::move(trace));
  }
  return out;
}

}  // namespace vitaltrace
