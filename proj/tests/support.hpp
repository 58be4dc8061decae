#pragma once

// Oracles and generators shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vitaltrace.hpp"

namespace vt_test {

using namespace vitaltrace;

// Periodic smooth texture: a sum of random plane waves whose frequencies are
// integer multiples of the image period, so a translated copy can be
// rendered exactly (wrap-around) at any sub-pixel offset.
class PeriodicTexture {
 public:
  PeriodicTexture(int w, int h, std::uint64_t seed, int waves = 24) : w_(w), h_(h) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> kx(-6, 6), ky(-6, 6);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (int i = 0; i < waves; ++i) {
      int a = kx(rng), b = ky(rng);
      if (a == 0 && b == 0) a = 1;
      waves_.push_back({a, b, phase(rng), 1.0 / std::sqrt(double(a * a + b * b))});
    }
    double norm = 0.0;
    for (const auto& wv : waves_) norm += wv.amp;
    for (auto& wv : waves_) wv.amp /= norm;
  }

  // Luma in [0.1, 0.9] of the texture translated by (dx, dy): the returned
  // frame satisfies out(x + dx, y + dy) = base(x, y).
  GrayFrame render(double dx = 0.0, double dy = 0.0) const {
    GrayFrame f(w_, h_);
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) {
        double v = 0.0;
        for (const auto& wv : waves_)
          v += wv.amp * std::sin(2.0 * std::numbers::pi *
                                     (wv.kx * (x - dx) / w_ + wv.ky * (y - dy) / h_) +
                                 wv.phase);
        f.at(x, y) = static_cast<float>(0.5 + 0.4 * v);
      }
    return f;
  }

 private:
  struct Wave {
    int kx, ky;
    double phase, amp;
  };
  int w_, h_;
  std::vector<Wave> waves_;
};

struct FlowStats {
  double mean_u = 0.0, mean_v = 0.0, mean_abs_u = 0.0, mean_mag = 0.0;
};

inline FlowStats interior_stats(const FlowField& f, int border) {
  FlowStats s;
  std::size_t n = 0;
  for (int y = border; y < f.height - border; ++y)
    for (int x = border; x < f.width - border; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * f.width + x;
      s.mean_u += f.u[i];
      s.mean_v += f.v[i];
      s.mean_abs_u += std::abs(f.u[i]);
      s.mean_mag += std::hypot(f.u[i], f.v[i]);
      ++n;
    }
  s.mean_u /= n;
  s.mean_v /= n;
  s.mean_abs_u /= n;
  s.mean_mag /= n;
  return s;
}

inline Spectrogram random_spectrogram(std::mt19937_64& rng, std::size_t cols, std::size_t bins) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Spectrogram s;
  s.fs = 1.0;
  for (std::size_t t = 0; t < cols; ++t) s.time_axis.push_back(static_cast<double>(t));
  for (std::size_t b = 0; b < bins; ++b) s.freq_axis_bpm.push_back(10.0 + static_cast<double>(b));
  for (std::size_t i = 0; i < cols * bins; ++i) s.magnitudes.push_back(uni(rng));
  return s;
}

// Exhaustive search over all F^T bin paths.
struct BruteForce {
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<std::size_t>> maximizers;  // paths attaining `best` exactly
  std::size_t min_jump = 0;                          // least total jump among maximizers
};

inline BruteForce brute_force(const Spectrogram& spec, double lambda) {
  const std::size_t T = spec.columns(), F = spec.bins();
  BruteForce out;
  std::vector<std::size_t> path(T, 0);
  while (true) {
    const double s = path_score(spec, path, lambda);
    if (s > out.best) {
      out.best = s;
      out.maximizers.assign(1, path);
    } else if (s == out.best) {
      out.maximizers.push_back(path);
    }
    std::size_t k = 0;
    while (k < T && ++path[k] == F) path[k++] = 0;
    if (k == T) break;
  }
  out.min_jump = std::numeric_limits<std::size_t>::max();
  for (const auto& p : out.maximizers) {
    std::size_t j = 0;
    for (std::size_t t = 1; t < T; ++t) j += p[t] > p[t - 1] ? p[t] - p[t - 1] : p[t - 1] - p[t];
    out.min_jump = std::min(out.min_jump, j);
  }
  return out;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline FrequencyTrace make_trace(std::vector<double> t, std::vector<double> f) {
  FrequencyTrace tr;
  tr.time_axis = std::move(t);
  tr.freqs_bpm = std::move(f);
  return tr;
}

// Fresh directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vitaltrace_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace vt_test
