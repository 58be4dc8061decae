#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace vitaltrace;

namespace {

Spectrogram from_rows(const std::vector<std::vector<double>>& rows) {
  Spectrogram s;
  s.fs = 1.0;
  for (std::size_t t = 0; t < rows.size(); ++t) s.time_axis.push_back(static_cast<double>(t));
  for (std::size_t b = 0; b < rows.front().size(); ++b)
    s.freq_axis_bpm.push_back(20.0 + static_cast<double>(b));
  for (const auto& r : rows) s.magnitudes.insert(s.magnitudes.end(), r.begin(), r.end());
  return s;
}

AmtcParams with_lambda(double lambda) {
  AmtcParams p;
  p.jump_penalty_lambda = lambda;
  return p;
}

// Ridge at `bins[t]` with value 1 over a 0.1 floor.
Spectrogram ridge(const std::vector<std::size_t>& bins, std::size_t F) {
  std::vector<std::vector<double>> rows;
  for (std::size_t b : bins) {
    std::vector<double> col(F, 0.1);
    col[b] = 1.0;
    rows.push_back(col);
  }
  return from_rows(rows);
}

}  // namespace

TEST(TrackTrace, SingleColumnArgmax) {
  std::vector<double> col(10, 0.2);
  col[7] = 0.9;
  const auto t = track_trace(from_rows({col}), AmtcParams{});
  ASSERT_EQ(t.bins.size(), 1u);
  EXPECT_EQ(t.bins[0], 7u);
  EXPECT_DOUBLE_EQ(t.freqs_bpm[0], 27.0);
  EXPECT_DOUBLE_EQ(t.score, 0.9);
}

TEST(TrackTrace, ConstantRidgeAnyLambda) {
  const auto s = ridge(std::vector<std::size_t>(12, 4), 9);
  for (double lambda : {0.0, 0.15, 1.0, 10.0})
    EXPECT_EQ(track_trace(s, with_lambda(lambda)).bins, std::vector<std::size_t>(12, 4));
}

TEST(TrackTrace, TwentySevenPathExample) {
  const auto s = from_rows({{0.9, 0.1, 0.0}, {0.0, 0.1, 0.9}, {0.9, 0.1, 0.0}});
  const auto t = track_trace(s, with_lambda(0.5));
  EXPECT_EQ(t.bins, (std::vector<std::size_t>{0, 0, 0}));
  EXPECT_DOUBLE_EQ(t.score, 1.8);
  EXPECT_DOUBLE_EQ(path_score(s, std::vector<std::size_t>{0, 2, 0}, 0.5), 0.7);
  const auto bf = vt_test::brute_force(s, 0.5);
  EXPECT_EQ(bf.best, t.score);
  ASSERT_EQ(bf.maximizers.size(), 1u);
  EXPECT_EQ(bf.maximizers[0], t.bins);
}

TEST(TrackTrace, LambdaZeroIsColumnArgmaxLowestTie) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = vt_test::random_spectrogram(rng, 8, 6);
    s.at(3, 1) = s.at(3, 4) = 2.0;  // tie
    const auto t = track_trace(s, with_lambda(0.0));
    for (std::size_t c = 0; c < s.columns(); ++c) {
      const auto col = s.column(c);
      EXPECT_EQ(t.bins[c], static_cast<std::size_t>(std::max_element(col.begin(), col.end()) - col.begin()));
    }
    EXPECT_EQ(t.bins[3], 1u);
  }
}

TEST(TrackTrace, OracleEquivalence) {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<std::size_t> T(1, 5), F(2, 5);
  const double lambdas[] = {0.0, 0.1, 0.5, 2.0};
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = vt_test::random_spectrogram(rng, T(rng), F(rng));
    const double lambda = lambdas[trial % 4];
    const auto t = track_trace(s, with_lambda(lambda));
    const auto bf = vt_test::brute_force(s, lambda);
    ASSERT_EQ(t.score, bf.best);
    EXPECT_EQ(path_score(s, t.bins, lambda), t.score);
    if (bf.maximizers.size() == 1) EXPECT_EQ(t.bins, bf.maximizers[0]);
  }
}

TEST(TrackTrace, LargeLambdaIsConstant) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = vt_test::random_spectrogram(rng, 10, 7);
    const auto t = track_trace(s, with_lambda(1.0 * 7 + 0.01));
    for (std::size_t b : t.bins) EXPECT_EQ(b, t.bins.front());
  }
}

TEST(TrackTrace, Preconditions) {
  EXPECT_THROW(track_trace(Spectrogram{}, AmtcParams{}), ContractError);
  EXPECT_THROW(track_trace(from_rows({{1.0}}), AmtcParams{}), ContractError);
  EXPECT_THROW(track_trace(from_rows({{1.0, 0.0}}), with_lambda(-1.0)), ContractError);
}

TEST(TrackTrace, FullSizeIsFast) {
  std::mt19937_64 rng(24);
  const auto s = vt_test::random_spectrogram(rng, 600, 1200);
  const auto start = std::chrono::steady_clock::now();
  const auto t = track_trace(s, AmtcParams{});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(t.bins.size(), 600u);
  EXPECT_LT(secs, 1.0);
}

TEST(TrackOnline, ConstantRidgeEveryEmission) {
  const auto s = ridge(std::vector<std::size_t>(30, 5), 12);
  OnlineTracker tracker(s.freq_axis_bpm, AmtcParams{});
  for (std::size_t t = 0; t < s.columns(); ++t)
    for (std::size_t b : tracker.push(s.column(t), s.time_axis[t])) EXPECT_EQ(b, 5u);
}

TEST(TrackOnline, FullBacktrackEqualsOffline) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = vt_test::random_spectrogram(rng, 1 + trial % 20, 2 + trial % 7);
    AmtcParams p;
    p.jump_penalty_lambda = 0.1 * (trial % 5);
    p.backtrack_len = s.columns();
    const auto online = track_online(s, p);
    const auto offline = track_trace(s, p);
    EXPECT_EQ(online.bins, offline.bins);
    EXPECT_EQ(online.score, offline.score);
  }
}

TEST(TrackOnline, StepRidgeFreezing) {
  std::vector<std::size_t> bins(40, 2);
  for (std::size_t t = 20; t < 40; ++t) bins[t] = 10;
  const auto s = ridge(bins, 14);
  AmtcParams p;
  p.backtrack_len = 10;
  OnlineTracker tracker(s.freq_axis_bpm, p);
  std::vector<std::size_t> frozen;
  for (std::size_t t = 0; t < s.columns(); ++t) {
    const auto& est = tracker.push(s.column(t), s.time_axis[t]);
    for (std::size_t i = 0; i < frozen.size(); ++i) ASSERT_EQ(est[i], frozen[i]);
    frozen.assign(est.begin(), est.begin() + static_cast<long>(tracker.frozen_count()));
  }
  EXPECT_EQ(tracker.estimates(), track_trace(s, p).bins);
}

TEST(ExtractTraces, TwoRidgesStrongFirst) {
  std::vector<std::vector<double>> rows;
  for (int t = 0; t < 25; ++t) {
    std::vector<double> col(60, 0.05);
    col[45] = 1.0;  // strong
    col[44] = col[46] = 0.6;
    col[15] = 0.4;  // weak
    col[14] = col[16] = 0.2;
    rows.push_back(col);
  }
  AmtcParams p;
  p.num_traces = 2;
  const auto set = extract_traces(from_rows(rows), p);
  ASSERT_EQ(set.traces.size(), 2u);
  EXPECT_TRUE(set.warnings.empty());
  EXPECT_EQ(set.traces[0].bins, std::vector<std::size_t>(25, 45));
  EXPECT_EQ(set.traces[1].bins, std::vector<std::size_t>(25, 15));
}

TEST(ExtractTraces, ExhaustedSpectrogramWarns) {
  const auto s = ridge(std::vector<std::size_t>(6, 2), 5);
  AmtcParams p;
  p.num_traces = 2;
  p.suppression_halfwidth_bins = 5;
  const auto set = extract_traces(s, p);
  EXPECT_EQ(set.traces.size(), 1u);
  ASSERT_EQ(set.warnings.size(), 1u);
}

TEST(SuppressTrace, Corridor) {
  std::mt19937_64 rng(26);
  auto s = vt_test::random_spectrogram(rng, 10, 12);
  const auto t = track_trace(s, AmtcParams{});
  const auto all = suppress_trace(s, t, 12);
  for (double m : all.magnitudes) EXPECT_EQ(m, 0.0);

  const auto sup = suppress_trace(s, t, 2);
  for (std::size_t c = 0; c < s.columns(); ++c)
    for (std::size_t b = 0; b < s.bins(); ++b) {
      const bool inside = (b + 2 >= t.bins[c]) && (b <= t.bins[c] + 2);
      EXPECT_EQ(sup.at(c, b), inside ? 0.0 : s.at(c, b));
    }
  const auto second = track_trace(sup, AmtcParams{});
  for (std::size_t c = 0; c < s.columns(); ++c) EXPECT_GT(sup.at(c, second.bins[c]), 0.0);
}

TEST(SuppressTrace, TwoRidgeArgmaxMoves) {
  std::vector<std::vector<double>> rows;
  for (int t = 0; t < 8; ++t) {
    std::vector<double> col(20, 0.0);
    col[4] = 1.0;
    col[14] = 0.5;
    rows.push_back(col);
  }
  const auto s = from_rows(rows);
  const auto sup = suppress_trace(s, track_trace(s, AmtcParams{}), 3);
  for (std::size_t c = 0; c < sup.columns(); ++c) {
    const auto col = sup.column(c);
    EXPECT_EQ(std::max_element(col.begin(), col.end()) - col.begin(), 14);
  }
}
