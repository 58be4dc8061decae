#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace vitaltrace;

namespace {

constexpr int kW = 96, kH = 80, kBorder = 12;

}  // namespace

TEST(BuildPyramid, Sizes) {
  FlowParams p;
  p.pyramid_levels = 1;
  EXPECT_EQ(build_pyramid(GrayFrame(64, 64, 0.3f), p).size(), 1u);
  p.pyramid_levels = 3;
  const auto levels = build_pyramid(GrayFrame(64, 64, 0.3f), p);
  ASSERT_EQ(levels.size(), 3u);
  EXPECT_EQ(levels[0].width, 64);
  EXPECT_EQ(levels[1].width, 32);
  EXPECT_EQ(levels[2].width, 16);
  EXPECT_EQ(levels[2].height, 16);
}

TEST(BuildPyramid, ConstantStaysConstant) {
  FlowParams p;
  p.pyramid_levels = 4;
  for (const auto& level : build_pyramid(GrayFrame(80, 64, 0.42f), p))
    for (float v : level.luma) EXPECT_NEAR(v, 0.42f, 1e-6f);
}

TEST(BuildPyramid, TooSmall) {
  FlowParams p;
  p.pyramid_levels = 4;
  EXPECT_THROW(build_pyramid(GrayFrame(40, 40), p), ContractError);
  EXPECT_NO_THROW(build_pyramid(GrayFrame(64, 64), p));
}

TEST(Warp, ZeroFlowIsIdentity) {
  const auto f = vt_test::PeriodicTexture(32, 24, 1).render();
  EXPECT_EQ(warp(f, FlowField(32, 24)), f);
}

TEST(Warp, IntegerShiftOnRamp) {
  GrayFrame ramp(6, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 6; ++x) ramp.at(x, y) = static_cast<float>(x) / 10.0f;
  const auto out = warp(ramp, FlowField::constant(6, 3, 1.0f, 0.0f));
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 5; ++x) EXPECT_EQ(out.at(x, y), ramp.at(x + 1, y));
    EXPECT_EQ(out.at(5, y), ramp.at(5, y));  // clamped
  }
}

TEST(Warp, HalfPixelEdgeMidpoint) {
  GrayFrame edge(4, 1);
  edge.luma = {0.0f, 0.0f, 1.0f, 1.0f};
  const auto out = warp(edge, FlowField::constant(4, 1, 0.5f, 0.0f));
  EXPECT_FLOAT_EQ(out.luma[1], 0.5f);
}

TEST(EstimateFlow, DimensionMismatch) {
  EXPECT_THROW(estimate_flow(GrayFrame(64, 64), GrayFrame(64, 65), FlowParams{}), ContractError);
}

TEST(EstimateFlow, ZeroMotion) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto f = vt_test::PeriodicTexture(kW, kH, seed).render();
    const auto flow = estimate_flow(f, f, FlowParams{});
    EXPECT_LE(vt_test::interior_stats(flow, 0).mean_mag, 0.05);
  }
}

TEST(EstimateFlow, VerticalShiftOfThree) {
  const vt_test::PeriodicTexture tex(kW, kH, 5);
  const auto flow = estimate_flow(tex.render(), tex.render(0.0, 3.0), FlowParams{});
  const auto s = vt_test::interior_stats(flow, kBorder);
  EXPECT_GE(s.mean_v, 2.8);
  EXPECT_LE(s.mean_v, 3.2);
  EXPECT_LE(s.mean_abs_u, 0.2);
}

TEST(EstimateFlow, SubPixelShift) {
  const vt_test::PeriodicTexture tex(kW, kH, 6);
  const auto flow = estimate_flow(tex.render(), tex.render(0.0, 0.5), FlowParams{});
  const auto s = vt_test::interior_stats(flow, kBorder);
  EXPECT_GE(s.mean_v, 0.35);
  EXPECT_LE(s.mean_v, 0.65);
}

TEST(EstimateFlow, TranslationRecovery) {
  const vt_test::PeriodicTexture tex(kW, kH, 9);
  const auto ref = tex.render();
  for (auto [dx, dy] : {std::pair{-4, 1}, {2, -3}, {4, 4}, {-1, -4}}) {
    const auto flow = estimate_flow(ref, tex.render(dx, dy), FlowParams{});
    const auto s = vt_test::interior_stats(flow, kBorder);
    EXPECT_NEAR(s.mean_u, dx, 0.2) << dx << "," << dy;
    EXPECT_NEAR(s.mean_v, dy, 0.2) << dx << "," << dy;
  }
}

TEST(EstimateFlow, Deterministic) {
  const vt_test::PeriodicTexture tex(kW, kH, 4);
  const auto a = estimate_flow(tex.render(), tex.render(1.3, -0.7), FlowParams{});
  const auto b = estimate_flow(tex.render(), tex.render(1.3, -0.7), FlowParams{});
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.v, b.v);
}

TEST(EstimateFlow, WarmStartComposes) {
  const vt_test::PeriodicTexture tex(kW, kH, 8);
  const FlowEstimator est(tex.render(), FlowParams{});
  const auto seed = est.estimate(tex.render(0.0, 2.0));
  const auto flow = est.estimate(tex.render(0.0, 2.5), &seed);
  const auto s = vt_test::interior_stats(flow, kBorder);
  EXPECT_NEAR(s.mean_v, 2.5, 0.05);
  EXPECT_NEAR(s.mean_u, 0.0, 0.05);
}

TEST(FlowParamsValidation, RejectsBadValues) {
  FlowParams p;
  p.pyramid_levels = 0;
  EXPECT_THROW(validate(p), ContractError);
  p = {};
  p.smoothness_weight = 0.0;
  EXPECT_THROW(validate(p), ContractError);
  p = {};
  p.iterations_per_level = 0;
  EXPECT_THROW(validate(p), ContractError);
  p = {};
  p.downscale_factor = 1.0;
  EXPECT_THROW(validate(p), ContractError);
}
