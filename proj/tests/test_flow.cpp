// Copyright 2026 The NCFL Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ncfl/config.hpp"
#include "ncfl/data.hpp"
#include "ncfl/flow.hpp"
#include "ncfl/pipeline.hpp"
#include "ncfl/trainer.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace ncfl;

namespace {

torch::Tensor ramp_x(int64_t h, int64_t w) {
  return torch::arange(w, torch::kFloat32).view({1, 1, 1, w}).expand({1, 1, h, w}).contiguous();
}

torch::Tensor ramp_y(int64_t h, int64_t w) {
  return torch::arange(h, torch::kFloat32).view({1, 1, h, 1}).expand({1, 1, h, w}).contiguous();
}

torch::Tensor constant_flow(int64_t h, int64_t w, double dx, double dy) {
  auto f = torch::empty({1, 2, h, w});
  f.select(1, 0).fill_(dx);
  f.select(1, 1).fill_(dy);
  return f;
}

torch::Tensor interior(const torch::Tensor& t, int64_t m) {
  return t.slice(2, m, t.size(2) - m).slice(3, m, t.size(3) - m);
}

}  // namespace

TEST(Gdn, IdentityWithUnitBetaZeroGamma) {
  auto x = torch::randn({2, 4, 5, 5});
  auto y = gdn(x, torch::ones({4}), torch::zeros({4, 4}), false);
  EXPECT_TRUE(torch::allclose(y, x, 0, 0));
}

TEST(Gdn, ScalarValue) {
  auto y = gdn(torch::full({1, 1, 1, 1}, 3.0, torch::kFloat64), torch::ones({1}, torch::kFloat64),
               torch::ones({1, 1}, torch::kFloat64), false);
  EXPECT_NEAR(y.item<double>(), oracle::gdn(3, 1, 1), 1e-12);
  EXPECT_NEAR(y.item<double>(), 0.94868, 1e-5);
}

TEST(Gdn, InverseIsNearInverseForSmallDiagonalGamma) {
  torch::manual_seed(1);
  auto x = torch::rand({1, 6, 8, 8}, torch::kFloat64) * 2 - 1;
  auto beta = torch::ones({6}, torch::kFloat64);
  auto gamma = torch::eye(6, torch::kFloat64) * 1e-4;
  auto back = gdn(gdn(x, beta, gamma, false), beta, gamma, true);
  EXPECT_LT(((back - x).abs() / x.abs().clamp_min(1e-12)).max().item<double>(), 1e-3);
}

TEST(Gdn, PreservesSignAndZero) {
  auto x = torch::randn({1, 3, 6, 6});
  x.index_put_({0, 0, 0, 0}, 0.0f);
  auto gamma = torch::rand({3, 3});
  for (bool inverse : {false, true}) {
    auto y = gdn(x, torch::rand({3}) + 0.1, gamma, inverse);
    EXPECT_TRUE(torch::equal(torch::sign(y), torch::sign(x)));
    EXPECT_EQ(y[0][0][0][0].item<float>(), 0.0f);
  }
}

TEST(Gdn, RejectsInvalidParameters) {
  auto x = torch::randn({1, 2, 3, 3});
  EXPECT_THROW(gdn(x, torch::tensor({1.0f, 0.0f}), torch::zeros({2, 2}), false), InvariantError);
  EXPECT_THROW(gdn(x, torch::ones({2}), -torch::ones({2, 2}), false), InvariantError);
}

TEST(Warp, ZeroFlowIsExactIdentity) {
  auto x = torch::randn({2, 5, 12, 10});
  EXPECT_TRUE(torch::equal(warp(x, torch::zeros({2, 2, 12, 10})), x));
}

TEST(Warp, IntegerShiftOnRamp) {
  auto out = warp(ramp_x(16, 16), constant_flow(16, 16, 1, 0));
  EXPECT_LT((interior(out, 2) - interior(ramp_x(16, 16) + 1, 2)).abs().max().item<float>(), 1e-6);
  auto out_y = warp(ramp_y(16, 16), constant_flow(16, 16, 0, -2));
  EXPECT_LT((interior(out_y, 3) - interior(ramp_y(16, 16) - 2, 3)).abs().max().item<float>(), 1e-6);
}

TEST(Warp, HalfPixelShiftOnRamp) {
  auto out = warp(ramp_x(16, 16), constant_flow(16, 16, 0.5, 0));
  EXPECT_LT((interior(out, 2) - interior(ramp_x(16, 16) + 0.5, 2)).abs().max().item<float>(), 1e-6);
}

TEST(Warp, ClampsToBorder) {
  auto out = warp(ramp_x(8, 8), constant_flow(8, 8, 100, 0));
  EXPECT_TRUE(torch::allclose(out, torch::full_like(out, 7.0f)));
}

TEST(Warp, LinearInFeatures) {
  torch::manual_seed(2);
  auto f1 = torch::randn({1, 4, 12, 12}), f2 = torch::randn({1, 4, 12, 12});
  auto v = torch::randn({1, 2, 12, 12}) * 3;
  auto lhs = warp(2.5 * f1 - 0.7 * f2, v);
  auto rhs = 2.5 * warp(f1, v) - 0.7 * warp(f2, v);
  EXPECT_LT((lhs - rhs).abs().max().item<float>(), 1e-5);
}

TEST(Warp, RejectsSizeMismatch) {
  EXPECT_THROW(warp(torch::zeros({1, 3, 8, 8}), torch::zeros({1, 2, 8, 6})), InvariantError);
}

TEST(Warp, FeatureMapStage) {
  FeatureMap in{torch::randn({1, 4, 8, 8}), FeatureStage::propagated};
  auto out = warp(in, FlowField{torch::zeros({1, 2, 8, 8})});
  EXPECT_EQ(out.stage, FeatureStage::warped);
}

TEST(FlowNet, ZeroInitGivesZeroFlowAndShape) {
  PyramidFlowNet net(16);
  auto frame = torch::rand({2, 3, 32, 24});
  auto flow = estimate_flow(frame, frame, net).flow;
  EXPECT_EQ(flow.sizes(), (std::vector<int64_t>{2, 2, 32, 24}));
  EXPECT_EQ(flow.abs().max().item<float>(), 0.0f);
}

TEST(FlowNet, RejectsIndivisibleSize) {
  PyramidFlowNet net(8);
  EXPECT_THROW(net->forward(torch::rand({1, 3, 30, 32}), torch::rand({1, 3, 30, 32})), InvariantError);
}

TEST(FlowNet, UpsampleDoublesMagnitude) {
  auto up = upsample_flow(torch::full({1, 2, 4, 4}, 1.5f));
  EXPECT_EQ(up.sizes(), (std::vector<int64_t>{1, 2, 8, 8}));
  EXPECT_TRUE(torch::allclose(up, torch::full_like(up, 3.0f)));
}

TEST(FlowNet, LearnsSyntheticShifts) {
  auto config = preset_config("desk");
  torch::manual_seed(0);
  NcflModel model(config);
  pretrain_motion(model, config, config.flow_pretrain_iters, 0);
  const double epe = flow_endpoint_error(model->flow_net, 8, 32, 2.0, 999);
  EXPECT_LT(epe, 0.5);

  // Shifting both inputs by the same integer offset leaves the interior flow unchanged.
  torch::NoGradGuard guard;
  auto sample = make_shift_batch(2, 48, 2.0, 4242);
  auto base = model->flow_net->forward(sample.prev.slice(2, 0, 32).slice(3, 0, 32),
                                       sample.cur.slice(2, 0, 32).slice(3, 0, 32));
  auto moved = model->flow_net->forward(sample.prev.slice(2, 8, 40).slice(3, 8, 40),
                                        sample.cur.slice(2, 8, 40).slice(3, 8, 40));
  auto a = base.slice(2, 12, 24).slice(3, 12, 24), b = moved.slice(2, 4, 16).slice(3, 4, 16);
  EXPECT_LT((a - b).abs().mean().item<float>(), 0.1);
}

TEST(MvRefiner, ShapePreservedForEvenSizes) {
  MvRefiner refiner(8);
  {
    torch::NoGradGuard guard;
    for (auto& p : refiner->parameters()) p.normal_(0, 0.1);
  }
  for (auto [h, w] : {std::pair<int64_t, int64_t>{6, 10}, {16, 16}, {14, 22}}) {
    auto out = refine_mv(FlowField{torch::randn({1, 2, h, w})}, refiner).flow;
    EXPECT_EQ(out.sizes(), (std::vector<int64_t>{1, 2, h, w}));
  }
}

TEST(MvRefiner, ZeroFinalLayerGivesZeroFlow) {
  for (auto kind : {RefinerKind::autoencoder, RefinerKind::plain_conv}) {
    MvRefiner refiner(8, kind);
    auto out = refiner->forward(torch::randn({1, 2, 16, 16}) * 3);
    EXPECT_EQ(out.abs().max().item<float>(), 0.0f);
  }
}

TEST(MvRefiner, BypassedWhenDisabled) {
  auto config = preset_config("desk");
  config.mvr = false;
  NcflModel model(config);
  EXPECT_TRUE(model->mv_refiner.is_empty());
  {
    torch::NoGradGuard guard;
    for (auto& p : model->flow_net->parameters()) p.normal_(0, 0.05);
  }
  auto frames = torch::rand({1, 2, 3, 32, 32});
  auto run = model->run(frames, false, true);
  EXPECT_TRUE(torch::equal(run.traces[1].flow, run.traces[1].refined_flow));
}
