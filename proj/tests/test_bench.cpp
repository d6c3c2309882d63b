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

#include "ncfl/bench.hpp"
#include "ncfl/tensor_io.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ncfl;
namespace fs = std::filesystem;
using ncfl::fixtures::tiny_config;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ncfl_bench_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<double> to_vector(const torch::Tensor& t) {
  auto c = t.to(torch::kFloat64).contiguous();
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Psnr, IdenticalIsCapped) {
  auto a = torch::rand({3, 8, 8});
  EXPECT_EQ(psnr(a, a), kPsnrCap);
}

TEST(Psnr, KnownValues) {
  auto a = torch::zeros({1, 4, 4});
  EXPECT_NEAR(psnr(a, a + 1.0 / 255), 48.1308036, 1e-5);
  EXPECT_NEAR(psnr(a, a + 0.1), 20.0, 1e-5);
}

TEST(Psnr, MatchesOracleOnRandomImages) {
  torch::manual_seed(1);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = torch::rand({3, 8, 8}), b = torch::rand({3, 8, 8});
    EXPECT_NEAR(psnr(a, b), oracle::psnr(to_vector(a), to_vector(b)), 1e-6);
  }
}

TEST(Psnr, ShapeMismatchRejected) {
  EXPECT_THROW(psnr(torch::zeros({3, 8, 8}), torch::zeros({3, 8, 9})), InvariantError);
}

TEST(Ssim, IdenticalIsOne) {
  auto a = torch::rand({3, 16, 16});
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, SymmetricAndNotNegativeSelfSimilar) {
  auto a = torch::rand({1, 16, 16});
  auto b = 1 - a;
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  EXPECT_LT(ssim(a, b), 0.0);
}

TEST(Ssim, ConstantOffsetMatchesOracle) {
  auto a = torch::full({1, 16, 16}, 0.4);
  auto b = a + 0.1;
  // Constant images: only the luminance term differs from 1.
  const double c1 = 0.01 * 0.01;
  const double expected = (2 * 0.4 * 0.5 + c1) / (0.4 * 0.4 + 0.5 * 0.5 + c1);
  EXPECT_NEAR(ssim(a, b), expected, 1e-6);
  EXPECT_NEAR(ssim(a, b), oracle::ssim(to_vector(a), to_vector(b), 16, 16), 1e-6);
}

TEST(Ssim, MatchesOracleOnRandomImages) {
  torch::manual_seed(2);
  for (int trial = 0; trial < 5; ++trial) {
    auto a = torch::rand({1, 16, 16});
    auto b = (a + torch::randn({1, 16, 16}) * 0.1).clamp(0, 1);
    EXPECT_NEAR(ssim(a, b), oracle::ssim(to_vector(a), to_vector(b), 16, 16), 1e-6);
  }
  // Per-channel mean for multi-channel input.
  auto a = torch::rand({3, 16, 16}), b = torch::rand({3, 16, 16});
  double mean = 0;
  for (int c = 0; c < 3; ++c) mean += oracle::ssim(to_vector(a[c]), to_vector(b[c]), 16, 16) / 3;
  EXPECT_NEAR(ssim(a, b), mean, 1e-6);
}

TEST(Ssim, SmallerThanWindowRejected) {
  EXPECT_THROW(ssim(torch::rand({1, 8, 8}), torch::rand({1, 8, 8})), InvariantError);
}

TEST(MedianFilter, ConstantAndImpulse) {
  auto flat = torch::full({2, 3, 9, 9}, 0.3f);
  EXPECT_TRUE(torch::allclose(median_filter(flat, 3), flat));
  auto impulse = torch::zeros({1, 1, 9, 9});
  impulse[0][0][4][4] = 1.0f;
  EXPECT_EQ(median_filter(impulse, 3).abs().max().item<float>(), 0.0f);
  EXPECT_EQ(median_filter(impulse, 5).abs().max().item<float>(), 0.0f);
}

TEST(MedianFilter, MatchesOracle) {
  torch::manual_seed(3);
  auto x = torch::rand({1, 7, 7});
  auto out = median_filter(x, 3);
  for (int64_t y = 1; y < 6; ++y) {
    for (int64_t xx = 1; xx < 6; ++xx) {
      std::vector<double> window;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) window.push_back(x[0][y + dy][xx + dx].item<double>());
      }
      EXPECT_NEAR(out[0][y][xx].item<double>(), oracle::median(window), 1e-7);
    }
  }
}

TEST(MedianFilter, RejectsUnsupportedKernel) {
  EXPECT_THROW(median_filter(torch::rand({1, 8, 8}), 4), InvariantError);
  EXPECT_THROW(median_filter(torch::rand({1, 8, 8}), 7), InvariantError);
}

TEST(Variants, ApplyFlags) {
  const auto base = preset_config("desk");
  EXPECT_FALSE(apply_variant(base, "no_mvr").mvr);
  EXPECT_FALSE(apply_variant(base, "no_ncfl").ncfl);
  EXPECT_FALSE(apply_variant(base, "no_fa").fa);
  EXPECT_EQ(apply_variant(base, "ncfl_noq").quant_mode, QuantMode::none);
  auto fixed = apply_variant(base, "ncfl_fixedq");
  EXPECT_EQ(fixed.quant_mode, QuantMode::fixed);
  EXPECT_GT(fixed.fixed_step, 0.0);
  auto a = apply_variant(base, "m_a");
  EXPECT_FALSE(a.mvr || a.ncfl || a.fa);
  EXPECT_EQ(config_to_json(a), config_to_json(apply_variant(base, "baseline")));
  EXPECT_EQ(config_to_json(apply_variant(base, "m_d")), config_to_json(apply_variant(base, "full")));
  EXPECT_DOUBLE_EQ(apply_variant(base, "lambda=1/512").lambda_ce, 1.0 / 512);
  EXPECT_DOUBLE_EQ(apply_variant(base, "lambda=0.25").lambda_ce, 0.25);
  EXPECT_EQ(apply_variant(base, "bi").direction, Direction::bi);
  EXPECT_THROW(apply_variant(base, "m_z"), std::invalid_argument);
  EXPECT_THROW(apply_variant(base, "lambda=abc"), std::invalid_argument);
  EXPECT_FALSE(is_known_variant("nope"));
  EXPECT_TRUE(is_known_variant("lambda=1/2048"));
}

TEST(Ablate, RejectsEmptyAndUnknownVariants) {
  EXPECT_THROW(ablate(tiny_config(), {}), std::invalid_argument);
  EXPECT_THROW(ablate(tiny_config(), {"full", "mystery"}), std::invalid_argument);
}

TEST(Ablate, LambdaSweepGivesOneRowPerValue) {
  auto config = tiny_config();
  config.total_iters = 2;
  config.stage1_iters = 1;
  config.flow_freeze_iters = 1;
  int trained = 0;
  AblationOptions options;
  options.include_median = true;
  options.on_trained = [&](const std::string&, uint64_t, TrainResult& r) {
    ++trained;
    EXPECT_EQ(r.history.size(), 2u);
  };
  auto report = ablate(config, {"lambda=1/512", "lambda=1/2048", "lambda=1/4096"}, options);
  EXPECT_EQ(trained, 3);
  ASSERT_EQ(report.rows.size(), 4u);
  EXPECT_EQ(report.rows[0].variant, "median3");
  EXPECT_EQ(report.rows[1].variant, "lambda=1/512");
  EXPECT_EQ(report.rows[3].variant, "lambda=1/4096");
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.clips.size(), static_cast<size_t>(config.synth_eval_clips));
    EXPECT_TRUE(std::isfinite(row.mean_psnr));
  }
  EXPECT_EQ(report.to_json()["rows"].size(), 4u);
}

TEST(Report, JsonCsvAndTableAgree) {
  EvalReport report;
  report.sigma = 25;
  report.seeds = {0};
  VariantRow row;
  row.variant = "full";
  row.clips = {{"clip0", 30.5, 0.9, 20.1, 0.5}, {"clip1", 31.5, 0.8, 20.3, 0.4}};
  row.mean_psnr = 31.0;
  row.mean_ssim = 0.85;
  row.mean_input_psnr = 20.2;
  row.mean_input_ssim = 0.45;
  report.rows = {row};
  auto json = report.to_json();
  EXPECT_DOUBLE_EQ(json["rows"][0]["mean_psnr"].get<double>(), 31.0);
  EXPECT_EQ(json["rows"][0]["clips"].size(), 2u);
  EXPECT_NE(report.to_csv().find("full"), std::string::npos);
  EXPECT_NE(report.to_table().find("31.0"), std::string::npos);

  auto dir = temp_dir("report");
  write_report(json, report.to_csv(), dir, "eval");
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "eval.json")), json);
  EXPECT_EQ(slurp(dir / "eval.csv"), report.to_csv());
}

TEST(Evaluate, ReproducibleAcrossRuns) {
  auto config = tiny_config();
  torch::manual_seed(0);
  NcflModel model(config);
  auto pairs = make_eval_pairs(make_heldout_clips(config), 25, 7);
  auto a = evaluate(model, pairs, "m"), b = evaluate(model, pairs, "m");
  EXPECT_EQ(a.mean_psnr, b.mean_psnr);
  EXPECT_EQ(a.mean_ssim, b.mean_ssim);
  // Untrained restoration starts as identity, so output matches the input score.
  EXPECT_NEAR(a.mean_psnr, a.mean_input_psnr, 1e-9);
  auto m = evaluate_median(pairs, 3);
  EXPECT_GT(m.mean_psnr, m.mean_input_psnr);
}

TEST(Robustness, ZeroSigmaGivesZeroDistances) {
  auto config = tiny_config();
  torch::manual_seed(0);
  NcflModel model(config);
  auto clip = make_heldout_clips(config)[0];
  auto r = robustness_report(model, clip, 0.0, 3);
  ASSERT_TRUE(r.warped_pairwise.has_value());
  EXPECT_EQ(*r.warped_pairwise, 0.0);
  EXPECT_EQ(*r.refined_pairwise, 0.0);
  EXPECT_EQ(r.warped_to_clean, 0.0);
  EXPECT_EQ(r.refined_to_clean, 0.0);
}

TEST(Robustness, SingleSeedHasNoPairwiseTerm) {
  auto config = tiny_config();
  torch::manual_seed(0);
  NcflModel model(config);
  auto r = robustness_report(model, make_heldout_clips(config)[0], 25.0, 1);
  EXPECT_FALSE(r.warped_pairwise.has_value());
  EXPECT_FALSE(r.refined_pairwise.has_value());
  EXPECT_TRUE(r.to_json()["warped_pairwise"].is_null());
  EXPECT_GE(r.warped_to_clean, 0.0);
}

TEST(Qmap, WritesOnePngPerLatentChannel) {
  auto config = tiny_config();
  torch::manual_seed(0);
  NcflModel model(config);
  auto clip = make_heldout_clips(config)[0];
  auto dir = temp_dir("qmap");
  auto out = export_qmaps(model, clip, dir);
  EXPECT_EQ(out.frame, clip.frames.size(0) - 1);
  EXPECT_EQ(out.pngs.size(), static_cast<size_t>(config.latent_width));
  for (const auto& p : out.pngs) EXPECT_TRUE(fs::exists(p));
  auto q = read_tensor(out.container);
  EXPECT_EQ(q.sizes(), (std::vector<int64_t>{config.latent_width, config.synth_size / 4, config.synth_size / 4}));
  EXPECT_GT(q.min().item<float>(), 0.0f);

  auto noq = apply_variant(config, "ncfl_noq");
  NcflModel plain(noq);
  EXPECT_THROW(export_qmaps(plain, clip, temp_dir("qmap_noq")), std::runtime_error);
}
