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

#pragma once

#include "ncfl/config.hpp"
#include "ncfl/data.hpp"
#include "ncfl/pipeline.hpp"
#include "ncfl/trainer.hpp"

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ncfl {

constexpr double kPsnrCap = 100.0;

/// Noise seed of the held-out evaluation set, shared by every variant and training seed.
constexpr uint64_t kEvalNoiseSeed = 0xe7a1;

// SSIM constants: Gaussian window of 11 taps with sigma 1.5, K1 = 0.01, K2 = 0.03,
// dynamic range 1. Only windows that fit entirely inside the image are scored.
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

/// 10 log10(1 / MSE) over every element; MSE = 0 gives kPsnrCap.
double psnr(const torch::Tensor& a, const torch::Tensor& b);

/// Mean SSIM over all windows, channels and frames of tensors shaped [..., H, W].
double ssim(const torch::Tensor& a, const torch::Tensor& b);

/// Per-channel spatial median over a k x k window (k in {3, 5}) with reflect padding.
/// Accepts [..., H, W].
torch::Tensor median_filter(const torch::Tensor& frames, int k);

struct ClipScore {
  std::string id;
  double psnr = 0;
  double ssim = 0;
  double input_psnr = 0;  // degraded input vs clean
  double input_ssim = 0;
};

/// One evaluated model (or baseline) on one held-out set.
struct VariantRow {
  std::string variant;
  uint64_t seed = 0;
  std::string fingerprint;
  std::vector<ClipScore> clips;
  double mean_psnr = 0;
  double mean_ssim = 0;
  double mean_input_psnr = 0;
  double mean_input_ssim = 0;
};

struct EvalReport {
  double sigma = 0;
  std::vector<uint64_t> seeds;
  std::vector<VariantRow> rows;

  nlohmann::json to_json() const;
  /// One line per (variant, seed, clip) plus a "mean" line per row.
  std::string to_csv() const;
  /// Human-readable summary with one line per row.
  std::string to_table() const;
};

/// Writes <stem>.json and <stem>.csv into `dir`.
void write_report(const nlohmann::json& json, const std::string& csv, const std::filesystem::path& dir,
                  const std::string& stem);

/// Degrades each clean clip with AWGN (noise seed derived from `noise_seed` and the clip index).
std::vector<ClipPair> make_eval_pairs(const std::vector<VideoClip>& clean, double sigma_255, uint64_t noise_seed);

/// Restores every degraded clip and scores it against the clean clip.
VariantRow evaluate(NcflModel& model, const std::vector<ClipPair>& pairs, const std::string& name = "model");

/// Frame-wise median filter baseline.
VariantRow evaluate_median(const std::vector<ClipPair>& pairs, int k);

/// Pairwise and clean-reference feature distances for one clean clip under several noise
/// draws. Distances are root-mean-square differences per frame, averaged over frames
/// t >= 1 (at t = 0 the warped features are zero by construction) and over pairs.
struct RobustnessReport {
  double sigma = 0;
  std::vector<uint64_t> noise_seeds;
  std::optional<double> warped_pairwise;   // among ĉ; empty for a single seed
  std::optional<double> refined_pairwise;  // among c̃
  double warped_to_clean = 0;              // ĉ vs ĉ of the clean clip
  double refined_to_clean = 0;
  double warped_scale = 0;   // RMS magnitude of the clean-clip ĉ
  double refined_scale = 0;  // RMS magnitude of the clean-clip c̃

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

RobustnessReport robustness_report(NcflModel& model, const VideoClip& clean, double sigma_255, int n_seeds,
                                   uint64_t seed = 0);
RobustnessReport robustness_report(const std::filesystem::path& checkpoint, const VideoClip& clean,
                                   double sigma_255, int n_seeds, uint64_t seed = 0);

struct QmapExport {
  int64_t frame = 0;
  std::vector<std::filesystem::path> pngs;  // one per latent channel
  std::filesystem::path container;          // raw step sizes [C_e, h, w]
};

/// Runs the model on `clip` and writes the quantization-step map of one frame (the last
/// by default) as per-channel min-max normalized PNGs plus a raw container.
QmapExport export_qmaps(NcflModel& model, const VideoClip& clip, const std::filesystem::path& out_dir,
                        std::optional<int64_t> frame = std::nullopt);

/// Known ablation variants: full, no_mvr, no_ncfl, no_fa, ncfl_noq, ncfl_fixedq, m_conv,
/// n_conv, baseline (alias m_a), m_b, m_c, m_d, uni, bi, unet, wnet and lambda=<value>
/// where value is a decimal or a fraction such as 1/512.
ModelConfig apply_variant(const ModelConfig& base, const std::string& variant);
bool is_known_variant(const std::string& variant);

struct AblationOptions {
  std::vector<uint64_t> seeds;  // defaults to {config.seed}
  std::filesystem::path out_dir;  // per-run training output; empty = none
  bool verbose = false;
  bool include_median = false;  // add a median-3x3 row
  /// Called after each training run, before evaluation.
  std::function<void(const std::string& variant, uint64_t seed, TrainResult& result)> on_trained;
};

/// Trains every variant for every seed with the same budget and evaluates on the
/// held-out synthetic set at config.eval_sigma.
EvalReport ablate(const ModelConfig& config, const std::vector<std::string>& variants,
                  const AblationOptions& options = {});

/// Median over seeds of a variant's mean PSNR.
double median_psnr(const EvalReport& report, const std::string& variant);

}  // namespace ncfl
