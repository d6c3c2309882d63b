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
#include "ncfl/flow.hpp"
#include "ncfl/refine.hpp"
#include "ncfl/restore.hpp"
#include "ncfl/types.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <vector>

namespace ncfl {

/// Carries x_{t-1} and c_{t-1} between steps. At t = 0 there is no previous frame.
struct RecurrentState {
  torch::Tensor prev_frame;
  FeatureMap prev_features;
  int64_t t = 0;
};

/// Intermediate tensors of one step, kept only when requested.
struct StepTrace {
  torch::Tensor flow;          // mv_t
  torch::Tensor refined_flow;  // m̃v_t
  FeatureMap warped;           // ĉ_t
  FeatureMap refined;          // c̃_t
  std::optional<PriorParams> prior;
};

struct StepOutput {
  torch::Tensor output;   // ỹ_t
  torch::Tensor ce_bits;  // scalar
  RecurrentState state;
  StepTrace trace;
};

struct ClipRun {
  torch::Tensor outputs;               // [N, T, 3, H, W]
  std::vector<torch::Tensor> ce_bits;  // one scalar per frame
  std::vector<StepTrace> traces;       // forward-scan traces when requested
};

/// The full recurrent restoration network. Which submodules exist is decided by
/// the ablation switches in the config; the backward branch only exists for
/// bi-directional models.
class NcflModelImpl : public torch::nn::Module {
 public:
  explicit NcflModelImpl(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  RecurrentState initial_state(const torch::Tensor& first_frame) const;

  /// One recurrence step on frames [N,3,H,W] (H, W divisible by 4). For bi-directional
  /// models `future_features` must hold the backward-scan c̃ᵇ_t.
  StepOutput step(const RecurrentState& state, const torch::Tensor& frame, bool keep_trace = false,
                  const torch::Tensor& future_features = {});

  /// Runs a whole batch of clips [N,T,3,H,W]. Frames are padded to a multiple of 16
  /// and the outputs cropped back. `clamp_output` clamps ỹ to [0,1].
  ClipRun run(const torch::Tensor& frames, bool clamp_output = false, bool keep_trace = false);

  std::vector<torch::Tensor> flow_parameters();
  std::vector<torch::Tensor> main_parameters();

  PyramidFlowNet flow_net{nullptr};
  MvRefiner mv_refiner{nullptr};
  FeatureRefiner feature_refiner{nullptr};
  RestorationNet restoration{nullptr};

  // Backward scan (bi-directional only).
  MvRefiner mv_refiner_b{nullptr};
  FeatureRefiner feature_refiner_b{nullptr};
  RestorationNet restoration_b{nullptr};

 private:
  struct BranchOut {
    FeatureMap refined;
    torch::Tensor ce_bits;
    StepTrace trace;
  };
  BranchOut align_and_refine(const RecurrentState& state, const torch::Tensor& frame, MvRefiner& refiner,
                             FeatureRefiner& features, bool keep_trace);
  std::vector<torch::Tensor> backward_scan(const torch::Tensor& frames, std::vector<torch::Tensor>& ce_bits);

  ModelConfig config_;
};
TORCH_MODULE(NcflModel);

StepOutput step(const RecurrentState& state, const torch::Tensor& frame, NcflModel& model);

/// Restores one clip; `direction` must match the model's configuration.
/// Returns the clamped outputs and the per-frame CE.
std::pair<VideoClip, std::vector<double>> run_clip(const VideoClip& clip, NcflModel& model,
                                                   std::optional<Direction> direction = std::nullopt);

struct LossTerms {
  torch::Tensor total;  // scalar
  torch::Tensor l2;     // mean per-frame MSE
  torch::Tensor ce;     // mean per-frame CE bits
};

/// sum_t [ MSE(y_t, ỹ_t) + lambda * ce_t ] / T with outputs/targets [N,T,3,H,W].
LossTerms total_loss(const torch::Tensor& outputs, const torch::Tensor& targets,
                     const std::vector<torch::Tensor>& ce_bits, double lambda);

// Checkpoints: a tensor directory whose manifest "meta" holds the config and iteration.
void save_checkpoint(NcflModel& model, const std::filesystem::path& dir, int64_t iteration = 0);
NcflModel load_checkpoint(const std::filesystem::path& dir, int64_t* iteration = nullptr);

/// Copies parameter and buffer values from `src` into `dst` (same architecture).
void copy_state(NcflModel& dst, NcflModel& src);

}  // namespace ncfl
