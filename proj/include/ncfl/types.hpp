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

#include <torch/torch.h>

#include <optional>
#include <stdexcept>
#include <string>

namespace ncfl {

/// Raised when an input violates a documented precondition or invariant.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered RGB frames in [0,1], shaped [T, 3, H, W].
struct VideoClip {
  torch::Tensor frames;
  std::optional<double> frame_rate;
  std::string id;

  int64_t length() const { return frames.size(0); }
  int64_t height() const { return frames.size(2); }
  int64_t width() const { return frames.size(3); }

  /// Throws InvariantError unless T >= 1, C == 3, H, W >= 8 and all values finite.
  void validate() const;
};

/// Backward displacement field [N, 2, H, W] in pixels, channel 0 = dx, 1 = dy.
/// flow(p) points from the current frame into the previous one.
struct FlowField {
  torch::Tensor flow;
};

enum class FeatureStage { propagated, warped, attended, refined };

const char* to_string(FeatureStage stage);

/// Temporal features [N, C_f, H, W] tagged with the pipeline stage that produced them.
struct FeatureMap {
  torch::Tensor data;
  FeatureStage stage = FeatureStage::propagated;
};

/// Latent code [N, C_e, H/4, W/4].
struct LatentCode {
  torch::Tensor data;
  bool quantized = false;
};

/// Per-element Laplace location/scale and quantization step; all shaped like the latent.
struct PriorParams {
  torch::Tensor mu;
  torch::Tensor sigma;
  torch::Tensor q;
};

inline constexpr double kMinScale = 1e-6;

// Shape helpers shared by the modules.
void require(bool condition, const std::string& message);
void require_4d(const torch::Tensor& t, const std::string& what);
void require_same_spatial(const torch::Tensor& a, const torch::Tensor& b, const std::string& what);

}  // namespace ncfl
