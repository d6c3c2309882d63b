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
#include "ncfl/types.hpp"

#include <torch/torch.h>

#include <vector>

namespace ncfl {

/// Channel-attention block:
///   r = conv(relu(conv(x)))
///   w = sigmoid(conv1x1(relu(conv1x1(GAP(r)))))
///   out = x + r * w
class ChannelAttentionBlockImpl : public torch::nn::Module {
 public:
  ChannelAttentionBlockImpl(int64_t channels, int64_t reduction);
  torch::Tensor forward(const torch::Tensor& x);

  /// Per-channel gate w [N, C, 1, 1] for input x.
  torch::Tensor gate(const torch::Tensor& x);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, squeeze{nullptr}, excite{nullptr};
};
TORCH_MODULE(ChannelAttentionBlock);

torch::Tensor cab(const torch::Tensor& x, ChannelAttentionBlock& block);

/// Five-scale U-Net trunk with CABs at every scale; skip features pass through a
/// conv before being added to the upsampled path. Returns the full-resolution
/// decoder features (channels[0] wide).
class UNetImpl : public torch::nn::Module {
 public:
  UNetImpl(int64_t in_channels, const std::vector<int>& channels, int64_t cab_per_scale, int64_t reduction);
  torch::Tensor forward(const torch::Tensor& x);

  const std::vector<int>& channels() const { return channels_; }

 private:
  std::vector<int> channels_;
  torch::nn::Conv2d head{nullptr};
  std::vector<torch::nn::Conv2d> down, skip;
  std::vector<torch::nn::ConvTranspose2d> up;
  std::vector<torch::nn::Sequential> enc_blocks, dec_blocks;
};
TORCH_MODULE(UNet);

struct RestoreOutput {
  torch::Tensor image;     // ỹ = x + residual, [N,3,H,W]
  FeatureMap features;     // c_t for the next step
};

/// Fusion/reconstruction: (x_t, refined features) -> (ỹ_t, c_t). The image head
/// predicts a residual and starts at zero, so an untrained network is the identity.
class RestorationNetImpl : public torch::nn::Module {
 public:
  RestorationNetImpl(int64_t input_feature_channels, int64_t feature_width, const std::vector<int>& channels,
                     int64_t cab_per_scale, int64_t reduction, RestoreVariant variant);

  /// Inputs must already be padded to a multiple of 16.
  RestoreOutput forward(const torch::Tensor& frame, const torch::Tensor& features);

  RestoreVariant variant() const { return variant_; }

  UNet first{nullptr}, second{nullptr};
  torch::nn::Conv2d image_head{nullptr}, feature_head{nullptr};

 private:
  RestoreVariant variant_;
  int64_t input_feature_channels_;
};
TORCH_MODULE(RestorationNet);

/// Reflect-pads (replicate when the image is too small to reflect) so H and W are
/// multiples of `multiple`. Returns the input untouched when already aligned.
torch::Tensor pad_to_multiple(const torch::Tensor& x, int64_t multiple);

/// Runs `net`, padding to a multiple of 16 when needed and cropping back.
/// `clamp_output` clamps ỹ to [0,1] (evaluation only).
RestoreOutput restore(const torch::Tensor& frame, const torch::Tensor& features, RestorationNet& net,
                      bool clamp_output = false);

}  // namespace ncfl
