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
#include "ncfl/types.hpp"

#include <torch/torch.h>

#include <optional>

namespace ncfl {

/// conv-relu-conv with identity skip.
class ResBlockImpl : public torch::nn::Module {
 public:
  explicit ResBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(ResBlock);

/// Three-scale encoder/decoder that turns (frame, warped features) into spatial-channel
/// attention logits m. The output convolution starts at zero, so sigmoid(m) = 1/2.
class FeatureAttentionImpl : public torch::nn::Module {
 public:
  FeatureAttentionImpl(int64_t feature_width, const std::vector<int>& channels, int64_t bottleneck_blocks);

  /// Logits [N, C_f, H, W]; H and W must be divisible by 4.
  torch::Tensor forward(const torch::Tensor& frame, const torch::Tensor& features);

  torch::nn::Conv2d& output_layer() { return out; }

 private:
  torch::nn::Conv2d in0{nullptr}, down1{nullptr}, down2{nullptr}, out{nullptr};
  torch::nn::ConvTranspose2d up1{nullptr}, up0{nullptr};
  ResBlock rb0{nullptr}, rb1{nullptr}, rb_up1{nullptr}, rb_up0{nullptr};
  torch::nn::Sequential bottleneck{nullptr};
};
TORCH_MODULE(FeatureAttention);

/// č = ĉ ⊙ sigmoid(attention(x, ĉ)).
FeatureMap attend(const torch::Tensor& frame, const FeatureMap& warped, FeatureAttention& net);

/// Encoder, decoder and prior of the feature compression bottleneck.
///
/// encoder: conv s2 -> GDN -> conv s2          (C_f -> hidden -> C_e, x4 down)
/// decoder: deconv x2 -> IGDN -> deconv x2     (C_e -> hidden -> C_f, x4 up)
/// prior:   conv s2 -> LReLU -> conv s2 -> LReLU -> conv  (C_f -> 3 C_e: mu, raw sigma, raw q)
class NeuralCompressorImpl : public torch::nn::Module {
 public:
  NeuralCompressorImpl(int64_t feature_width, int64_t latent_width, int64_t hidden, QuantMode mode,
                       double fixed_step = 0.0);

  LatentCode encode(const FeatureMap& attended);
  /// sigma = softplus(raw) + 1e-6, q = softplus(raw) + 1e-6 for adaptive mode;
  /// in fixed mode mu = 0 and q = fixed_step everywhere.
  PriorParams prior(const FeatureMap& attended);
  FeatureMap decode(const LatentCode& latent);

  QuantMode mode() const { return mode_; }
  int64_t latent_width() const { return latent_width_; }

  /// Raw head outputs [N, 3 C_e, H/4, W/4] before the positivity transforms.
  torch::Tensor prior_raw(const torch::Tensor& attended);
  static PriorParams prior_from_raw(const torch::Tensor& raw);

  torch::nn::Sequential encoder{nullptr}, decoder{nullptr}, prior_net{nullptr};

 private:
  QuantMode mode_;
  double fixed_step_;
  int64_t latent_width_;
};
TORCH_MODULE(NeuralCompressor);

LatentCode encode_features(const FeatureMap& attended, NeuralCompressor& net);
PriorParams prior(const FeatureMap& attended, NeuralCompressor& net);
FeatureMap decode_features(const LatentCode& latent, NeuralCompressor& net);

/// Everything refine_features produces; intermediate tensors are kept for analysis.
struct RefineResult {
  FeatureMap refined;             // c̃
  torch::Tensor ce_bits;          // scalar, 0 when the bottleneck is off
  FeatureMap attended;            // č
  std::optional<LatentCode> latent;        // ê (or e when quantization is off)
  std::optional<PriorParams> prior;
};

/// Attention + compression bottleneck, each stage switchable. With both stages off
/// the warped features pass through unchanged. `n_conv` swaps the bottleneck for a
/// plain full-resolution conv stack.
class FeatureRefinerImpl : public torch::nn::Module {
 public:
  explicit FeatureRefinerImpl(const ModelConfig& config);

  RefineResult forward(const torch::Tensor& frame, const FeatureMap& warped);

  bool has_attention() const { return !attention.is_empty(); }
  bool has_compressor() const { return !compressor.is_empty(); }

  FeatureAttention attention{nullptr};
  NeuralCompressor compressor{nullptr};
  torch::nn::Sequential conv_replacement{nullptr};
};
TORCH_MODULE(FeatureRefiner);

RefineResult refine_features(const torch::Tensor& frame, const FeatureMap& warped, FeatureRefiner& refiner);

}  // namespace ncfl
