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

#include "ncfl/refine.hpp"

#include "ncfl/entropy.hpp"

namespace ncfl {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2dOptions conv3(int64_t in, int64_t out, int64_t stride = 1) {
  return torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1);
}

torch::nn::ConvTranspose2dOptions up2(int64_t in, int64_t out) {
  return torch::nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1);
}

// Initial q = softplus(-2) ~ 0.13: start from a fine grid and let the rate term coarsen it.
constexpr double kInitialRawStep = -2.0;

}  // namespace

ResBlockImpl::ResBlockImpl(int64_t channels) {
  conv1 = register_module("conv1", torch::nn::Conv2d(conv3(channels, channels)));
  conv2 = register_module("conv2", torch::nn::Conv2d(conv3(channels, channels)));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) { return x + conv2(torch::relu(conv1(x))); }

FeatureAttentionImpl::FeatureAttentionImpl(int64_t feature_width, const std::vector<int>& channels,
                                           int64_t bottleneck_blocks) {
  require(channels.size() == 3, "FeatureAttention: expected 3 scales");
  const int64_t c0 = channels[0], c1 = channels[1], c2 = channels[2];
  in0 = register_module("in0", torch::nn::Conv2d(conv3(3 + feature_width, c0)));
  rb0 = register_module("rb0", ResBlock(c0));
  down1 = register_module("down1", torch::nn::Conv2d(conv3(c0, c1, 2)));
  rb1 = register_module("rb1", ResBlock(c1));
  down2 = register_module("down2", torch::nn::Conv2d(conv3(c1, c2, 2)));
  bottleneck = torch::nn::Sequential();
  for (int64_t i = 0; i < bottleneck_blocks; ++i) bottleneck->push_back(ResBlock(c2));
  register_module("bottleneck", bottleneck);
  up1 = register_module("up1", torch::nn::ConvTranspose2d(up2(c2, c1)));
  rb_up1 = register_module("rb_up1", ResBlock(c1));
  up0 = register_module("up0", torch::nn::ConvTranspose2d(up2(c1, c0)));
  rb_up0 = register_module("rb_up0", ResBlock(c0));
  out = register_module("out", torch::nn::Conv2d(conv3(c0, feature_width)));
  torch::NoGradGuard guard;
  out->weight.zero_();
  out->bias.zero_();
}

torch::Tensor FeatureAttentionImpl::forward(const torch::Tensor& frame, const torch::Tensor& features) {
  require_same_spatial(frame, features, "attend");
  require(frame.size(2) % 4 == 0 && frame.size(3) % 4 == 0, "attend: H, W must be divisible by 4");
  auto s0 = rb0(torch::relu(in0(torch::cat({frame, features}, 1))));
  auto s1 = rb1(torch::relu(down1(s0)));
  auto s2 = torch::relu(down2(s1));
  if (!bottleneck->is_empty()) s2 = bottleneck->forward(s2);
  auto u1 = rb_up1(torch::relu(up1(s2)) + s1);
  auto u0 = rb_up0(torch::relu(up0(u1)) + s0);
  return out(u0);
}

FeatureMap attend(const torch::Tensor& frame, const FeatureMap& warped, FeatureAttention& net) {
  require(warped.stage == FeatureStage::warped, "attend: expected warped features");
  auto logits = net->forward(frame, warped.data);
  return {warped.data * torch::sigmoid(logits), FeatureStage::attended};
}

NeuralCompressorImpl::NeuralCompressorImpl(int64_t feature_width, int64_t latent_width, int64_t hidden,
                                           QuantMode mode, double fixed_step)
    : mode_(mode), fixed_step_(fixed_step), latent_width_(latent_width) {
  require(mode != QuantMode::fixed || fixed_step > 0, "NeuralCompressor: fixed mode needs a positive step");
  encoder = register_module(
      "encoder", torch::nn::Sequential(torch::nn::Conv2d(conv3(feature_width, hidden, 2)), Gdn(hidden, false),
                                       torch::nn::Conv2d(conv3(hidden, latent_width, 2))));
  decoder = register_module(
      "decoder", torch::nn::Sequential(torch::nn::ConvTranspose2d(up2(latent_width, hidden)), Gdn(hidden, true),
                                       torch::nn::ConvTranspose2d(up2(hidden, feature_width))));
  if (mode != QuantMode::none) {
    auto head = torch::nn::Conv2d(conv3(hidden, 3 * latent_width));
    {
      torch::NoGradGuard guard;
      head->bias.slice(0, 2 * latent_width, 3 * latent_width).fill_(kInitialRawStep);
    }
    prior_net = register_module(
        "prior", torch::nn::Sequential(torch::nn::Conv2d(conv3(feature_width, hidden, 2)),
                                       torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.1)),
                                       torch::nn::Conv2d(conv3(hidden, hidden, 2)),
                                       torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.1)), head));
  }
}

LatentCode NeuralCompressorImpl::encode(const FeatureMap& attended) {
  require_4d(attended.data, "encode_features");
  require(attended.data.size(2) % 4 == 0 && attended.data.size(3) % 4 == 0,
          "encode_features: H, W must be divisible by 4");
  return {encoder->forward(attended.data), false};
}

torch::Tensor NeuralCompressorImpl::prior_raw(const torch::Tensor& attended) {
  require(!prior_net.is_empty(), "prior: quantization is disabled for this model");
  require(attended.size(2) % 4 == 0 && attended.size(3) % 4 == 0, "prior: H, W must be divisible by 4");
  return prior_net->forward(attended);
}

PriorParams NeuralCompressorImpl::prior_from_raw(const torch::Tensor& raw) {
  auto parts = raw.chunk(3, 1);
  return {parts[0], F::softplus(parts[1]) + kMinScale, F::softplus(parts[2]) + kMinScale};
}

PriorParams NeuralCompressorImpl::prior(const FeatureMap& attended) {
  auto p = prior_from_raw(prior_raw(attended.data));
  if (mode_ == QuantMode::fixed) {
    p.mu = torch::zeros_like(p.mu);
    p.q = torch::full_like(p.q, fixed_step_);
  }
  return p;
}

FeatureMap NeuralCompressorImpl::decode(const LatentCode& latent) {
  require_4d(latent.data, "decode_features");
  require(latent.data.size(1) == latent_width_, "decode_features: latent channel mismatch");
  require(latent.quantized || mode_ == QuantMode::none, "decode_features: latent must be quantized");
  return {decoder->forward(latent.data), FeatureStage::refined};
}

LatentCode encode_features(const FeatureMap& attended, NeuralCompressor& net) { return net->encode(attended); }
PriorParams prior(const FeatureMap& attended, NeuralCompressor& net) { return net->prior(attended); }
FeatureMap decode_features(const LatentCode& latent, NeuralCompressor& net) { return net->decode(latent); }

FeatureRefinerImpl::FeatureRefinerImpl(const ModelConfig& config) {
  if (config.fa) {
    attention = register_module("attention",
                                FeatureAttention(config.feature_width, config.fa_channels, config.fa_resblocks));
  }
  if (config.n_conv) {
    const int64_t c = config.feature_width, h = config.ncfl_hidden;
    conv_replacement = register_module(
        "conv_replacement",
        torch::nn::Sequential(torch::nn::Conv2d(conv3(c, h)), torch::nn::ReLU(), torch::nn::Conv2d(conv3(h, h)),
                              torch::nn::ReLU(), torch::nn::Conv2d(conv3(h, c))));
  } else if (config.ncfl) {
    compressor = register_module("compressor", NeuralCompressor(config.feature_width, config.latent_width,
                                                                config.ncfl_hidden, config.quant_mode,
                                                                config.fixed_step));
  }
}

RefineResult FeatureRefinerImpl::forward(const torch::Tensor& frame, const FeatureMap& warped) {
  RefineResult result;
  result.ce_bits = torch::zeros({}, warped.data.options());
  result.attended = has_attention() ? attend(frame, warped, attention) : warped;

  if (!conv_replacement.is_empty()) {
    result.refined = {conv_replacement->forward(result.attended.data), FeatureStage::refined};
  } else if (has_compressor()) {
    auto e = compressor->encode(result.attended);
    if (compressor->mode() == QuantMode::none) {
      result.latent = e;
      result.refined = compressor->decode(e);
    } else {
      auto p = compressor->prior(result.attended);
      auto e_hat = quantize(e, p);
      result.ce_bits = cross_entropy_bits(e_hat, p);
      result.latent = e_hat;
      result.prior = p;
      result.refined = compressor->decode(e_hat);
    }
  } else {
    result.refined = result.attended;
  }
  return result;
}

RefineResult refine_features(const torch::Tensor& frame, const FeatureMap& warped, FeatureRefiner& refiner) {
  return refiner->forward(frame, warped);
}

}  // namespace ncfl
