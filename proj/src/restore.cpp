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

#include "ncfl/restore.hpp"

namespace ncfl {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2dOptions conv3(int64_t in, int64_t out, int64_t stride = 1) {
  return torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1);
}

torch::nn::Sequential cab_stack(int64_t channels, int64_t count, int64_t reduction) {
  torch::nn::Sequential seq;
  for (int64_t i = 0; i < count; ++i) seq->push_back(ChannelAttentionBlock(channels, reduction));
  return seq;
}

}  // namespace

ChannelAttentionBlockImpl::ChannelAttentionBlockImpl(int64_t channels, int64_t reduction) {
  const int64_t squeezed = std::max<int64_t>(1, channels / reduction);
  conv1 = register_module("conv1", torch::nn::Conv2d(conv3(channels, channels)));
  conv2 = register_module("conv2", torch::nn::Conv2d(conv3(channels, channels)));
  squeeze = register_module("squeeze", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, squeezed, 1)));
  excite = register_module("excite", torch::nn::Conv2d(torch::nn::Conv2dOptions(squeezed, channels, 1)));
}

torch::Tensor ChannelAttentionBlockImpl::gate(const torch::Tensor& x) {
  auto r = conv2(torch::relu(conv1(x)));
  return torch::sigmoid(excite(torch::relu(squeeze(r.mean({2, 3}, true)))));
}

torch::Tensor ChannelAttentionBlockImpl::forward(const torch::Tensor& x) {
  auto r = conv2(torch::relu(conv1(x)));
  auto w = torch::sigmoid(excite(torch::relu(squeeze(r.mean({2, 3}, true)))));
  return x + r * w;
}

torch::Tensor cab(const torch::Tensor& x, ChannelAttentionBlock& block) { return block->forward(x); }

UNetImpl::UNetImpl(int64_t in_channels, const std::vector<int>& channels, int64_t cab_per_scale, int64_t reduction)
    : channels_(channels) {
  require(channels.size() == 5, "UNet: expected 5 scales");
  head = register_module("head", torch::nn::Conv2d(conv3(in_channels, channels[0])));
  for (size_t s = 0; s < channels.size(); ++s) {
    const auto tag = std::to_string(s);
    enc_blocks.push_back(register_module("enc" + tag, cab_stack(channels[s], cab_per_scale, reduction)));
    if (s == 0) continue;
    down.push_back(register_module("down" + tag, torch::nn::Conv2d(conv3(channels[s - 1], channels[s], 2))));
    up.push_back(register_module(
        "up" + tag,
        torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(channels[s], channels[s - 1], 2).stride(2))));
    skip.push_back(register_module("skip" + tag, torch::nn::Conv2d(conv3(channels[s - 1], channels[s - 1]))));
    dec_blocks.push_back(register_module("dec" + tag, cab_stack(channels[s - 1], cab_per_scale, reduction)));
  }
}

torch::Tensor UNetImpl::forward(const torch::Tensor& x) {
  require(x.size(2) % 16 == 0 && x.size(3) % 16 == 0, "UNet: H, W must be divisible by 16");
  std::vector<torch::Tensor> enc;
  auto h = torch::relu(head(x));
  for (size_t s = 0; s < channels_.size(); ++s) {
    if (s > 0) h = torch::relu(down[s - 1](h));
    if (!enc_blocks[s]->is_empty()) h = enc_blocks[s]->forward(h);
    enc.push_back(h);
  }
  for (size_t s = channels_.size() - 1; s > 0; --s) {
    h = up[s - 1](h) + skip[s - 1](enc[s - 1]);
    if (!dec_blocks[s - 1]->is_empty()) h = dec_blocks[s - 1]->forward(h);
  }
  return h;
}

RestorationNetImpl::RestorationNetImpl(int64_t input_feature_channels, int64_t feature_width,
                                       const std::vector<int>& channels, int64_t cab_per_scale, int64_t reduction,
                                       RestoreVariant variant)
    : variant_(variant), input_feature_channels_(input_feature_channels) {
  first = register_module("unet1", UNet(3 + input_feature_channels, channels, cab_per_scale, reduction));
  if (variant == RestoreVariant::wnet) {
    second = register_module("unet2", UNet(3 + channels[0], channels, cab_per_scale, reduction));
  }
  image_head = register_module("image_head", torch::nn::Conv2d(conv3(channels[0], 3)));
  feature_head = register_module("feature_head", torch::nn::Conv2d(conv3(channels[0], feature_width)));
  torch::NoGradGuard guard;
  image_head->weight.zero_();
  image_head->bias.zero_();
}

RestoreOutput RestorationNetImpl::forward(const torch::Tensor& frame, const torch::Tensor& features) {
  require(features.size(1) == input_feature_channels_,
          "restore: expected " + std::to_string(input_feature_channels_) + " feature channels, got " +
              std::to_string(features.size(1)));
  auto trunk = first->forward(torch::cat({frame, features}, 1));
  if (variant_ == RestoreVariant::wnet) trunk = second->forward(torch::cat({frame, trunk}, 1));
  return {frame + image_head(trunk), {feature_head(trunk), FeatureStage::propagated}};
}

torch::Tensor pad_to_multiple(const torch::Tensor& x, int64_t multiple) {
  const int64_t h = x.size(-2), w = x.size(-1);
  const int64_t ph = (multiple - h % multiple) % multiple, pw = (multiple - w % multiple) % multiple;
  if (ph == 0 && pw == 0) return x;
  const bool can_reflect = ph < h && pw < w;
  F::PadFuncOptions::mode_t mode = torch::kReplicate;
  if (can_reflect) mode = torch::kReflect;
  return F::pad(x, F::PadFuncOptions({0, pw, 0, ph}).mode(mode));
}

RestoreOutput restore(const torch::Tensor& frame, const torch::Tensor& features, RestorationNet& net,
                      bool clamp_output) {
  require_4d(frame, "restore frame");
  require_4d(features, "restore features");
  require(frame.size(1) == 3, "restore: frame must have 3 channels");
  require_same_spatial(frame, features, "restore");

  const int64_t h = frame.size(2), w = frame.size(3);
  RestoreOutput out;
  if (h % 16 == 0 && w % 16 == 0) {
    out = net->forward(frame, features);
  } else {
    out = net->forward(pad_to_multiple(frame, 16), pad_to_multiple(features, 16));
    out.image = out.image.slice(2, 0, h).slice(3, 0, w);
    out.features.data = out.features.data.slice(2, 0, h).slice(3, 0, w);
  }
  if (clamp_output) out.image = out.image.clamp(0.0, 1.0);
  return out;
}

}  // namespace ncfl
