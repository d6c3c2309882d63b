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

#include "ncfl/flow.hpp"

namespace ncfl {

namespace F = torch::nn::functional;

namespace {

torch::Tensor apply_gdn(const torch::Tensor& x, const torch::Tensor& beta, const torch::Tensor& gamma, bool inverse) {
  const int64_t c = x.size(1);
  auto norm = F::conv2d(x.square(), gamma.view({c, c, 1, 1}), F::Conv2dFuncOptions().bias(beta));
  return inverse ? x * torch::sqrt(norm) : x * torch::rsqrt(norm);
}

torch::nn::Conv2dOptions conv3(int64_t in, int64_t out, int64_t stride = 1) {
  return torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1);
}

torch::nn::ConvTranspose2dOptions up2(int64_t in, int64_t out) {
  return torch::nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1);
}

}  // namespace

torch::Tensor gdn(const torch::Tensor& x, const torch::Tensor& beta, const torch::Tensor& gamma, bool inverse) {
  require_4d(x, "gdn");
  const int64_t c = x.size(1);
  require(beta.numel() == c, "gdn: beta must have one entry per channel");
  require(gamma.numel() == c * c, "gdn: gamma must be C x C");
  require((beta > 0).all().item<bool>(), "gdn: beta must be positive");
  require((gamma >= 0).all().item<bool>(), "gdn: gamma must be non-negative");
  return apply_gdn(x, beta.reshape({c}), gamma.reshape({c, c}), inverse);
}

GdnImpl::GdnImpl(int64_t channels, bool inverse) : inverse_(inverse) {
  beta = register_parameter("beta", torch::ones({channels}));
  gamma = register_parameter("gamma", torch::eye(channels) * 0.1);
}

torch::Tensor GdnImpl::effective_beta() const { return beta.clamp_min(kMinScale); }
torch::Tensor GdnImpl::effective_gamma() const { return gamma.clamp_min(0.0); }

torch::Tensor GdnImpl::forward(const torch::Tensor& x) {
  return apply_gdn(x, effective_beta(), effective_gamma(), inverse_);
}

torch::Tensor warp(const torch::Tensor& input, const torch::Tensor& flow) {
  require_4d(input, "warp input");
  require_4d(flow, "warp flow");
  require(flow.size(1) == 2, "warp: flow must have 2 channels");
  require(flow.size(0) == input.size(0), "warp: batch mismatch");
  require_same_spatial(input, flow, "warp");

  const int64_t n = input.size(0), c = input.size(1), h = input.size(2), w = input.size(3);
  auto opts = flow.options();
  auto gx = torch::arange(w, opts).view({1, 1, w});
  auto gy = torch::arange(h, opts).view({1, h, 1});
  auto px = (gx + flow.select(1, 0)).clamp(0, w - 1);
  auto py = (gy + flow.select(1, 1)).clamp(0, h - 1);

  auto x0 = px.detach().floor();
  auto y0 = py.detach().floor();
  auto wx = (px - x0).unsqueeze(1).to(input.scalar_type());
  auto wy = (py - y0).unsqueeze(1).to(input.scalar_type());
  auto x0i = x0.to(torch::kLong);
  auto y0i = y0.to(torch::kLong);
  auto x1i = (x0i + 1).clamp_max(w - 1);
  auto y1i = (y0i + 1).clamp_max(h - 1);

  auto flat = input.reshape({n, c, h * w});
  auto fetch = [&](const torch::Tensor& yi, const torch::Tensor& xi) {
    auto idx = (yi * w + xi).view({n, 1, h * w}).expand({n, c, h * w});
    return flat.gather(2, idx).view({n, c, h, w});
  };
  auto v00 = fetch(y0i, x0i), v01 = fetch(y0i, x1i);
  auto v10 = fetch(y1i, x0i), v11 = fetch(y1i, x1i);
  auto top = v00 + wx * (v01 - v00);
  auto bottom = v10 + wx * (v11 - v10);
  return top + wy * (bottom - top);
}

FeatureMap warp(const FeatureMap& features, const FlowField& flow) {
  return {warp(features.data, flow.flow), FeatureStage::warped};
}

torch::Tensor upsample_flow(const torch::Tensor& flow) {
  return F::interpolate(flow, F::InterpolateFuncOptions()
                                  .scale_factor(std::vector<double>{2.0, 2.0})
                                  .mode(torch::kBilinear)
                                  .align_corners(false)) *
         2.0;
}

PyramidFlowNetImpl::PyramidFlowNetImpl(int64_t width, int64_t levels, int64_t layers) {
  require(levels >= 1 && layers >= 2, "PyramidFlowNet: need >= 1 level and >= 2 layers");
  for (int64_t l = 0; l < levels; ++l) {
    torch::nn::Sequential seq;
    int64_t in = 8;  // warped prev (3) + cur (3) + current flow (2)
    for (int64_t k = 0; k + 1 < layers; ++k) {
      seq->push_back(torch::nn::Conv2d(conv3(in, width)));
      seq->push_back(torch::nn::ReLU());
      in = width;
    }
    auto head = torch::nn::Conv2d(conv3(in, 2));
    torch::NoGradGuard guard;
    head->weight.zero_();
    head->bias.zero_();
    seq->push_back(head);
    levels_.push_back(register_module("level" + std::to_string(l), seq));
  }
}

torch::Tensor PyramidFlowNetImpl::forward(const torch::Tensor& prev, const torch::Tensor& cur) {
  require_4d(prev, "estimate_flow prev");
  require_4d(cur, "estimate_flow cur");
  require(prev.sizes() == cur.sizes(), "estimate_flow: frame sizes differ");
  const int64_t factor = int64_t{1} << (levels() - 1);
  require(prev.size(2) % factor == 0 && prev.size(3) % factor == 0,
          "estimate_flow: frame size must be divisible by " + std::to_string(factor));

  // Pyramid, finest first.
  std::vector<torch::Tensor> p{prev - 0.5}, c{cur - 0.5};
  for (int64_t l = 1; l < levels(); ++l) {
    p.push_back(F::avg_pool2d(p.back(), F::AvgPool2dFuncOptions(2)));
    c.push_back(F::avg_pool2d(c.back(), F::AvgPool2dFuncOptions(2)));
  }

  torch::Tensor flow;
  for (int64_t l = levels() - 1; l >= 0; --l) {
    const auto& pl = p[l];
    if (!flow.defined()) {
      flow = torch::zeros({pl.size(0), 2, pl.size(2), pl.size(3)}, pl.options());
    } else {
      flow = upsample_flow(flow);
    }
    auto warped = warp(pl, flow);
    flow = flow + levels_[l]->forward(torch::cat({warped, c[l], flow}, 1));
  }
  return flow;
}

FlowField estimate_flow(const torch::Tensor& prev, const torch::Tensor& cur, PyramidFlowNet& net) {
  return {net->forward(prev, cur)};
}

MvRefinerImpl::MvRefinerImpl(int64_t hidden, RefinerKind kind) : kind_(kind) {
  torch::NoGradGuard guard;
  if (kind == RefinerKind::autoencoder) {
    enc1 = register_module("enc1", torch::nn::Conv2d(conv3(2, hidden, 2)));
    enc_gdn = register_module("enc_gdn", Gdn(hidden, false));
    enc2 = register_module("enc2", torch::nn::Conv2d(conv3(hidden, hidden, 2)));
    dec1 = register_module("dec1", torch::nn::ConvTranspose2d(up2(hidden, hidden)));
    dec_igdn = register_module("dec_igdn", Gdn(hidden, true));
    dec2 = register_module("dec2", torch::nn::ConvTranspose2d(up2(hidden, 2)));
    dec2->weight.zero_();
    dec2->bias.zero_();
  } else {
    const int64_t h = std::max<int64_t>(hidden / 2, 4);
    auto last = torch::nn::Conv2d(conv3(h, 2));
    last->weight.zero_();
    last->bias.zero_();
    plain = register_module("plain", torch::nn::Sequential(torch::nn::Conv2d(conv3(2, h)), torch::nn::ReLU(),
                                                          torch::nn::Conv2d(conv3(h, h)), torch::nn::ReLU(), last));
  }
}

torch::nn::Module& MvRefinerImpl::final_layer() {
  if (kind_ == RefinerKind::autoencoder) return *dec2;
  return *plain->ptr(plain->size() - 1);
}

torch::Tensor MvRefinerImpl::forward(const torch::Tensor& flow) {
  require_4d(flow, "refine_mv");
  require(flow.size(1) == 2, "refine_mv: flow must have 2 channels");
  if (kind_ == RefinerKind::plain_conv) return plain->forward(flow);

  // The two stride-2 stages need a multiple of 4; replicate-pad and crop otherwise.
  const int64_t h = flow.size(2), w = flow.size(3);
  const int64_t ph = (4 - h % 4) % 4, pw = (4 - w % 4) % 4;
  auto x = flow;
  if (ph || pw) x = F::pad(x, F::PadFuncOptions({0, pw, 0, ph}).mode(torch::kReplicate));
  x = enc2(enc_gdn(enc1(x)));
  x = dec2(dec_igdn(dec1(x)));
  if (ph || pw) x = x.slice(2, 0, h).slice(3, 0, w);
  return x;
}

FlowField refine_mv(const FlowField& mv, MvRefiner& refiner) { return {refiner->forward(mv.flow)}; }

void zero_parameters(torch::nn::Module& module) {
  torch::NoGradGuard guard;
  for (auto& p : module.parameters()) p.zero_();
}

}  // namespace ncfl
