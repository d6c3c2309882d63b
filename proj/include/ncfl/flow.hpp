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

#include "ncfl/types.hpp"

#include <torch/torch.h>

#include <vector>

namespace ncfl {

// ---------------------------------------------------------------------------
// Generalized divisive normalization.
//
//   forward: y_i = x_i / sqrt(beta_i + sum_j gamma_ij x_j^2)
//   inverse: y_i = x_i * sqrt(beta_i + sum_j gamma_ij x_j^2)
//
// evaluated independently at every spatial position of an [N, C, H, W] input.
// ---------------------------------------------------------------------------

/// Checks beta > 0 and gamma >= 0, then applies GDN (or IGDN when `inverse`).
torch::Tensor gdn(const torch::Tensor& x, const torch::Tensor& beta, const torch::Tensor& gamma, bool inverse);

/// Trainable GDN/IGDN layer. beta starts at 1 and gamma at 0.1 * I; both are kept
/// feasible by clamping (beta >= 1e-6, gamma >= 0) before use.
class GdnImpl : public torch::nn::Module {
 public:
  GdnImpl(int64_t channels, bool inverse);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor effective_beta() const;
  torch::Tensor effective_gamma() const;

  torch::Tensor beta;
  torch::Tensor gamma;

 private:
  bool inverse_;
};
TORCH_MODULE(Gdn);

// ---------------------------------------------------------------------------
// Warping
// ---------------------------------------------------------------------------

/// Backward bilinear warp: out(p) = in(p + flow(p)), sampling coordinates clamped to
/// the image so out-of-range reads repeat the border. `input` is [N,C,H,W] and
/// `flow` is [N,2,H,W] (dx, dy in pixels). Differentiable in both arguments.
torch::Tensor warp(const torch::Tensor& input, const torch::Tensor& flow);
FeatureMap warp(const FeatureMap& features, const FlowField& flow);

/// Bilinear x2 upsampling of a flow field with its vectors doubled.
torch::Tensor upsample_flow(const torch::Tensor& flow);

// ---------------------------------------------------------------------------
// Motion estimation: a coarse-to-fine pyramid in the style of SPyNet.
// ---------------------------------------------------------------------------

class PyramidFlowNetImpl : public torch::nn::Module {
 public:
  PyramidFlowNetImpl(int64_t width, int64_t levels = 3, int64_t layers = 5);

  /// Flow that maps the current frame onto `prev`; both frames [N,3,H,W] with
  /// H, W divisible by 2^(levels-1).
  torch::Tensor forward(const torch::Tensor& prev, const torch::Tensor& cur);

  int64_t levels() const { return static_cast<int64_t>(levels_.size()); }

 private:
  std::vector<torch::nn::Sequential> levels_;
};
TORCH_MODULE(PyramidFlowNet);

FlowField estimate_flow(const torch::Tensor& prev, const torch::Tensor& cur, PyramidFlowNet& net);

// ---------------------------------------------------------------------------
// Motion-vector refinement.
// ---------------------------------------------------------------------------

enum class RefinerKind {
  autoencoder,  // 2 strided convs + GDN, 2 transposed convs + IGDN
  plain_conv    // full-resolution conv stack of comparable cost (M-Conv)
};

/// Maps a noisy flow field to a refined one by direct prediction (no residual path).
/// The last layer starts at zero, so an untrained refiner outputs a zero field.
class MvRefinerImpl : public torch::nn::Module {
 public:
  MvRefinerImpl(int64_t hidden, RefinerKind kind = RefinerKind::autoencoder);
  torch::Tensor forward(const torch::Tensor& flow);

  RefinerKind kind() const { return kind_; }
  torch::nn::Module& final_layer();

 private:
  RefinerKind kind_;
  torch::nn::Conv2d enc1{nullptr}, enc2{nullptr};
  Gdn enc_gdn{nullptr}, dec_igdn{nullptr};
  torch::nn::ConvTranspose2d dec1{nullptr}, dec2{nullptr};
  torch::nn::Sequential plain{nullptr};
};
TORCH_MODULE(MvRefiner);

FlowField refine_mv(const FlowField& mv, MvRefiner& refiner);

/// Zeroes every parameter of `module` in place (initialization contracts in tests/tools).
void zero_parameters(torch::nn::Module& module);

}  // namespace ncfl
