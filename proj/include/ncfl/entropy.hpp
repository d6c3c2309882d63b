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

namespace ncfl {

/// Lower bound applied to bin masses before taking logs (caps a latent at ~29.9 bits).
inline constexpr double kMinBinMass = 1e-9;

/// Elementwise rounding with ties away from zero: sign(x) * floor(|x| + 1/2).
torch::Tensor round_half_away(const torch::Tensor& x);

/// Adaptive quantization ê = round((e - mu) / q) * q + mu.
///
/// The forward value is computed from the rounded integer directly, so it lies on
/// the grid exactly. The backward pass treats rounding as the identity: de/dê = 1,
/// dê/dq = round(r) - r and dê/dmu = 0 with r = (e - mu) / q.
/// Throws InvariantError if the code is already quantized or any q <= 0.
LatentCode quantize(const LatentCode& e, const PriorParams& p);

/// Laplace(mu, sigma) CDF, sigma being the scale parameter.
torch::Tensor laplace_cdf(const torch::Tensor& x, const torch::Tensor& mu, const torch::Tensor& sigma);

/// Probability the Laplace(mu, sigma) prior assigns to the width-q interval centred
/// at ê, i.e. F(ê + q/2) - F(ê - q/2), floored at kMinBinMass. This equals the
/// density of Laplace convolved with Uniform(-q/2, q/2) evaluated at ê.
///
/// Gradients with respect to all four inputs are analytic (see entropy.cpp); floored
/// elements receive zero gradient.
torch::Tensor laplace_bin_mass(const torch::Tensor& e_hat, const torch::Tensor& mu, const torch::Tensor& sigma,
                               const torch::Tensor& q);

/// Same as laplace_bin_mass but checks that `e_hat` is a quantized code.
torch::Tensor bin_probability(const LatentCode& e_hat, const PriorParams& p);

/// Mean of -log2(mass) over all elements.
torch::Tensor bits_from_mass(const torch::Tensor& mass);

/// Mean bits per latent element under the prior.
torch::Tensor cross_entropy_bits(const LatentCode& e_hat, const PriorParams& p);

}  // namespace ncfl
