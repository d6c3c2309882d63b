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

#include "ncfl/entropy.hpp"

#include <numbers>

namespace ncfl {

using torch::autograd::AutogradContext;
using torch::autograd::tensor_list;

torch::Tensor round_half_away(const torch::Tensor& x) { return torch::sign(x) * torch::floor(x.abs() + 0.5); }

LatentCode quantize(const LatentCode& e, const PriorParams& p) {
  require(!e.quantized, "quantize: latent is already quantized");
  require(p.q.defined() && p.mu.defined(), "quantize: prior parameters missing");
  require((p.q > 0).all().item<bool>(), "quantize: quantization step must be positive");

  auto r = (e.data - p.mu) / p.q;
  auto k = round_half_away(r.detach());
  // Straight-through graph: value equals r*q + mu, gradient of round() is 1.
  auto through = (r + (k - r).detach()) * p.q + p.mu;
  auto exact = k * p.q.detach() + p.mu.detach();
  return {exact + (through - through.detach()), true};
}

torch::Tensor laplace_cdf(const torch::Tensor& x, const torch::Tensor& mu, const torch::Tensor& sigma) {
  auto d = x - mu;
  auto half_tail = 0.5 * torch::exp(-d.abs() / sigma);
  return torch::where(d < 0, half_tail, 1.0 - half_tail);
}

namespace {

// All computation is done on the folded offset a = -|ê - mu| <= 0; the mass is an
// even function of ê - mu so this loses nothing and keeps the lower edge in the
// left tail, where the CDF is a single exponential.
//
// With f the Laplace(0, sigma) density and u = a + q/2, l = a - q/2:
//   m        = F(u) - F(l)
//   dm/da    = f(u) - f(l)
//   dm/dq    = (f(u) + f(l)) / 2
//   dm/dsig  = -(u f(u) - l f(l)) / sigma          (dF(x)/dsigma = -x f(x) / sigma)
//   dm/dê    = -sign(ê - mu) dm/da,   dm/dmu = -dm/dê
struct LaplaceBinMassFn : public torch::autograd::Function<LaplaceBinMassFn> {
  static torch::Tensor forward(AutogradContext* ctx, const torch::Tensor& e_hat, const torch::Tensor& mu,
                               const torch::Tensor& sigma, const torch::Tensor& q) {
    auto d = e_hat - mu;
    auto a = -d.abs();
    auto upper = a + 0.5 * q;
    auto lower = a - 0.5 * q;
    auto f_lower = 0.5 * torch::exp(lower / sigma);
    auto e_upper = 0.5 * torch::exp(-upper.abs() / sigma);
    auto f_upper = torch::where(upper < 0, e_upper, 1.0 - e_upper);
    auto raw = f_upper - f_lower;
    ctx->save_for_backward({d, sigma, q, raw});
    return raw.clamp_min(kMinBinMass);
  }

  static tensor_list backward(AutogradContext* ctx, tensor_list grad_outputs) {
    const auto saved = ctx->get_saved_variables();
    const auto& d = saved[0];
    const auto& sigma = saved[1];
    const auto& q = saved[2];
    const auto& raw = saved[3];
    auto g = grad_outputs[0] * (raw > kMinBinMass).to(grad_outputs[0].scalar_type());

    auto a = -d.abs();
    auto upper = a + 0.5 * q;
    auto lower = a - 0.5 * q;
    auto density = [&](const torch::Tensor& x) { return torch::exp(-x.abs() / sigma) / (2.0 * sigma); };
    auto fu = density(upper);
    auto fl = density(lower);

    auto dm_dd = -torch::sign(d) * (fu - fl);
    auto dm_dq = 0.5 * (fu + fl);
    auto dm_dsigma = -(upper * fu - lower * fl) / sigma;
    return {g * dm_dd, -(g * dm_dd), g * dm_dsigma, g * dm_dq};
  }
};

}  // namespace

torch::Tensor laplace_bin_mass(const torch::Tensor& e_hat, const torch::Tensor& mu, const torch::Tensor& sigma,
                               const torch::Tensor& q) {
  // Broadcast up front so the custom backward sees matching shapes; expand() reduces
  // the gradients back to the original shapes.
  auto shapes = torch::broadcast_tensors({e_hat, mu, sigma, q});
  return LaplaceBinMassFn::apply(shapes[0], shapes[1], shapes[2], shapes[3]);
}

torch::Tensor bin_probability(const LatentCode& e_hat, const PriorParams& p) {
  require(e_hat.quantized, "bin_probability: latent must be quantized");
  return laplace_bin_mass(e_hat.data, p.mu, p.sigma, p.q);
}

torch::Tensor bits_from_mass(const torch::Tensor& mass) { return -torch::log2(mass).mean(); }

torch::Tensor cross_entropy_bits(const LatentCode& e_hat, const PriorParams& p) {
  return bits_from_mass(bin_probability(e_hat, p));
}

}  // namespace ncfl
