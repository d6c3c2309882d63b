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

#include "ncfl/trainer.hpp"

#include "ncfl/tensor_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>

namespace ncfl {
namespace fs = std::filesystem;

namespace {

// The synthetic corpora do not depend on the training seed, so every seed and
// every ablation variant sees the same clips.
constexpr uint64_t kTrainCorpusSeed = 0x5eed0001;
constexpr uint64_t kHeldoutSeed = 0x5eed0002;

// Seed streams.
enum : uint64_t { kStreamFixedNoise = 1, kStreamPatches, kStreamNoise, kStreamFlips, kStreamShift, kStreamShiftNoise };

torch::Tensor endpoint_error(const torch::Tensor& pred, const torch::Tensor& target) {
  return ((pred - target).square().sum(1) + 1e-12).sqrt().mean();
}

void set_requires_grad(const std::vector<torch::Tensor>& params, bool value) {
  for (auto p : params) p.requires_grad_(value);
}

}  // namespace

nlohmann::json MetricsRecord::to_json() const {
  return {{"iter", iter},   {"loss", loss},       {"l2", l2},       {"ce_bits", ce_bits}, {"lr_main", lr_main},
          {"lr_flow", lr_flow}, {"stage", stage}, {"train_psnr", train_psnr}};
}

TrainingSet::TrainingSet(std::vector<ClipPair> pairs, const ModelConfig& config)
    : pairs_(std::move(pairs)), config_(config) {
  require(!pairs_.empty(), "TrainingSet: dataset is empty");
  if (!config_.fresh_noise_per_iter) {
    for (size_t i = 0; i < pairs_.size(); ++i) {
      auto& p = pairs_[i];
      if (p.degradation.kind != DegradationKind::awgn) continue;
      auto fixed = synthesize_awgn(p.clean, p.degradation.sigma_255, derive_seed(config_.seed, kStreamFixedNoise, i));
      p = make_paired(fixed.clean, fixed.degraded);
    }
  }
}

ClipBatch TrainingSet::batch(int64_t iteration) const {
  auto b = sample_patch_batch(pairs_, config_.patch, config_.clip_len, config_.batch,
                              derive_seed(config_.seed, kStreamPatches, iteration));
  auto gen = make_generator(derive_seed(config_.seed, kStreamNoise, iteration));
  auto noise = torch::randn(b.clean.sizes(), gen, torch::kFloat32);
  std::vector<torch::Tensor> degraded;
  for (int64_t i = 0; i < b.clean.size(0); ++i) {
    const auto& src = pairs_[b.source[i]];
    if (src.degradation.kind == DegradationKind::awgn) {
      const float sigma = static_cast<float>(src.degradation.sigma_255 / 255.0);
      degraded.push_back((b.clean[i] + noise[i] * sigma).clamp(0.0, 1.0));
    } else {
      degraded.push_back(b.degraded[i]);
    }
  }
  b.degraded = torch::stack(degraded);
  if (config_.augment) {
    const bool square = config_.patch > 0;
    b = augment(b, derive_seed(config_.seed, kStreamFlips, iteration), square);
  }
  return b;
}

TrainingSet make_training_set(const ModelConfig& config) {
  std::vector<ClipPair> pairs;
  if (config.dataset == "synthetic") {
    for (auto& clip :
         make_moving_pattern_corpus(config.synth_train_clips, config.synth_size, config.synth_frames, kTrainCorpusSeed)) {
      ClipPair p;
      p.clean = clip;
      p.degraded = clip;
      p.degradation = {DegradationKind::awgn, config.train_sigma};
      pairs.push_back(std::move(p));
    }
  } else {
    pairs = load_dataset_manifest(config.dataset);
  }
  return TrainingSet(std::move(pairs), config);
}

std::vector<VideoClip> make_heldout_clips(const ModelConfig& config) {
  return make_moving_pattern_corpus(config.synth_eval_clips, config.synth_size, config.synth_eval_frames,
                                    kHeldoutSeed);
}

double cosine_lr(double base, int64_t iter, int64_t total) {
  const double progress = std::clamp(static_cast<double>(iter) / static_cast<double>(total), 0.0, 1.0);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::vector<double> pretrain_motion(NcflModel& model, const ModelConfig& config, int iterations, uint64_t seed) {
  std::vector<MvRefiner> refiners;
  if (!model->mv_refiner.is_empty()) refiners.push_back(model->mv_refiner);
  if (!model->mv_refiner_b.is_empty()) refiners.push_back(model->mv_refiner_b);

  std::vector<torch::Tensor> params = model->flow_parameters();
  set_requires_grad(params, true);
  for (auto& r : refiners) {
    for (auto& p : r->parameters()) params.push_back(p);
  }
  torch::optim::Adam optimizer(params, torch::optim::AdamOptions(config.flow_pretrain_lr));
  const double sigma = config.train_sigma / 255.0;
  const double max_shift = 2.5;

  std::vector<double> epe;
  for (int i = 0; i < iterations; ++i) {
    auto sample = make_shift_batch(config.batch, config.patch, max_shift, derive_seed(seed, kStreamShift, i));
    auto loss = endpoint_error(model->flow_net->forward(sample.prev, sample.cur), sample.flow);
    epe.push_back(loss.item<double>());
    if (!refiners.empty()) {
      auto gen = make_generator(derive_seed(seed, kStreamShiftNoise, i));
      auto noisy_prev = (sample.prev + torch::randn(sample.prev.sizes(), gen) * sigma).clamp(0.0, 1.0);
      auto noisy_cur = (sample.cur + torch::randn(sample.cur.sizes(), gen) * sigma).clamp(0.0, 1.0);
      auto estimate = model->flow_net->forward(noisy_prev, noisy_cur).detach();
      for (auto& r : refiners) loss = loss + endpoint_error(r->forward(estimate), sample.flow);
    }
    optimizer.zero_grad();
    loss.backward();
    optimizer.step();
  }
  return epe;
}

double flow_endpoint_error(PyramidFlowNet& net, int64_t batch, int64_t size, double max_shift, uint64_t seed,
                           int64_t margin) {
  torch::NoGradGuard guard;
  auto sample = make_shift_batch(batch, size, max_shift, seed);
  auto pred = net->forward(sample.prev, sample.cur);
  auto crop = [&](const torch::Tensor& t) {
    return t.slice(2, margin, size - margin).slice(3, margin, size - margin);
  };
  return endpoint_error(crop(pred), crop(sample.flow)).item<double>();
}

TrainResult train_two_stage(const ModelConfig& config, const TrainingSet& data, const TrainOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  at::globalContext().setDeterministicAlgorithms(true, true);
  torch::manual_seed(config.seed);

  TrainResult result;
  result.model = NcflModel(config);
  auto& model = result.model;
  model->train();

  if (config.flow_pretrain_iters > 0) {
    result.motion_pretrain_epe = pretrain_motion(model, config, config.flow_pretrain_iters, config.seed);
  }

  auto flow_params = model->flow_parameters();
  auto main_params = model->main_parameters();
  std::vector<torch::optim::OptimizerParamGroup> groups;
  groups.emplace_back(main_params, std::make_unique<torch::optim::AdamWOptions>(config.lr_main));
  groups.emplace_back(flow_params, std::make_unique<torch::optim::AdamWOptions>(config.lr_flow));
  torch::optim::AdamW optimizer(groups, torch::optim::AdamWOptions(config.lr_main)
                                            .betas({config.beta1, config.beta2})
                                            .weight_decay(config.weight_decay));
  for (auto& g : optimizer.param_groups()) {
    auto& o = static_cast<torch::optim::AdamWOptions&>(g.options());
    o.betas({config.beta1, config.beta2});
    o.weight_decay(config.weight_decay);
  }

  std::ofstream log;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    log.open(options.out_dir / "metrics.ndjson", std::ios::trunc);
  }

  const int64_t last = options.stop_after > 0 ? std::min<int64_t>(options.stop_after, config.total_iters)
                                             : config.total_iters;
  for (int64_t it = 1; it <= last; ++it) {
    const int stage = it <= config.stage1_iters ? 1 : 2;
    const double lambda = stage == 1 ? config.lambda_ce : 0.0;
    const bool flow_frozen = it <= config.flow_freeze_iters;
    set_requires_grad(flow_params, !flow_frozen);

    const double lr_main = cosine_lr(config.lr_main, it - 1, config.total_iters);
    const double lr_flow = cosine_lr(config.lr_flow, it - 1, config.total_iters);
    static_cast<torch::optim::AdamWOptions&>(optimizer.param_groups()[0].options()).lr(lr_main);
    static_cast<torch::optim::AdamWOptions&>(optimizer.param_groups()[1].options()).lr(lr_flow);

    auto batch = data.batch(it);
    auto run = model->run(batch.degraded);
    auto terms = total_loss(run.outputs, batch.clean, run.ce_bits, lambda);

    MetricsRecord rec;
    rec.iter = it;
    rec.loss = terms.total.item<double>();
    rec.l2 = terms.l2.item<double>();
    rec.ce_bits = terms.ce.item<double>();
    rec.lr_main = lr_main;
    rec.lr_flow = lr_flow;
    rec.stage = stage;
    rec.train_psnr = rec.l2 > 0 ? 10.0 * std::log10(1.0 / rec.l2) : 100.0;

    if (!std::isfinite(rec.loss)) {
      if (!options.out_dir.empty()) {
        nlohmann::json meta{{"iteration", it}, {"loss", std::to_string(rec.loss)}};
        // Containers only hold finite values, so non-finite entries are zeroed and
        // their positions stored as a mask.
        std::map<std::string, torch::Tensor> dump;
        for (auto& [name, t] : {std::pair{"clean", batch.clean}, std::pair{"degraded", batch.degraded}}) {
          auto finite = torch::isfinite(t);
          dump[name] = torch::nan_to_num(t, 0.0, 0.0, 0.0);
          if (!finite.all().item<bool>()) dump[std::string(name) + "_nonfinite_mask"] = (~finite).to(torch::kFloat32);
        }
        write_tensor_dir(dump, options.out_dir / "nonfinite_batch", meta.dump());
      }
      throw NonFiniteLossError("non-finite loss at iteration " + std::to_string(it) +
                               (options.out_dir.empty() ? "" : "; batch dumped to nonfinite_batch/"));
    }

    optimizer.zero_grad();
    terms.total.backward();
    optimizer.step();

    result.history.push_back(rec);
    if (options.on_record) options.on_record(rec);
    if (it % config.log_interval == 0 || it == 1 || it == last) {
      if (log.is_open()) log << rec.to_json().dump() << "\n";
      if (options.verbose) {
        std::printf("iter %6lld stage %d loss %.6f l2 %.6f ce %.4f psnr %.2f\n", static_cast<long long>(it), stage,
                    rec.loss, rec.l2, rec.ce_bits, rec.train_psnr);
        std::fflush(stdout);
      }
    }
    if (!options.out_dir.empty() && config.checkpoint_interval > 0 && it % config.checkpoint_interval == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "iter_%06lld", static_cast<long long>(it));
      save_checkpoint(model, options.out_dir / "checkpoints" / name, it);
    }
  }
  set_requires_grad(flow_params, true);
  if (!options.out_dir.empty()) save_checkpoint(model, options.out_dir / "final", last);

  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace ncfl
