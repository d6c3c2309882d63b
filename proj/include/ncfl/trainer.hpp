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
#include "ncfl/data.hpp"
#include "ncfl/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

namespace ncfl {

/// One line of the metrics log.
struct MetricsRecord {
  int64_t iter = 0;
  double loss = 0;
  double l2 = 0;
  double ce_bits = 0;
  double lr_main = 0;
  double lr_flow = 0;
  int stage = 1;
  double train_psnr = 0;

  nlohmann::json to_json() const;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training clips plus the rule for degrading them. AWGN sources get fresh noise
/// for every batch unless the config pins one realization per clip.
class TrainingSet {
 public:
  TrainingSet(std::vector<ClipPair> pairs, const ModelConfig& config);

  /// Deterministic in (config.seed, iteration).
  ClipBatch batch(int64_t iteration) const;

  const std::vector<ClipPair>& pairs() const { return pairs_; }

 private:
  std::vector<ClipPair> pairs_;
  ModelConfig config_;
};

/// Synthetic moving-pattern corpus or the manifest named by config.dataset.
TrainingSet make_training_set(const ModelConfig& config);

/// Held-out clean clips for evaluation (synthetic, disjoint seed stream).
std::vector<VideoClip> make_heldout_clips(const ModelConfig& config);

double cosine_lr(double base, int64_t iter, int64_t total);

/// Supervised warm-up of the motion path on synthetic global shifts: the flow net
/// learns from clean pairs, the MV refiner (if any) maps flow estimated on noisy pairs
/// to the true flow. Returns the mean endpoint error of each iteration.
std::vector<double> pretrain_motion(NcflModel& model, const ModelConfig& config, int iterations, uint64_t seed);

/// Mean endpoint error on fresh shift pairs, ignoring `margin` border pixels.
double flow_endpoint_error(PyramidFlowNet& net, int64_t batch, int64_t size, double max_shift, uint64_t seed,
                           int64_t margin = 4);

struct TrainOptions {
  std::filesystem::path out_dir;  // metrics.ndjson, checkpoints/, final/; empty = no files
  bool verbose = false;
  int64_t stop_after = 0;  // end early after this many iterations (schedule unchanged); 0 = run to the end
  std::function<void(const MetricsRecord&)> on_record;
};

struct TrainResult {
  NcflModel model{nullptr};
  std::vector<MetricsRecord> history;  // every iteration
  std::vector<double> motion_pretrain_epe;
  double seconds = 0;
};

/// Two-stage schedule: stage 1 minimizes L2 + lambda * CE, stage 2 L2 alone. The flow
/// net is frozen for the first flow_freeze_iters iterations. Both learning rates
/// follow cosine annealing to zero at total_iters. Throws NonFiniteLossError (after
/// dumping the batch to out_dir/nonfinite_batch) when the loss is not finite.
TrainResult train_two_stage(const ModelConfig& config, const TrainingSet& data, const TrainOptions& options = {});

}  // namespace ncfl
