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

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ncfl {

enum class QuantMode { adaptive, fixed, none };
enum class RestoreVariant { unet, wnet };
enum class Direction { uni, bi };

/// Model, training and data settings. Every field has a value in both presets,
/// so a config that only names a preset is complete.
struct ModelConfig {
  std::string preset = "desk";

  // Widths.
  int feature_width = 16;  // C_f, channels of the propagated features
  int latent_width = 16;   // C_e
  int flow_width = 16;
  int flow_levels = 3;
  int flow_layers = 5;
  int mvr_hidden = 16;
  std::vector<int> fa_channels{8, 16, 32};
  int fa_resblocks = 4;
  int ncfl_hidden = 16;
  std::vector<int> unet_channels{16, 32, 64, 128, 128};
  int cab_per_scale = 1;
  int cab_reduction = 4;
  RestoreVariant restore_variant = RestoreVariant::unet;
  Direction direction = Direction::uni;

  // Ablation switches.
  bool mvr = true;
  bool ncfl = true;
  bool fa = true;
  QuantMode quant_mode = QuantMode::adaptive;
  double fixed_step = 0.0;
  bool m_conv = false;
  bool n_conv = false;

  // Optimisation.
  double lambda_ce = 1.0 / 2048.0;
  int stage1_iters = 500;
  int total_iters = 2000;
  double lr_main = 2e-4;
  double lr_flow = 2.5e-5;
  int flow_freeze_iters = 100;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int flow_pretrain_iters = 1500;
  double flow_pretrain_lr = 1e-3;

  // Data.
  int batch = 4;
  int clip_len = 5;
  int patch = 32;
  double train_sigma = 25.0;
  bool fresh_noise_per_iter = true;
  bool augment = true;
  std::string dataset = "synthetic";
  int synth_train_clips = 24;
  int synth_frames = 10;
  int synth_size = 64;
  int synth_eval_clips = 4;
  int synth_eval_frames = 8;
  double eval_sigma = 25.0;

  // Bookkeeping.
  uint64_t seed = 0;
  int log_interval = 10;
  int checkpoint_interval = 500;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Preset values; throws ConfigError for unknown names.
ModelConfig preset_config(const std::string& name);

/// Applies `j` on top of the preset it names ("desk" when absent) and validates.
ModelConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ModelConfig& config);

ModelConfig load_config(const std::filesystem::path& path);

/// Stable 64-bit FNV-1a digest of the serialized config, printed as hex.
std::string config_fingerprint(const ModelConfig& config);

const char* to_string(QuantMode mode);
const char* to_string(RestoreVariant variant);
const char* to_string(Direction direction);

}  // namespace ncfl
