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

#include "ncfl/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ncfl {
namespace {

using nlohmann::json;

template <class Visitor>
void visit_fields(ModelConfig& c, Visitor&& v) {
  v("preset", c.preset);
  v("feature_width", c.feature_width);
  v("latent_width", c.latent_width);
  v("flow_width", c.flow_width);
  v("flow_levels", c.flow_levels);
  v("flow_layers", c.flow_layers);
  v("mvr_hidden", c.mvr_hidden);
  v("fa_channels", c.fa_channels);
  v("fa_resblocks", c.fa_resblocks);
  v("ncfl_hidden", c.ncfl_hidden);
  v("unet_channels", c.unet_channels);
  v("cab_per_scale", c.cab_per_scale);
  v("cab_reduction", c.cab_reduction);
  v("restore_variant", c.restore_variant);
  v("direction", c.direction);
  v("mvr", c.mvr);
  v("ncfl", c.ncfl);
  v("fa", c.fa);
  v("quant_mode", c.quant_mode);
  v("fixed_step", c.fixed_step);
  v("m_conv", c.m_conv);
  v("n_conv", c.n_conv);
  v("lambda_ce", c.lambda_ce);
  v("stage1_iters", c.stage1_iters);
  v("total_iters", c.total_iters);
  v("lr_main", c.lr_main);
  v("lr_flow", c.lr_flow);
  v("flow_freeze_iters", c.flow_freeze_iters);
  v("weight_decay", c.weight_decay);
  v("beta1", c.beta1);
  v("beta2", c.beta2);
  v("flow_pretrain_iters", c.flow_pretrain_iters);
  v("flow_pretrain_lr", c.flow_pretrain_lr);
  v("batch", c.batch);
  v("clip_len", c.clip_len);
  v("patch", c.patch);
  v("train_sigma", c.train_sigma);
  v("fresh_noise_per_iter", c.fresh_noise_per_iter);
  v("augment", c.augment);
  v("dataset", c.dataset);
  v("synth_train_clips", c.synth_train_clips);
  v("synth_frames", c.synth_frames);
  v("synth_size", c.synth_size);
  v("synth_eval_clips", c.synth_eval_clips);
  v("synth_eval_frames", c.synth_eval_frames);
  v("eval_sigma", c.eval_sigma);
  v("seed", c.seed);
  v("log_interval", c.log_interval);
  v("checkpoint_interval", c.checkpoint_interval);
}

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError("$." + field + ": " + what);
}

template <class E>
E parse_enum(const std::string& field, const json& j, std::initializer_list<std::pair<const char*, E>> table) {
  if (!j.is_string()) fail(field, "expected a string");
  const auto s = j.get<std::string>();
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  fail(field, "unknown value '" + s + "'");
}

struct Reader {
  const json& src;
  std::set<std::string>& seen;

  void read(const char* name, std::string& out) {
    if (!take(name)) return;
    if (!src[name].is_string()) fail(name, "expected a string");
    out = src[name].get<std::string>();
  }
  void read(const char* name, int& out) {
    if (!take(name)) return;
    if (!src[name].is_number_integer()) fail(name, "expected an integer");
    out = src[name].get<int>();
  }
  void read(const char* name, uint64_t& out) {
    if (!take(name)) return;
    if (!src[name].is_number_unsigned()) fail(name, "expected a non-negative integer");
    out = src[name].get<uint64_t>();
  }
  void read(const char* name, double& out) {
    if (!take(name)) return;
    if (!src[name].is_number()) fail(name, "expected a number");
    out = src[name].get<double>();
  }
  void read(const char* name, bool& out) {
    if (!take(name)) return;
    if (!src[name].is_boolean()) fail(name, "expected true/false");
    out = src[name].get<bool>();
  }
  void read(const char* name, std::vector<int>& out) {
    if (!take(name)) return;
    const auto& a = src[name];
    if (!a.is_array()) fail(name, "expected an array of integers");
    out.clear();
    for (size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number_integer()) fail(std::string(name) + "[" + std::to_string(i) + "]", "expected an integer");
      out.push_back(a[i].get<int>());
    }
  }
  void read(const char* name, QuantMode& out) {
    if (!take(name)) return;
    out = parse_enum<QuantMode>(name, src[name],
                                {{"adaptive", QuantMode::adaptive}, {"fixed", QuantMode::fixed}, {"none", QuantMode::none}});
  }
  void read(const char* name, RestoreVariant& out) {
    if (!take(name)) return;
    out = parse_enum<RestoreVariant>(name, src[name], {{"unet", RestoreVariant::unet}, {"wnet", RestoreVariant::wnet}});
  }
  void read(const char* name, Direction& out) {
    if (!take(name)) return;
    out = parse_enum<Direction>(name, src[name], {{"uni", Direction::uni}, {"bi", Direction::bi}});
  }

  template <class T>
  void operator()(const char* name, T& out) {
    read(name, out);
  }

  bool take(const char* name) {
    if (!src.contains(name)) return false;
    seen.insert(name);
    return true;
  }
};

struct Writer {
  json& dst;
  template <class T>
  void operator()(const char* name, const T& value) {
    if constexpr (std::is_enum_v<T>) {
      dst[name] = to_string(value);
    } else {
      dst[name] = value;
    }
  }
};

}  // namespace

const char* to_string(QuantMode mode) {
  switch (mode) {
    case QuantMode::adaptive: return "adaptive";
    case QuantMode::fixed: return "fixed";
    case QuantMode::none: return "none";
  }
  return "?";
}

const char* to_string(RestoreVariant variant) { return variant == RestoreVariant::unet ? "unet" : "wnet"; }
const char* to_string(Direction direction) { return direction == Direction::uni ? "uni" : "bi"; }

ModelConfig preset_config(const std::string& name) {
  ModelConfig c;  // member defaults are the desk preset
  if (name == "desk") return c;
  if (name != "paper") throw ConfigError("$.preset: unknown preset '" + name + "'");

  c.preset = "paper";
  c.feature_width = 64;
  c.latent_width = 64;
  c.flow_width = 32;
  c.mvr_hidden = 64;
  c.fa_channels = {16, 32, 64};
  c.fa_resblocks = 4;
  c.ncfl_hidden = 64;
  c.unet_channels = {32, 64, 128, 256, 512};
  c.cab_per_scale = 2;
  c.stage1_iters = 50000;
  c.total_iters = 100000;
  c.flow_freeze_iters = 2500;
  c.flow_pretrain_iters = 5000;
  c.batch = 16;
  c.clip_len = 5;
  c.patch = 128;
  c.train_sigma = 50.0;
  c.eval_sigma = 50.0;
  c.synth_train_clips = 64;
  c.synth_frames = 12;
  c.synth_size = 256;
  c.synth_eval_clips = 8;
  c.synth_eval_frames = 12;
  c.log_interval = 100;
  c.checkpoint_interval = 5000;
  return c;
}

void ModelConfig::validate() const {
  auto positive = [](const char* field, double v) {
    if (!(v > 0)) fail(field, "must be positive");
  };
  positive("feature_width", feature_width);
  positive("latent_width", latent_width);
  positive("flow_width", flow_width);
  positive("mvr_hidden", mvr_hidden);
  positive("ncfl_hidden", ncfl_hidden);
  positive("cab_reduction", cab_reduction);
  positive("batch", batch);
  positive("clip_len", clip_len);
  positive("patch", patch);
  positive("lr_main", lr_main);
  positive("lr_flow", lr_flow);
  if (flow_levels != 3) fail("flow_levels", "the pyramid estimator uses exactly 3 levels");
  if (flow_layers < 2) fail("flow_layers", "needs at least 2 layers");
  if (fa_channels.size() != 3) fail("fa_channels", "expected 3 scales");
  for (size_t i = 0; i < fa_channels.size(); ++i) {
    if (fa_channels[i] <= 0) fail("fa_channels[" + std::to_string(i) + "]", "must be positive");
  }
  if (fa_resblocks < 0) fail("fa_resblocks", "must be non-negative");
  if (unet_channels.size() != 5) fail("unet_channels", "expected 5 scales");
  for (size_t i = 0; i < unet_channels.size(); ++i) {
    if (unet_channels[i] <= 0) fail("unet_channels[" + std::to_string(i) + "]", "must be positive");
  }
  if (cab_per_scale < 0) fail("cab_per_scale", "must be non-negative");
  if (quant_mode == QuantMode::fixed && !(fixed_step > 0)) {
    fail("fixed_step", "quant_mode=fixed requires a positive fixed_step");
  }
  if (lambda_ce < 0) fail("lambda_ce", "must be non-negative");
  if (stage1_iters < 0) fail("stage1_iters", "must be non-negative");
  if (total_iters < 1) fail("total_iters", "must be at least 1");
  if (stage1_iters > total_iters) fail("stage1_iters", "must not exceed total_iters");
  if (flow_freeze_iters < 0) fail("flow_freeze_iters", "must be non-negative");
  if (flow_pretrain_iters < 0) fail("flow_pretrain_iters", "must be non-negative");
  if (weight_decay < 0) fail("weight_decay", "must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1)) fail("beta1", "must lie in [0,1)");
  if (!(beta2 >= 0 && beta2 < 1)) fail("beta2", "must lie in [0,1)");
  if (train_sigma < 0) fail("train_sigma", "must be non-negative");
  if (eval_sigma < 0) fail("eval_sigma", "must be non-negative");
  if (patch % 16 != 0) fail("patch", "must be divisible by 16");
  if (synth_size % 16 != 0 || synth_size < patch) fail("synth_size", "must be a multiple of 16 and >= patch");
  if (synth_frames < clip_len) fail("synth_frames", "must be >= clip_len");
  if (synth_train_clips < 1) fail("synth_train_clips", "must be positive");
  if (synth_eval_clips < 1 || synth_eval_frames < 1) fail("synth_eval_clips", "held-out set must be non-empty");
  if (log_interval < 1) fail("log_interval", "must be positive");
  if (checkpoint_interval < 0) fail("checkpoint_interval", "must be non-negative");
}

ModelConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("$: expected a JSON object");
  std::string preset = "desk";
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) fail("preset", "expected a string");
    preset = j["preset"].get<std::string>();
  }
  ModelConfig c = preset_config(preset);
  std::set<std::string> seen;
  Reader reader{j, seen};
  visit_fields(c, reader);
  for (const auto& item : j.items()) {
    if (!seen.count(item.key())) fail(item.key(), "unknown field");
  }
  c.validate();
  return c;
}

nlohmann::json config_to_json(const ModelConfig& config) {
  json j = json::object();
  ModelConfig copy = config;
  visit_fields(copy, Writer{j});
  return j;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("parse error in " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_fingerprint(const ModelConfig& config) {
  const std::string text = config_to_json(config).dump();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ncfl
