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

#include "ncfl/pipeline.hpp"

#include "ncfl/tensor_io.hpp"

#include <nlohmann/json.hpp>

namespace ncfl {

NcflModelImpl::NcflModelImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  const bool bi = config_.direction == Direction::bi;
  const RefinerKind kind = config_.m_conv ? RefinerKind::plain_conv : RefinerKind::autoencoder;
  const bool has_refiner = config_.mvr || config_.m_conv;
  auto make_restoration = [&](int64_t feature_inputs) {
    return RestorationNet(feature_inputs, config_.feature_width, config_.unet_channels, config_.cab_per_scale,
                          config_.cab_reduction, config_.restore_variant);
  };

  flow_net = register_module("flow", PyramidFlowNet(config_.flow_width, config_.flow_levels, config_.flow_layers));
  if (has_refiner) mv_refiner = register_module("mvr", MvRefiner(config_.mvr_hidden, kind));
  feature_refiner = register_module("refine", FeatureRefiner(config_));
  restoration = register_module("restore", make_restoration(config_.feature_width * (bi ? 2 : 1)));
  if (bi) {
    if (has_refiner) mv_refiner_b = register_module("mvr_b", MvRefiner(config_.mvr_hidden, kind));
    feature_refiner_b = register_module("refine_b", FeatureRefiner(config_));
    restoration_b = register_module("restore_b", make_restoration(config_.feature_width));
  }
}

RecurrentState NcflModelImpl::initial_state(const torch::Tensor& first_frame) const {
  require_4d(first_frame, "initial_state");
  RecurrentState state;
  state.prev_features = {torch::zeros({first_frame.size(0), config_.feature_width, first_frame.size(2),
                                       first_frame.size(3)},
                                      first_frame.options()),
                         FeatureStage::propagated};
  state.t = 0;
  return state;
}

NcflModelImpl::BranchOut NcflModelImpl::align_and_refine(const RecurrentState& state, const torch::Tensor& frame,
                                                         MvRefiner& refiner, FeatureRefiner& features,
                                                         bool keep_trace) {
  require_4d(frame, "step frame");
  require(frame.size(2) % 4 == 0 && frame.size(3) % 4 == 0, "step: H, W must be divisible by 4");
  BranchOut out;
  torch::Tensor flow, refined_flow;
  FeatureMap warped;
  if (state.t == 0 || !state.prev_frame.defined()) {
    flow = torch::zeros({frame.size(0), 2, frame.size(2), frame.size(3)}, frame.options());
    refined_flow = flow;
    warped = {torch::zeros_like(state.prev_features.data), FeatureStage::warped};
  } else {
    flow = flow_net->forward(state.prev_frame, frame);
    refined_flow = refiner.is_empty() ? flow : refiner->forward(flow);
    warped = warp(state.prev_features, FlowField{refined_flow});
  }
  auto refined = features->forward(frame, warped);
  out.refined = refined.refined;
  out.ce_bits = refined.ce_bits;
  if (keep_trace) {
    out.trace = {flow, refined_flow, warped, refined.refined, refined.prior};
  }
  return out;
}

StepOutput NcflModelImpl::step(const RecurrentState& state, const torch::Tensor& frame, bool keep_trace,
                               const torch::Tensor& future_features) {
  auto branch = align_and_refine(state, frame, mv_refiner, feature_refiner, keep_trace);
  torch::Tensor fused = branch.refined.data;
  if (config_.direction == Direction::bi) {
    require(future_features.defined(), "step: bi-directional model needs backward-scan features");
    fused = torch::cat({fused, future_features}, 1);
  }
  auto restored = restore(frame, fused, restoration);
  StepOutput out;
  out.output = restored.image;
  out.ce_bits = branch.ce_bits;
  out.state = {frame, restored.features, state.t + 1};
  out.trace = std::move(branch.trace);
  return out;
}

std::vector<torch::Tensor> NcflModelImpl::backward_scan(const torch::Tensor& frames,
                                                        std::vector<torch::Tensor>& ce_bits) {
  const int64_t t_len = frames.size(1);
  std::vector<torch::Tensor> future(t_len);
  ce_bits.assign(t_len, {});
  RecurrentState state = initial_state(frames.select(1, t_len - 1));
  for (int64_t t = t_len - 1; t >= 0; --t) {
    auto frame = frames.select(1, t);
    auto branch = align_and_refine(state, frame, mv_refiner_b, feature_refiner_b, false);
    auto restored = restore(frame, branch.refined.data, restoration_b);
    state = {frame, restored.features, state.t + 1};
    future[t] = branch.refined.data;
    ce_bits[t] = branch.ce_bits;
  }
  return future;
}

ClipRun NcflModelImpl::run(const torch::Tensor& frames, bool clamp_output, bool keep_trace) {
  require(frames.defined() && frames.dim() == 5 && frames.size(2) == 3, "run: expected frames [N,T,3,H,W]");
  require(frames.size(1) >= 1, "run: need at least one frame");
  const int64_t n = frames.size(0), t_len = frames.size(1), h = frames.size(3), w = frames.size(4);
  auto padded = pad_to_multiple(frames.reshape({n * t_len, 3, h, w}), 16);
  padded = padded.reshape({n, t_len, 3, padded.size(2), padded.size(3)});

  std::vector<torch::Tensor> ce_backward;
  std::vector<torch::Tensor> future;
  if (config_.direction == Direction::bi) future = backward_scan(padded, ce_backward);

  ClipRun result;
  std::vector<torch::Tensor> outputs;
  RecurrentState state = initial_state(padded.select(1, 0));
  for (int64_t t = 0; t < t_len; ++t) {
    auto out = step(state, padded.select(1, t), keep_trace, future.empty() ? torch::Tensor() : future[t]);
    outputs.push_back(out.output);
    result.ce_bits.push_back(future.empty() ? out.ce_bits : 0.5 * (out.ce_bits + ce_backward[t]));
    if (keep_trace) result.traces.push_back(std::move(out.trace));
    state = std::move(out.state);
  }
  result.outputs = torch::stack(outputs, 1).slice(3, 0, h).slice(4, 0, w);
  if (clamp_output) result.outputs = result.outputs.clamp(0.0, 1.0);
  return result;
}

std::vector<torch::Tensor> NcflModelImpl::flow_parameters() { return flow_net->parameters(); }

std::vector<torch::Tensor> NcflModelImpl::main_parameters() {
  std::vector<torch::Tensor> out;
  for (const auto& item : named_parameters()) {
    if (item.key().rfind("flow.", 0) != 0) out.push_back(item.value());
  }
  return out;
}

StepOutput step(const RecurrentState& state, const torch::Tensor& frame, NcflModel& model) {
  return model->step(state, frame);
}

std::pair<VideoClip, std::vector<double>> run_clip(const VideoClip& clip, NcflModel& model,
                                                   std::optional<Direction> direction) {
  clip.validate();
  if (direction && *direction != model->config().direction) {
    throw InvariantError(std::string("run_clip: model was built for ") + to_string(model->config().direction) +
                         "-directional propagation");
  }
  torch::NoGradGuard guard;
  auto run = model->run(clip.frames.unsqueeze(0), true);
  std::vector<double> ce;
  for (const auto& c : run.ce_bits) ce.push_back(c.item<double>());
  return {VideoClip{run.outputs.squeeze(0), clip.frame_rate, clip.id}, ce};
}

LossTerms total_loss(const torch::Tensor& outputs, const torch::Tensor& targets,
                     const std::vector<torch::Tensor>& ce_bits, double lambda) {
  require(outputs.sizes() == targets.sizes(), "total_loss: outputs and targets differ in shape");
  require(outputs.dim() == 5, "total_loss: expected [N,T,3,H,W]");
  const int64_t t_len = outputs.size(1);
  require(static_cast<int64_t>(ce_bits.size()) == t_len, "total_loss: one CE value per frame required");
  auto l2 = torch::zeros({}, outputs.options());
  auto ce = torch::zeros({}, outputs.options());
  for (int64_t t = 0; t < t_len; ++t) {
    l2 = l2 + torch::mse_loss(outputs.select(1, t), targets.select(1, t));
    ce = ce + ce_bits[t];
  }
  l2 = l2 / static_cast<double>(t_len);
  ce = ce / static_cast<double>(t_len);
  return {l2 + lambda * ce, l2, ce};
}

void save_checkpoint(NcflModel& model, const std::filesystem::path& dir, int64_t iteration) {
  std::map<std::string, torch::Tensor> tensors;
  for (const auto& item : model->named_parameters()) tensors[item.key()] = item.value();
  for (const auto& item : model->named_buffers()) tensors[item.key()] = item.value();
  nlohmann::json meta;
  meta["config"] = config_to_json(model->config());
  meta["iteration"] = iteration;
  write_tensor_dir(tensors, dir, meta.dump());
}

NcflModel load_checkpoint(const std::filesystem::path& dir, int64_t* iteration) {
  std::string meta_text;
  auto tensors = read_tensor_dir(dir, &meta_text);
  const auto meta = nlohmann::json::parse(meta_text);
  if (!meta.contains("config")) throw std::runtime_error(dir.string() + ": checkpoint has no config");
  NcflModel model(config_from_json(meta["config"]));
  torch::NoGradGuard guard;
  auto assign = [&](const std::string& name, torch::Tensor& target) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error(dir.string() + ": missing tensor " + name);
    if (it->second.sizes() != target.sizes()) throw std::runtime_error(dir.string() + ": shape mismatch for " + name);
    target.copy_(it->second);
  };
  for (auto& item : model->named_parameters()) assign(item.key(), item.value());
  for (auto& item : model->named_buffers()) assign(item.key(), item.value());
  if (iteration) *iteration = meta.value("iteration", int64_t{0});
  return model;
}

void copy_state(NcflModel& dst, NcflModel& src) {
  torch::NoGradGuard guard;
  auto src_params = src->named_parameters();
  for (auto& item : dst->named_parameters()) item.value().copy_(src_params[item.key()]);
}

}  // namespace ncfl
