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

#include "ncfl/bench.hpp"
#include "ncfl/config.hpp"
#include "ncfl/data.hpp"
#include "ncfl/pipeline.hpp"
#include "ncfl/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ncfl;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ModelConfig resolve_config(const std::string& spec) {
  if (spec == "desk" || spec == "paper") return preset_config(spec);
  return load_config(spec);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<VideoClip> load_clips(const fs::path& dir) {
  auto clips = load_clip_collection(dir);
  if (clips.empty()) throw std::runtime_error("no clips found under " + dir.string());
  return clips;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-robust recurrent video restoration"};
  app.require_subcommand(1);

  std::string config_spec, ckpt, in_dir, out_dir, data_dir, direction, variants, seeds_text;
  double sigma = 25.0;
  int n_seeds = 4, clips = 4, frames = 8, size = 64;
  int64_t frame = -1;
  uint64_t seed = 0;
  bool verbose = false, with_median = false;

  auto* train = app.add_subcommand("train", "train a model with the two-stage schedule");
  train->add_option("--config", config_spec, "config JSON file or preset name (desk, paper)")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_flag("--verbose", verbose, "print progress");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on clean clips degraded with AWGN");
  eval->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  eval->add_option("--data", data_dir, "clip directory or directory of clips")->required();
  eval->add_option("--sigma", sigma, "noise level on the 0-255 scale")->required()->check(CLI::NonNegativeNumber);
  eval->add_option("--seed", seed, "noise seed");
  eval->add_option("--out", out_dir, "write eval.json and eval.csv here");
  eval->add_flag("--median", with_median, "add the 3x3 median filter baseline");

  auto* denoise = app.add_subcommand("denoise", "restore a clip directory");
  denoise->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  denoise->add_option("--in", in_dir, "input clip directory")->required();
  denoise->add_option("--out", out_dir, "output clip directory")->required();
  denoise->add_option("--direction", direction, "uni or bi (must match the checkpoint)")
      ->check(CLI::IsMember({"uni", "bi"}));

  auto* abl = app.add_subcommand("ablate", "train and evaluate ablation variants");
  abl->add_option("--config", config_spec, "config JSON file or preset name")->required();
  abl->add_option("--variants", variants, "comma-separated variant names")->required();
  abl->add_option("--seeds", seeds_text, "comma-separated training seeds (default: config seed)");
  abl->add_option("--out", out_dir, "write ablation.json/.csv and per-run logs here");
  abl->add_flag("--median", with_median, "add the 3x3 median filter baseline");
  abl->add_flag("--verbose", verbose, "print progress");

  auto* qmap = app.add_subcommand("qmap", "export quantization-step maps");
  qmap->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  qmap->add_option("--in", in_dir, "input clip directory")->required();
  qmap->add_option("--out", out_dir, "output directory")->required();
  qmap->add_option("--frame", frame, "frame index (default: last)");

  auto* robust = app.add_subcommand("robustness", "feature distances across noise draws");
  robust->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  robust->add_option("--in", in_dir, "clean clip directory")->required();
  robust->add_option("--sigma", sigma, "noise level on the 0-255 scale")->required()->check(CLI::NonNegativeNumber);
  robust->add_option("--seeds", n_seeds, "number of noise draws")->required()->check(CLI::PositiveNumber);
  robust->add_option("--seed", seed, "base noise seed");
  robust->add_option("--out", out_dir, "write robustness.json/.csv here");

  auto* synth = app.add_subcommand("synth", "write synthetic moving-pattern clips as PNG directories");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--clips", clips, "number of clips")->check(CLI::PositiveNumber);
  synth->add_option("--frames", frames, "frames per clip")->check(CLI::PositiveNumber);
  synth->add_option("--size", size, "frame size")->check(CLI::Range(8, 4096));
  synth->add_option("--seed", seed, "corpus seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*train) {
      auto config = resolve_config(config_spec);
      TrainOptions options;
      options.out_dir = out_dir;
      options.verbose = verbose;
      auto result = train_two_stage(config, make_training_set(config), options);
      std::printf("trained %d iterations in %.1f s; final loss %.6f; checkpoint %s\n", config.total_iters,
                  result.seconds, result.history.back().loss, (fs::path(out_dir) / "final").string().c_str());
    } else if (*eval) {
      auto model = load_checkpoint(ckpt);
      auto pairs = make_eval_pairs(load_clips(data_dir), sigma, seed);
      EvalReport report;
      report.sigma = sigma;
      report.seeds = {model->config().seed};
      report.rows.push_back(evaluate(model, pairs, "model"));
      if (with_median) report.rows.push_back(evaluate_median(pairs, 3));
      std::cout << report.to_table();
      if (!out_dir.empty()) write_report(report.to_json(), report.to_csv(), out_dir, "eval");
    } else if (*denoise) {
      auto model = load_checkpoint(ckpt);
      auto clip = load_clip_dir(in_dir);
      std::optional<Direction> dir;
      if (!direction.empty()) dir = direction == "bi" ? Direction::bi : Direction::uni;
      auto [out, ce] = run_clip(clip, model, dir);
      save_clip_dir(out, out_dir);
      std::printf("wrote %lld frames to %s\n", static_cast<long long>(out.length()), out_dir.c_str());
    } else if (*abl) {
      auto config = resolve_config(config_spec);
      auto names = split(variants, ',');
      if (names.empty()) throw UsageError("--variants: empty variant list");
      for (const auto& v : names) {
        if (!is_known_variant(v)) throw UsageError("--variants: unknown variant '" + v + "'");
      }
      AblationOptions options;
      for (const auto& s : split(seeds_text, ',')) options.seeds.push_back(std::stoull(s));
      options.out_dir = out_dir;
      options.verbose = verbose;
      options.include_median = with_median;
      auto report = ablate(config, names, options);
      std::cout << report.to_table();
      if (!out_dir.empty()) write_report(report.to_json(), report.to_csv(), out_dir, "ablation");
    } else if (*qmap) {
      auto model = load_checkpoint(ckpt);
      auto clip = load_clip_dir(in_dir);
      auto result = export_qmaps(model, clip, out_dir, frame >= 0 ? std::optional<int64_t>(frame) : std::nullopt);
      std::printf("frame %lld: %zu channel maps and %s\n", static_cast<long long>(result.frame), result.pngs.size(),
                  result.container.string().c_str());
    } else if (*robust) {
      auto clip = load_clip_dir(in_dir);
      auto report = robustness_report(fs::path(ckpt), clip, sigma, n_seeds, seed);
      std::cout << report.to_csv();
      if (!out_dir.empty()) write_report(report.to_json(), report.to_csv(), out_dir, "robustness");
    } else if (*synth) {
      auto corpus = make_moving_pattern_corpus(clips, size, frames, seed);
      for (size_t i = 0; i < corpus.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "clip_%03zu", i);
        save_clip_dir(corpus[i], fs::path(out_dir) / name);
      }
      std::printf("wrote %zu clips to %s\n", corpus.size(), out_dir.c_str());
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
