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

#include "ncfl/data.hpp"

#include "ncfl/image_io.hpp"

#include <ATen/CPUGeneratorImpl.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <regex>

namespace ncfl {
namespace fs = std::filesystem;

at::Generator make_generator(uint64_t seed) { return at::make_generator<at::CPUGeneratorImpl>(seed); }

ClipPair synthesize_awgn(const VideoClip& clip, double sigma_255, uint64_t seed) {
  require(sigma_255 >= 0.0, "synthesize_awgn: sigma must be non-negative");
  require(clip.frames.defined(), "synthesize_awgn: empty clip");
  auto gen = make_generator(seed);
  auto noise = torch::randn(clip.frames.sizes(), gen, torch::kFloat32) * static_cast<float>(sigma_255 / 255.0);
  ClipPair pair;
  pair.clean = clip;
  pair.degraded = VideoClip{(clip.frames + noise).clamp(0.0, 1.0), clip.frame_rate, clip.id};
  pair.degradation = {DegradationKind::awgn, sigma_255};
  pair.noise = noise;
  return pair;
}

ClipPair make_paired(VideoClip clean, VideoClip degraded) {
  require(clean.frames.sizes() == degraded.frames.sizes(), "paired clips '" + clean.id + "' differ in shape");
  ClipPair pair;
  pair.clean = std::move(clean);
  pair.degraded = std::move(degraded);
  pair.degradation = {DegradationKind::paired, 0.0};
  return pair;
}

ClipBatch sample_patch_batch(std::span<const ClipPair> pairs, int patch, int clip_len, int batch, uint64_t seed) {
  require(!pairs.empty(), "sample_patch_batch: no clips");
  require(patch > 0 && clip_len > 0 && batch > 0, "sample_patch_batch: sizes must be positive");
  for (const auto& p : pairs) {
    require(p.clean.length() >= clip_len, "sample_patch_batch: clip '" + p.clean.id + "' shorter than clip_len");
    require(p.clean.height() >= patch && p.clean.width() >= patch,
            "sample_patch_batch: clip '" + p.clean.id + "' smaller than patch");
  }

  std::mt19937_64 rng(seed);
  std::vector<torch::Tensor> clean, degraded;
  std::vector<size_t> source;
  clean.reserve(batch);
  degraded.reserve(batch);
  for (int b = 0; b < batch; ++b) {
    const size_t index = std::uniform_int_distribution<size_t>(0, pairs.size() - 1)(rng);
    const auto& p = pairs[index];
    source.push_back(index);
    const int64_t t0 = std::uniform_int_distribution<int64_t>(0, p.clean.length() - clip_len)(rng);
    const int64_t y0 = std::uniform_int_distribution<int64_t>(0, p.clean.height() - patch)(rng);
    const int64_t x0 = std::uniform_int_distribution<int64_t>(0, p.clean.width() - patch)(rng);
    auto crop = [&](const torch::Tensor& f) {
      return f.slice(0, t0, t0 + clip_len).slice(2, y0, y0 + patch).slice(3, x0, x0 + patch);
    };
    clean.push_back(crop(p.clean.frames));
    degraded.push_back(crop(p.degraded.frames));
  }
  return {torch::stack(clean), torch::stack(degraded), std::move(source)};
}

uint64_t derive_seed(uint64_t base, uint64_t stream, uint64_t counter) {
  uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1) + 0xbf58476d1ce4e5b9ull * counter;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

torch::Tensor apply_flip(const torch::Tensor& t, const FlipOp& op) {
  auto out = t;
  if (op.hflip) out = out.flip({-1});
  if (op.vflip) out = out.flip({-2});
  if (op.transpose) out = out.transpose(-1, -2);
  return out.contiguous();
}

torch::Tensor invert_flip(const torch::Tensor& t, const FlipOp& op) {
  auto out = t;
  if (op.transpose) out = out.transpose(-1, -2);
  if (op.vflip) out = out.flip({-2});
  if (op.hflip) out = out.flip({-1});
  return out.contiguous();
}

std::vector<FlipOp> sample_flip_ops(int64_t batch, uint64_t seed, bool allow_transpose) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<FlipOp> ops(static_cast<size_t>(batch));
  for (auto& op : ops) {
    op.hflip = coin(rng);
    op.vflip = coin(rng);
    const bool t = coin(rng);
    op.transpose = allow_transpose && t;
  }
  return ops;
}

ClipBatch augment(const ClipBatch& batch, uint64_t seed, bool allow_transpose) {
  require(batch.clean.sizes() == batch.degraded.sizes(), "augment: clean/degraded shape mismatch");
  if (allow_transpose) {
    require(batch.clean.size(-1) == batch.clean.size(-2), "augment: transpose needs square patches");
  }
  const auto ops = sample_flip_ops(batch.clean.size(0), seed, allow_transpose);
  std::vector<torch::Tensor> clean, degraded;
  for (int64_t b = 0; b < batch.clean.size(0); ++b) {
    clean.push_back(apply_flip(batch.clean[b], ops[b]));
    degraded.push_back(apply_flip(batch.degraded[b], ops[b]));
  }
  return {torch::stack(clean), torch::stack(degraded), batch.source};
}

VideoClip load_clip_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  static const std::regex pattern(R"(frame_(\d{5})\.png)");
  std::map<int, fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern)) frames[std::stoi(m[1].str())] = entry.path();
  }
  if (frames.empty()) throw std::runtime_error(dir.string() + ": no frame_%05d.png files");

  int expected = frames.begin()->first;
  if (expected > 1) throw std::runtime_error(dir.string() + ": frame numbering must start at 0 or 1");
  std::vector<torch::Tensor> decoded;
  for (const auto& [index, path] : frames) {
    if (index != expected) {
      throw std::runtime_error(dir.string() + ": missing frame index " + std::to_string(expected));
    }
    ++expected;
    auto img = read_png_rgb(path);
    if (!decoded.empty() && img.sizes() != decoded.front().sizes()) {
      throw std::runtime_error(path.string() + ": inconsistent frame dimensions");
    }
    decoded.push_back(img);
  }
  VideoClip clip{torch::stack(decoded), std::nullopt, dir.filename().string()};
  clip.validate();
  return clip;
}

void save_clip_dir(const VideoClip& clip, const fs::path& dir) {
  fs::create_directories(dir);
  for (int64_t t = 0; t < clip.length(); ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05lld.png", static_cast<long long>(t));
    write_png_rgb(clip.frames[t], dir / name);
  }
}

namespace {

bool has_frames(const fs::path& dir) {
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("frame_", 0) == 0 && entry.path().extension() == ".png") return true;
  }
  return false;
}

}  // namespace

std::vector<VideoClip> load_clip_collection(const fs::path& path) {
  if (!fs::is_directory(path)) throw std::runtime_error("not a directory: " + path.string());
  if (has_frames(path)) return {load_clip_dir(path)};
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (entry.is_directory() && has_frames(entry.path())) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw std::runtime_error(path.string() + ": no clip directories found");
  std::vector<VideoClip> clips;
  for (const auto& d : dirs) clips.push_back(load_clip_dir(d));
  return clips;
}

std::vector<ClipPair> load_dataset_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  nlohmann::json j;
  in >> j;
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  std::vector<ClipPair> out;
  for (const auto& entry : j.at("clips")) {
    VideoClip clean = load_clip_dir(resolve(entry.at("clean").get<std::string>()));
    const std::string kind = entry.value("degradation", "awgn");
    if (kind == "awgn") {
      ClipPair pair;
      pair.clean = clean;
      pair.degraded = clean;
      pair.degradation = {DegradationKind::awgn, entry.value("sigma", 0.0)};
      out.push_back(std::move(pair));
    } else if (kind == "paired") {
      out.push_back(make_paired(clean, load_clip_dir(resolve(entry.at("degraded").get<std::string>()))));
    } else {
      throw std::runtime_error(path.string() + ": unknown degradation '" + kind + "'");
    }
  }
  if (out.empty()) throw std::runtime_error(path.string() + ": manifest lists no clips");
  return out;
}

namespace {

// Bilinear crop of `canvas` [3,Hc,Wc] with top-left at the real offset (oy, ox).
torch::Tensor bilinear_crop(const torch::Tensor& canvas, double oy, double ox, int64_t h, int64_t w) {
  const auto y0 = static_cast<int64_t>(std::floor(oy));
  const auto x0 = static_cast<int64_t>(std::floor(ox));
  const float fy = static_cast<float>(oy - y0);
  const float fx = static_cast<float>(ox - x0);
  auto at = [&](int64_t dy, int64_t dx) { return canvas.slice(1, y0 + dy, y0 + dy + h).slice(2, x0 + dx, x0 + dx + w); };
  return at(0, 0) * ((1 - fy) * (1 - fx)) + at(0, 1) * ((1 - fy) * fx) + at(1, 0) * (fy * (1 - fx)) +
         at(1, 1) * (fy * fx);
}

}  // namespace

torch::Tensor make_texture(int64_t height, int64_t width, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto gen = make_generator(seed ^ 0x9e3779b97f4a7c15ull);

  auto ys = torch::arange(height, torch::kFloat32).view({1, height, 1}).expand({1, height, width});
  auto xs = torch::arange(width, torch::kFloat32).view({1, 1, width}).expand({1, height, width});
  auto colour = [&]() { return torch::tensor({u(rng), u(rng), u(rng)}, torch::kFloat32).view({3, 1, 1}); };

  auto img = colour() * 0.5 + (colour() - 0.5) * (xs / width) + (colour() - 0.5) * (ys / height);

  for (int k = 0; k < 3; ++k) {
    const double freq = 0.03 + 0.2 * u(rng);
    const double angle = 2.0 * std::numbers::pi * u(rng);
    const double phase = 2.0 * std::numbers::pi * u(rng);
    auto arg = (xs * std::cos(angle) + ys * std::sin(angle)) * (2.0 * std::numbers::pi * freq) + phase;
    img = img + (colour() - 0.5) * 0.6 * torch::sin(arg);
  }

  for (int k = 0; k < 8; ++k) {
    const double cy = u(rng) * height, cx = u(rng) * width;
    const double ry = 3.0 + u(rng) * height / 4.0, rx = 3.0 + u(rng) * width / 4.0;
    torch::Tensor mask;
    if (u(rng) < 0.5) {
      mask = ((ys - cy).abs() < ry).logical_and((xs - cx).abs() < rx);
    } else {
      mask = ((ys - cy) / ry).square() + ((xs - cx) / rx).square() < 1.0;
    }
    img = torch::where(mask.expand({3, height, width}), colour(), img);
  }

  // Low-frequency clutter.
  const int64_t gh = std::max<int64_t>(2, height / 8), gw = std::max<int64_t>(2, width / 8);
  auto coarse = torch::randn({1, 3, gh, gw}, gen) * 0.15;
  img = img + torch::nn::functional::interpolate(
                  coarse, torch::nn::functional::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{height, width})
                              .mode(torch::kBilinear)
                              .align_corners(false))
                  .squeeze(0);

  auto lo = img.amin({1, 2}, true), hi = img.amax({1, 2}, true);
  return ((img - lo) / (hi - lo + 1e-6)) * 0.9 + 0.05;
}

VideoClip make_moving_pattern_clip(int64_t height, int64_t width, int64_t frames, uint64_t seed, double max_speed) {
  require(frames >= 1 && height >= 8 && width >= 8, "make_moving_pattern_clip: bad size");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> speed(-max_speed, max_speed);
  const double vy = speed(rng), vx = speed(rng);
  const int64_t margin = static_cast<int64_t>(std::ceil(max_speed * (frames - 1) / 2.0)) + 2;
  auto canvas = make_texture(height + 2 * margin, width + 2 * margin, rng());

  std::vector<torch::Tensor> out;
  const double centre = (frames - 1) / 2.0;
  for (int64_t t = 0; t < frames; ++t) {
    out.push_back(bilinear_crop(canvas, margin + (t - centre) * vy, margin + (t - centre) * vx, height, width));
  }
  return VideoClip{torch::stack(out).clamp(0.0, 1.0), std::nullopt, "pattern_" + std::to_string(seed)};
}

std::vector<VideoClip> make_moving_pattern_corpus(int count, int64_t size, int64_t frames, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<VideoClip> clips;
  for (int i = 0; i < count; ++i) {
    auto clip = make_moving_pattern_clip(size, size, frames, rng());
    clip.id = "synthetic_" + std::to_string(i);
    clips.push_back(std::move(clip));
  }
  return clips;
}

ShiftSample make_shift_batch(int64_t batch, int64_t size, double max_shift, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> shift(-max_shift, max_shift);
  const int64_t margin = static_cast<int64_t>(std::ceil(max_shift)) + 1;
  std::vector<torch::Tensor> prev, cur, flow;
  for (int64_t b = 0; b < batch; ++b) {
    const double fy = shift(rng), fx = shift(rng);
    const int64_t side = size + 2 * margin;
    auto canvas = make_texture(side, side, rng());
    // Fine detail everywhere so the shift is observable at every pixel.
    const int64_t cells = std::max<int64_t>(2, side / 3);
    auto gen = make_generator(rng());
    auto detail = torch::nn::functional::interpolate(torch::randn({1, 3, cells, cells}, gen),
                                 torch::nn::functional::InterpolateFuncOptions()
                                     .size(std::vector<int64_t>{side, side})
                                     .mode(torch::kBilinear)
                                     .align_corners(false))
                      .squeeze(0);
    canvas = (canvas + 0.2 * detail).clamp(0.0, 1.0);
    prev.push_back(bilinear_crop(canvas, margin, margin, size, size));
    cur.push_back(bilinear_crop(canvas, margin + fy, margin + fx, size, size));
    flow.push_back(torch::stack({torch::full({size, size}, static_cast<float>(fx)),
                                 torch::full({size, size}, static_cast<float>(fy))}));
  }
  return {torch::stack(prev), torch::stack(cur), torch::stack(flow)};
}

}  // namespace ncfl
