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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ncfl {

enum class DegradationKind { awgn, paired };

struct Degradation {
  DegradationKind kind = DegradationKind::paired;
  double sigma_255 = 0.0;  // only meaningful for awgn
};

/// Clean/degraded clips of identical shape. For synthesized AWGN the unclamped
/// noise realization is kept in `noise`; it is undefined for paired data.
struct ClipPair {
  VideoClip clean;
  VideoClip degraded;
  Degradation degradation;
  torch::Tensor noise;
};

/// A training batch, both tensors shaped [B, T, 3, P, P].
struct ClipBatch {
  torch::Tensor clean;
  torch::Tensor degraded;
  std::vector<size_t> source;  // index of the ClipPair each sample came from
};

/// Mixes a base seed with stream/counter values (splitmix64 finalizer).
uint64_t derive_seed(uint64_t base, uint64_t stream, uint64_t counter = 0);

/// Seeded CPU generator for torch sampling routines.
at::Generator make_generator(uint64_t seed);

/// degraded = clamp(clean + N(0, (sigma_255/255)^2), 0, 1); deterministic in `seed`.
ClipPair synthesize_awgn(const VideoClip& clip, double sigma_255, uint64_t seed);

ClipPair make_paired(VideoClip clean, VideoClip degraded);

/// Draws `batch` co-located windows of `clip_len` frames and `patch` x `patch` pixels.
ClipBatch sample_patch_batch(std::span<const ClipPair> pairs, int patch, int clip_len, int batch, uint64_t seed);

/// One element of the flip group generated by horizontal, vertical and transposed flips.
/// Applied in the order hflip, vflip, transpose.
struct FlipOp {
  bool hflip = false;
  bool vflip = false;
  bool transpose = false;
};

/// Applies `op` to the trailing two (H, W) dimensions.
torch::Tensor apply_flip(const torch::Tensor& t, const FlipOp& op);
torch::Tensor invert_flip(const torch::Tensor& t, const FlipOp& op);

/// Per-sample flips drawn with probability 1/2 each. The same op is applied to the
/// clean and degraded sample. Transpose requires square patches.
ClipBatch augment(const ClipBatch& batch, uint64_t seed, bool allow_transpose = true);
std::vector<FlipOp> sample_flip_ops(int64_t batch, uint64_t seed, bool allow_transpose);

/// Reads frame_%05d.png (8- or 16-bit, gray or colour) starting at index 0 or 1.
VideoClip load_clip_dir(const std::filesystem::path& dir);
void save_clip_dir(const VideoClip& clip, const std::filesystem::path& dir);

/// Loads either a clip directory or a directory of clip directories.
std::vector<VideoClip> load_clip_collection(const std::filesystem::path& path);

/// Dataset manifest: {"clips":[{"clean": dir, "degraded": dir | null, "degradation": "awgn"|"paired",
/// "sigma": s}]}. Relative paths resolve against the manifest's directory. AWGN entries are
/// returned with degraded == clean; the noise is drawn later.
std::vector<ClipPair> load_dataset_manifest(const std::filesystem::path& path);

// Procedural corpora used in place of external video datasets.

/// Textured canvas (gratings, blobs, edges) translated with a constant sub-pixel
/// velocity of at most `max_speed` px/frame.
VideoClip make_moving_pattern_clip(int64_t height, int64_t width, int64_t frames, uint64_t seed,
                                   double max_speed = 2.0);
std::vector<VideoClip> make_moving_pattern_corpus(int count, int64_t size, int64_t frames, uint64_t seed);

/// Static textured image [3, H, W] in [0,1].
torch::Tensor make_texture(int64_t height, int64_t width, uint64_t seed);

/// Frame pair related by a global shift, with its ground-truth backward flow.
struct ShiftSample {
  torch::Tensor prev;  // [B,3,H,W]
  torch::Tensor cur;   // [B,3,H,W]
  torch::Tensor flow;  // [B,2,H,W]; cur(p) = prev(p + flow(p))
};
ShiftSample make_shift_batch(int64_t batch, int64_t size, double max_shift, uint64_t seed);

}  // namespace ncfl
