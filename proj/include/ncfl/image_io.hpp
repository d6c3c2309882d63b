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

#include <torch/torch.h>

#include <filesystem>

namespace ncfl {

/// Decodes a PNG into a [3, H, W] float tensor in [0,1]. 8-bit data is scaled by 1/255,
/// 16-bit by 1/65535; grayscale is replicated to three channels and alpha is dropped.
torch::Tensor read_png_rgb(const std::filesystem::path& path);

/// Writes a [3, H, W] tensor in [0,1] as 8-bit RGB (values are clamped and rounded).
void write_png_rgb(const torch::Tensor& image, const std::filesystem::path& path);

/// Writes a [H, W] tensor in [0,1] as 8-bit grayscale.
void write_png_gray(const torch::Tensor& image, const std::filesystem::path& path);

}  // namespace ncfl
