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
#include <map>
#include <stdexcept>
#include <string>

namespace ncfl {

class TensorFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Container layout: "NCFL" | u32 ndim | ndim x u32 dims | float32 payload, all little-endian.

std::string encode_tensor(const torch::Tensor& t);
torch::Tensor decode_tensor(const std::string& bytes);

void write_tensor(const torch::Tensor& t, const std::filesystem::path& path);
torch::Tensor read_tensor(const std::filesystem::path& path);

/// Directory of containers plus manifest.json mapping tensor names to files.
/// `extra` is stored verbatim under the "meta" key.
void write_tensor_dir(const std::map<std::string, torch::Tensor>& tensors, const std::filesystem::path& dir,
                      const std::string& extra_json = "{}");
std::map<std::string, torch::Tensor> read_tensor_dir(const std::filesystem::path& dir, std::string* extra_json = nullptr);

}  // namespace ncfl
