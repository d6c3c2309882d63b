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

#include "ncfl/image_io.hpp"

#include "ncfl/types.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace ncfl {

torch::Tensor read_png_rgb(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw std::runtime_error("cannot decode image " + path.string());

  double scale = 0.0;
  switch (img.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default: throw std::runtime_error(path.string() + ": unsupported bit depth");
  }
  cv::Mat rgb;
  switch (img.channels()) {
    case 1: cv::cvtColor(img, rgb, cv::COLOR_GRAY2RGB); break;
    case 3: cv::cvtColor(img, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(img, rgb, cv::COLOR_BGRA2RGB); break;
    default: throw std::runtime_error(path.string() + ": unsupported channel count");
  }
  cv::Mat as_float;
  rgb.convertTo(as_float, CV_32FC3, scale);
  auto hwc = torch::from_blob(as_float.data, {as_float.rows, as_float.cols, 3}, torch::kFloat32);
  return hwc.permute({2, 0, 1}).contiguous().clone();
}

void write_png_rgb(const torch::Tensor& image, const std::filesystem::path& path) {
  require(image.dim() == 3 && image.size(0) == 3, "write_png_rgb: expected [3,H,W]");
  auto bytes = (image.detach().to(torch::kFloat32).clamp(0, 1) * 255.0).round().to(torch::kUInt8);
  auto hwc = bytes.permute({1, 2, 0}).contiguous();
  cv::Mat rgb(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3, hwc.data_ptr<uint8_t>());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) throw std::runtime_error("cannot write " + path.string());
}

void write_png_gray(const torch::Tensor& image, const std::filesystem::path& path) {
  require(image.dim() == 2, "write_png_gray: expected [H,W]");
  auto bytes = (image.detach().to(torch::kFloat32).clamp(0, 1) * 255.0).round().to(torch::kUInt8).contiguous();
  cv::Mat gray(static_cast<int>(bytes.size(0)), static_cast<int>(bytes.size(1)), CV_8UC1, bytes.data_ptr<uint8_t>());
  if (!cv::imwrite(path.string(), gray)) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace ncfl
