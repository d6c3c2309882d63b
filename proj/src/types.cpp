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

#include "ncfl/types.hpp"

#include <sstream>

namespace ncfl {

void VideoClip::validate() const {
  require(frames.defined(), "clip '" + id + "': frames undefined");
  require(frames.dim() == 4, "clip '" + id + "': frames must be [T,3,H,W]");
  require(frames.size(0) >= 1, "clip '" + id + "': needs at least one frame");
  require(frames.size(1) == 3, "clip '" + id + "': frames must have 3 channels");
  require(frames.size(2) >= 8 && frames.size(3) >= 8, "clip '" + id + "': frames smaller than 8x8");
  require(torch::isfinite(frames).all().item<bool>(), "clip '" + id + "': non-finite pixel values");
}

const char* to_string(FeatureStage stage) {
  switch (stage) {
    case FeatureStage::propagated: return "propagated";
    case FeatureStage::warped: return "warped";
    case FeatureStage::attended: return "attended";
    case FeatureStage::refined: return "refined";
  }
  return "unknown";
}

void require(bool condition, const std::string& message) {
  if (!condition) throw InvariantError(message);
}

void require_4d(const torch::Tensor& t, const std::string& what) {
  require(t.defined() && t.dim() == 4, what + ": expected a 4-d [N,C,H,W] tensor");
}

void require_same_spatial(const torch::Tensor& a, const torch::Tensor& b, const std::string& what) {
  if (a.size(-1) != b.size(-1) || a.size(-2) != b.size(-2)) {
    std::ostringstream os;
    os << what << ": spatial size mismatch " << a.size(-2) << "x" << a.size(-1) << " vs " << b.size(-2) << "x"
       << b.size(-1);
    throw InvariantError(os.str());
  }
}

}  // namespace ncfl
