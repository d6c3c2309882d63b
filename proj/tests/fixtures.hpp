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

#include "ncfl/config.hpp"

namespace ncfl::fixtures {

/// Desk architecture with a schedule small enough for unit tests.
inline ModelConfig tiny_config() {
  auto c = preset_config("desk");
  c.total_iters = 6;
  c.stage1_iters = 3;
  c.flow_freeze_iters = 2;
  c.flow_pretrain_iters = 0;
  c.batch = 2;
  c.clip_len = 3;
  c.patch = 16;
  c.synth_size = 32;
  c.synth_frames = 4;
  c.synth_train_clips = 2;
  c.synth_eval_clips = 1;
  c.synth_eval_frames = 3;
  c.log_interval = 1;
  c.checkpoint_interval = 0;
  return c;
}

}  // namespace ncfl::fixtures
