// Copyright 2026 The BusGCL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BUSGCL_CHECKPOINT_H_
#define BUSGCL_CHECKPOINT_H_

#include <filesystem>
#include <string>

#include "busgcl/propagation.h"

namespace busgcl {

// Layout (all integers little-endian):
//   "BGCL" magic, u8 version,
//   u64 length + resolved config text,
//   four tensors (e_user, e_item, w_user, w_item), each as
//   u64 rows, u64 cols, rows*cols row-major float64.
inline constexpr char kCheckpointMagic[4] = {'B', 'G', 'C', 'L'};
inline constexpr uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  std::string config_text;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& p,
                     const std::string& config_text);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace busgcl

#endif  // BUSGCL_CHECKPOINT_H_
