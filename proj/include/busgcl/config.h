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

#ifndef BUSGCL_CONFIG_H_
#define BUSGCL_CONFIG_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "busgcl/dataset.h"
#include "busgcl/model.h"

namespace busgcl {

// Everything a run needs. Persisted as plain `key = value` lines; `#` starts
// a comment. Later assignments override earlier ones, so command-line flags
// applied after a file take precedence over it.
struct RunConfig {
  std::filesystem::path data;
  std::filesystem::path out;
  bool header = false;
  SplitFractions fractions;
  std::vector<Index> cutoffs = {20, 40};
  Hyperparams hp;

  // Throws ParseError for an unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  void merge_text(std::string_view text, std::string_view source = "<config>");
  void merge_file(const std::filesystem::path& path);

  // Every key, one per line, in a fixed order; parsing it reproduces this
  // config exactly.
  std::string to_text() const;
  // Hex FNV-1a of to_text().
  std::string hash() const;

  static const std::vector<std::string>& keys();
};

std::vector<Index> parse_cutoffs(std::string_view text);

}  // namespace busgcl

#endif  // BUSGCL_CONFIG_H_
