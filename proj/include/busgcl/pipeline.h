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

#ifndef BUSGCL_PIPELINE_H_
#define BUSGCL_PIPELINE_H_

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "busgcl/config.h"
#include "busgcl/dataset.h"
#include "busgcl/evaluation.h"
#include "busgcl/training.h"

namespace busgcl {

struct RunOutcome {
  TrainResult trained;
  MetricsReport test;
};

// split -> graph -> train -> test evaluation. When `cfg.out` is non-empty the
// run directory receives config.txt, user_ids.tsv, item_ids.tsv,
// history.csv, checkpoint.bin and metrics.json.
RunOutcome run_pipeline(const RunConfig& cfg, const InteractionDataset& ds,
                        std::ostream* log = nullptr);

// One cell of an ablation grid: config overrides plus the row labels.
struct AblationVariant {
  std::string name;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> labels;
};

struct AblationGrid {
  std::string name;
  std::vector<std::string> label_columns;
  std::vector<AblationVariant> variants;
};

const std::vector<std::string>& ablation_grid_names();

// Throws ParseError listing the valid names for an unknown grid.
AblationGrid make_ablation_grid(std::string_view name);

// Keeps only the named variants; throws ParseError listing valid names.
AblationGrid select_variants(const AblationGrid& grid,
                             const std::vector<std::string>& names);

struct AblationRow {
  AblationVariant variant;
  MetricsReport metrics;
};

// Runs every variant on the same split and seed. Variant runs go to
// `cfg.out / variant.name` when `cfg.out` is set.
std::vector<AblationRow> run_ablation(const RunConfig& cfg,
                                      const AblationGrid& grid,
                                      const InteractionDataset& ds,
                                      std::ostream* log = nullptr);

// Label columns followed by recall/ndcg at every cutoff.
std::string ablation_csv(const AblationGrid& grid,
                         const std::vector<AblationRow>& rows);

}  // namespace busgcl

#endif  // BUSGCL_PIPELINE_H_
