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

#ifndef BUSGCL_TRAINING_H_
#define BUSGCL_TRAINING_H_

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "busgcl/dataset.h"
#include "busgcl/evaluation.h"
#include "busgcl/model.h"

namespace busgcl {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  GradientSet first_moment;
  GradientSet second_moment;
  int64_t step = 0;
  double learning_rate = 0;

  static OptimizerState init(const ModelParams& params, double learning_rate);
};

// One bias-corrected Adam update of every tensor.
void adam_step(ModelParams& params, const GradientSet& grads,
               OptimizerState& state, const AdamConfig& config = {});

void decay_learning_rate(OptimizerState& state, double ratio);

struct HistoryRow {
  Index epoch = 0;  // 1-based
  double learning_rate = 0;
  LossBreakdown loss;  // mean over the epoch's batches
  std::optional<double> val_recall;
  std::optional<double> val_ndcg;
};

// CSV with header epoch,lr,rec,cl_user,cl_item,disp,reg,total,
// val_recall@20,val_ndcg@20; validation cells are blank on non-eval epochs.
std::string history_csv_header();
std::string history_csv_row(const HistoryRow& row);

struct TrainOptions {
  // When set, history.csv is appended to as epochs finish.
  std::optional<std::filesystem::path> history_path;
  std::ostream* log = nullptr;
  // Called after each epoch with the current parameters.
  std::function<void(const HistoryRow&, const ModelParams&)> on_epoch;
};

struct TrainResult {
  ModelParams params;  // best-validation parameters (or final ones)
  std::vector<HistoryRow> history;
  Index best_epoch = 0;  // 0 = initial parameters
  double best_val_recall = -1;
};

// Validation selects on Recall@20.
inline constexpr Index kSelectionCutoff = 20;

TrainResult train(const SplitDataset& split,
                  const NormalizedBipartiteGraph& graph, const Hyperparams& hp,
                  const TrainOptions& options = {});

struct GradCheckOptions {
  Index trials = 10;
  double tolerance = 1e-4;
  double step = 1e-4;
  uint64_t seed = 0;
  Index num_users = 5;
  Index num_items = 7;
};

struct TermError {
  std::string term;
  double max_rel_error = 0;
};

struct GradCheckReport {
  std::vector<TermError> terms;
  double max_rel_error = 0;
  bool passed = false;

  std::string to_table() const;
};

// Compares analytic gradients with central differences on random instances
// of the given shape (dim, layers and hyperedges come from `hp`). Errors are
// measured per tensor as max|analytic - numeric| / max(max|analytic|,
// max|numeric|, 1e-8) and reported per objective term.
GradCheckReport grad_check(const Hyperparams& hp,
                           const GradCheckOptions& options);

}  // namespace busgcl

#endif  // BUSGCL_TRAINING_H_
