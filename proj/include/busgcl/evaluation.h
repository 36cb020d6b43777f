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

#ifndef BUSGCL_EVALUATION_H_
#define BUSGCL_EVALUATION_H_

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "busgcl/common.h"
#include "busgcl/dataset.h"
#include "busgcl/propagation.h"

namespace busgcl {

struct MetricsReport {
  std::map<Index, double> recall;
  std::map<Index, double> ndcg;
  Index users = 0;           // users with a non-empty target list
  Index excluded_users = 0;  // users skipped for an empty target list
  uint64_t seed = 0;
  std::string config_hash;

  // {"recall": {"20": x, ...}, "ndcg": {...}, "users": n, "seed": s}
  std::string to_json() const;
  std::string to_table() const;
};

enum class EvalTarget { kValid, kTest };

inline const std::vector<Index> kDefaultCutoffs = {20, 40};

// Top-`n` items for one score vector, highest first, ties broken by the
// smaller item index. `excluded` must be sorted; those items never appear.
std::vector<Index> top_n(std::span<const double> scores,
                         std::span<const Index> excluded, Index n);

// Recall and NDCG (binary gain 1/log2(rank+1)) of a ranked list.
double recall_at(std::span<const Index> ranked, std::span<const Index> truth,
                 Index n);
double ndcg_at(std::span<const Index> ranked, std::span<const Index> truth,
               Index n);

// All-ranking evaluation of arbitrary user/item embeddings: every item not
// in the user's training list is a candidate.
MetricsReport evaluate_embeddings(const Matrix& user_emb,
                                  const Matrix& item_emb,
                                  const SplitDataset& split,
                                  std::span<const Index> cutoffs,
                                  EvalTarget target);

// Scores with the GCN branch's final readouts.
MetricsReport evaluate(const ModelParams& params,
                       const NormalizedBipartiteGraph& graph,
                       const SplitDataset& split, Index layers,
                       std::span<const Index> cutoffs = kDefaultCutoffs,
                       EvalTarget target = EvalTarget::kTest);

struct Projection {
  Matrix coords;             // N x out_dim
  Vector explained_variance;  // per output column, descending
  bool degenerate = false;    // no variance at all
};

// Mean-centred projection onto the leading principal directions, found by
// power iteration with deflation on the covariance matrix. Each direction is
// signed so its largest-magnitude loading is positive. Identical rows give
// zero coordinates.
Projection pca_project(const Matrix& embeddings, Index out_dim = 2,
                       uint64_t seed = 0);

// TSV: node_type<TAB>index<TAB>x<TAB>y, users first.
void write_projection(const std::filesystem::path& path,
                      const Matrix& coords, Index num_users);

}  // namespace busgcl

#endif  // BUSGCL_EVALUATION_H_
