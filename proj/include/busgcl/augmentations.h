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

#ifndef BUSGCL_AUGMENTATIONS_H_
#define BUSGCL_AUGMENTATIONS_H_

#include <string_view>
#include <vector>

#include "busgcl/common.h"
#include "busgcl/dataset.h"
#include "busgcl/propagation.h"
#include "busgcl/rng.h"

namespace busgcl {

enum class AugmentVariant { kNodeDrop, kEdgeDrop, kRandomWalk };

std::string_view to_string(AugmentVariant v);

// Masked copies of the normalized adjacency. Node and edge drop keep one
// matrix shared by every layer; random walk keeps one per layer.
struct AugmentedGraph {
  AugmentVariant variant = AugmentVariant::kEdgeDrop;
  double drop_ratio = 0;
  uint64_t seed = 0;
  std::vector<SparseMatrix> a_norm;    // per stored layer, I x J
  std::vector<SparseMatrix> a_norm_t;  // per stored layer, J x I
  // Node-drop masks (true = kept); empty for the edge variants.
  std::vector<bool> kept_users;
  std::vector<bool> kept_items;

  // Operators for `layers` propagation steps.
  LayerOperators operators(Index layers) const;
};

struct AugmentOptions {
  // Re-apply symmetric degree normalization to the surviving edges instead
  // of keeping the source weights.
  bool renormalize = false;
};

AugmentedGraph augment_graph(const NormalizedBipartiteGraph& graph,
                             AugmentVariant variant, double rho, Index layers,
                             Rng& rng, const AugmentOptions& options = {});

BranchStack forward_augmented(const ModelParams& params,
                              const AugmentedGraph& aug, Index layers);

}  // namespace busgcl

#endif  // BUSGCL_AUGMENTATIONS_H_
