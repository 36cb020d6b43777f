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

#ifndef BUSGCL_MODEL_H_
#define BUSGCL_MODEL_H_

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "busgcl/augmentations.h"
#include "busgcl/common.h"
#include "busgcl/dataset.h"
#include "busgcl/losses.h"
#include "busgcl/propagation.h"

namespace busgcl {

// Branch whose layer outputs serve as the contrastive view of one side.
enum class ViewKind { kPerturb, kHypergraph, kNodeDrop, kEdgeDrop, kRandomWalk };

// Named view pairings: busgcl = hypergraph users / perturbed items,
// hyp_both, per_both, reversed = perturbed users / hypergraph items.
enum class SubviewMode { kBusgcl, kHypBoth, kPerBoth, kReversed, kCustom };

enum class DispMode { kDispersing, kKl, kNone };

std::string_view to_string(ViewKind v);
std::string_view to_string(SubviewMode m);
std::string_view to_string(DispMode m);
ViewKind parse_view(std::string_view s);
SubviewMode parse_subview_mode(std::string_view s);
DispMode parse_disp_mode(std::string_view s);

struct Hyperparams {
  Index dim = 32;
  Index layers = 3;
  Index hyperedges = 128;
  double noise_radius = 0.1;
  double leaky_slope = kDefaultLeakySlope;
  LossWeights weights;
  double learning_rate = 1e-3;
  double decay_ratio = 0.96;
  Index batch_size = 4096;
  Index epochs = 300;
  Index eval_every = 1;
  uint64_t seed = 2024;
  SubviewMode subview_mode = SubviewMode::kBusgcl;
  DispMode disp_mode = DispMode::kDispersing;
  ViewKind user_view = ViewKind::kHypergraph;
  ViewKind item_view = ViewKind::kPerturb;
  double drop_ratio = 0.1;
  bool renormalize_augmented = false;
  // Contrastive and dispersing denominators over every node instead of the
  // batch's nodes.
  bool full_denominator = false;
  // Item-side contrastive and dispersing terms also cover the sampled
  // negatives (by default only the batch's positive items take part).
  bool contrast_negatives = false;

  // Sets user_view / item_view from a named mode (no-op for kCustom).
  void apply_subview_mode(SubviewMode mode);
  void validate() const;
};

// Random inputs that are fixed for one optimization step.
struct StepContext {
  uint64_t noise_seed = 0;
  // Augmented graphs keyed by view; required for the drop/walk views in use.
  const std::map<ViewKind, AugmentedGraph>* augmented = nullptr;
};

// Builds the augmented graphs needed by `hp`'s views.
std::map<ViewKind, AugmentedGraph> make_augmentations(
    const NormalizedBipartiteGraph& graph, const Hyperparams& hp,
    uint64_t epoch);

struct GradientSet {
  Matrix e_user;
  Matrix e_item;
  Matrix w_user;
  Matrix w_item;

  static GradientSet zeros_like(const ModelParams& p);
  bool all_finite() const;
};

// Which objective terms contribute; used to isolate terms when checking
// gradients.
struct TermMask {
  bool rec = true;
  bool cl_user = true;
  bool cl_item = true;
  bool disp = true;
  bool reg = true;
};

struct StepResult {
  LossBreakdown loss;
  LossDiagnostics diagnostics;
};

// Forward pass only.
StepResult forward_loss(const ModelParams& params,
                        const NormalizedBipartiteGraph& graph,
                        const TripletBatch& batch, const Hyperparams& hp,
                        const StepContext& ctx, const TermMask& mask = {});

// Loss and exact reverse-mode gradients of the weighted total with respect
// to every parameter tensor. Noise draws and masks are constants. Throws
// NumericError naming the first tensor holding a non-finite entry.
StepResult compute_gradients(const ModelParams& params,
                             const NormalizedBipartiteGraph& graph,
                             const TripletBatch& batch, const Hyperparams& hp,
                             const StepContext& ctx, GradientSet* grads,
                             const TermMask& mask = {});

// GCN-branch final readouts, the embeddings used for ranking.
struct Readouts {
  Matrix user;
  Matrix item;
};
Readouts final_readouts(const ModelParams& params,
                        const NormalizedBipartiteGraph& graph, Index layers);

}  // namespace busgcl

#endif  // BUSGCL_MODEL_H_
