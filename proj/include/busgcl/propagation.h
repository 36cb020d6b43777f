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

#ifndef BUSGCL_PROPAGATION_H_
#define BUSGCL_PROPAGATION_H_

#include <span>
#include <string_view>
#include <vector>

#include "busgcl/common.h"
#include "busgcl/dataset.h"
#include "busgcl/rng.h"

namespace busgcl {

// Trainable tensors. Rows of e_user / e_item are node embeddings; columns of
// w_user / w_item are hyperedges.
struct ModelParams {
  Matrix e_user;  // I x d
  Matrix e_item;  // J x d
  Matrix w_user;  // d x H
  Matrix w_item;  // d x H

  Index num_users() const { return e_user.rows(); }
  Index num_items() const { return e_item.rows(); }
  Index dim() const { return e_user.cols(); }
  Index hyperedges() const { return w_user.cols(); }

  bool all_finite() const;
};

// Glorot-uniform initialization of every tensor.
ModelParams init_params(Index num_users, Index num_items, Index dim,
                        Index hyperedges, Rng& rng);

enum class BranchTag { kGcn, kPerturbed, kHypergraph, kAugmented };

std::string_view to_string(BranchTag tag);

// Per-layer outputs of one propagation branch. Index l of `layer_*` and
// `readout_*` holds layer l+1; the layer-0 readout is the base embedding.
struct BranchStack {
  BranchTag tag = BranchTag::kGcn;
  Matrix base_user;
  Matrix base_item;
  std::vector<Matrix> layer_user;
  std::vector<Matrix> layer_item;
  std::vector<Matrix> readout_user;
  std::vector<Matrix> readout_item;

  Index layers() const { return static_cast<Index>(layer_user.size()); }

  // Readout after `l` layers, l in [0, layers()].
  const Matrix& readout_user_at(Index l) const {
    return l == 0 ? base_user : readout_user[l - 1];
  }
  const Matrix& readout_item_at(Index l) const {
    return l == 0 ? base_item : readout_item[l - 1];
  }
  const Matrix& final_user() const { return readout_user_at(layers()); }
  const Matrix& final_item() const { return readout_item_at(layers()); }
};

// Linear propagation with residual readout through `user_ops[l]` (I x J) and
// `item_ops[l]` (J x I) at layer l. Shared by the GCN, perturbed and
// augmented branches.
struct LayerOperators {
  std::vector<const SparseMatrix*> user_ops;
  std::vector<const SparseMatrix*> item_ops;

  static LayerOperators repeat(const SparseMatrix& a, const SparseMatrix& a_t,
                               Index layers);
};

BranchStack forward_gcn(const ModelParams& params,
                        const NormalizedBipartiteGraph& graph, Index layers);

// Noise actually added at each layer, kept for inspection.
struct NoiseTrace {
  std::vector<Matrix> user;
  std::vector<Matrix> item;
};

// Adds, to every node's layer output, uniform noise sign-aligned with that
// output and rescaled to L2 norm `radius`. A zero output receives zero noise.
BranchStack forward_perturbed(const ModelParams& params,
                              const NormalizedBipartiteGraph& graph,
                              Index layers, double radius, Rng& rng,
                              NoiseTrace* trace = nullptr);

inline constexpr double kDefaultLeakySlope = 0.5;

// Low-rank hypergraph convolution over the GCN readouts:
//   H_l   = R_{l-1} W
//   out_l = LeakyReLU(H_l (H_l^T R_{l-1}))
// evaluated as two H-wide products.
BranchStack forward_hypergraph(const ModelParams& params,
                               const BranchStack& gcn_stack, Index layers,
                               double leaky_slope = kDefaultLeakySlope);

// Pre-activation of one hypergraph layer; exposed for tests and backward.
struct HyperLayer {
  Matrix hyper;   // n x H
  Matrix hub;     // H x d, hyper^T * input
  Matrix preact;  // n x d
};
HyperLayer hyper_layer(const Matrix& input, const Matrix& w);

// forward_hypergraph restricted to the requested sides; a skipped side keeps
// empty layer and readout matrices. Non-null caches receive every layer's
// intermediates.
struct HyperCaches {
  std::vector<HyperLayer> user;
  std::vector<HyperLayer> item;
};
BranchStack forward_hypergraph_sides(const ModelParams& params,
                                     const BranchStack& gcn_stack,
                                     Index layers, double leaky_slope,
                                     bool user_side, bool item_side,
                                     HyperCaches* caches);

double leaky_relu(double x, double slope);

BranchStack propagate(const ModelParams& params, const LayerOperators& ops,
                      BranchTag tag);

// Dot products of the final user readout with the final item readouts.
std::vector<double> predict_scores(const BranchStack& stack, Index user,
                                   std::span<const Index> items);

}  // namespace busgcl

#endif  // BUSGCL_PROPAGATION_H_
