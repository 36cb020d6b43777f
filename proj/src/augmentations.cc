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

#include "busgcl/augmentations.h"

#include <cmath>

#include "fmt/format.h"

namespace busgcl {
namespace {

using Entry = Eigen::Triplet<double, int64_t>;

template <typename Keep>
SparseMatrix filter(const SparseMatrix& a, Keep keep) {
  std::vector<Entry> entries;
  entries.reserve(a.nonZeros());
  for (Index i = 0; i < a.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      if (keep(it.row(), it.col())) {
        entries.emplace_back(it.row(), it.col(), it.value());
      }
    }
  }
  SparseMatrix out(a.rows(), a.cols());
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

SparseMatrix edge_drop(const SparseMatrix& a, double rho, Rng& rng) {
  // Draws in row-major entry order so a seed fixes the mask.
  return filter(a, [&](Index, Index) { return uniform01(rng) >= rho; });
}

void renormalize(SparseMatrix& a) {
  Vector du = Vector::Zero(a.rows());
  Vector dv = Vector::Zero(a.cols());
  for (Index i = 0; i < a.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      du[it.row()] += 1;
      dv[it.col()] += 1;
    }
  }
  for (Index i = 0; i < a.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      it.valueRef() = 1.0 / std::sqrt(du[it.row()] * dv[it.col()]);
    }
  }
}

}  // namespace

std::string_view to_string(AugmentVariant v) {
  switch (v) {
    case AugmentVariant::kNodeDrop:
      return "node_drop";
    case AugmentVariant::kEdgeDrop:
      return "edge_drop";
    case AugmentVariant::kRandomWalk:
      return "random_walk";
  }
  return "?";
}

LayerOperators AugmentedGraph::operators(Index layers) const {
  LayerOperators ops;
  if (variant == AugmentVariant::kRandomWalk) {
    if (static_cast<Index>(a_norm.size()) < layers) {
      throw DimensionError(fmt::format(
          "random walk graph holds {} layers, need {}", a_norm.size(), layers));
    }
    for (Index l = 0; l < layers; ++l) {
      ops.user_ops.push_back(&a_norm[l]);
      ops.item_ops.push_back(&a_norm_t[l]);
    }
    return ops;
  }
  return LayerOperators::repeat(a_norm.at(0), a_norm_t.at(0), layers);
}

AugmentedGraph augment_graph(const NormalizedBipartiteGraph& graph,
                             AugmentVariant variant, double rho, Index layers,
                             Rng& rng, const AugmentOptions& options) {
  if (!(rho >= 0 && rho < 1)) {
    throw Error(fmt::format("drop ratio {} outside [0, 1)", rho));
  }
  AugmentedGraph aug;
  aug.variant = variant;
  aug.drop_ratio = rho;
  switch (variant) {
    case AugmentVariant::kNodeDrop: {
      aug.kept_users.resize(graph.num_users());
      aug.kept_items.resize(graph.num_items());
      for (Index u = 0; u < graph.num_users(); ++u) {
        aug.kept_users[u] = uniform01(rng) >= rho;
      }
      for (Index v = 0; v < graph.num_items(); ++v) {
        aug.kept_items[v] = uniform01(rng) >= rho;
      }
      aug.a_norm.push_back(filter(graph.a_norm, [&](Index u, Index v) {
        return aug.kept_users[u] && aug.kept_items[v];
      }));
      break;
    }
    case AugmentVariant::kEdgeDrop:
      aug.a_norm.push_back(edge_drop(graph.a_norm, rho, rng));
      break;
    case AugmentVariant::kRandomWalk:
      for (Index l = 0; l < std::max<Index>(layers, 1); ++l) {
        aug.a_norm.push_back(edge_drop(graph.a_norm, rho, rng));
      }
      break;
  }
  for (auto& a : aug.a_norm) {
    if (options.renormalize) renormalize(a);
    aug.a_norm_t.emplace_back(a.transpose());
  }
  return aug;
}

BranchStack forward_augmented(const ModelParams& params,
                              const AugmentedGraph& aug, Index layers) {
  return propagate(params, aug.operators(layers), BranchTag::kAugmented);
}

}  // namespace busgcl
