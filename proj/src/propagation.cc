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

#include "busgcl/propagation.h"

#include <cmath>
#include <functional>

#include "fmt/format.h"

namespace busgcl {
namespace {

void check_graph(const ModelParams& params,
                 const NormalizedBipartiteGraph& graph) {
  if (graph.num_users() != params.num_users() ||
      graph.num_items() != params.num_items()) {
    throw DimensionError(fmt::format(
        "graph is {}x{} but params hold {} users and {} items",
        graph.num_users(), graph.num_items(), params.num_users(),
        params.num_items()));
  }
  if (params.e_item.cols() != params.dim()) {
    throw DimensionError("user and item embeddings differ in width");
  }
}

using LayerHook = std::function<void(Index layer, Matrix& user, Matrix& item)>;

BranchStack run_linear(const ModelParams& params, const LayerOperators& ops,
                       BranchTag tag, const LayerHook& hook) {
  const auto layers = static_cast<Index>(ops.user_ops.size());
  BranchStack s;
  s.tag = tag;
  s.base_user = params.e_user;
  s.base_item = params.e_item;
  s.layer_user.reserve(layers);
  s.layer_item.reserve(layers);
  s.readout_user.reserve(layers);
  s.readout_item.reserve(layers);
  for (Index l = 0; l < layers; ++l) {
    const Matrix& prev_user = s.readout_user_at(l);
    const Matrix& prev_item = s.readout_item_at(l);
    Matrix user = *ops.user_ops[l] * prev_item;
    Matrix item = *ops.item_ops[l] * prev_user;
    if (hook) hook(l, user, item);
    Matrix ru = prev_user + user;
    Matrix ri = prev_item + item;
    s.layer_user.push_back(std::move(user));
    s.layer_item.push_back(std::move(item));
    s.readout_user.push_back(std::move(ru));
    s.readout_item.push_back(std::move(ri));
  }
  return s;
}

void add_sign_noise(Matrix& out, double radius, Rng& rng, Matrix* trace) {
  const Index d = out.cols();
  if (trace) trace->setZero(out.rows(), d);
  RowVector noise(d);
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index c = 0; c < d; ++c) {
      const double u = uniform01(rng);
      const double e = out(i, c);
      noise[c] = e > 0 ? u : (e < 0 ? -u : 0.0);
    }
    const double norm = noise.norm();
    if (norm == 0.0 || radius == 0.0) continue;
    noise *= radius / norm;
    out.row(i) += noise;
    if (trace) trace->row(i) = noise;
  }
}

}  // namespace

bool ModelParams::all_finite() const {
  return e_user.allFinite() && e_item.allFinite() && w_user.allFinite() &&
         w_item.allFinite();
}

ModelParams init_params(Index num_users, Index num_items, Index dim,
                        Index hyperedges, Rng& rng) {
  auto glorot = [&rng](Index rows, Index cols) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) m(i, j) = a * (2.0 * uniform01(rng) - 1.0);
    }
    return m;
  };
  ModelParams p;
  p.e_user = glorot(num_users, dim);
  p.e_item = glorot(num_items, dim);
  p.w_user = glorot(dim, hyperedges);
  p.w_item = glorot(dim, hyperedges);
  return p;
}

std::string_view to_string(BranchTag tag) {
  switch (tag) {
    case BranchTag::kGcn:
      return "gcn";
    case BranchTag::kPerturbed:
      return "perturbed";
    case BranchTag::kHypergraph:
      return "hypergraph";
    case BranchTag::kAugmented:
      return "augmented";
  }
  return "?";
}

LayerOperators LayerOperators::repeat(const SparseMatrix& a,
                                      const SparseMatrix& a_t, Index layers) {
  LayerOperators ops;
  ops.user_ops.assign(layers, &a);
  ops.item_ops.assign(layers, &a_t);
  return ops;
}

BranchStack propagate(const ModelParams& params, const LayerOperators& ops,
                      BranchTag tag) {
  if (ops.user_ops.size() != ops.item_ops.size()) {
    throw DimensionError("user and item operator lists differ in length");
  }
  for (size_t l = 0; l < ops.user_ops.size(); ++l) {
    if (ops.user_ops[l]->rows() != params.num_users() ||
        ops.user_ops[l]->cols() != params.num_items() ||
        ops.item_ops[l]->rows() != params.num_items() ||
        ops.item_ops[l]->cols() != params.num_users()) {
      throw DimensionError(
          fmt::format("layer {} operator does not match params", l + 1));
    }
  }
  return run_linear(params, ops, tag, nullptr);
}

BranchStack forward_gcn(const ModelParams& params,
                        const NormalizedBipartiteGraph& graph, Index layers) {
  check_graph(params, graph);
  if (layers < 0) throw DimensionError("negative layer count");
  return run_linear(params,
                    LayerOperators::repeat(graph.a_norm, graph.a_norm_t, layers),
                    BranchTag::kGcn, nullptr);
}

BranchStack forward_perturbed(const ModelParams& params,
                              const NormalizedBipartiteGraph& graph,
                              Index layers, double radius, Rng& rng,
                              NoiseTrace* trace) {
  check_graph(params, graph);
  if (layers < 0) throw DimensionError("negative layer count");
  if (radius < 0) throw Error("noise radius must be non-negative");
  if (trace) {
    trace->user.assign(layers, Matrix());
    trace->item.assign(layers, Matrix());
  }
  return run_linear(
      params, LayerOperators::repeat(graph.a_norm, graph.a_norm_t, layers),
      BranchTag::kPerturbed, [&](Index l, Matrix& user, Matrix& item) {
        add_sign_noise(user, radius, rng, trace ? &trace->user[l] : nullptr);
        add_sign_noise(item, radius, rng, trace ? &trace->item[l] : nullptr);
      });
}

double leaky_relu(double x, double slope) { return x >= 0 ? x : slope * x; }

HyperLayer hyper_layer(const Matrix& input, const Matrix& w) {
  if (input.cols() != w.rows()) {
    throw DimensionError(fmt::format(
        "hyperedge matrix has {} rows for {}-wide embeddings", w.rows(),
        input.cols()));
  }
  HyperLayer h;
  h.hyper = input * w;
  h.hub = h.hyper.transpose() * input;
  h.preact = h.hyper * h.hub;
  return h;
}

BranchStack forward_hypergraph_sides(const ModelParams& params,
                                     const BranchStack& gcn_stack,
                                     Index layers, double leaky_slope,
                                     bool user_side, bool item_side,
                                     HyperCaches* caches) {
  if (gcn_stack.tag != BranchTag::kGcn) {
    throw Error("hypergraph branch needs the GCN stack");
  }
  if (gcn_stack.layers() < layers) {
    throw DimensionError(fmt::format("GCN stack has {} layers, need {}",
                                     gcn_stack.layers(), layers));
  }
  if (gcn_stack.base_user.rows() != params.num_users() ||
      gcn_stack.base_item.rows() != params.num_items()) {
    throw DimensionError("GCN stack does not match params");
  }
  auto act = [leaky_slope](double x) { return leaky_relu(x, leaky_slope); };
  BranchStack s;
  s.tag = BranchTag::kHypergraph;
  s.base_user = params.e_user;
  s.base_item = params.e_item;
  s.layer_user.resize(layers);
  s.layer_item.resize(layers);
  s.readout_user.resize(layers);
  s.readout_item.resize(layers);
  if (caches) {
    caches->user.clear();
    caches->item.clear();
  }
  for (Index l = 0; l < layers; ++l) {
    if (user_side) {
      HyperLayer h = hyper_layer(gcn_stack.readout_user_at(l), params.w_user);
      s.layer_user[l] = h.preact.unaryExpr(act);
      s.readout_user[l] = s.readout_user_at(l) + s.layer_user[l];
      if (caches) caches->user.push_back(std::move(h));
    }
    if (item_side) {
      HyperLayer h = hyper_layer(gcn_stack.readout_item_at(l), params.w_item);
      s.layer_item[l] = h.preact.unaryExpr(act);
      s.readout_item[l] = s.readout_item_at(l) + s.layer_item[l];
      if (caches) caches->item.push_back(std::move(h));
    }
  }
  return s;
}

BranchStack forward_hypergraph(const ModelParams& params,
                               const BranchStack& gcn_stack, Index layers,
                               double leaky_slope) {
  return forward_hypergraph_sides(params, gcn_stack, layers, leaky_slope, true,
                                  true, nullptr);
}

std::vector<double> predict_scores(const BranchStack& stack, Index user,
                                   std::span<const Index> items) {
  const Matrix& ru = stack.final_user();
  const Matrix& ri = stack.final_item();
  if (user < 0 || user >= ru.rows()) {
    throw DimensionError(fmt::format("user {} out of range", user));
  }
  std::vector<double> scores;
  scores.reserve(items.size());
  for (Index v : items) {
    if (v < 0 || v >= ri.rows()) {
      throw DimensionError(fmt::format("item {} out of range", v));
    }
    scores.push_back(ru.row(user).dot(ri.row(v)));
  }
  return scores;
}

}  // namespace busgcl
