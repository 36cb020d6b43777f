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

#include "busgcl/model.h"

#include <array>
#include <utility>

#include "fmt/format.h"

namespace busgcl {
namespace {

constexpr std::array<std::pair<ViewKind, std::string_view>, 5> kViewNames{{
    {ViewKind::kPerturb, "perturb"},
    {ViewKind::kHypergraph, "hypergraph"},
    {ViewKind::kNodeDrop, "node_drop"},
    {ViewKind::kEdgeDrop, "edge_drop"},
    {ViewKind::kRandomWalk, "random_walk"},
}};

constexpr std::array<std::pair<SubviewMode, std::string_view>, 5> kModeNames{{
    {SubviewMode::kBusgcl, "busgcl"},
    {SubviewMode::kHypBoth, "hyp_both"},
    {SubviewMode::kPerBoth, "per_both"},
    {SubviewMode::kReversed, "reversed"},
    {SubviewMode::kCustom, "custom"},
}};

constexpr std::array<std::pair<DispMode, std::string_view>, 3> kDispNames{{
    {DispMode::kDispersing, "dispersing"},
    {DispMode::kKl, "kl"},
    {DispMode::kNone, "none"},
}};

template <typename E, size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& t,
                         E v) {
  for (const auto& [e, s] : t) {
    if (e == v) return s;
  }
  return "?";
}

template <typename E, size_t N>
E parse_name(const std::array<std::pair<E, std::string_view>, N>& t,
             std::string_view s, std::string_view what) {
  std::string valid;
  for (const auto& [e, name] : t) {
    if (name == s) return e;
    valid += valid.empty() ? "" : ", ";
    valid += name;
  }
  throw ParseError(fmt::format("unknown {} '{}' (valid: {})", what, s, valid));
}

std::optional<AugmentVariant> variant_of(ViewKind v) {
  switch (v) {
    case ViewKind::kNodeDrop:
      return AugmentVariant::kNodeDrop;
    case ViewKind::kEdgeDrop:
      return AugmentVariant::kEdgeDrop;
    case ViewKind::kRandomWalk:
      return AugmentVariant::kRandomWalk;
    default:
      return std::nullopt;
  }
}

std::vector<Index> iota_nodes(Index n) {
  std::vector<Index> v(n);
  for (Index i = 0; i < n; ++i) v[i] = i;
  return v;
}

Matrix gather(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Index>(k)) = m.row(rows[k]);
  }
  return out;
}

void scatter_add(Matrix& dst, std::span<const Index> rows, const Matrix& src,
                 double scale) {
  for (size_t k = 0; k < rows.size(); ++k) {
    dst.row(rows[k]) += scale * src.row(static_cast<Index>(k));
  }
}

std::vector<Matrix> zeros(Index count, Index rows, Index cols) {
  return std::vector<Matrix>(count, Matrix::Zero(rows, cols));
}

// Gradients flowing into one propagation branch.
struct BranchGrads {
  std::vector<Matrix> layer_user;
  std::vector<Matrix> layer_item;
  // Indexed by readout depth 0..L; left empty when nothing reads them.
  std::vector<Matrix> readout_user;
  std::vector<Matrix> readout_item;

  BranchGrads(Index layers, Index users, Index items, Index dim,
              bool readouts)
      : layer_user(zeros(layers, users, dim)),
        layer_item(zeros(layers, items, dim)) {
    if (readouts) {
      readout_user = zeros(layers + 1, users, dim);
      readout_item = zeros(layers + 1, items, dim);
    }
  }
};

// Reverse pass of the residual linear recurrence
//   layer_{l+1} = op_l * readout_l(other side), readout_{l+1} = readout_l +
//   layer_{l+1}
// for operators whose item matrix is the transpose of the user matrix.
void linear_backward(const LayerOperators& ops, const BranchGrads& g,
                     GradientSet& out) {
  const auto layers = static_cast<Index>(ops.user_ops.size());
  const bool has_readouts = !g.readout_user.empty();
  Matrix gru = has_readouts ? g.readout_user[layers]
                            : Matrix::Zero(out.e_user.rows(), out.e_user.cols());
  Matrix gri = has_readouts ? g.readout_item[layers]
                            : Matrix::Zero(out.e_item.rows(), out.e_item.cols());
  for (Index l = layers - 1; l >= 0; --l) {
    const Matrix gu = gru + g.layer_user[l];
    const Matrix gi = gri + g.layer_item[l];
    gru += *ops.user_ops[l] * gi;
    gri += *ops.item_ops[l] * gu;
    if (has_readouts) {
      gru += g.readout_user[l];
      gri += g.readout_item[l];
    }
  }
  out.e_user += gru;
  out.e_item += gri;
}

// Reverse pass of one hypergraph layer; returns the gradient w.r.t. its
// input readout and accumulates into `grad_w`.
Matrix hyper_backward(const HyperLayer& h, const Matrix& input,
                      const Matrix& w, const Matrix& grad_out, double slope,
                      Matrix& grad_w) {
  const Matrix g_pre =
      (h.preact.array() > 0).select(grad_out.array(), slope * grad_out.array());
  Matrix g_hyper = g_pre * h.hub.transpose();
  const Matrix g_hub = h.hyper.transpose() * g_pre;
  g_hyper.noalias() += input * g_hub.transpose();
  grad_w.noalias() += input.transpose() * g_hyper;
  Matrix g_input = h.hyper * g_hub;
  g_input.noalias() += g_hyper * w.transpose();
  return g_input;
}

void check_finite(const GradientSet& g) {
  const std::array<std::pair<const Matrix*, const char*>, 4> tensors{{
      {&g.e_user, "e_user"},
      {&g.e_item, "e_item"},
      {&g.w_user, "w_user"},
      {&g.w_item, "w_item"},
  }};
  for (const auto& [m, name] : tensors) {
    if (!m->allFinite()) {
      throw NumericError(fmt::format("non-finite gradient in {}", name));
    }
  }
}

StepResult run_step(const ModelParams& params,
                    const NormalizedBipartiteGraph& graph,
                    const TripletBatch& batch, const Hyperparams& hp,
                    const StepContext& ctx, const TermMask& mask,
                    GradientSet* grads) {
  const Index layers = hp.layers;
  const Index n_users = params.num_users();
  const Index n_items = params.num_items();
  const Index dim = params.dim();
  const LossWeights& w = hp.weights;
  if (params.w_user.rows() != dim || params.w_item.rows() != dim) {
    throw DimensionError("hyperedge matrices do not match embedding width");
  }

  const bool use_cl_user = mask.cl_user && w.lambda_c > 0 && layers > 0;
  const bool use_cl_item = mask.cl_item && w.lambda_c > 0 && layers > 0;
  const bool use_disp =
      mask.disp && w.lambda_d > 0 && hp.disp_mode != DispMode::kNone;

  const std::vector<Index> all_users =
      hp.full_denominator ? iota_nodes(n_users) : std::vector<Index>{};
  const std::vector<Index> all_items =
      hp.full_denominator ? iota_nodes(n_items) : std::vector<Index>{};
  std::span<const Index> users =
      hp.full_denominator ? std::span<const Index>(all_users) : batch.users;
  std::span<const Index> items =
      hp.full_denominator    ? std::span<const Index>(all_items)
      : hp.contrast_negatives ? std::span<const Index>(batch.items)
                              : std::span<const Index>(batch.pos_items);

  StepResult result;
  LossBreakdown& parts = result.loss;
  LossDiagnostics* diag = &result.diagnostics;

  const BranchStack gcn = forward_gcn(params, graph, layers);

  // Contrastive views in use, keyed by kind.
  std::map<ViewKind, BranchStack> views;
  std::map<ViewKind, LayerOperators> view_ops;
  HyperCaches hyper_caches;
  bool hyper_user = false;
  bool hyper_item = false;
  if (use_cl_user && hp.user_view == ViewKind::kHypergraph) hyper_user = true;
  if (use_cl_item && hp.item_view == ViewKind::kHypergraph) hyper_item = true;
  auto need = [&](ViewKind v) {
    return (use_cl_user && hp.user_view == v) ||
           (use_cl_item && hp.item_view == v);
  };
  if (hyper_user || hyper_item) {
    views.emplace(ViewKind::kHypergraph,
                  forward_hypergraph_sides(params, gcn, layers, hp.leaky_slope,
                                           hyper_user, hyper_item,
                                           grads ? &hyper_caches : nullptr));
  }
  if (need(ViewKind::kPerturb)) {
    Rng rng = make_stream(ctx.noise_seed, Stream::kNoise);
    views.emplace(ViewKind::kPerturb, forward_perturbed(params, graph, layers,
                                                        hp.noise_radius, rng));
    view_ops.emplace(ViewKind::kPerturb,
                     LayerOperators::repeat(graph.a_norm, graph.a_norm_t,
                                            layers));
  }
  for (ViewKind v :
       {ViewKind::kNodeDrop, ViewKind::kEdgeDrop, ViewKind::kRandomWalk}) {
    if (!need(v)) continue;
    if (!ctx.augmented || !ctx.augmented->contains(v)) {
      throw Error(fmt::format("no augmented graph supplied for view {}",
                              to_string(v)));
    }
    const AugmentedGraph& aug = ctx.augmented->at(v);
    view_ops.emplace(v, aug.operators(layers));
    views.emplace(v, propagate(params, view_ops.at(v), BranchTag::kAugmented));
  }

  std::optional<BranchGrads> gcn_grads;
  std::map<ViewKind, BranchGrads> view_grads;
  if (grads) {
    *grads = GradientSet::zeros_like(params);
    gcn_grads.emplace(layers, n_users, n_items, dim, true);
    for (const auto& [v, stack] : views) {
      view_grads.emplace(v, BranchGrads(layers, n_users, n_items, dim, false));
    }
  }

  // Contrastive terms, one InfoNCE per layer.
  auto contrast = [&](Side side, ViewKind view, std::span<const Index> nodes) {
    const BranchStack& other = views.at(view);
    double loss = 0;
    for (Index l = 0; l < layers; ++l) {
      const Matrix& a =
          side == Side::kUser ? gcn.layer_user[l] : gcn.layer_item[l];
      const Matrix& o =
          side == Side::kUser ? other.layer_user[l] : other.layer_item[l];
      Matrix ga, go;
      loss += infonce_rows(gather(a, nodes), gather(o, nodes), w.tau_c,
                           grads ? &ga : nullptr, grads ? &go : nullptr, diag);
      if (grads) {
        BranchGrads& vg = view_grads.at(view);
        if (side == Side::kUser) {
          scatter_add(gcn_grads->layer_user[l], nodes, ga, w.lambda_c);
          scatter_add(vg.layer_user[l], nodes, go, w.lambda_c);
        } else {
          scatter_add(gcn_grads->layer_item[l], nodes, ga, w.lambda_c);
          scatter_add(vg.layer_item[l], nodes, go, w.lambda_c);
        }
      }
    }
    return loss;
  };
  if (use_cl_user) parts.cl_user = contrast(Side::kUser, hp.user_view, users);
  if (use_cl_item) parts.cl_item = contrast(Side::kItem, hp.item_view, items);

  const Matrix& final_user = gcn.final_user();
  const Matrix& final_item = gcn.final_item();

  if (use_disp) {
    const Matrix rows = stack_rows(final_user, users, final_item, items);
    Matrix g;
    if (hp.disp_mode == DispMode::kDispersing) {
      parts.disp = dispersing_loss(rows, w.tau_d, grads ? &g : nullptr, diag);
    } else {
      parts.disp = kl_uniform_loss(rows, grads ? &g : nullptr);
    }
    if (grads) {
      const auto nu = static_cast<Index>(users.size());
      scatter_add(gcn_grads->readout_user[layers], users, g.topRows(nu),
                  w.lambda_d);
      scatter_add(gcn_grads->readout_item[layers], items,
                  g.bottomRows(g.rows() - nu), w.lambda_d);
    }
  }

  if (mask.rec && !batch.triples.empty()) {
    std::vector<double> pos, neg;
    pos.reserve(batch.triples.size());
    neg.reserve(batch.triples.size());
    for (const auto& t : batch.triples) {
      pos.push_back(final_user.row(t.user).dot(final_item.row(t.pos)));
      neg.push_back(final_user.row(t.user).dot(final_item.row(t.neg)));
    }
    std::vector<double> gd;
    parts.rec = bpr_loss(pos, neg, grads ? &gd : nullptr);
    if (grads) {
      Matrix& gu = gcn_grads->readout_user[layers];
      Matrix& gi = gcn_grads->readout_item[layers];
      for (size_t k = 0; k < batch.triples.size(); ++k) {
        const auto& t = batch.triples[k];
        gu.row(t.user) +=
            gd[k] * (final_item.row(t.pos) - final_item.row(t.neg));
        gi.row(t.pos) += gd[k] * final_user.row(t.user);
        gi.row(t.neg) -= gd[k] * final_user.row(t.user);
      }
    }
  }

  if (mask.reg) parts.reg = l2_regularization(params);
  parts = total_loss(parts, w);
  if (!std::isfinite(parts.total)) {
    throw NumericError(fmt::format("non-finite loss (rec={}, cl_user={}, "
                                   "cl_item={}, disp={}, reg={})",
                                   parts.rec, parts.cl_user, parts.cl_item,
                                   parts.disp, parts.reg));
  }
  if (!grads) return result;

  // Reverse pass: hypergraph layers feed the GCN readouts, so they go first.
  if (auto it = views.find(ViewKind::kHypergraph); it != views.end()) {
    const BranchGrads& hg = view_grads.at(ViewKind::kHypergraph);
    for (Index l = 0; l < layers; ++l) {
      if (hyper_user) {
        gcn_grads->readout_user[l] += hyper_backward(
            hyper_caches.user[l], gcn.readout_user_at(l), params.w_user,
            hg.layer_user[l], hp.leaky_slope, grads->w_user);
      }
      if (hyper_item) {
        gcn_grads->readout_item[l] += hyper_backward(
            hyper_caches.item[l], gcn.readout_item_at(l), params.w_item,
            hg.layer_item[l], hp.leaky_slope, grads->w_item);
      }
    }
  }
  linear_backward(LayerOperators::repeat(graph.a_norm, graph.a_norm_t, layers),
                  *gcn_grads, *grads);
  for (const auto& [v, ops] : view_ops) {
    linear_backward(ops, view_grads.at(v), *grads);
  }
  if (mask.reg && w.lambda_r > 0) {
    const double s = 2.0 * w.lambda_r;
    grads->e_user += s * params.e_user;
    grads->e_item += s * params.e_item;
    grads->w_user += s * params.w_user;
    grads->w_item += s * params.w_item;
  }
  check_finite(*grads);
  return result;
}

}  // namespace

std::string_view to_string(ViewKind v) { return name_of(kViewNames, v); }
std::string_view to_string(SubviewMode m) { return name_of(kModeNames, m); }
std::string_view to_string(DispMode m) { return name_of(kDispNames, m); }

ViewKind parse_view(std::string_view s) {
  return parse_name(kViewNames, s, "view");
}
SubviewMode parse_subview_mode(std::string_view s) {
  return parse_name(kModeNames, s, "subview mode");
}
DispMode parse_disp_mode(std::string_view s) {
  return parse_name(kDispNames, s, "dispersing mode");
}

void Hyperparams::apply_subview_mode(SubviewMode mode) {
  subview_mode = mode;
  switch (mode) {
    case SubviewMode::kBusgcl:
      user_view = ViewKind::kHypergraph;
      item_view = ViewKind::kPerturb;
      break;
    case SubviewMode::kHypBoth:
      user_view = item_view = ViewKind::kHypergraph;
      break;
    case SubviewMode::kPerBoth:
      user_view = item_view = ViewKind::kPerturb;
      break;
    case SubviewMode::kReversed:
      user_view = ViewKind::kPerturb;
      item_view = ViewKind::kHypergraph;
      break;
    case SubviewMode::kCustom:
      break;
  }
}

void Hyperparams::validate() const {
  if (dim < 1) throw Error("dim must be >= 1");
  if (layers < 1) throw Error("layers must be >= 1");
  if (hyperedges < 1) throw Error("hyperedges must be >= 1");
  if (!(noise_radius >= 0)) throw Error("noise_radius must be >= 0");
  if (!(learning_rate > 0)) throw Error("learning_rate must be > 0");
  if (!(decay_ratio > 0 && decay_ratio <= 1)) {
    throw Error("decay_ratio must lie in (0, 1]");
  }
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (epochs < 0) throw Error("epochs must be >= 0");
  if (eval_every < 0) throw Error("eval_every must be >= 0");
  if (!(drop_ratio >= 0 && drop_ratio < 1)) {
    throw Error("drop_ratio must lie in [0, 1)");
  }
  weights.validate();
}

std::map<ViewKind, AugmentedGraph> make_augmentations(
    const NormalizedBipartiteGraph& graph, const Hyperparams& hp,
    uint64_t epoch) {
  std::map<ViewKind, AugmentedGraph> out;
  for (ViewKind v : {hp.user_view, hp.item_view}) {
    const auto variant = variant_of(v);
    if (!variant || out.contains(v)) continue;
    const uint64_t counter = epoch * 8 + static_cast<uint64_t>(v);
    Rng rng = make_stream(hp.seed, Stream::kMasks, counter);
    AugmentedGraph aug = augment_graph(graph, *variant, hp.drop_ratio,
                                       hp.layers, rng,
                                       {.renormalize = hp.renormalize_augmented});
    aug.seed = counter;
    out.emplace(v, std::move(aug));
  }
  return out;
}

GradientSet GradientSet::zeros_like(const ModelParams& p) {
  return {Matrix::Zero(p.e_user.rows(), p.e_user.cols()),
          Matrix::Zero(p.e_item.rows(), p.e_item.cols()),
          Matrix::Zero(p.w_user.rows(), p.w_user.cols()),
          Matrix::Zero(p.w_item.rows(), p.w_item.cols())};
}

bool GradientSet::all_finite() const {
  return e_user.allFinite() && e_item.allFinite() && w_user.allFinite() &&
         w_item.allFinite();
}

StepResult forward_loss(const ModelParams& params,
                        const NormalizedBipartiteGraph& graph,
                        const TripletBatch& batch, const Hyperparams& hp,
                        const StepContext& ctx, const TermMask& mask) {
  return run_step(params, graph, batch, hp, ctx, mask, nullptr);
}

StepResult compute_gradients(const ModelParams& params,
                             const NormalizedBipartiteGraph& graph,
                             const TripletBatch& batch, const Hyperparams& hp,
                             const StepContext& ctx, GradientSet* grads,
                             const TermMask& mask) {
  if (!grads) throw Error("compute_gradients needs an output GradientSet");
  return run_step(params, graph, batch, hp, ctx, mask, grads);
}

Readouts final_readouts(const ModelParams& params,
                        const NormalizedBipartiteGraph& graph, Index layers) {
  BranchStack s = forward_gcn(params, graph, layers);
  return {s.final_user(), s.final_item()};
}

}  // namespace busgcl
