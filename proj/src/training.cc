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

#include "busgcl/training.h"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fmt/format.h"

namespace busgcl {
namespace {

template <typename F>
void for_each_tensor(ModelParams& p, const GradientSet& g, OptimizerState& s,
                     F&& f) {
  f(p.e_user, g.e_user, s.first_moment.e_user, s.second_moment.e_user);
  f(p.e_item, g.e_item, s.first_moment.e_item, s.second_moment.e_item);
  f(p.w_user, g.w_user, s.first_moment.w_user, s.second_moment.w_user);
  f(p.w_item, g.w_item, s.first_moment.w_item, s.second_moment.w_item);
}

void accumulate(LossBreakdown& acc, const LossBreakdown& x) {
  acc.rec += x.rec;
  acc.cl_user += x.cl_user;
  acc.cl_item += x.cl_item;
  acc.disp += x.disp;
  acc.reg += x.reg;
  acc.total += x.total;
}

LossBreakdown scaled(LossBreakdown x, double s) {
  x.rec *= s;
  x.cl_user *= s;
  x.cl_item *= s;
  x.disp *= s;
  x.reg *= s;
  x.total *= s;
  return x;
}

std::string opt_cell(const std::optional<double>& v) {
  return v ? fmt::format("{:.17g}", *v) : std::string();
}

}  // namespace

OptimizerState OptimizerState::init(const ModelParams& params,
                                    double learning_rate) {
  OptimizerState s;
  s.first_moment = GradientSet::zeros_like(params);
  s.second_moment = GradientSet::zeros_like(params);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(ModelParams& params, const GradientSet& grads,
               OptimizerState& state, const AdamConfig& config) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  const double lr = state.learning_rate;
  for_each_tensor(params, grads, state,
                  [&](Matrix& p, const Matrix& g, Matrix& m, Matrix& v) {
                    if (p.rows() != g.rows() || p.cols() != g.cols()) {
                      throw DimensionError("gradient shape mismatch");
                    }
                    m = config.beta1 * m + (1.0 - config.beta1) * g;
                    v = config.beta2 * v +
                        (1.0 - config.beta2) * g.cwiseProduct(g);
                    p.array() -= lr * (m.array() / c1) /
                                 ((v.array() / c2).sqrt() + config.epsilon);
                  });
}

void decay_learning_rate(OptimizerState& state, double ratio) {
  state.learning_rate *= ratio;
}

std::string history_csv_header() {
  return "epoch,lr,rec,cl_user,cl_item,disp,reg,total,val_recall@20,"
         "val_ndcg@20";
}

std::string history_csv_row(const HistoryRow& r) {
  return fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},"
                     "{:.17g},{},{}",
                     r.epoch, r.learning_rate, r.loss.rec, r.loss.cl_user,
                     r.loss.cl_item, r.loss.disp, r.loss.reg, r.loss.total,
                     opt_cell(r.val_recall), opt_cell(r.val_ndcg));
}

TrainResult train(const SplitDataset& split,
                  const NormalizedBipartiteGraph& graph, const Hyperparams& hp,
                  const TrainOptions& options) {
  hp.validate();
  if (graph.num_users() != split.num_users ||
      graph.num_items() != split.num_items) {
    throw DimensionError("graph does not match the split");
  }
  const bool evaluating = hp.eval_every > 0 && hp.epochs > 0;
  if (evaluating) {
    bool any_valid = false;
    for (const auto& v : split.valid) any_valid = any_valid || !v.empty();
    if (!any_valid) {
      throw Error("eval_every > 0 but the validation split is empty");
    }
  }

  TrainResult result;
  Rng init_rng = make_stream(hp.seed, Stream::kInit);
  ModelParams params = init_params(split.num_users, split.num_items, hp.dim,
                                   hp.hyperedges, init_rng);
  result.params = params;
  OptimizerState state = OptimizerState::init(params, hp.learning_rate);
  Rng neg_rng = make_stream(hp.seed, Stream::kNegatives);

  std::ofstream history;
  if (options.history_path) {
    history.open(*options.history_path);
    if (!history) {
      throw Error(fmt::format("cannot write {}",
                              options.history_path->string()));
    }
    history << history_csv_header() << '\n';
  }

  // Users who interacted with every item have no negatives; they still take
  // part through propagation but are never drawn for triples.
  const std::vector<Interaction> pool = sampling_pool(split);
  if (options.log && pool.size() < split.train_pairs.size()) {
    *options.log << fmt::format(
        "note: {} training pairs belong to users without possible negatives\n",
        split.train_pairs.size() - pool.size());
  }
  const Index n_train = static_cast<Index>(pool.size());
  const Index n_batches = (n_train + hp.batch_size - 1) / hp.batch_size;
  const std::array<Index, 1> selection_cutoff{kSelectionCutoff};
  int64_t step = 0;
  for (Index epoch = 1; epoch <= hp.epochs; ++epoch) {
    const auto augmented =
        make_augmentations(graph, hp, static_cast<uint64_t>(epoch));
    HistoryRow row;
    row.epoch = epoch;
    row.learning_rate = state.learning_rate;
    GradientSet grads;
    for (Index b = 0; b < n_batches; ++b, ++step) {
      const TripletBatch batch =
          sample_bpr_batch(split, pool, hp.batch_size, neg_rng);
      StepContext ctx;
      ctx.noise_seed =
          make_stream(hp.seed, Stream::kNoise, static_cast<uint64_t>(step))();
      ctx.augmented = &augmented;
      StepResult r;
      try {
        r = compute_gradients(params, graph, batch, hp, ctx, &grads);
      } catch (const NumericError& e) {
        throw NumericError(
            fmt::format("epoch {} batch {}: {}", epoch, b + 1, e.what()));
      }
      accumulate(row.loss, r.loss);
      adam_step(params, grads, state);
    }
    if (n_batches > 0) {
      row.loss = scaled(row.loss, 1.0 / static_cast<double>(n_batches));
    }
    decay_learning_rate(state, hp.decay_ratio);

    if (evaluating && epoch % hp.eval_every == 0) {
      const MetricsReport m = evaluate(params, graph, split, hp.layers,
                                       selection_cutoff, EvalTarget::kValid);
      row.val_recall = m.recall.at(kSelectionCutoff);
      row.val_ndcg = m.ndcg.at(kSelectionCutoff);
      if (*row.val_recall > result.best_val_recall) {
        result.best_val_recall = *row.val_recall;
        result.best_epoch = epoch;
        result.params = params;
      }
    }
    if (history.is_open()) history << history_csv_row(row) << std::endl;
    if (options.log) {
      *options.log << fmt::format(
          "epoch {:>4} lr {:.3e} loss {:.6g} (rec {:.6g} cl {:.6g}/{:.6g} "
          "disp {:.6g} reg {:.6g})",
          epoch, row.learning_rate, row.loss.total, row.loss.rec,
          row.loss.cl_user, row.loss.cl_item, row.loss.disp, row.loss.reg);
      if (row.val_recall) {
        *options.log << fmt::format(" val R@20 {:.4f} N@20 {:.4f}",
                                    *row.val_recall, *row.val_ndcg);
      }
      *options.log << std::endl;
    }
    if (options.on_epoch) options.on_epoch(row, params);
    result.history.push_back(row);
  }
  if (!evaluating) {
    result.params = params;
    result.best_epoch = hp.epochs;
  }
  return result;
}

namespace {

struct Instance {
  SplitDataset split;
  NormalizedBipartiteGraph graph;
  ModelParams params;
  TripletBatch batch;
  std::map<ViewKind, AugmentedGraph> augmented;
  StepContext ctx;
};

Matrix uniform_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = 2.0 * uniform01(rng) - 1.0;
  }
  return m;
}

Instance random_instance(const Hyperparams& hp, const GradCheckOptions& opt,
                         Rng& rng, uint64_t trial) {
  Instance in;
  const Index n_users = opt.num_users;
  const Index n_items = opt.num_items;
  std::vector<Interaction> pairs;
  // Every item gets one user, then each user gets one more random item, so
  // no node is isolated and no user owns the whole catalogue.
  std::vector<std::vector<bool>> has(n_users, std::vector<bool>(n_items));
  for (Index v = 0; v < n_items; ++v) {
    const auto u = static_cast<Index>(uniform_index(rng, n_users));
    has[u][v] = true;
  }
  for (Index u = 0; u < n_users; ++u) {
    has[u][uniform_index(rng, n_items)] = true;
  }
  for (Index u = 0; u < n_users; ++u) {
    Index count = 0;
    for (Index v = 0; v < n_items; ++v) count += has[u][v];
    if (count == n_items) has[u][0] = false;
    for (Index v = 0; v < n_items; ++v) {
      if (has[u][v]) pairs.push_back({u, v});
    }
  }
  const InteractionDataset ds = make_dataset(n_users, n_items, pairs);
  in.split.num_users = n_users;
  in.split.num_items = n_items;
  in.split.train.resize(n_users);
  in.split.valid.resize(n_users);
  in.split.test.resize(n_users);
  for (const auto& p : ds.pairs) in.split.train[p.user].push_back(p.item);
  in.split.finalize();
  in.graph = build_normalized_adjacency(in.split);
  in.params.e_user = uniform_matrix(n_users, hp.dim, rng);
  in.params.e_item = uniform_matrix(n_items, hp.dim, rng);
  in.params.w_user = uniform_matrix(hp.dim, hp.hyperedges, rng);
  in.params.w_item = uniform_matrix(hp.dim, hp.hyperedges, rng);
  in.batch = sample_bpr_batch(in.split, 4, rng);
  in.augmented = make_augmentations(in.graph, hp, trial);
  in.ctx.noise_seed = rng();
  in.ctx.augmented = &in.augmented;
  return in;
}

// True when no LeakyReLU input or perturbed pre-noise value sits within
// `margin` of zero, so central differences do not straddle a kink.
bool off_kinks(const Instance& in, const Hyperparams& hp, double margin) {
  const BranchStack gcn = forward_gcn(in.params, in.graph, hp.layers);
  HyperCaches caches;
  forward_hypergraph_sides(in.params, gcn, hp.layers, hp.leaky_slope, true,
                           true, &caches);
  auto clear = [margin](const Matrix& m) {
    const double scale = 1.0 + m.cwiseAbs().maxCoeff();
    return (m.cwiseAbs().array() >= margin * scale).all();
  };
  for (const auto* side : {&caches.user, &caches.item}) {
    for (const auto& h : *side) {
      if (!clear(h.preact)) return false;
    }
  }
  Rng rng = make_stream(in.ctx.noise_seed, Stream::kNoise);
  NoiseTrace trace;
  const BranchStack per = forward_perturbed(in.params, in.graph, hp.layers,
                                            hp.noise_radius, rng, &trace);
  for (Index l = 0; l < hp.layers; ++l) {
    if (!clear(per.layer_user[l] - trace.user[l])) return false;
    if (!clear(per.layer_item[l] - trace.item[l])) return false;
  }
  return true;
}

double tensor_error(const Matrix& analytic, const Matrix& numeric) {
  const double scale = std::max({analytic.cwiseAbs().maxCoeff(),
                                 numeric.cwiseAbs().maxCoeff(), 1e-8});
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

std::string GradCheckReport::to_table() const {
  std::ostringstream out;
  out << fmt::format("{:<10} {:>14}\n", "term", "max rel error");
  for (const auto& t : terms) {
    out << fmt::format("{:<10} {:>14.3e}\n", t.term, t.max_rel_error);
  }
  out << fmt::format("{:<10} {:>14.3e}  {}\n", "overall", max_rel_error,
                     passed ? "PASS" : "FAIL");
  return out.str();
}

GradCheckReport grad_check(const Hyperparams& hp,
                           const GradCheckOptions& options) {
  if (options.trials < 1) throw Error("grad check needs at least one trial");
  const std::array<std::pair<const char*, TermMask>, 6> terms{{
      {"rec", {true, false, false, false, false}},
      {"cl_user", {false, true, false, false, false}},
      {"cl_item", {false, false, true, false, false}},
      {"disp", {false, false, false, true, false}},
      {"reg", {false, false, false, false, true}},
      {"total", {}},
  }};
  GradCheckReport report;
  for (const auto& [name, mask] : terms) report.terms.push_back({name, 0});

  const double h = options.step;
  Rng rng = make_stream(options.seed, Stream::kGradCheck);
  for (Index trial = 0; trial < options.trials; ++trial) {
    Instance in;
    bool found = false;
    for (int attempt = 0; attempt < 1000 && !found; ++attempt) {
      in = random_instance(hp, options, rng, static_cast<uint64_t>(trial));
      found = off_kinks(in, hp, 20 * h);
    }
    if (!found) throw Error("could not draw an instance away from kinks");
    in.ctx.augmented = &in.augmented;

    for (size_t t = 0; t < terms.size(); ++t) {
      const TermMask& mask = terms[t].second;
      GradientSet analytic;
      compute_gradients(in.params, in.graph, in.batch, hp, in.ctx, &analytic,
                        mask);
      ModelParams probe = in.params;
      auto numeric = [&](Matrix ModelParams::*field) {
        Matrix& m = probe.*field;
        Matrix g(m.rows(), m.cols());
        for (Index i = 0; i < m.rows(); ++i) {
          for (Index j = 0; j < m.cols(); ++j) {
            const double orig = m(i, j);
            m(i, j) = orig + h;
            const double up =
                forward_loss(probe, in.graph, in.batch, hp, in.ctx, mask)
                    .loss.total;
            m(i, j) = orig - h;
            const double down =
                forward_loss(probe, in.graph, in.batch, hp, in.ctx, mask)
                    .loss.total;
            m(i, j) = orig;
            g(i, j) = (up - down) / (2 * h);
          }
        }
        return g;
      };
      const double err = std::max(
          {tensor_error(analytic.e_user, numeric(&ModelParams::e_user)),
           tensor_error(analytic.e_item, numeric(&ModelParams::e_item)),
           tensor_error(analytic.w_user, numeric(&ModelParams::w_user)),
           tensor_error(analytic.w_item, numeric(&ModelParams::w_item))});
      report.terms[t].max_rel_error =
          std::max(report.terms[t].max_rel_error, err);
    }
  }
  for (const auto& t : report.terms) {
    report.max_rel_error = std::max(report.max_rel_error, t.max_rel_error);
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace busgcl
