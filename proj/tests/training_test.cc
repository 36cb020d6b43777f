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

#include <cmath>

#include "busgcl/model.h"
#include "busgcl/training.h"
#include "doctest.h"
#include "oracles.h"

namespace busgcl {
namespace {

ModelParams scalar_params(double x) {
  ModelParams p;
  p.e_user = Matrix::Constant(1, 1, x);
  p.e_item = Matrix::Zero(1, 1);
  p.w_user = Matrix::Zero(1, 1);
  p.w_item = Matrix::Zero(1, 1);
  return p;
}

SplitDataset random_split(Index users, Index items, double density,
                          uint64_t seed) {
  Rng rng = make_stream(seed, Stream::kSplit, 1000);
  auto pairs = oracle::random_pairs(users, items, density, rng);
  for (Index u = 0; u < users; ++u) pairs.push_back({u, u % items});
  return split_dataset(make_dataset(users, items, pairs), {0.7, 0.15}, seed);
}

Hyperparams small_hp() {
  Hyperparams hp;
  hp.dim = 4;
  hp.layers = 2;
  hp.hyperedges = 3;
  hp.batch_size = 32;
  hp.epochs = 3;
  hp.seed = 5;
  return hp;
}

TEST_CASE("adam first step") {
  ModelParams p = scalar_params(0.0);
  GradientSet g = GradientSet::zeros_like(p);
  g.e_user(0, 0) = 1.0;
  OptimizerState s = OptimizerState::init(p, 1e-3);
  adam_step(p, g, s);
  CHECK(s.step == 1);
  CHECK(p.e_user(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(s.second_moment.e_user(0, 0) >= 0);
}

TEST_CASE("adam with zero gradient leaves params and decays moments") {
  ModelParams p = scalar_params(0.5);
  GradientSet g = GradientSet::zeros_like(p);
  OptimizerState s = OptimizerState::init(p, 1e-3);
  s.first_moment.e_user(0, 0) = 0.0;
  adam_step(p, g, s);
  CHECK(p.e_user(0, 0) == 0.5);
  g.e_user(0, 0) = 2.0;
  adam_step(p, g, s);
  const double m = s.first_moment.e_user(0, 0);
  g.e_user(0, 0) = 0.0;
  adam_step(p, g, s);
  CHECK(std::abs(s.first_moment.e_user(0, 0)) < std::abs(m));
}

TEST_CASE("adam is deterministic") {
  Rng rng = make_stream(1, Stream::kGradCheck);
  ModelParams a;
  a.e_user = oracle::random_matrix(3, 2, rng);
  a.e_item = oracle::random_matrix(4, 2, rng);
  a.w_user = oracle::random_matrix(2, 2, rng);
  a.w_item = oracle::random_matrix(2, 2, rng);
  ModelParams b = a;
  OptimizerState sa = OptimizerState::init(a, 1e-2);
  OptimizerState sb = OptimizerState::init(b, 1e-2);
  for (int i = 0; i < 10; ++i) {
    GradientSet g = GradientSet::zeros_like(a);
    g.e_user = oracle::random_matrix(3, 2, rng);
    g.w_item = oracle::random_matrix(2, 2, rng);
    adam_step(a, g, sa);
    adam_step(b, g, sb);
  }
  CHECK(a.e_user == b.e_user);
  CHECK(a.w_item == b.w_item);
}

TEST_CASE("learning rate decay") {
  ModelParams p = scalar_params(0);
  OptimizerState s = OptimizerState::init(p, 1e-3);
  decay_learning_rate(s, 0.96);
  CHECK(s.learning_rate == doctest::Approx(9.6e-4).epsilon(1e-12));
  for (int k = 1; k < 25; ++k) decay_learning_rate(s, 0.96);
  CHECK(std::abs(s.learning_rate - 1e-3 * std::pow(0.96, 25)) <= 1e-12);
  OptimizerState c = OptimizerState::init(p, 1e-3);
  decay_learning_rate(c, 1.0);
  CHECK(c.learning_rate == 1e-3);
}

TEST_CASE("bpr gradient without propagation") {
  // One user, items {0: positive, 1: negative}, no layers, no auxiliary terms.
  const auto graph = build_normalized_adjacency(1, 2, {{0, 0}});
  ModelParams p;
  p.e_user = (Matrix(1, 2) << 0.3, -0.8).finished();
  p.e_item = (Matrix(2, 2) << 0.5, 0.1, -0.4, 0.9).finished();
  p.w_user = Matrix::Zero(2, 1);
  p.w_item = Matrix::Zero(2, 1);
  TripletBatch batch;
  batch.triples = {{0, 0, 1}};
  index_batch_nodes(batch);
  Hyperparams hp;
  hp.layers = 0;
  hp.weights.lambda_c = 0;
  hp.weights.lambda_d = 0;
  hp.weights.lambda_r = 0;
  GradientSet g;
  const StepResult r = compute_gradients(p, graph, batch, hp, {}, &g);
  const double diff = p.e_user.row(0).dot(p.e_item.row(0) - p.e_item.row(1));
  const double coeff = -sigmoid(-diff);
  const RowVector want = coeff * (p.e_item.row(0) - p.e_item.row(1));
  CHECK((g.e_user.row(0) - want).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((g.e_item.row(0) - coeff * p.e_user.row(0)).cwiseAbs().maxCoeff() <=
        1e-15);
  CHECK((g.e_item.row(1) + coeff * p.e_user.row(0)).cwiseAbs().maxCoeff() <=
        1e-15);
  CHECK(r.loss.rec == doctest::Approx(softplus(-diff)));
  CHECK(r.loss.total == r.loss.rec);
}

TEST_CASE("rec gradient ignores nodes outside the batch's reach") {
  // Two components: {u0,u1} x {i0,i1} and {u2,u3} x {i2,i3}.
  const std::vector<Interaction> pairs = {{0, 0}, {1, 1}, {0, 1},
                                          {2, 2}, {3, 3}, {2, 3}};
  const auto graph = build_normalized_adjacency(4, 4, pairs);
  Rng rng = make_stream(2, Stream::kGradCheck);
  ModelParams p;
  p.e_user = oracle::random_matrix(4, 3, rng);
  p.e_item = oracle::random_matrix(4, 3, rng);
  p.w_user = oracle::random_matrix(3, 2, rng);
  p.w_item = oracle::random_matrix(3, 2, rng);
  TripletBatch batch;
  batch.triples = {{0, 0, 1}, {1, 1, 0}};
  index_batch_nodes(batch);
  Hyperparams hp = small_hp();
  TermMask only_rec{true, false, false, false, false};
  GradientSet g;
  compute_gradients(p, graph, batch, hp, {}, &g, only_rec);
  CHECK(g.e_user.bottomRows(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.e_item.bottomRows(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.e_user.topRows(2).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("forward values agree with the gradient pass") {
  const SplitDataset split = random_split(12, 15, 0.3, 3);
  const auto graph = build_normalized_adjacency(split);
  Hyperparams hp = small_hp();
  Rng rng = make_stream(3, Stream::kInit);
  const ModelParams p = init_params(12, 15, hp.dim, hp.hyperedges, rng);
  Rng neg = make_stream(3, Stream::kNegatives);
  const auto batch = sample_bpr_batch(split, 16, neg);
  const StepContext ctx{.noise_seed = 77};
  GradientSet g;
  const auto a = forward_loss(p, graph, batch, hp, ctx);
  const auto b = compute_gradients(p, graph, batch, hp, ctx, &g);
  CHECK(a.loss.total == b.loss.total);
  CHECK(a.loss.cl_user == b.loss.cl_user);
  CHECK(a.loss.disp == b.loss.disp);
  CHECK(g.all_finite());
}

TEST_CASE("one small step lowers the loss") {
  const SplitDataset split = random_split(10, 12, 0.3, 4);
  const auto graph = build_normalized_adjacency(split);
  for (DispMode mode : {DispMode::kDispersing, DispMode::kKl}) {
    Hyperparams hp = small_hp();
    hp.disp_mode = mode;
    Rng rng = make_stream(4, Stream::kInit);
    ModelParams p = init_params(10, 12, hp.dim, hp.hyperedges, rng);
    Rng neg = make_stream(4, Stream::kNegatives);
    const auto batch = sample_bpr_batch(split, 16, neg);
    const StepContext ctx{.noise_seed = 9};
    GradientSet g;
    const double before = compute_gradients(p, graph, batch, hp, ctx, &g).loss.total;
    OptimizerState s = OptimizerState::init(p, 1e-5);
    adam_step(p, g, s);
    const double after = forward_loss(p, graph, batch, hp, ctx).loss.total;
    CHECK(after < before);
  }
}

TEST_CASE("zero epochs returns the initial parameters") {
  const SplitDataset split = random_split(8, 9, 0.3, 5);
  const auto graph = build_normalized_adjacency(split);
  Hyperparams hp = small_hp();
  hp.epochs = 0;
  const auto r = train(split, graph, hp);
  CHECK(r.history.empty());
  Rng rng = make_stream(hp.seed, Stream::kInit);
  const ModelParams init = init_params(8, 9, hp.dim, hp.hyperedges, rng);
  CHECK(r.params.e_user == init.e_user);
  CHECK(r.params.w_item == init.w_item);
}

TEST_CASE("single interaction toy set trains") {
  const auto ds = make_dataset(1, 1, {{0, 0}});
  const auto split = split_dataset(ds, {}, 1);
  const auto graph = build_normalized_adjacency(split);
  Hyperparams hp = small_hp();
  hp.eval_every = 0;
  const auto r = train(split, graph, hp);
  CHECK(r.history.size() == 3);
  CHECK(r.params.all_finite());
}

TEST_CASE("missing validation data is rejected when evaluating") {
  const auto ds = make_dataset(2, 2, {{0, 0}, {1, 1}});
  const auto split = split_dataset(ds, {}, 1);
  const auto graph = build_normalized_adjacency(split);
  Hyperparams hp = small_hp();
  CHECK_THROWS_AS(train(split, graph, hp), Error);
}

TEST_CASE("training is reproducible and keeps the best epoch") {
  const SplitDataset split = random_split(20, 25, 0.25, 6);
  const auto graph = build_normalized_adjacency(split);
  Hyperparams hp = small_hp();
  hp.epochs = 4;
  const auto a = train(split, graph, hp);
  const auto b = train(split, graph, hp);
  REQUIRE(a.history.size() == 4);
  for (size_t i = 0; i < a.history.size(); ++i) {
    CHECK(history_csv_row(a.history[i]) == history_csv_row(b.history[i]));
  }
  CHECK(a.params.e_user == b.params.e_user);
  CHECK(a.params.w_user == b.params.w_user);
  double best = -1;
  for (const auto& row : a.history) best = std::max(best, *row.val_recall);
  CHECK(a.best_val_recall == best);
  CHECK(a.history[a.best_epoch - 1].val_recall == best);
}

TEST_CASE("history csv layout") {
  CHECK(history_csv_header() ==
        "epoch,lr,rec,cl_user,cl_item,disp,reg,total,val_recall@20,val_ndcg@20");
  HistoryRow row;
  row.epoch = 2;
  const std::string line = history_csv_row(row);
  CHECK(line.substr(0, 2) == "2,");
  CHECK(line.substr(line.size() - 2) == ",,");
}

TEST_CASE("gradient check on the full objective") {
  Hyperparams hp = small_hp();
  GradCheckOptions opt;
  const auto report = grad_check(hp, opt);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-4);
  for (const auto& t : report.terms) {
    if (t.term == "rec") CHECK(t.max_rel_error < 1e-6);
  }
}

TEST_CASE("gradient check for every view and alternative loss") {
  GradCheckOptions opt;
  opt.trials = 2;
  for (SubviewMode mode : {SubviewMode::kHypBoth, SubviewMode::kPerBoth,
                           SubviewMode::kReversed}) {
    Hyperparams hp = small_hp();
    hp.apply_subview_mode(mode);
    CHECK(grad_check(hp, opt).passed);
  }
  for (ViewKind v : {ViewKind::kNodeDrop, ViewKind::kEdgeDrop,
                     ViewKind::kRandomWalk}) {
    Hyperparams hp = small_hp();
    hp.subview_mode = SubviewMode::kCustom;
    hp.user_view = v;
    hp.item_view = v;
    hp.drop_ratio = 0.3;
    CHECK(grad_check(hp, opt).passed);
  }
  Hyperparams kl = small_hp();
  kl.disp_mode = DispMode::kKl;
  CHECK(grad_check(kl, opt).passed);
  Hyperparams full = small_hp();
  full.full_denominator = true;
  CHECK(grad_check(full, opt).passed);
  Hyperparams negs = small_hp();
  negs.contrast_negatives = true;
  CHECK(grad_check(negs, opt).passed);
}

TEST_CASE("zero tolerance always fails") {
  GradCheckOptions opt;
  opt.trials = 1;
  opt.tolerance = 0;
  CHECK_FALSE(grad_check(small_hp(), opt).passed);
}

}  // namespace
}  // namespace busgcl
