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
#include <filesystem>
#include <fstream>

#include "busgcl/evaluation.h"
#include "doctest.h"
#include "oracles.h"

namespace busgcl {
namespace {

SplitDataset manual_split(Index users, Index items) {
  SplitDataset s;
  s.num_users = users;
  s.num_items = items;
  s.train.resize(users);
  s.valid.resize(users);
  s.test.resize(users);
  return s;
}

TEST_CASE("ranked list metrics") {
  const std::vector<Index> ranked = {4, 7, 1};
  const std::vector<Index> one = {4};
  CHECK(ndcg_at(ranked, one, 20) == 1.0);
  const std::vector<Index> second = {7};
  CHECK(ndcg_at(ranked, second, 20) == doctest::Approx(0.63093).epsilon(1e-5));
  CHECK(ndcg_at(ranked, second, 20) == doctest::Approx(1 / std::log2(3.0)));
  const std::vector<Index> both = {1, 7};
  CHECK(recall_at(ranked, both, 20) == 1.0);
  CHECK(recall_at(ranked, both, 2) == 0.5);
  CHECK(recall_at(ranked, both, 1) == 0.0);
}

TEST_CASE("top n excludes and breaks ties by index") {
  const std::vector<double> scores = {1, 3, 3, 0, 3};
  const std::vector<Index> excluded = {2};
  const auto top = top_n(scores, excluded, 3);
  CHECK(top == std::vector<Index>{1, 4, 0});
  const std::vector<Index> none;
  CHECK(top_n(scores, none, 10).size() == 5);
}

TEST_CASE("evaluation matches the exhaustive oracle") {
  Rng rng = make_stream(1, Stream::kGradCheck);
  for (int trial = 0; trial < 25; ++trial) {
    const Index users = 6, items = 10;
    SplitDataset split = manual_split(users, items);
    for (Index u = 0; u < users; ++u) {
      for (Index v = 0; v < items; ++v) {
        const double x = uniform01(rng);
        if (x < 0.3) {
          split.train[u].push_back(v);
        } else if (x < 0.5) {
          split.test[u].push_back(v);
        }
      }
    }
    split.finalize();
    Matrix eu = oracle::random_matrix(users, 3, rng);
    Matrix ev = oracle::random_matrix(items, 3, rng);
    // Quantize to force ties.
    ev = (ev * 2).array().round() / 2;
    eu = (eu * 2).array().round() / 2;
    const std::vector<Index> cutoffs = {1, 3, 5};
    const auto report = evaluate_embeddings(eu, ev, split, cutoffs, EvalTarget::kTest);
    for (Index n : cutoffs) {
      double recall = 0, ndcg = 0;
      Index counted = 0;
      for (Index u = 0; u < users; ++u) {
        if (split.test[u].empty()) continue;
        ++counted;
        std::vector<double> scores(items);
        for (Index v = 0; v < items; ++v) scores[v] = eu.row(u).dot(ev.row(v));
        const auto m = oracle::rank_metrics(scores, split.train[u], split.test[u], n);
        recall += m.recall;
        ndcg += m.ndcg;
      }
      CHECK(report.users == counted);
      CHECK(report.users + report.excluded_users == users);
      CHECK(std::abs(report.recall.at(n) - recall / counted) <= 1e-8);
      CHECK(std::abs(report.ndcg.at(n) - ndcg / counted) <= 1e-8);
    }
  }
}

TEST_CASE("metrics are bounded and monotone in n") {
  Rng rng = make_stream(2, Stream::kGradCheck);
  const Index users = 30, items = 60;
  SplitDataset split = manual_split(users, items);
  for (Index u = 0; u < users; ++u) {
    for (Index v = 0; v < items; ++v) {
      const double x = uniform01(rng);
      if (x < 0.2) split.train[u].push_back(v);
      else if (x < 0.3) split.test[u].push_back(v);
    }
  }
  split.finalize();
  const Matrix eu = oracle::random_matrix(users, 4, rng);
  const Matrix ev = oracle::random_matrix(items, 4, rng);
  const std::vector<Index> cutoffs = {5, 10, 20, 40};
  const auto r = evaluate_embeddings(eu, ev, split, cutoffs, EvalTarget::kTest);
  double last_recall = 0, last_ndcg = 0;
  for (Index n : cutoffs) {
    CHECK(r.recall.at(n) >= last_recall);
    CHECK(r.ndcg.at(n) >= last_ndcg - 1e-15);
    CHECK(r.recall.at(n) <= 1.0);
    CHECK(r.ndcg.at(n) <= 1.0);
    last_recall = r.recall.at(n);
    last_ndcg = r.ndcg.at(n);
  }
  // No training item is ever recommended back.
  for (Index u = 0; u < users; ++u) {
    std::vector<double> scores(items);
    for (Index v = 0; v < items; ++v) scores[v] = eu.row(u).dot(ev.row(v));
    for (Index v : top_n(scores, split.train_sorted[u], 40)) {
      CHECK_FALSE(split.is_train(u, v));
    }
  }
}

TEST_CASE("users without targets are excluded and counted") {
  SplitDataset split = manual_split(3, 4);
  split.train = {{0}, {1}, {2}};
  split.test = {{1}, {}, {3}};
  split.valid = {{}, {}, {}};
  split.finalize();
  const Matrix eu = Matrix::Ones(3, 2), ev = Matrix::Ones(4, 2);
  const auto r = evaluate_embeddings(eu, ev, split, kDefaultCutoffs, EvalTarget::kTest);
  CHECK(r.users == 2);
  CHECK(r.excluded_users == 1);
  const auto v = evaluate_embeddings(eu, ev, split, kDefaultCutoffs, EvalTarget::kValid);
  CHECK(v.users == 0);
  CHECK(v.recall.at(20) == 0.0);
  const std::vector<Index> twice = {20, 20};
  CHECK_THROWS(evaluate_embeddings(eu, ev, split, twice, EvalTarget::kTest));
}

TEST_CASE("metrics json layout") {
  MetricsReport r;
  r.recall[20] = 0.25;
  r.recall[40] = 0.5;
  r.ndcg[20] = 0.125;
  r.ndcg[40] = 0.375;
  r.users = 7;
  r.seed = 3;
  CHECK(r.to_json() ==
        R"({"recall":{"20":0.25,"40":0.5},"ndcg":{"20":0.125,"40":0.375},"users":7,"seed":3})");
  CHECK(r.to_table().find("0.2500") != std::string::npos);
}

TEST_CASE("pca on axis aligned data") {
  Rng rng = make_stream(3, Stream::kGradCheck);
  const Index n = 200;
  Matrix x(n, 2);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = 3.0 * (uniform01(rng) - 0.5);
    x(i, 1) = 0.5 * (uniform01(rng) - 0.5);
  }
  // Make the columns exactly uncorrelated so the axes are the components.
  x.rowwise() -= x.colwise().mean();
  const double cross = x.col(0).dot(x.col(1)) / x.col(0).squaredNorm();
  x.col(1) -= cross * x.col(0);
  const auto p = pca_project(x, 2, 1);
  CHECK_FALSE(p.degenerate);
  const double var0 = x.col(0).squaredNorm() / n;
  const double var1 = x.col(1).squaredNorm() / n;
  CHECK(std::abs(p.explained_variance[0] - var0) <= 1e-8);
  CHECK(std::abs(p.explained_variance[1] - var1) <= 1e-8);
  CHECK((p.coords.col(0).cwiseAbs() - x.col(0).cwiseAbs()).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((p.coords.col(1).cwiseAbs() - x.col(1).cwiseAbs()).cwiseAbs().maxCoeff() <= 1e-8);

  Matrix shifted = x;
  shifted.rowwise() += RowVector::Constant(2, 5.0);
  const auto q = pca_project(shifted, 2, 1);
  CHECK((q.coords - p.coords).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("pca of identical rows is all zero") {
  const Matrix same = Matrix::Constant(5, 3, 1.5);
  const auto p = pca_project(same, 2, 0);
  CHECK(p.degenerate);
  CHECK(p.coords.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS(pca_project(Matrix::Ones(1, 3), 2, 0));
}

TEST_CASE("projection file layout") {
  const auto path = std::filesystem::temp_directory_path() / "busgcl_proj.tsv";
  const Matrix coords = (Matrix(3, 2) << 1, 2, 3, 4, 5, 6).finished();
  write_projection(path, coords, 2);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "node_type\tindex\tx\ty");
  std::getline(in, line);
  CHECK(line.rfind("user\t0\t", 0) == 0);
  std::getline(in, line);
  std::getline(in, line);
  CHECK(line.rfind("item\t0\t", 0) == 0);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace busgcl
