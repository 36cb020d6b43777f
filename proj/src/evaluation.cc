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

#include "busgcl/evaluation.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fmt/format.h"
#include "json.hpp"

namespace busgcl {
namespace {

// Users scored per dense block.
constexpr Index kUserBlock = 128;

const std::vector<Index>& targets_of(const SplitDataset& split, EvalTarget t,
                                     Index user) {
  return t == EvalTarget::kTest ? split.test[user] : split.valid[user];
}

}  // namespace

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  auto& r = j["recall"] = nlohmann::ordered_json::object();
  for (const auto& [n, v] : recall) r[std::to_string(n)] = v;
  auto& g = j["ndcg"] = nlohmann::ordered_json::object();
  for (const auto& [n, v] : ndcg) g[std::to_string(n)] = v;
  j["users"] = users;
  j["seed"] = seed;
  return j.dump();
}

std::string MetricsReport::to_table() const {
  std::ostringstream out;
  out << fmt::format("{:>8} {:>10} {:>10}\n", "N", "Recall", "NDCG");
  for (const auto& [n, v] : recall) {
    out << fmt::format("{:>8} {:>10.4f} {:>10.4f}\n", n, v, ndcg.at(n));
  }
  out << fmt::format("users evaluated: {} (excluded: {}), seed {}", users,
                     excluded_users, seed);
  if (!config_hash.empty()) out << ", config " << config_hash;
  out << '\n';
  return out.str();
}

std::vector<Index> top_n(std::span<const double> scores,
                         std::span<const Index> excluded, Index n) {
  std::vector<Index> candidates;
  candidates.reserve(scores.size());
  auto ex = excluded.begin();
  for (Index v = 0; v < static_cast<Index>(scores.size()); ++v) {
    while (ex != excluded.end() && *ex < v) ++ex;
    if (ex != excluded.end() && *ex == v) continue;
    candidates.push_back(v);
  }
  const auto k = std::min<Index>(n, static_cast<Index>(candidates.size()));
  std::partial_sort(candidates.begin(), candidates.begin() + k,
                    candidates.end(), [&scores](Index a, Index b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  candidates.resize(k);
  return candidates;
}

double recall_at(std::span<const Index> ranked, std::span<const Index> truth,
                 Index n) {
  if (truth.empty()) return 0;
  Index hits = 0;
  const auto k = std::min<Index>(n, static_cast<Index>(ranked.size()));
  for (Index r = 0; r < k; ++r) {
    if (std::find(truth.begin(), truth.end(), ranked[r]) != truth.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double ndcg_at(std::span<const Index> ranked, std::span<const Index> truth,
               Index n) {
  if (truth.empty()) return 0;
  double dcg = 0;
  const auto k = std::min<Index>(n, static_cast<Index>(ranked.size()));
  for (Index r = 0; r < k; ++r) {
    if (std::find(truth.begin(), truth.end(), ranked[r]) != truth.end()) {
      dcg += 1.0 / std::log2(static_cast<double>(r + 2));
    }
  }
  double idcg = 0;
  const auto ideal = std::min<Index>(n, static_cast<Index>(truth.size()));
  for (Index r = 0; r < ideal; ++r) {
    idcg += 1.0 / std::log2(static_cast<double>(r + 2));
  }
  return dcg / idcg;
}

MetricsReport evaluate_embeddings(const Matrix& user_emb,
                                  const Matrix& item_emb,
                                  const SplitDataset& split,
                                  std::span<const Index> cutoffs,
                                  EvalTarget target) {
  if (user_emb.rows() != split.num_users || item_emb.rows() != split.num_items) {
    throw DimensionError("embeddings do not match the split's dimensions");
  }
  if (cutoffs.empty()) throw Error("no cutoffs requested");
  for (Index n : cutoffs) {
    if (n < 1) throw Error(fmt::format("cutoff {} must be >= 1", n));
  }
  for (size_t i = 0; i < cutoffs.size(); ++i) {
    if (std::find(cutoffs.begin(), cutoffs.begin() + i, cutoffs[i]) !=
        cutoffs.begin() + i) {
      throw Error(fmt::format("cutoff {} requested twice", cutoffs[i]));
    }
  }
  const Index max_n = *std::max_element(cutoffs.begin(), cutoffs.end());
  MetricsReport report;
  for (Index n : cutoffs) {
    report.recall[n] = 0;
    report.ndcg[n] = 0;
  }
  std::vector<Index> users;
  for (Index u = 0; u < split.num_users; ++u) {
    if (targets_of(split, target, u).empty()) {
      ++report.excluded_users;
    } else {
      users.push_back(u);
    }
  }
  // Per-user metrics, summed afterwards in user order so the totals do not
  // depend on how the blocks were scheduled.
  const Index n_eval = static_cast<Index>(users.size());
  const Index n_cut = static_cast<Index>(cutoffs.size());
  Matrix recall(n_eval, n_cut);
  Matrix ndcg(n_eval, n_cut);
  const Index n_blocks = (n_eval + kUserBlock - 1) / kUserBlock;
#pragma omp parallel for schedule(dynamic)
  for (Index blk = 0; blk < n_blocks; ++blk) {
    const Index start = blk * kUserBlock;
    const Index count = std::min<Index>(kUserBlock, n_eval - start);
    Matrix block(count, user_emb.cols());
    for (Index k = 0; k < count; ++k) block.row(k) = user_emb.row(users[start + k]);
    const Matrix scores = block * item_emb.transpose();
    for (Index k = 0; k < count; ++k) {
      const Index u = users[start + k];
      const auto row = scores.row(k);
      const std::vector<Index> ranked = top_n(
          std::span<const double>(row.data(), row.size()),
          split.train_sorted[u], max_n);
      const auto& truth = targets_of(split, target, u);
      for (Index c = 0; c < n_cut; ++c) {
        recall(start + k, c) = recall_at(ranked, truth, cutoffs[c]);
        ndcg(start + k, c) = ndcg_at(ranked, truth, cutoffs[c]);
      }
    }
  }
  for (Index c = 0; c < n_cut; ++c) {
    for (Index r = 0; r < n_eval; ++r) {
      report.recall[cutoffs[c]] += recall(r, c);
      report.ndcg[cutoffs[c]] += ndcg(r, c);
    }
  }
  report.users = static_cast<Index>(users.size());
  if (report.users > 0) {
    for (auto& [n, v] : report.recall) v /= static_cast<double>(report.users);
    for (auto& [n, v] : report.ndcg) v /= static_cast<double>(report.users);
  }
  return report;
}

MetricsReport evaluate(const ModelParams& params,
                       const NormalizedBipartiteGraph& graph,
                       const SplitDataset& split, Index layers,
                       std::span<const Index> cutoffs, EvalTarget target) {
  const BranchStack s = forward_gcn(params, graph, layers);
  return evaluate_embeddings(s.final_user(), s.final_item(), split, cutoffs,
                             target);
}

Projection pca_project(const Matrix& embeddings, Index out_dim,
                       uint64_t seed) {
  const Index n = embeddings.rows();
  const Index d = embeddings.cols();
  if (n < 2 || d < out_dim || out_dim < 1) {
    throw DimensionError(
        fmt::format("cannot project {}x{} onto {} axes", n, d, out_dim));
  }
  const RowVector mean = embeddings.colwise().mean();
  const Matrix centred = embeddings.rowwise() - mean;
  Eigen::MatrixXd cov =
      (centred.transpose() * centred) / static_cast<double>(n);

  Projection out;
  out.coords = Matrix::Zero(n, out_dim);
  out.explained_variance = Vector::Zero(out_dim);
  const double scale = cov.trace();
  if (!(scale > 0)) {
    out.degenerate = true;
    return out;
  }
  Rng rng = make_stream(seed, Stream::kProjection);
  for (Index k = 0; k < out_dim; ++k) {
    Vector v(d);
    for (Index i = 0; i < d; ++i) v[i] = uniform01(rng) - 0.5;
    v.normalize();
    double lambda = 0;
    for (int it = 0; it < 100000; ++it) {
      Vector next = cov * v;
      const double norm = next.norm();
      if (norm <= 1e-14 * scale) {
        lambda = 0;
        break;
      }
      next /= norm;
      const double delta = (next - v).norm();
      v = std::move(next);
      lambda = v.dot(cov * v);
      if (delta < 1e-13) break;
    }
    if (lambda <= 1e-14 * scale) break;  // remaining directions carry nothing
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    out.explained_variance[k] = lambda;
    out.coords.col(k) = centred * v;
    cov -= lambda * v * v.transpose();
  }
  return out;
}

void write_projection(const std::filesystem::path& path, const Matrix& coords,
                      Index num_users) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << "node_type\tindex\tx\ty\n";
  for (Index r = 0; r < coords.rows(); ++r) {
    const bool user = r < num_users;
    out << (user ? "user" : "item") << '\t' << (user ? r : r - num_users)
        << '\t' << fmt::format("{:.17g}\t{:.17g}", coords(r, 0),
                               coords.cols() > 1 ? coords(r, 1) : 0.0)
        << '\n';
  }
}

}  // namespace busgcl
