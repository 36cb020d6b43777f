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

#include "busgcl/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <string_view>

#include "fmt/format.h"

namespace busgcl {

Index IdMap::intern(const std::string& raw) {
  auto [it, inserted] = index_.try_emplace(raw, size());
  if (inserted) raws_.push_back(raw);
  return it->second;
}

Index IdMap::find(const std::string& raw) const {
  auto it = index_.find(raw);
  return it == index_.end() ? -1 : it->second;
}

void IdMap::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  for (Index i = 0; i < size(); ++i) out << raws_[i] << '\t' << i << '\n';
}

InteractionDataset parse_interactions(std::istream& in,
                                      const LoadOptions& options,
                                      const std::string& source) {
  InteractionDataset ds;
  std::set<Interaction> seen;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && options.skip_header) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(
          fmt::format("{}:{}: expected user<TAB>item", source, line_no));
    }
    const auto tab2 = line.find('\t', tab + 1);
    std::string user = line.substr(0, tab);
    std::string item = line.substr(
        tab + 1, tab2 == std::string::npos ? std::string::npos
                                           : tab2 - tab - 1);
    if (user.empty() || item.empty()) {
      throw ParseError(
          fmt::format("{}:{}: empty user or item field", source, line_no));
    }
    const Interaction p{ds.user_ids.intern(user), ds.item_ids.intern(item)};
    if (seen.insert(p).second) ds.pairs.push_back(p);
  }
  if (ds.pairs.empty()) {
    throw ParseError(fmt::format("{}: no interactions", source));
  }
  ds.num_users = ds.user_ids.size();
  ds.num_items = ds.item_ids.size();
  return ds;
}

InteractionDataset load_interactions(const std::filesystem::path& path,
                                     const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  return parse_interactions(in, options, path.string());
}

InteractionDataset make_dataset(Index num_users, Index num_items,
                                std::vector<Interaction> pairs) {
  InteractionDataset ds;
  ds.num_users = num_users;
  ds.num_items = num_items;
  std::set<Interaction> seen;
  for (const auto& p : pairs) {
    if (p.user < 0 || p.user >= num_users || p.item < 0 ||
        p.item >= num_items) {
      throw DimensionError(
          fmt::format("pair ({}, {}) out of range", p.user, p.item));
    }
    if (seen.insert(p).second) ds.pairs.push_back(p);
  }
  for (Index u = 0; u < num_users; ++u) ds.user_ids.intern(std::to_string(u));
  for (Index v = 0; v < num_items; ++v) ds.item_ids.intern(std::to_string(v));
  return ds;
}

void SplitDataset::finalize() {
  train_sorted = train;
  train_pairs.clear();
  for (Index u = 0; u < static_cast<Index>(train.size()); ++u) {
    std::sort(train_sorted[u].begin(), train_sorted[u].end());
    for (Index v : train[u]) train_pairs.push_back({u, v});
  }
}

bool SplitDataset::is_train(Index user, Index item) const {
  const auto& items = train_sorted[user];
  return std::binary_search(items.begin(), items.end(), item);
}

SplitDataset split_dataset(const InteractionDataset& ds,
                           const SplitFractions& fractions, uint64_t seed) {
  if (!(fractions.train > 0 && fractions.valid >= 0 &&
        fractions.train + fractions.valid <= 1.0 + 1e-12)) {
    throw Error(fmt::format("invalid split fractions {}/{}", fractions.train,
                            fractions.valid));
  }
  SplitDataset split;
  split.num_users = ds.num_users;
  split.num_items = ds.num_items;
  split.seed = seed;
  split.train.resize(ds.num_users);
  split.valid.resize(ds.num_users);
  split.test.resize(ds.num_users);

  std::vector<std::vector<Index>> by_user(ds.num_users);
  for (const auto& p : ds.pairs) by_user[p.user].push_back(p.item);

  const double test_frac = std::max(0.0, 1.0 - fractions.train - fractions.valid);
  for (Index u = 0; u < ds.num_users; ++u) {
    auto& items = by_user[u];
    const Index n = static_cast<Index>(items.size());
    if (n < 3) {
      split.train[u] = items;
      continue;
    }
    // One stream per user keeps a user's split independent of the others.
    Rng rng = make_stream(seed, Stream::kSplit, static_cast<uint64_t>(u));
    for (Index i = n - 1; i > 0; --i) {
      const auto j = static_cast<Index>(
          uniform_index(rng, static_cast<uint64_t>(i + 1)));
      std::swap(items[i], items[j]);
    }
    Index n_test = std::llround(static_cast<double>(n) * test_frac);
    Index n_valid = std::llround(static_cast<double>(n) * fractions.valid);
    if (test_frac > 0 && n_test == 0) n_test = 1;
    n_valid = std::min(n_valid, n - n_test - 1);
    n_valid = std::max<Index>(n_valid, 0);
    const Index n_train = n - n_test - n_valid;
    split.train[u].assign(items.begin(), items.begin() + n_train);
    split.valid[u].assign(items.begin() + n_train,
                          items.begin() + n_train + n_valid);
    split.test[u].assign(items.begin() + n_train + n_valid, items.end());
  }
  split.finalize();
  return split;
}

NormalizedBipartiteGraph build_normalized_adjacency(
    Index num_users, Index num_items, const std::vector<Interaction>& pairs,
    IsolatedNodes isolated) {
  if (pairs.empty()) throw Error("training split is empty");
  NormalizedBipartiteGraph g;
  g.user_degrees = Vector::Zero(num_users);
  g.item_degrees = Vector::Zero(num_items);
  for (const auto& p : pairs) {
    if (p.user < 0 || p.user >= num_users || p.item < 0 ||
        p.item >= num_items) {
      throw DimensionError(
          fmt::format("pair ({}, {}) out of range", p.user, p.item));
    }
    g.user_degrees[p.user] += 1;
    g.item_degrees[p.item] += 1;
  }
  if (isolated == IsolatedNodes::kReject) {
    for (Index u = 0; u < num_users; ++u) {
      if (g.user_degrees[u] == 0) {
        throw DimensionError(fmt::format("user {} has no training items", u));
      }
    }
    for (Index v = 0; v < num_items; ++v) {
      if (g.item_degrees[v] == 0) {
        throw DimensionError(fmt::format("item {} has no training users", v));
      }
    }
  }
  std::vector<Eigen::Triplet<double, int64_t>> entries;
  entries.reserve(pairs.size());
  for (const auto& p : pairs) {
    entries.emplace_back(
        p.user, p.item,
        1.0 / std::sqrt(g.user_degrees[p.user] * g.item_degrees[p.item]));
  }
  g.a_norm.resize(num_users, num_items);
  // Duplicate pairs would be summed; callers pass distinct pairs.
  g.a_norm.setFromTriplets(entries.begin(), entries.end());
  g.a_norm_t = g.a_norm.transpose();
  return g;
}

NormalizedBipartiteGraph build_normalized_adjacency(const SplitDataset& split,
                                                    IsolatedNodes isolated) {
  return build_normalized_adjacency(split.num_users, split.num_items,
                                    split.train_pairs, isolated);
}

void index_batch_nodes(TripletBatch& batch) {
  batch.users.clear();
  batch.items.clear();
  batch.pos_items.clear();
  for (const auto& t : batch.triples) {
    batch.users.push_back(t.user);
    batch.items.push_back(t.pos);
    batch.pos_items.push_back(t.pos);
    batch.items.push_back(t.neg);
  }
  for (auto* v : {&batch.users, &batch.items, &batch.pos_items}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
}

std::vector<Interaction> sampling_pool(const SplitDataset& split) {
  std::vector<Interaction> pool;
  pool.reserve(split.train_pairs.size());
  for (const auto& p : split.train_pairs) {
    if (static_cast<Index>(split.train[p.user].size()) < split.num_items) {
      pool.push_back(p);
    }
  }
  return pool;
}

TripletBatch sample_bpr_batch(const SplitDataset& split, Index batch_size,
                              Rng& rng) {
  return sample_bpr_batch(split, split.train_pairs, batch_size, rng);
}

TripletBatch sample_bpr_batch(const SplitDataset& split,
                              std::span<const Interaction> pool,
                              Index batch_size, Rng& rng) {
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (pool.empty()) throw Error("no training interactions");
  TripletBatch batch;
  batch.triples.reserve(batch_size);
  const auto n_pairs = static_cast<uint64_t>(pool.size());
  const auto n_items = static_cast<uint64_t>(split.num_items);
  for (Index b = 0; b < batch_size; ++b) {
    const Interaction& p = pool[uniform_index(rng, n_pairs)];
    Index neg = -1;
    for (int attempt = 0; attempt < kMaxNegativeAttempts; ++attempt) {
      const auto cand = static_cast<Index>(uniform_index(rng, n_items));
      if (!split.is_train(p.user, cand)) {
        neg = cand;
        break;
      }
    }
    if (neg < 0) {
      throw Error(fmt::format(
          "no negative item found for user {} after {} attempts", p.user,
          kMaxNegativeAttempts));
    }
    batch.triples.push_back({p.user, p.item, neg});
  }
  index_batch_nodes(batch);
  return batch;
}

}  // namespace busgcl
