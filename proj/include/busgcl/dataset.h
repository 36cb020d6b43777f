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

#ifndef BUSGCL_DATASET_H_
#define BUSGCL_DATASET_H_

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "busgcl/common.h"
#include "busgcl/rng.h"

namespace busgcl {

// Bijection between opaque raw IDs and contiguous indices, in
// first-appearance order.
class IdMap {
 public:
  // Returns the index for `raw`, assigning the next one if unseen.
  Index intern(const std::string& raw);
  Index find(const std::string& raw) const;  // -1 when absent
  const std::string& raw(Index index) const { return raws_.at(index); }
  Index size() const { return static_cast<Index>(raws_.size()); }

  // Two-column TSV: raw_id<TAB>index.
  void save(const std::filesystem::path& path) const;

 private:
  std::unordered_map<std::string, Index> index_;
  std::vector<std::string> raws_;
};

struct Interaction {
  Index user;
  Index item;
  friend bool operator==(const Interaction&, const Interaction&) = default;
  friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

struct InteractionDataset {
  Index num_users = 0;
  Index num_items = 0;
  std::vector<Interaction> pairs;
  IdMap user_ids;
  IdMap item_ids;
};

struct LoadOptions {
  bool skip_header = false;
};

// Reads `raw_user<TAB>raw_item[<TAB>...]` lines. Throws ParseError with the
// line number for a line without a tab, and for a file with no interactions.
InteractionDataset load_interactions(const std::filesystem::path& path,
                                     const LoadOptions& options = {});
InteractionDataset parse_interactions(std::istream& in,
                                      const LoadOptions& options = {},
                                      const std::string& source = "<stream>");

// Builds a dataset from already-indexed pairs (IDs become "0", "1", ...).
// Duplicates are collapsed.
InteractionDataset make_dataset(Index num_users, Index num_items,
                                std::vector<Interaction> pairs);

struct SplitFractions {
  double train = 0.8;
  double valid = 0.05;
};

// Per-user item lists; every vector is indexed by user.
struct SplitDataset {
  Index num_users = 0;
  Index num_items = 0;
  std::vector<std::vector<Index>> train;
  std::vector<std::vector<Index>> valid;
  std::vector<std::vector<Index>> test;
  uint64_t seed = 0;

  // Derived by finalize(): sorted copies of `train[u]` for membership tests
  // and the flattened training pairs in user order.
  std::vector<std::vector<Index>> train_sorted;
  std::vector<Interaction> train_pairs;

  // Must be called after the per-user lists are filled or modified.
  void finalize();
  bool is_train(Index user, Index item) const;
};

// Shuffles each user's items with a per-user stream of `seed` and splits
// them proportionally. Users with fewer than three interactions keep all of
// them in train.
SplitDataset split_dataset(const InteractionDataset& ds,
                           const SplitFractions& fractions, uint64_t seed);

// Ā = D_u^{-1/2} A D_v^{-1/2} over the training pairs.
struct NormalizedBipartiteGraph {
  SparseMatrix a_norm;    // I x J
  SparseMatrix a_norm_t;  // J x I, kept explicitly for row-major products
  Vector user_degrees;
  Vector item_degrees;

  Index num_users() const { return a_norm.rows(); }
  Index num_items() const { return a_norm.cols(); }
};

enum class IsolatedNodes {
  kKeep,    // zero-degree nodes become empty rows/columns
  kReject,  // throw DimensionError naming the first zero-degree node
};

NormalizedBipartiteGraph build_normalized_adjacency(
    Index num_users, Index num_items, const std::vector<Interaction>& pairs,
    IsolatedNodes isolated = IsolatedNodes::kKeep);
NormalizedBipartiteGraph build_normalized_adjacency(
    const SplitDataset& split, IsolatedNodes isolated = IsolatedNodes::kKeep);

struct Triplet {
  Index user;
  Index pos;
  Index neg;
};

struct TripletBatch {
  std::vector<Triplet> triples;
  std::vector<Index> users;  // distinct, ascending
  std::vector<Index> items;  // distinct positives and negatives, ascending
  std::vector<Index> pos_items;  // distinct positives, ascending
};

inline constexpr int kMaxNegativeAttempts = 100;

// Samples training interactions uniformly with replacement and pairs each
// with a rejection-sampled negative. Throws Error after kMaxNegativeAttempts
// failed draws for one triple.
TripletBatch sample_bpr_batch(const SplitDataset& split, Index batch_size,
                              Rng& rng);
// Same, drawing from `pool` instead of every training pair.
TripletBatch sample_bpr_batch(const SplitDataset& split,
                              std::span<const Interaction> pool,
                              Index batch_size, Rng& rng);

// Training pairs whose user has at least one item left to serve as a
// negative.
std::vector<Interaction> sampling_pool(const SplitDataset& split);

// Fills users/items from triples.
void index_batch_nodes(TripletBatch& batch);

}  // namespace busgcl

#endif  // BUSGCL_DATASET_H_
