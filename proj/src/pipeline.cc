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

#include "busgcl/pipeline.h"

#include <algorithm>
#include <fstream>

#include "busgcl/checkpoint.h"
#include "fmt/format.h"
#include "fmt/ranges.h"

namespace busgcl {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << text;
}

AblationVariant variant(std::string name,
                        std::vector<std::pair<std::string, std::string>> o,
                        std::vector<std::string> labels) {
  return {std::move(name), std::move(o), std::move(labels)};
}

}  // namespace

RunOutcome run_pipeline(const RunConfig& cfg, const InteractionDataset& ds,
                        std::ostream* log) {
  cfg.hp.validate();
  const bool write = !cfg.out.empty();
  if (write) {
    std::filesystem::create_directories(cfg.out);
    write_text(cfg.out / "config.txt", cfg.to_text());
    ds.user_ids.save(cfg.out / "user_ids.tsv");
    ds.item_ids.save(cfg.out / "item_ids.tsv");
  }
  const SplitDataset split = split_dataset(ds, cfg.fractions, cfg.hp.seed);
  const NormalizedBipartiteGraph graph = build_normalized_adjacency(split);

  TrainOptions options;
  options.log = log;
  if (write) options.history_path = cfg.out / "history.csv";
  RunOutcome outcome;
  outcome.trained = train(split, graph, cfg.hp, options);
  outcome.test = evaluate(outcome.trained.params, graph, split, cfg.hp.layers,
                          cfg.cutoffs, EvalTarget::kTest);
  outcome.test.seed = cfg.hp.seed;
  outcome.test.config_hash = cfg.hash();
  if (write) {
    save_checkpoint(cfg.out / "checkpoint.bin", outcome.trained.params,
                    cfg.to_text());
    write_text(cfg.out / "metrics.json", outcome.test.to_json() + "\n");
  }
  return outcome;
}

const std::vector<std::string>& ablation_grid_names() {
  static const std::vector<std::string> names = {"table3", "table4", "table5",
                                                 "layers"};
  return names;
}

AblationGrid make_ablation_grid(std::string_view name) {
  AblationGrid g;
  g.name = std::string(name);
  if (name == "table3") {
    g.label_columns = {"variant", "dispersing"};
    const std::pair<const char*, const char*> modes[] = {
        {"BusGCL_per", "per_both"},
        {"BusGCL_hyp", "hyp_both"},
        {"BusGCL_rev", "reversed"},
        {"BusGCL", "busgcl"},
    };
    for (const auto& [label, mode] : modes) {
      for (bool disp : {false, true}) {
        g.variants.push_back(variant(
            fmt::format("{}{}", label, disp ? "" : "_nodisp"),
            {{"subview_mode", mode},
             {"disp_mode", disp ? "dispersing" : "none"}},
            {label, disp ? "yes" : "no"}));
      }
    }
  } else if (name == "table4") {
    g.label_columns = {"user_model", "item_model"};
    const std::pair<const char*, const char*> views[] = {
        {"hypergraph", "perturb"},     {"hypergraph", "node_drop"},
        {"hypergraph", "edge_drop"},   {"hypergraph", "random_walk"},
        {"node_drop", "perturb"},      {"edge_drop", "perturb"},
        {"random_walk", "perturb"},
    };
    for (const auto& [user, item] : views) {
      g.variants.push_back(variant(fmt::format("{}__{}", user, item),
                                   {{"user_view", user}, {"item_view", item}},
                                   {user, item}));
    }
  } else if (name == "table5") {
    g.label_columns = {"loss"};
    for (const char* mode : {"dispersing", "kl", "none"}) {
      g.variants.push_back(
          variant(mode, {{"disp_mode", mode}}, {mode}));
    }
  } else if (name == "layers") {
    g.label_columns = {"layers"};
    for (int l = 1; l <= 5; ++l) {
      g.variants.push_back(variant(fmt::format("layers{}", l),
                                   {{"layers", std::to_string(l)}},
                                   {std::to_string(l)}));
    }
  } else {
    throw ParseError(fmt::format("unknown grid '{}' (valid: {})", name,
                                 fmt::join(ablation_grid_names(), ", ")));
  }
  return g;
}

AblationGrid select_variants(const AblationGrid& grid,
                             const std::vector<std::string>& names) {
  if (names.empty()) return grid;
  AblationGrid out = grid;
  out.variants.clear();
  for (const auto& n : names) {
    const auto it = std::find_if(grid.variants.begin(), grid.variants.end(),
                                 [&n](const auto& v) { return v.name == n; });
    if (it == grid.variants.end()) {
      std::vector<std::string> valid;
      for (const auto& v : grid.variants) valid.push_back(v.name);
      throw ParseError(fmt::format("unknown variant '{}' for {} (valid: {})", n,
                                   grid.name, fmt::join(valid, ", ")));
    }
    out.variants.push_back(*it);
  }
  return out;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg,
                                      const AblationGrid& grid,
                                      const InteractionDataset& ds,
                                      std::ostream* log) {
  std::vector<AblationRow> rows;
  for (const auto& v : grid.variants) {
    RunConfig vc = cfg;
    for (const auto& [k, val] : v.overrides) vc.set(k, val);
    if (!cfg.out.empty()) vc.out = cfg.out / v.name;
    if (log) *log << "== " << grid.name << " / " << v.name << '\n';
    RunOutcome o = run_pipeline(vc, ds, log);
    rows.push_back({v, std::move(o.test)});
  }
  return rows;
}

std::string ablation_csv(const AblationGrid& grid,
                         const std::vector<AblationRow>& rows) {
  std::string s = fmt::format("{}", fmt::join(grid.label_columns, ","));
  if (!rows.empty()) {
    for (const auto& [n, _] : rows.front().metrics.recall) {
      s += fmt::format(",recall@{},ndcg@{}", n, n);
    }
  }
  s += '\n';
  for (const auto& r : rows) {
    s += fmt::format("{}", fmt::join(r.variant.labels, ","));
    for (const auto& [n, v] : r.metrics.recall) {
      s += fmt::format(",{:.17g},{:.17g}", v, r.metrics.ndcg.at(n));
    }
    s += '\n';
  }
  return s;
}

}  // namespace busgcl
