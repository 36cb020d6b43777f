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

#include "busgcl/cli.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "Eigen/Core"
#include "busgcl/checkpoint.h"
#include "busgcl/config.h"
#include "busgcl/evaluation.h"
#include "busgcl/parallel.h"
#include "busgcl/pipeline.h"
#include "busgcl/training.h"
#include "fmt/format.h"

namespace busgcl {
namespace {

// Keys that are plain switches on the command line.
bool is_switch(const std::string& key) {
  return key == "header" || key == "renormalize_augmented" ||
         key == "full_denominator" || key == "contrast_negatives";
}

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

const std::map<std::string, std::string>& key_help() {
  static const std::map<std::string, std::string> h = {
      {"data", "interaction file (user<TAB>item per line)"},
      {"out", "run directory"},
      {"header", "skip the first line of the data file"},
      {"train_frac", "per-user training fraction"},
      {"valid_frac", "per-user validation fraction"},
      {"cutoffs", "comma-separated N for Recall@N / NDCG@N"},
      {"dim", "embedding width"},
      {"layers", "propagation layers"},
      {"hyperedges", "hyperedges per side"},
      {"noise_radius", "L2 norm of the perturbation noise"},
      {"leaky_slope", "negative slope of the hypergraph LeakyReLU"},
      {"lambda_c", "contrastive weight"},
      {"lambda_d", "dispersing (or KL) weight"},
      {"lambda_r", "L2 weight"},
      {"tau_c", "contrastive temperature"},
      {"tau_d", "dispersing temperature"},
      {"learning_rate", "initial Adam learning rate"},
      {"decay_ratio", "learning-rate factor applied after each epoch"},
      {"batch_size", "BPR triples per step"},
      {"epochs", "training epochs"},
      {"eval_every", "validation interval in epochs (0 = never)"},
      {"seed", "run seed"},
      {"subview_mode", "busgcl, hyp_both, per_both, reversed or custom"},
      {"user_view", "user-side view: perturb, hypergraph, node_drop, edge_drop, random_walk"},
      {"item_view", "item-side view (same choices as user_view)"},
      {"disp_mode", "dispersing, kl or none"},
      {"drop_ratio", "drop probability for the drop/walk views"},
      {"renormalize_augmented", "renormalize degrees after dropping"},
      {"full_denominator", "contrast against every node, not the batch"},
      {"contrast_negatives", "include sampled negatives in the item-side terms"},
  };
  return h;
}

// Config-bearing options shared by train and ablate: --config FILE plus one
// flag per config key. Flags are applied after the file.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value config file")
        ->check(CLI::ExistingFile);
    for (const auto& key : RunConfig::keys()) {
      if (is_switch(key)) {
        switches[key] = false;
        app->add_flag(flag_name(key), switches[key], key_help().at(key));
      } else {
        app->add_option(flag_name(key), values[key], key_help().at(key));
      }
    }
  }

  RunConfig resolve(CLI::App* app) const {
    RunConfig cfg;
    if (!config_file.empty()) cfg.merge_file(config_file);
    for (const auto& key : RunConfig::keys()) {
      if (app->count(flag_name(key)) == 0) continue;
      if (is_switch(key)) {
        cfg.set(key, switches.at(key) ? "true" : "false");
      } else {
        cfg.set(key, values.at(key));
      }
    }
    return cfg;
  }
};

class UsageError : public Error {
 public:
  using Error::Error;
};

void apply_thread_cap() {
  if (const char* env = std::getenv("BUSGCL_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) set_max_threads(n);
  }
}

// Resolves flags over the config file; any config problem is a usage error.
RunConfig checked(const ConfigFlags& flags, CLI::App* app, bool need_out) {
  RunConfig cfg;
  try {
    cfg = flags.resolve(app);
    cfg.hp.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (cfg.data.empty()) throw UsageError("--data is required");
  if (need_out && cfg.out.empty()) throw UsageError("--out is required");
  return cfg;
}

InteractionDataset load(const RunConfig& cfg) {
  return load_interactions(cfg.data, {.skip_header = cfg.header});
}

// Locates a checkpoint from --run / --checkpoint and rebuilds its config.
struct LoadedRun {
  Checkpoint checkpoint;
  RunConfig cfg;
  std::filesystem::path dir;
};

LoadedRun load_run(const std::string& run_dir, const std::string& ck_path,
                   const std::string& data_override) {
  if (run_dir.empty() && ck_path.empty()) {
    throw UsageError("one of --run or --checkpoint is required");
  }
  LoadedRun r;
  const std::filesystem::path path =
      ck_path.empty() ? std::filesystem::path(run_dir) / "checkpoint.bin"
                      : std::filesystem::path(ck_path);
  if (!std::filesystem::exists(path)) {
    throw Error(fmt::format("checkpoint {} not found", path.string()));
  }
  r.checkpoint = load_checkpoint(path);
  r.cfg.merge_text(r.checkpoint.config_text, path.string());
  if (!data_override.empty()) r.cfg.data = data_override;
  r.dir = run_dir.empty() ? path.parent_path() : std::filesystem::path(run_dir);
  return r;
}

struct Prepared {
  InteractionDataset ds;
  SplitDataset split;
  NormalizedBipartiteGraph graph;
};

Prepared prepare(const LoadedRun& run) {
  Prepared p{load(run.cfg), {}, {}};
  const ModelParams& params = run.checkpoint.params;
  if (params.num_users() != p.ds.num_users ||
      params.num_items() != p.ds.num_items ||
      params.dim() != run.cfg.hp.dim) {
    throw Error(fmt::format(
        "checkpoint holds {} users x {} items (dim {}) but the dataset has {} "
        "users x {} items",
        params.num_users(), params.num_items(), params.dim(), p.ds.num_users,
        p.ds.num_items));
  }
  p.split = split_dataset(p.ds, run.cfg.fractions, run.cfg.hp.seed);
  p.graph = build_normalized_adjacency(p.split);
  return p;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << text;
}

void write_embeddings(const std::filesystem::path& path, const Matrix& users,
                      const Matrix& items, const InteractionDataset& ds) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << "node_type\tindex\traw_id";
  for (Index c = 0; c < users.cols(); ++c) out << "\te" << c;
  out << '\n';
  auto rows = [&out](const Matrix& m, const char* type, const IdMap& ids) {
    for (Index r = 0; r < m.rows(); ++r) {
      out << type << '\t' << r << '\t' << ids.raw(r);
      for (Index c = 0; c < m.cols(); ++c) {
        out << '\t' << fmt::format("{:.17g}", m(r, c));
      }
      out << '\n';
    }
  };
  rows(users, "user", ds.user_ids);
  rows(items, "item", ds.item_ids);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"BusGCL training and evaluation engine", "busgcl"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto* train_cmd = app.add_subcommand("train", "train a model");
  ConfigFlags train_flags;
  train_flags.attach(train_cmd);
  bool quiet = false;
  train_cmd->add_flag("--quiet", quiet, "suppress per-epoch log");

  auto* eval_cmd =
      app.add_subcommand("evaluate", "evaluate a stored checkpoint");
  std::string run_dir, ck_path, data_override, at, target = "test";
  eval_cmd->add_option("--run", run_dir, "run directory");
  eval_cmd->add_option("--checkpoint", ck_path, "checkpoint file");
  eval_cmd->add_option("--data", data_override, "dataset override");
  eval_cmd->add_option("--at", at, "comma-separated cutoffs");
  eval_cmd->add_option("--target", target, "test or valid")
      ->check(CLI::IsMember({"test", "valid"}));

  auto* ablate_cmd = app.add_subcommand("ablate", "run an ablation grid");
  ConfigFlags ablate_flags;
  ablate_flags.attach(ablate_cmd);
  std::string grid_name;
  std::vector<std::string> only;
  ablate_cmd->add_option("--grid", grid_name, "table3, table4, table5 or layers")
      ->required();
  ablate_cmd->add_option("--variants", only, "subset of variant names")
      ->delimiter(',');
  ablate_cmd->add_flag("--quiet", quiet, "suppress per-epoch log");

  auto* export_cmd = app.add_subcommand(
      "export-embeddings", "write embeddings and a 2-D projection");
  std::string export_out;
  bool raw = false;
  export_cmd->add_option("--run", run_dir, "run directory");
  export_cmd->add_option("--checkpoint", ck_path, "checkpoint file");
  export_cmd->add_option("--data", data_override, "dataset override");
  export_cmd->add_option("--out", export_out, "output directory");
  export_cmd->add_flag("--raw", raw, "export base embeddings, not readouts");

  auto* grad_cmd =
      app.add_subcommand("grad-check", "compare gradients with finite differences");
  GradCheckOptions gc;
  Hyperparams gc_hp;
  gc_hp.dim = 4;
  gc_hp.layers = 2;
  gc_hp.hyperedges = 3;
  std::string gc_mode = "busgcl", gc_disp = "dispersing";
  grad_cmd->add_option("--trials", gc.trials);
  grad_cmd->add_option("--tolerance", gc.tolerance);
  grad_cmd->add_option("--seed", gc.seed);
  grad_cmd->add_option("--step", gc.step, "finite-difference step");
  grad_cmd->add_option("--users", gc.num_users);
  grad_cmd->add_option("--items", gc.num_items);
  grad_cmd->add_option("--dim", gc_hp.dim);
  grad_cmd->add_option("--layers", gc_hp.layers);
  grad_cmd->add_option("--hyperedges", gc_hp.hyperedges);
  grad_cmd->add_option("--subview-mode", gc_mode);
  grad_cmd->add_option("--disp-mode", gc_disp);
  grad_cmd->add_option("--lambda-c", gc_hp.weights.lambda_c);
  grad_cmd->add_option("--lambda-d", gc_hp.weights.lambda_d);
  grad_cmd->add_option("--lambda-r", gc_hp.weights.lambda_r);
  grad_cmd->add_option("--tau-c", gc_hp.weights.tau_c);
  grad_cmd->add_option("--tau-d", gc_hp.weights.tau_d);
  grad_cmd->add_option("--noise-radius", gc_hp.noise_radius);
  std::string gc_user_view, gc_item_view;
  grad_cmd->add_option("--user-view", gc_user_view, "overrides --subview-mode");
  grad_cmd->add_option("--item-view", gc_item_view, "overrides --subview-mode");
  grad_cmd->add_option("--drop-ratio", gc_hp.drop_ratio);
  grad_cmd->add_flag("--full-denominator", gc_hp.full_denominator);
  grad_cmd->add_flag("--contrast-negatives", gc_hp.contrast_negatives);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  apply_thread_cap();
  try {
    if (train_cmd->parsed()) {
      RunConfig cfg = checked(train_flags, train_cmd, true);
      const InteractionDataset ds = load(cfg);
      RunOutcome o = run_pipeline(cfg, ds, quiet ? nullptr : &err);
      out << o.test.to_table();
      out << o.test.to_json() << '\n';
      return kExitOk;
    }
    if (eval_cmd->parsed()) {
      LoadedRun run = load_run(run_dir, ck_path, data_override);
      if (!at.empty()) {
        try {
          run.cfg.cutoffs = parse_cutoffs(at);
        } catch (const ParseError& e) {
          throw UsageError(e.what());
        }
      }
      const Prepared p = prepare(run);
      MetricsReport m = evaluate(
          run.checkpoint.params, p.graph, p.split, run.cfg.hp.layers,
          run.cfg.cutoffs,
          target == "test" ? EvalTarget::kTest : EvalTarget::kValid);
      m.seed = run.cfg.hp.seed;
      m.config_hash = run.cfg.hash();
      out << m.to_table();
      out << m.to_json() << '\n';
      return kExitOk;
    }
    if (ablate_cmd->parsed()) {
      AblationGrid grid;
      try {
        grid = select_variants(make_ablation_grid(grid_name), only);
      } catch (const ParseError& e) {
        throw UsageError(e.what());
      }
      RunConfig cfg = checked(ablate_flags, ablate_cmd, true);
      const InteractionDataset ds = load(cfg);
      const auto rows = run_ablation(cfg, grid, ds, quiet ? nullptr : &err);
      const std::string csv = ablation_csv(grid, rows);
      std::filesystem::create_directories(cfg.out);
      write_file(cfg.out / (grid.name + ".csv"), csv);
      out << csv;
      return kExitOk;
    }
    if (export_cmd->parsed()) {
      const LoadedRun run = load_run(run_dir, ck_path, data_override);
      const Prepared p = prepare(run);
      const std::filesystem::path dir =
          export_out.empty() ? run.dir : std::filesystem::path(export_out);
      std::filesystem::create_directories(dir);
      Matrix users, items;
      if (raw) {
        users = run.checkpoint.params.e_user;
        items = run.checkpoint.params.e_item;
      } else {
        Readouts r =
            final_readouts(run.checkpoint.params, p.graph, run.cfg.hp.layers);
        users = std::move(r.user);
        items = std::move(r.item);
      }
      write_embeddings(dir / "embeddings.tsv", users, items, p.ds);
      Matrix all(users.rows() + items.rows(), users.cols());
      all << users, items;
      const Projection proj = pca_project(all, 2, run.cfg.hp.seed);
      if (proj.degenerate) {
        err << "warning: embeddings have no variance; projection is zero\n";
      }
      write_projection(dir / "projection.tsv", proj.coords, users.rows());
      out << fmt::format("wrote {} rows to {}\n", all.rows(),
                         (dir / "embeddings.tsv").string());
      return kExitOk;
    }
    if (grad_cmd->parsed()) {
      try {
        gc_hp.apply_subview_mode(parse_subview_mode(gc_mode));
        gc_hp.disp_mode = parse_disp_mode(gc_disp);
        if (!gc_user_view.empty() || !gc_item_view.empty()) {
          gc_hp.subview_mode = SubviewMode::kCustom;
          if (!gc_user_view.empty()) gc_hp.user_view = parse_view(gc_user_view);
          if (!gc_item_view.empty()) gc_hp.item_view = parse_view(gc_item_view);
        }
        gc_hp.validate();
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      const GradCheckReport report = grad_check(gc_hp, gc);
      out << report.to_table();
      return report.passed ? kExitOk : kExitRuntime;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace busgcl
