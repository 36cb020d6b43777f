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

#include "busgcl/config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "fmt/format.h"
#include "fmt/ranges.h"

namespace busgcl {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view key, std::string_view v) {
  // std::from_chars for double is missing from older libstdc++.
  std::string s(v);
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ParseError(fmt::format("{}: '{}' is not a number", key, v));
  }
  return x;
}

int64_t to_int(std::string_view key, std::string_view v) {
  int64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ParseError(fmt::format("{}: '{}' is not an integer", key, v));
  }
  return x;
}

uint64_t to_uint(std::string_view key, std::string_view v) {
  uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ParseError(fmt::format("{}: '{}' is not a non-negative integer", key, v));
  }
  return x;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError(fmt::format("{}: '{}' is not a boolean", key, v));
}

// Name of the preset matching the current view pair, or kCustom.
SubviewMode mode_for(ViewKind user, ViewKind item) {
  for (SubviewMode m : {SubviewMode::kBusgcl, SubviewMode::kHypBoth,
                        SubviewMode::kPerBoth, SubviewMode::kReversed}) {
    Hyperparams probe;
    probe.apply_subview_mode(m);
    if (probe.user_view == user && probe.item_view == item) return m;
  }
  return SubviewMode::kCustom;
}

}  // namespace

std::vector<Index> parse_cutoffs(std::string_view text) {
  std::vector<Index> out;
  size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto part = trim(text.substr(
        pos, comma == std::string_view::npos ? std::string_view::npos
                                             : comma - pos));
    const int64_t n = to_int("cutoffs", part);
    if (n < 1) throw ParseError(fmt::format("cutoff {} must be >= 1", n));
    if (std::find(out.begin(), out.end(), n) != out.end()) {
      throw ParseError(fmt::format("cutoff {} listed twice", n));
    }
    out.push_back(n);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "data",          "out",          "header",        "train_frac",
      "valid_frac",    "cutoffs",      "dim",           "layers",
      "hyperedges",    "noise_radius", "leaky_slope",   "lambda_c",
      "lambda_d",      "lambda_r",     "tau_c",         "tau_d",
      "learning_rate", "decay_ratio",  "batch_size",    "epochs",
      "eval_every",    "seed",         "subview_mode",  "user_view",
      "item_view",     "disp_mode",    "drop_ratio",    "renormalize_augmented",
      "full_denominator", "contrast_negatives",
  };
  return k;
}

void RunConfig::set(std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  auto& w = hp.weights;
  if (key == "data") {
    data = std::string(v);
  } else if (key == "out") {
    out = std::string(v);
  } else if (key == "header") {
    header = to_bool(key, v);
  } else if (key == "train_frac") {
    fractions.train = to_double(key, v);
  } else if (key == "valid_frac") {
    fractions.valid = to_double(key, v);
  } else if (key == "cutoffs") {
    cutoffs = parse_cutoffs(v);
  } else if (key == "dim") {
    hp.dim = to_int(key, v);
  } else if (key == "layers") {
    hp.layers = to_int(key, v);
  } else if (key == "hyperedges") {
    hp.hyperedges = to_int(key, v);
  } else if (key == "noise_radius") {
    hp.noise_radius = to_double(key, v);
  } else if (key == "leaky_slope") {
    hp.leaky_slope = to_double(key, v);
  } else if (key == "lambda_c") {
    w.lambda_c = to_double(key, v);
  } else if (key == "lambda_d") {
    w.lambda_d = to_double(key, v);
  } else if (key == "lambda_r") {
    w.lambda_r = to_double(key, v);
  } else if (key == "tau_c") {
    w.tau_c = to_double(key, v);
  } else if (key == "tau_d") {
    w.tau_d = to_double(key, v);
  } else if (key == "learning_rate") {
    hp.learning_rate = to_double(key, v);
  } else if (key == "decay_ratio") {
    hp.decay_ratio = to_double(key, v);
  } else if (key == "batch_size") {
    hp.batch_size = to_int(key, v);
  } else if (key == "epochs") {
    hp.epochs = to_int(key, v);
  } else if (key == "eval_every") {
    hp.eval_every = to_int(key, v);
  } else if (key == "seed") {
    hp.seed = to_uint(key, v);
  } else if (key == "subview_mode") {
    hp.apply_subview_mode(parse_subview_mode(v));
  } else if (key == "user_view") {
    hp.user_view = parse_view(v);
    hp.subview_mode = mode_for(hp.user_view, hp.item_view);
  } else if (key == "item_view") {
    hp.item_view = parse_view(v);
    hp.subview_mode = mode_for(hp.user_view, hp.item_view);
  } else if (key == "disp_mode") {
    hp.disp_mode = parse_disp_mode(v);
  } else if (key == "drop_ratio") {
    hp.drop_ratio = to_double(key, v);
  } else if (key == "renormalize_augmented") {
    hp.renormalize_augmented = to_bool(key, v);
  } else if (key == "full_denominator") {
    hp.full_denominator = to_bool(key, v);
  } else if (key == "contrast_negatives") {
    hp.contrast_negatives = to_bool(key, v);
  } else {
    throw ParseError(fmt::format("unknown config key '{}'", key));
  }
}

void RunConfig::merge_text(std::string_view text, std::string_view source) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) {
      s = s.substr(0, hash);
    }
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(
          fmt::format("{}:{}: expected key = value", source, line_no));
    }
    try {
      set(trim(s.substr(0, eq)), s.substr(eq + 1));
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open config {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  merge_text(buf.str(), path.string());
}

std::string RunConfig::to_text() const {
  const auto& w = hp.weights;
  std::string s;
  auto line = [&s](std::string_view k, const auto& v) {
    s += fmt::format("{} = {}\n", k, v);
  };
  line("data", data.string());
  line("out", out.string());
  line("header", header);
  line("train_frac", fractions.train);
  line("valid_frac", fractions.valid);
  line("cutoffs", fmt::format("{}", fmt::join(cutoffs, ",")));
  line("dim", hp.dim);
  line("layers", hp.layers);
  line("hyperedges", hp.hyperedges);
  line("noise_radius", hp.noise_radius);
  line("leaky_slope", hp.leaky_slope);
  line("lambda_c", w.lambda_c);
  line("lambda_d", w.lambda_d);
  line("lambda_r", w.lambda_r);
  line("tau_c", w.tau_c);
  line("tau_d", w.tau_d);
  line("learning_rate", hp.learning_rate);
  line("decay_ratio", hp.decay_ratio);
  line("batch_size", hp.batch_size);
  line("epochs", hp.epochs);
  line("eval_every", hp.eval_every);
  line("seed", hp.seed);
  line("subview_mode", to_string(hp.subview_mode));
  line("user_view", to_string(hp.user_view));
  line("item_view", to_string(hp.item_view));
  line("disp_mode", to_string(hp.disp_mode));
  line("drop_ratio", hp.drop_ratio);
  line("renormalize_augmented", hp.renormalize_augmented);
  line("full_denominator", hp.full_denominator);
  line("contrast_negatives", hp.contrast_negatives);
  return s;
}

std::string RunConfig::hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace busgcl
