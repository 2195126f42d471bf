// Copyright 2026 The zennas Authors.
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

#pragma once

// Search configuration file (JSON, comments allowed). Every key is optional;
// unknown keys are rejected. See configs/search_cifar.jsonc for an annotated
// example.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zennas/arch_json.hpp"
#include "zennas/search.hpp"

namespace zennas {

namespace detail {

using json = nlohmann::json;

template <typename V>
V get_as(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field '") + key + "' has the wrong type", where + "." + key);
  }
}

inline void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ParseError("expected an object", where);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ParseError("unknown field '" + it.key() + "'", where + "." + it.key());
}

inline SearchSpace parse_space(const json& j) {
  const std::string w = "$.space";
  reject_unknown_keys(j, {"preset", "id", "block_types", "kernels", "min_width", "max_width", "width_choices",
                          "min_depth", "max_depth", "expansions", "mutation_factor", "width_quantum",
                          "input_resolution", "input_channels", "num_classes", "stem_width", "stem_stride",
                          "head_width", "stage_strides", "init_max_width", "init_max_depth"},
                      w);
  SearchSpace s;
  if (j.contains("preset")) {
    const auto p = get_as<std::string>(j, "preset", w);
    if (p == "cifar_resnet") s = SearchSpace::cifar_resnet();
    else if (p == "imagenet_resnet") s = SearchSpace::imagenet_resnet();
    else if (p == "cifar_mobile") s = SearchSpace::mobile(false);
    else if (p == "imagenet_mobile") s = SearchSpace::mobile(true);
    else throw ParseError("unknown preset '" + p + "'", w + ".preset");
  }
  if (j.contains("id")) s.space_id = get_as<std::string>(j, "id", w);
  if (j.contains("block_types")) {
    s.block_types.clear();
    for (const auto& n : get_as<std::vector<std::string>>(j, "block_types", w)) {
      const auto t = block_type_from_string(n);
      if (!t) throw ParseError("unknown block type '" + n + "'", w + ".block_types");
      s.block_types.push_back(*t);
    }
  }
  if (j.contains("kernels")) s.kernel_set = get_as<std::vector<int>>(j, "kernels", w);
  if (j.contains("min_width")) s.min_width = get_as<int>(j, "min_width", w);
  if (j.contains("max_width")) s.max_width = get_as<int>(j, "max_width", w);
  if (j.contains("width_choices")) s.width_choices = get_as<std::vector<int>>(j, "width_choices", w);
  if (j.contains("min_depth")) s.min_depth = get_as<int>(j, "min_depth", w);
  if (j.contains("max_depth")) s.max_depth = get_as<int>(j, "max_depth", w);
  if (j.contains("expansions")) s.expansion_set = get_as<std::vector<int>>(j, "expansions", w);
  if (j.contains("mutation_factor")) {
    const auto f = get_as<std::vector<double>>(j, "mutation_factor", w);
    if (f.size() != 2 || !(f[0] > 0.0) || !(f[1] >= f[0]))
      throw ParseError("mutation_factor must be [lo, hi] with 0 < lo <= hi", w + ".mutation_factor");
    s.mutation_factor_min = f[0];
    s.mutation_factor_max = f[1];
  }
  if (j.contains("width_quantum")) s.width_quantum = get_as<int>(j, "width_quantum", w);
  if (j.contains("input_resolution")) s.input_resolution = get_as<int>(j, "input_resolution", w);
  if (j.contains("input_channels")) s.input_channels = get_as<int>(j, "input_channels", w);
  if (j.contains("num_classes")) s.num_classes = get_as<int>(j, "num_classes", w);
  if (j.contains("stem_width")) s.stem_width = get_as<int>(j, "stem_width", w);
  if (j.contains("stem_stride")) s.stem_stride = get_as<int>(j, "stem_stride", w);
  if (j.contains("head_width")) s.head_width = get_as<int>(j, "head_width", w);
  if (j.contains("stage_strides")) s.stage_strides = get_as<std::vector<int>>(j, "stage_strides", w);
  if (j.contains("init_max_width")) s.init_max_width = get_as<int>(j, "init_max_width", w);
  if (j.contains("init_max_depth")) s.init_max_depth = get_as<int>(j, "init_max_depth", w);
  if (s.min_width < 1 || s.max_width < s.min_width) throw ParseError("bad width range", w);
  if (s.min_depth < 1 || s.max_depth < s.min_depth) throw ParseError("bad depth range", w);
  if (s.width_quantum < 1) throw ParseError("width_quantum must be >= 1", w + ".width_quantum");
  return s;
}

inline Budget parse_budget(const json& j) {
  const std::string w = "$.budget";
  reject_unknown_keys(j, {"max_flops", "max_params", "max_latency_ms", "max_layers"}, w);
  Budget b;
  if (j.contains("max_flops")) b.max_flops = static_cast<std::int64_t>(get_as<double>(j, "max_flops", w));
  if (j.contains("max_params")) b.max_params = static_cast<std::int64_t>(get_as<double>(j, "max_params", w));
  if (j.contains("max_latency_ms")) b.max_latency_ms = get_as<double>(j, "max_latency_ms", w);
  if (j.contains("max_layers")) b.max_layers = get_as<int>(j, "max_layers", w);
  return b;
}

inline ScoreConfig parse_score(const json& j, ScoreConfig s) {
  const std::string w = "$.score";
  reject_unknown_keys(j, {"alpha", "batch_size", "repeats", "resolution", "bn_mode", "precision", "seed"}, w);
  if (j.contains("alpha")) s.alpha = get_as<double>(j, "alpha", w);
  if (j.contains("batch_size")) s.batch_size = get_as<int>(j, "batch_size", w);
  if (j.contains("repeats")) s.repeats = get_as<int>(j, "repeats", w);
  if (j.contains("resolution")) s.resolution = get_as<int>(j, "resolution", w);
  if (j.contains("seed")) s.seed = get_as<std::uint64_t>(j, "seed", w);
  if (j.contains("bn_mode")) {
    const auto m = get_as<std::string>(j, "bn_mode", w);
    if (m == "no_mean") s.bn_mode = BnMode::no_mean;
    else if (m == "standard") s.bn_mode = BnMode::standard;
    else throw ParseError("bn_mode must be no_mean or standard", w + ".bn_mode");
  }
  if (j.contains("precision")) {
    const auto p = get_as<std::string>(j, "precision", w);
    if (p == "f64") s.precision = Precision::f64;
    else if (p == "f32") s.precision = Precision::f32;
    else throw ParseError("precision must be f32 or f64", w + ".precision");
  }
  return s;
}

}  // namespace detail

// Relative cost-model paths resolve against the config file's directory.
inline SearchConfig parse_search_config(const std::string& text, const std::string& base_dir = ".") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1));
  }
  const std::string w = "$";
  detail::reject_unknown_keys(j, {"space", "budget", "cost_model", "proxy", "score", "population_size", "iterations",
                                  "max_depth", "seed", "checkpoint_every", "checkpoint_path", "parallel_scorers",
                                  "init", "log_every"},
                              w);
  SearchConfig c;
  if (j.contains("space")) c.space = detail::parse_space(j.at("space"));
  if (j.contains("budget")) c.budget = detail::parse_budget(j.at("budget"));
  if (j.contains("cost_model")) {
    std::filesystem::path p = detail::get_as<std::string>(j, "cost_model", w);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    c.cost_model = CostModel::load(p.string());
  }
  if (j.contains("proxy")) {
    const auto p = proxy_from_string(detail::get_as<std::string>(j, "proxy", w));
    if (!p) throw ParseError("unknown proxy", "$.proxy");
    c.proxy = *p;
  }
  if (j.contains("seed")) c.seed = detail::get_as<std::uint64_t>(j, "seed", w);
  c.score.seed = c.seed;
  if (j.contains("score")) c.score = detail::parse_score(j.at("score"), c.score);
  if (j.contains("population_size")) c.population_size = detail::get_as<int>(j, "population_size", w);
  if (j.contains("iterations")) c.iterations = detail::get_as<long>(j, "iterations", w);
  if (j.contains("max_depth")) c.max_depth = detail::get_as<int>(j, "max_depth", w);
  if (j.contains("checkpoint_every")) c.checkpoint_every = detail::get_as<long>(j, "checkpoint_every", w);
  if (j.contains("checkpoint_path")) c.checkpoint_path = detail::get_as<std::string>(j, "checkpoint_path", w);
  if (j.contains("parallel_scorers")) c.parallel_scorers = detail::get_as<int>(j, "parallel_scorers", w);
  if (j.contains("log_every")) c.log_every = detail::get_as<long>(j, "log_every", w);
  if (j.contains("init")) {
    const auto m = detail::get_as<std::string>(j, "init", w);
    if (m == "single") c.init = InitMode::single;
    else if (m == "population") c.init = InitMode::population;
    else throw ParseError("init must be single or population", "$.init");
  }
  try {
    c.check();
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), "$");
  }
  return c;
}

inline SearchConfig load_search_config(const std::string& path) {
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_search_config(read_text_file(path), dir.empty() ? "." : dir.string());
}

}  // namespace zennas
