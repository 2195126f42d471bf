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

// Evolutionary search: select a random member, mutate it, gate it against
// the budget and the depth cap, score it, insert it, and drop the lowest
// scoring member when the population exceeds its capacity.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "zennas/arch.hpp"
#include "zennas/arch_json.hpp"
#include "zennas/budget.hpp"
#include "zennas/proxies.hpp"

namespace zennas {

enum class InitMode { single, population };

struct SearchConfig {
  SearchSpace space;
  Budget budget;
  std::optional<CostModel> cost_model;
  Proxy proxy = Proxy::zen;
  ScoreConfig score;
  int population_size = 256;
  long iterations = 96000;
  int max_depth = 0;  // L; 0 leaves only the budget's max_layers
  std::uint64_t seed = 0;
  long checkpoint_every = 0;
  std::string checkpoint_path;
  int parallel_scorers = 1;
  InitMode init = InitMode::population;
  long log_every = 1;

  void check() const {
    if (population_size < 1) throw ConfigError("population_size must be >= 1");
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (parallel_scorers < 1) throw ConfigError("parallel_scorers must be >= 1");
    if (log_every < 1) throw ConfigError("log_every must be >= 1");
  }

  int depth_cap() const {
    if (max_depth > 0 && budget.max_layers > 0) return std::min(max_depth, budget.max_layers);
    return std::max(max_depth, budget.max_layers);
  }
};

struct Member {
  Architecture arch;
  double score = 0.0;
  std::uint64_t seed = 0;  // score seed
  long iteration = 0;      // iteration at which it was found
  std::uint64_t id = 0;    // insertion order

  friend bool operator==(const Member&, const Member&) = default;
};

class Population {
 public:
  explicit Population(std::size_t capacity = 256) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  const std::vector<Member>& members() const { return members_; }

  // Appends, then removes the single lowest-score member if over capacity
  // (oldest first among equal scores). Returns the removed member, if any.
  std::optional<Member> insert(Member m) {
    m.id = next_id_++;
    members_.push_back(std::move(m));
    if (members_.size() <= capacity_) return std::nullopt;
    auto worst = std::min_element(members_.begin(), members_.end(), [](const Member& a, const Member& b) {
      return a.score < b.score || (a.score == b.score && a.id < b.id);
    });
    Member out = *worst;
    members_.erase(worst);
    return out;
  }

  // Highest score, earliest inserted among ties.
  const Member& best() const {
    if (members_.empty()) throw Error("empty population");
    return *std::max_element(members_.begin(), members_.end(), [](const Member& a, const Member& b) {
      return a.score < b.score || (a.score == b.score && a.id > b.id);
    });
  }

  double min_score() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& x : members_) m = std::min(m, x.score);
    return m;
  }
  double mean_score() const {
    double s = 0.0;
    for (const auto& x : members_) s += x.score;
    return members_.empty() ? 0.0 : s / static_cast<double>(members_.size());
  }

  std::uint64_t next_id() const { return next_id_; }
  void restore(std::vector<Member> members, std::uint64_t next_id) {
    members_ = std::move(members);
    next_id_ = next_id;
  }

  friend bool operator==(const Population&, const Population&) = default;

 private:
  std::size_t capacity_;
  std::vector<Member> members_;
  std::uint64_t next_id_ = 0;
};

struct LogEntry {
  long iteration = 0;
  double best_score = 0.0;
  double population_min = 0.0;
  double population_mean = 0.0;
  double wall_time = 0.0;

  // Wall time is excluded: it is the only non-deterministic column.
  bool same_trajectory(const LogEntry& o) const {
    return iteration == o.iteration && best_score == o.best_score && population_min == o.population_min &&
           population_mean == o.population_mean;
  }
};

struct ConvergenceLog {
  std::vector<LogEntry> entries;

  bool best_nondecreasing() const {
    for (std::size_t i = 1; i < entries.size(); ++i)
      if (entries[i].best_score < entries[i - 1].best_score) return false;
    return true;
  }
  bool same_trajectory(const ConvergenceLog& o) const {
    if (entries.size() != o.entries.size()) return false;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (!entries[i].same_trajectory(o.entries[i])) return false;
    return true;
  }
};

struct SearchCounters {
  long mutation_exhausted = 0;
  long rejected_by_gate = 0;
  long rejected_score = 0;  // non-finite or degenerate score
  long accepted = 0;
  long scored = 0;          // proxy evaluations, cache hits excluded

  friend bool operator==(const SearchCounters&, const SearchCounters&) = default;
};

struct SearchState {
  Population population;
  Rng rng;
  long iteration = 0;
  ConvergenceLog log;
  SearchCounters counters;
  double elapsed = 0.0;  // wall time of previous sessions
};

// Scores by (architecture hash, proxy, seed); safe to share between threads.
class ScoreCache {
 public:
  using Key = std::tuple<std::uint64_t, int, std::uint64_t>;

  std::optional<double> find(const Key& k) const {
    std::lock_guard lock(mu_);
    auto it = map_.find(k);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }
  void put(const Key& k, double v) {
    std::lock_guard lock(mu_);
    map_[k] = v;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return map_.size();
  }

 private:
  mutable std::mutex mu_;
  std::map<Key, double> map_;
};

// Scalar score of one architecture; nullopt when the proxy cannot rank it
// (overflow, singular kernel, dead network).
inline std::optional<double> proxy_value(const Architecture& a, Proxy proxy, const ScoreConfig& cfg) {
  try {
    double v = 0.0;
    switch (proxy) {
      case Proxy::zen: v = zen_score(a, cfg).value; break;
      case Proxy::phi: v = phi_score(a, cfg).value; break;
      case Proxy::naswot: v = naswot_score(a, cfg).value; break;
      case Proxy::flops: v = static_cast<double>(count_flops(a)); break;
      case Proxy::params: v = static_cast<double>(count_params(a)); break;
      case Proxy::random: {
        Rng r(Rng::derive(cfg.seed, arch_hash(a)));
        v = r.uniform();
        break;
      }
    }
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const DegenerateScore&) {
    return std::nullopt;
  }
}

// The acceptance gate: space validity, depth cap and budget.
inline bool passes_gate(const Architecture& a, const SearchConfig& cfg) {
  if (!validate(a, cfg.space, cfg.depth_cap()).ok()) return false;
  return within_budget(a, cfg.budget, cfg.cost_model ? &*cfg.cost_model : nullptr).ok;
}

class Searcher {
 public:
  explicit Searcher(SearchConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.check();
    if (cfg_.budget.max_latency_ms && !cfg_.cost_model) throw ConfigError("latency bound set but no cost model");
  }

  const SearchConfig& config() const { return cfg_; }
  ScoreCache& cache() { return cache_; }

  // Initial population from random_arch, all members pass the gate.
  SearchState initialize() const {
    SearchState s{Population(static_cast<std::size_t>(cfg_.population_size)), Rng(cfg_.seed), 0, {}, {}, 0.0};
    const int n = cfg_.init == InitMode::single ? 1 : cfg_.population_size;
    const auto gate = [&](const Architecture& a) { return passes_gate(a, cfg_); };
    for (int i = 0; i < n; ++i) {
      Architecture a = random_arch(cfg_.space, s.rng, cfg_.depth_cap(), gate);
      auto v = score(a, s.counters);
      if (!v) {
        ++s.counters.rejected_score;
        continue;
      }
      s.population.insert({std::move(a), *v, cfg_.score.seed, 0, 0});
    }
    if (s.population.empty()) throw SpaceInfeasible("no initial architecture could be scored");
    record(s, 0.0);
    return s;
  }

  // One select-mutate-gate-score-insert-trim cycle per proposal; with
  // parallel_scorers > 1 that many proposals are drawn from the same
  // snapshot and scored concurrently, then inserted in proposal order.
  void step(SearchState& s) {
    const long remaining = std::max<long>(1, cfg_.iterations - s.iteration);
    const int batch = static_cast<int>(std::min<long>(cfg_.parallel_scorers, remaining));
    std::vector<std::optional<Architecture>> proposals;
    for (int i = 0; i < batch; ++i) proposals.push_back(propose(s));

    std::vector<std::optional<double>> scores(proposals.size());
    if (batch == 1) {
      if (proposals[0]) scores[0] = score(*proposals[0], s.counters);
    } else {
      std::vector<std::thread> workers;
      std::vector<SearchCounters> local(proposals.size());
      for (std::size_t i = 0; i < proposals.size(); ++i) {
        if (!proposals[i]) continue;
        workers.emplace_back([&, i] { scores[i] = score(*proposals[i], local[i]); });
      }
      for (auto& w : workers) w.join();
      for (const auto& c : local) s.counters.scored += c.scored;
    }
    for (std::size_t i = 0; i < proposals.size(); ++i) {
      ++s.iteration;
      if (proposals[i]) {
        if (scores[i]) {
          s.population.insert({std::move(*proposals[i]), *scores[i], cfg_.score.seed, s.iteration, 0});
          ++s.counters.accepted;
        } else {
          ++s.counters.rejected_score;
        }
      }
      if (s.iteration % cfg_.log_every == 0 || s.iteration == cfg_.iterations) record(s, now(s));
    }
  }

  // Runs until cfg.iterations, checkpointing as configured.
  void run(SearchState& s, const std::function<void(const SearchState&)>& on_step = {}) {
    start_ = std::chrono::steady_clock::now();
    const double base = s.elapsed;
    while (s.iteration < cfg_.iterations) {
      const long before = s.iteration;
      step(s);
      s.elapsed = base + since_start();
      if (on_step) on_step(s);
      if (cfg_.checkpoint_every > 0 && !cfg_.checkpoint_path.empty() &&
          s.iteration / cfg_.checkpoint_every != before / cfg_.checkpoint_every)
        save_checkpoint(s, cfg_, cfg_.checkpoint_path);
    }
  }

  // Forward declaration target; defined below the checkpoint helpers.
  static void save_checkpoint(const SearchState& s, const SearchConfig& cfg, const std::string& path);

 private:
  std::optional<Architecture> propose(SearchState& s) const {
    const auto& members = s.population.members();
    const Member& parent = members[s.rng.index(members.size())];
    Architecture child;
    try {
      child = mutate(parent.arch, cfg_.space, s.rng);
    } catch (const MutationExhausted&) {
      ++s.counters.mutation_exhausted;
      return std::nullopt;
    }
    if (!passes_gate(child, cfg_)) {
      ++s.counters.rejected_by_gate;
      return std::nullopt;
    }
    return child;
  }

  std::optional<double> score(const Architecture& a, SearchCounters& counters) const {
    const ScoreCache::Key key{arch_hash(a), static_cast<int>(cfg_.proxy), cfg_.score.seed};
    if (auto hit = cache_.find(key)) {
      if (std::isnan(*hit)) return std::nullopt;
      return *hit;
    }
    ++counters.scored;
    const auto v = proxy_value(a, cfg_.proxy, cfg_.score);
    cache_.put(key, v ? *v : std::numeric_limits<double>::quiet_NaN());
    return v;
  }

  void record(SearchState& s, double wall) const {
    s.log.entries.push_back({s.iteration, s.population.best().score, s.population.min_score(),
                             s.population.mean_score(), wall});
  }

  double since_start() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  double now(const SearchState& s) const { return s.elapsed + since_start(); }

  SearchConfig cfg_;
  mutable ScoreCache cache_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct SearchOutcome {
  Member best;
  SearchState state;
};

inline SearchOutcome evolve(const SearchConfig& cfg) {
  Searcher searcher(cfg);
  SearchState s = searcher.initialize();
  searcher.run(s);
  Member best = s.population.best();
  return {std::move(best), std::move(s)};
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON, written to a temporary file and renamed into place.

inline constexpr const char* kCheckpointFormat = "zennas.checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::ordered_json checkpoint_json(const SearchState& s, const SearchConfig& cfg) {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["run"] = {{"seed", cfg.seed},
              {"proxy", to_string(cfg.proxy)},
              {"population_size", cfg.population_size},
              {"score_seed", cfg.score.seed}};
  j["iteration"] = s.iteration;
  j["elapsed"] = s.elapsed;
  j["rng"] = s.rng.save_state();
  j["next_id"] = s.population.next_id();
  j["counters"] = {{"mutation_exhausted", s.counters.mutation_exhausted},
                   {"rejected_by_gate", s.counters.rejected_by_gate},
                   {"rejected_score", s.counters.rejected_score},
                   {"accepted", s.counters.accepted},
                   {"scored", s.counters.scored}};
  auto& ms = j["members"] = nlohmann::ordered_json::array();
  for (const auto& m : s.population.members()) {
    nlohmann::ordered_json mj;
    mj["id"] = m.id;
    mj["score"] = m.score;
    mj["seed"] = m.seed;
    mj["iteration"] = m.iteration;
    mj["arch"] = to_json(m.arch);
    ms.push_back(std::move(mj));
  }
  auto& lj = j["log"] = nlohmann::ordered_json::array();
  for (const auto& e : s.log.entries)
    lj.push_back({e.iteration, e.best_score, e.population_min, e.population_mean, e.wall_time});
  return j;
}

inline void write_checkpoint(const SearchState& s, const SearchConfig& cfg, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write " + tmp);
    f << checkpoint_json(s, cfg).dump() << "\n";
    f.flush();
    if (!f) throw CheckpointError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

inline void Searcher::save_checkpoint(const SearchState& s, const SearchConfig& cfg, const std::string& path) {
  write_checkpoint(s, cfg, path);
}

// Restores a search state. The file is fully parsed and checked before
// anything is returned; the run parameters must match `cfg`.
inline SearchState read_checkpoint(const std::string& path, const SearchConfig& cfg) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw CheckpointError(e.what());
  }
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != kCheckpointFormat) throw CheckpointError("not a zennas checkpoint: " + path);
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    const auto& run = j.at("run");
    if (run.at("seed").get<std::uint64_t>() != cfg.seed || run.at("proxy").get<std::string>() != to_string(cfg.proxy) ||
        run.at("population_size").get<int>() != cfg.population_size ||
        run.at("score_seed").get<std::uint64_t>() != cfg.score.seed)
      throw CheckpointError("checkpoint was written by a run with a different seed, proxy or population size");

    SearchState s{Population(static_cast<std::size_t>(cfg.population_size)),
                  Rng::load_state(j.at("rng").get<std::string>()),
                  j.at("iteration").get<long>(),
                  {},
                  {},
                  j.at("elapsed").get<double>()};
    std::vector<Member> members;
    for (const auto& mj : j.at("members")) {
      Member m;
      m.id = mj.at("id").get<std::uint64_t>();
      m.score = mj.at("score").get<double>();
      m.seed = mj.at("seed").get<std::uint64_t>();
      m.iteration = mj.at("iteration").get<long>();
      m.arch = from_json(nlohmann::ordered_json::parse(mj.at("arch").dump()));
      members.push_back(std::move(m));
    }
    if (members.empty() || members.size() > static_cast<std::size_t>(cfg.population_size))
      throw CheckpointError("checkpoint population size is out of range");
    s.population.restore(std::move(members), j.at("next_id").get<std::uint64_t>());
    const auto& c = j.at("counters");
    s.counters = {c.at("mutation_exhausted").get<long>(), c.at("rejected_by_gate").get<long>(),
                  c.at("rejected_score").get<long>(), c.at("accepted").get<long>(), c.at("scored").get<long>()};
    for (const auto& e : j.at("log"))
      s.log.entries.push_back({e.at(0).get<long>(), e.at(1).get<double>(), e.at(2).get<double>(),
                               e.at(3).get<double>(), e.at(4).get<double>()});
    return s;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path + ": " + e.what());
  }
}

inline SearchOutcome resume(const std::string& path, const SearchConfig& cfg) {
  Searcher searcher(cfg);
  SearchState s = read_checkpoint(path, cfg);
  searcher.run(s);
  Member best = s.population.best();
  return {std::move(best), std::move(s)};
}

}  // namespace zennas
