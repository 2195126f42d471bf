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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "zennas/search.hpp"

using namespace zennas;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("zennas_test_" + name)).string();
}

SearchConfig flops_config(std::uint64_t seed, long iterations) {
  SearchConfig c;
  c.space = SearchSpace::cifar_resnet();
  c.proxy = Proxy::flops;
  c.budget.max_flops = 20'000'000;
  c.population_size = 8;
  c.iterations = iterations;
  c.seed = seed;
  c.score.seed = seed;
  return c;
}

Member member(double score) { return {Architecture{}, score, 0, 0, 0}; }

}  // namespace

TEST(Population, TrimRemovesMinimumOldestFirst) {
  Population p(3);
  EXPECT_FALSE(p.insert(member(2.0)).has_value());
  EXPECT_FALSE(p.insert(member(1.0)).has_value());
  EXPECT_FALSE(p.insert(member(1.0)).has_value());
  const auto out = p.insert(member(5.0));
  ASSERT_TRUE(out.has_value());
  EXPECT_EQ(out->score, 1.0);
  EXPECT_EQ(out->id, 1u);  // the older of the two ties
  EXPECT_EQ(p.size(), 3u);
  EXPECT_EQ(p.best().score, 5.0);
  EXPECT_EQ(p.min_score(), 1.0);
}

TEST(Population, NewMinimumIsTrimmedImmediately) {
  Population p(2);
  p.insert(member(3.0));
  p.insert(member(4.0));
  const auto out = p.insert(member(0.5));
  ASSERT_TRUE(out.has_value());
  EXPECT_EQ(out->score, 0.5);
}

TEST(Evolve, ZeroIterationsReturnsInitialArchitecture) {
  SearchConfig c = fixture::micro_config(3, 0);
  const auto outcome = evolve(c);
  Rng rng(c.seed);
  const Architecture f0 = random_arch(c.space, rng, c.depth_cap(), [&](const Architecture& a) { return passes_gate(a, c); });
  EXPECT_EQ(outcome.best.arch, f0);
  EXPECT_EQ(outcome.state.population.size(), 1u);
  ASSERT_EQ(outcome.state.log.entries.size(), 1u);
}

TEST(Evolve, FlopsProxyRespectsBoundEveryStep) {
  SearchConfig c = flops_config(1, 1000);
  Searcher s(c);
  SearchState st = s.initialize();
  long checked = 0;
  s.run(st, [&](const SearchState& now) {
    ASSERT_LE(now.population.size(), static_cast<std::size_t>(c.population_size));
    for (const auto& m : now.population.members()) {
      ASSERT_LE(count_flops(m.arch), *c.budget.max_flops);
      ++checked;
    }
  });
  EXPECT_GT(checked, 0);
  EXPECT_GT(st.counters.accepted, 0);
  EXPECT_TRUE(st.log.best_nondecreasing());
  // The FLOPs proxy drives the population toward the bound.
  EXPECT_GT(st.population.best().score, 0.5 * static_cast<double>(*c.budget.max_flops));
}

TEST(Evolve, GateRejectionLeavesPopulationUnchanged) {
  SearchConfig c = flops_config(2, 300);
  c.budget.max_layers = 12;
  Searcher s(c);
  SearchState st = s.initialize();
  long rejections = 0;
  while (st.iteration < c.iterations) {
    const Population before = st.population;
    const long rejected = st.counters.rejected_by_gate + st.counters.mutation_exhausted;
    s.step(st);
    if (st.counters.rejected_by_gate + st.counters.mutation_exhausted > rejected) {
      ++rejections;
      ASSERT_EQ(st.population, before);
    }
  }
  EXPECT_GT(rejections, 0);
}

TEST(Evolve, AtCapacityOneAcceptedRemovesExactlyTheMinimum) {
  SearchConfig c = flops_config(4, 200);
  Searcher s(c);
  SearchState st = s.initialize();
  ASSERT_EQ(st.population.size(), static_cast<std::size_t>(c.population_size));
  while (st.iteration < c.iterations) {
    const Population before = st.population;
    const long accepted = st.counters.accepted;
    s.step(st);
    if (st.counters.accepted == accepted) continue;
    ASSERT_EQ(st.population.size(), before.size());
    const auto& now = st.population.members();
    auto has = [&](std::uint64_t id) {
      return std::any_of(now.begin(), now.end(), [&](const Member& x) { return x.id == id; });
    };
    std::vector<Member> removed;
    for (const auto& m : before.members())
      if (!has(m.id)) removed.push_back(m);
    if (!has(before.next_id())) {
      ASSERT_TRUE(removed.empty());  // the newcomer itself was the minimum
      continue;
    }
    ASSERT_EQ(removed.size(), 1u);
    for (const auto& m : now) ASSERT_LE(removed[0].score, m.score);
  }
}

TEST(Evolve, SeedReproducible) {
  SearchConfig c = fixture::micro_config(5, 200);
  const auto a = evolve(c), b = evolve(c);
  EXPECT_TRUE(a.state.log.same_trajectory(b.state.log));
  EXPECT_EQ(a.best.arch, b.best.arch);
  EXPECT_EQ(a.state.population, b.state.population);
}

TEST(Evolve, ParallelScorersDeterministic) {
  SearchConfig c = flops_config(6, 200);
  c.proxy = Proxy::zen;
  c.score.resolution = 8;
  c.score.batch_size = 4;
  c.score.repeats = 1;
  c.budget.max_flops = 5'000'000;
  c.parallel_scorers = 4;
  const auto a = evolve(c), b = evolve(c);
  EXPECT_TRUE(a.state.log.same_trajectory(b.state.log));
  EXPECT_EQ(a.state.population, b.state.population);
  EXPECT_EQ(a.state.iteration, 200);
}

TEST(Evolve, ExhaustedMutationIsSkippedIteration) {
  SearchConfig c = fixture::micro_config(7, 50);
  c.space.width_choices = {8};
  c.space.kernel_set = {3};
  c.space.min_depth = c.space.max_depth = 1;
  c.space.stem_width = 8;
  const auto out = evolve(c);
  EXPECT_EQ(out.state.counters.mutation_exhausted, 50);
  EXPECT_EQ(out.state.population.size(), 1u);
  EXPECT_EQ(out.state.iteration, 50);
}

TEST(Evolve, MatchesExhaustiveEnumeration) {
  const SearchSpace space = fixture::micro_space();
  const auto all = fixture::enumerate_micro(space);
  ASSERT_EQ(all.size(), 144u);
  const ScoreConfig sc = fixture::micro_config(0, 0).score;
  double best = -std::numeric_limits<double>::infinity();
  Architecture arg;
  for (const auto& a : all) {
    ASSERT_TRUE(validate(a, space, 0).ok());
    const double v = zen_score(a, sc).value;
    if (v > best) {
      best = v;
      arg = a;
    }
  }
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto out = evolve(fixture::micro_config(seed, 2000));
    EXPECT_EQ(out.best.arch, arg) << "seed " << seed;
    EXPECT_EQ(out.best.score, best);
    EXPECT_TRUE(out.state.log.best_nondecreasing());
  }
}

TEST(Checkpoint, RoundTripIsIdentity) {
  SearchConfig c = fixture::micro_config(8, 60);
  Searcher s(c);
  SearchState st = s.initialize();
  s.run(st);
  const std::string path = temp_path("rt.json");
  write_checkpoint(st, c, path);
  const SearchState back = read_checkpoint(path, c);
  EXPECT_EQ(back.population, st.population);
  EXPECT_TRUE(back.rng == st.rng);
  EXPECT_EQ(back.iteration, st.iteration);
  EXPECT_EQ(back.counters, st.counters);
  EXPECT_TRUE(back.log.same_trajectory(st.log));
  std::filesystem::remove(path);
}

TEST(Checkpoint, ResumeReproducesTrajectory) {
  const std::string path = temp_path("resume.json");
  SearchConfig full = fixture::micro_config(9, 200);
  const auto straight = evolve(full);

  SearchConfig half = full;
  half.iterations = 100;
  {
    Searcher s(half);
    SearchState st = s.initialize();
    s.run(st);
    write_checkpoint(st, half, path);
  }
  const auto resumed = resume(path, full);
  EXPECT_TRUE(resumed.state.log.same_trajectory(straight.state.log));
  EXPECT_EQ(resumed.state.population, straight.state.population);
  EXPECT_TRUE(resumed.state.rng == straight.state.rng);
  std::filesystem::remove(path);
}

TEST(Checkpoint, PeriodicWritesDuringRun) {
  const std::string path = temp_path("periodic.json");
  std::filesystem::remove(path);
  SearchConfig c = fixture::micro_config(10, 40);
  c.checkpoint_every = 10;
  c.checkpoint_path = path;
  evolve(c);
  ASSERT_TRUE(std::filesystem::exists(path));
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  EXPECT_EQ(read_checkpoint(path, c).iteration, 40);
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptVersionAndMismatchRejected) {
  SearchConfig c = fixture::micro_config(8, 5);
  Searcher s(c);
  SearchState st = s.initialize();
  const std::string path = temp_path("bad.json");
  write_checkpoint(st, c, path);
  const std::string good = read_text_file(path);

  auto write = [&](const std::string& text) {
    std::ofstream(path, std::ios::trunc) << text;
  };
  write(good.substr(0, good.size() / 2));
  EXPECT_THROW(read_checkpoint(path, c), CheckpointError);

  std::string v2 = good;
  v2.replace(v2.find("\"version\":1"), 11, "\"version\":2");
  write(v2);
  try {
    read_checkpoint(path, c);
    ADD_FAILURE();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos);
  }

  write(good);
  SearchConfig other = c;
  other.seed = 99;
  EXPECT_THROW(read_checkpoint(path, other), CheckpointError);
  EXPECT_THROW(read_checkpoint(temp_path("missing.json"), c), CheckpointError);
  std::filesystem::remove(path);
}

TEST(SearchConfig, RejectsBadValues) {
  SearchConfig c = fixture::micro_config(0, 10);
  c.population_size = 0;
  EXPECT_THROW(Searcher{c}, ConfigError);
  c = fixture::micro_config(0, -1);
  EXPECT_THROW(Searcher{c}, ConfigError);
  c = fixture::micro_config(0, 10);
  c.budget.max_latency_ms = 1.0;
  EXPECT_THROW(Searcher{c}, ConfigError);
}

TEST(ProxyValue, RandomProxyIsDeterministicPerArchitecture) {
  const auto all = fixture::enumerate_micro(fixture::micro_space());
  ScoreConfig sc;
  sc.seed = 3;
  EXPECT_EQ(proxy_value(all[0], Proxy::random, sc), proxy_value(all[0], Proxy::random, sc));
  EXPECT_NE(proxy_value(all[0], Proxy::random, sc), proxy_value(all[1], Proxy::random, sc));
}
