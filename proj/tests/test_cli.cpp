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

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "fixtures.hpp"
#include "zennas/arch_json.hpp"
#include "zennas/config.hpp"
#include "zennas/proxies.hpp"

namespace fs = std::filesystem;
using namespace zennas;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "zennas_cli_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

CliRun cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / "zennas_cli_test";
  fs::create_directories(dir);
  const fs::path out = dir / ("out" + std::to_string(counter) + ".txt");
  const fs::path err = dir / ("err" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string(ZENNAS_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string src(const std::string& rel) { return std::string(ZENNAS_SOURCE_DIR) + "/" + rel; }

double field(const std::string& text, const std::string& key) {
  const std::regex re(key + "=([-+0-9.eEinf]+)");
  std::smatch m;
  if (!std::regex_search(text, m, re)) {
    ADD_FAILURE() << "no " << key << " in: " << text;
    return 0.0;
  }
  return std::stod(m[1]);
}

// Micro-space config with the iteration count replaced.
fs::path micro_config(const fs::path& dir, long iterations) {
  std::string t = slurp(src("configs/micro.jsonc"));
  t = std::regex_replace(t, std::regex("\"iterations\": [0-9]+"), "\"iterations\": " + std::to_string(iterations));
  const fs::path p = dir / ("micro_" + std::to_string(iterations) + ".jsonc");
  std::ofstream(p) << t;
  return p;
}

// log.csv without its wall_time column.
std::string trajectory(const fs::path& log) {
  std::istringstream in(slurp(log));
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

}  // namespace

TEST(Cli, HelpAndUnknownVerb) {
  const CliRun h = cli("--help");
  EXPECT_EQ(h.code, 0);
  for (const char* verb : {"score", "search", "mutate", "validate", "count", "bench", "fig2", "theorem1", "corpus", "export"})
    EXPECT_NE(h.out.find(verb), std::string::npos) << verb;
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("").code, 2);
}

TEST(Cli, ScoreIsDeterministic) {
  const std::string args = "score " + src("corpus/resnet/resnet18.json") + " --proxy zen --seed 1 --repeats 1";
  const CliRun a = cli(args), b = cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.err.find("wall_time="), std::string::npos);
}

TEST(Cli, ScoreFlopsOfResNet50) {
  const CliRun r = cli("score " + src("corpus/resnet/resnet50.json") + " --proxy flops");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(field(r.out, "value"), 4.12e9, 0.02 * 4.12e9);
}

TEST(Cli, ScoreMatchesLibrary) {
  const std::string tiny = src("tests/data/tiny.json");
  for (const char* proxy : {"zen", "phi", "naswot"}) {
    const CliRun r = cli(std::string("score ") + tiny + " --proxy " + proxy + " --seed 7 --repeats 3 --batch 8");
    ASSERT_EQ(r.code, 0) << r.err;
    ScoreConfig c;
    c.seed = 7;
    c.repeats = 3;
    c.batch_size = 8;
    const Architecture a = load_architecture(tiny);
    const ScoreResult lib = std::string(proxy) == "zen" ? zen_score(a, c)
                            : std::string(proxy) == "phi" ? phi_score(a, c)
                                                          : naswot_score(a, c);
    EXPECT_EQ(field(r.out, "value"), lib.value) << proxy;
    EXPECT_EQ(field(r.out, "std_error"), lib.std_error) << proxy;
  }
}

TEST(Cli, ScoreWritesCsv) {
  const fs::path dir = scratch("score_csv");
  const CliRun r = cli("score " + src("tests/data/tiny.json") + " --proxy params --out-dir " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(dir / "score.csv");
  EXPECT_EQ(csv.rfind("arch_id,proxy,value,std_error,wall_time,seed\ntiny,params,", 0), 0u) << csv;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("exit_codes");
  std::ofstream(dir / "broken.json") << "{ \"format\": \"zennas.arch\", ";
  EXPECT_EQ(cli("score " + (dir / "broken.json").string()).code, 2);
  EXPECT_EQ(cli("score " + (dir / "missing.json").string()).code, 2);
  EXPECT_EQ(cli("score " + src("tests/data/tiny.json") + " --proxy nonsense").code, 2);
  // A perturbation below double resolution leaves the output unchanged.
  EXPECT_EQ(cli("score " + src("tests/data/tiny.json") + " --alpha 1e-300").code, 3);

  std::string t = slurp(src("configs/micro.jsonc"));
  t = std::regex_replace(t, std::regex("\"max_layers\": 6"), "\"max_layers\": 6, \"max_params\": 10");
  std::ofstream(dir / "infeasible.jsonc") << t;
  const CliRun inf = cli("search --config " + (dir / "infeasible.jsonc").string() + " --out-dir " + dir.string());
  EXPECT_EQ(inf.code, 4) << inf.err;
  EXPECT_FALSE(inf.err.empty());
}

TEST(Cli, ValidateReportsViolations) {
  const fs::path dir = scratch("validate");
  std::string t = slurp(src("tests/data/tiny.json"));
  t.replace(t.find("\"in\": 8"), 7, "\"in\": 9");
  std::ofstream(dir / "chain.json") << t;
  const CliRun bad = cli("validate " + (dir / "chain.json").string());
  EXPECT_EQ(bad.code, 2);
  const CliRun ok = cli("validate " + src("corpus/resnet/resnet18.json"));
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("valid depth=17"), std::string::npos);
  EXPECT_EQ(cli("validate " + src("corpus/resnet/resnet18.json") + " --max-depth 16").code, 2);
}

TEST(Cli, MutateDeterministicAndValid) {
  const std::string args = "mutate " + src("tests/data/tiny.json") + " --seed 4 --count 3";
  const CliRun a = cli(args), b = cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const Architecture m = parse_architecture(a.out);
  EXPECT_TRUE(validate(m, SearchSpace::cifar_resnet(), 0).ok());
}

TEST(Cli, CountAndExport) {
  const CliRun c = cli("count " + src("corpus/resnet/resnet18.json") + " " + src("corpus/zennet/zennet_400M-SE.json"));
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(c.out.find("ResNet-18 flops=1814073344"), std::string::npos);
  EXPECT_NE(c.out.find("without_se"), std::string::npos);

  const CliRun j = cli("export " + src("corpus/zennet/zennet_0.1ms.json") + " --format json");
  ASSERT_EQ(j.code, 0);
  EXPECT_EQ(j.out, serialize(load_architecture(src("corpus/zennet/zennet_0.1ms.json"))));
  const CliRun t = cli("export " + src("tests/data/tiny.json"));
  EXPECT_EQ(t.out.rfind("block,kernel,in,out,stride,bottleneck,expansion,layers,se\nConv,3,3,8,1,-,-,1,0\n", 0), 0u);
}

TEST(Cli, CorpusRanksAndEmptyDirectory) {
  const CliRun r = cli("corpus " + src("corpus/resnet") + " --proxy flops params");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("# kendall_tau(flops,flops)=1"), std::string::npos) << r.out;
  std::vector<double> flops;
  std::istringstream in(r.out);
  std::string line;
  while (std::getline(in, line))
    if (line.find(",flops,") != std::string::npos) flops.push_back(std::stod(line.substr(line.find(",flops,") + 7)));
  // Files sort as resnet101, resnet152, resnet18, resnet34, resnet50.
  ASSERT_EQ(flops.size(), 5u);
  EXPECT_LT(flops[2], flops[3]);
  EXPECT_LT(flops[3], flops[4]);
  EXPECT_LT(flops[4], flops[0]);
  EXPECT_LT(flops[0], flops[1]);

  const fs::path empty = scratch("empty_corpus");
  const CliRun e = cli("corpus " + empty.string() + " --proxy zen");
  EXPECT_EQ(e.code, 0);
  EXPECT_EQ(e.out, "arch_id,proxy,value,std_error,wall_time,seed\n");
}

TEST(Cli, SearchZeroIterationsEchoesInitial) {
  const fs::path dir = scratch("search_t0");
  const fs::path cfg = micro_config(dir, 0);
  const CliRun r = cli("search --config " + cfg.string() + " --out-dir " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const SearchConfig c = load_search_config(cfg.string());
  Rng rng(c.seed);
  Architecture f0 = random_arch(c.space, rng, c.depth_cap(), [&](const Architecture& a) { return passes_gate(a, c); });
  f0.name = "best";
  EXPECT_EQ(load_architecture((dir / "best.json").string()), f0);
  EXPECT_TRUE(fs::exists(dir / "log.csv"));
  EXPECT_TRUE(fs::exists(dir / "checkpoint.json"));
}

TEST(Cli, SearchMatchesEnumeration) {
  const fs::path dir = scratch("search_micro");
  const fs::path cfg = micro_config(dir, 2000);
  const CliRun r = cli("search --config " + cfg.string() + " --out-dir " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const SearchConfig c = load_search_config(cfg.string());
  double best = -std::numeric_limits<double>::infinity();
  Architecture arg;
  for (const auto& a : fixture::enumerate_micro(c.space)) {
    const double v = zen_score(a, c.score).value;
    if (v > best) best = v, arg = a;
  }
  arg.name = "best";
  EXPECT_EQ(load_architecture((dir / "best.json").string()), arg);
  const std::string svg = slurp(dir / "log.svg");
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Cli, ResumeEqualsUninterruptedRun) {
  const fs::path full = scratch("resume_full"), part = scratch("resume_part");
  ASSERT_EQ(cli("search --config " + micro_config(full, 120).string() + " --out-dir " + full.string()).code, 0);
  ASSERT_EQ(cli("search --config " + micro_config(part, 60).string() + " --out-dir " + part.string()).code, 0);
  const CliRun r = cli("search --resume --config " + micro_config(part, 120).string() + " --out-dir " + part.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(trajectory(part / "log.csv"), trajectory(full / "log.csv"));
  EXPECT_EQ(slurp(part / "best.json"), slurp(full / "best.json"));
}

TEST(Cli, ResumeWithCorruptCheckpointFails) {
  const fs::path dir = scratch("resume_corrupt");
  std::ofstream(dir / "checkpoint.json") << "{\"format\": \"zennas.checkpoint\", \"version\": 1, ";
  const CliRun r = cli("search --resume --config " + micro_config(dir, 10).string() + " --out-dir " + dir.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("corrupt"), std::string::npos) << r.err;
}

TEST(Cli, Fig2AndTheorem1WriteCsvAndSvg) {
  const fs::path dir = scratch("figures");
  const CliRun f = cli("fig2 --family Q --with-bn --sweep 2 8 --repeats 1 --out-dir " + dir.string());
  ASSERT_EQ(f.code, 0) << f.err;
  const std::string csv = slurp(dir / "fig2_Q_bn.csv");
  EXPECT_EQ(csv.rfind("width,phi,phi_std_error,phi_overflowed,zen,zen_std_error\n2,", 0), 0u) << csv;
  const std::string svg = slurp(dir / "fig2_Q_bn.svg");
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);

  const CliRun t = cli("theorem1 --layers 1 --batches 1 2 --resolution 8 --seeds 2 --out-dir " + dir.string());
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(slurp(dir / "theorem1.csv").rfind("layers,bhw,ratio,abs_dev\n1,64,", 0), 0u);
  EXPECT_NE(slurp(dir / "theorem1.svg").find("</svg>"), std::string::npos);
}

TEST(Cli, BenchPrintsMedianAndEstimate) {
  const CliRun r = cli("bench " + src("tests/data/tiny.json") + " --batch 4 --runs 5 --warmup 1 --cost-model " +
                    src("configs/cost_model.txt"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GT(field(r.out, "median_ms"), 0.0);
  EXPECT_GT(field(r.out, "estimated_ms"), 0.0);
}

TEST(Config, ExampleConfigsParse) {
  const SearchConfig c = load_search_config(src("configs/search_cifar.jsonc"));
  EXPECT_EQ(c.proxy, Proxy::zen);
  EXPECT_EQ(c.population_size, 64);
  EXPECT_EQ(*c.budget.max_params, 1'000'000);
  EXPECT_EQ(c.depth_cap(), 18);
  EXPECT_EQ(c.score.seed, 1u);
  const SearchConfig m = load_search_config(src("configs/micro.jsonc"));
  EXPECT_EQ(m.space.width_choices, (std::vector<int>{8, 16, 32}));
  EXPECT_EQ(m.init, InitMode::single);
}

TEST(Config, UnknownKeyHasLocation) {
  try {
    parse_search_config("{\"space\": {\"kernel\": [3]}}");
    ADD_FAILURE();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location(), "$.space.kernel");
  }
}
