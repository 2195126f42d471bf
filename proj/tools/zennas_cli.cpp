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

// zennas: command-line front end.
//
// Exit codes: 0 ok, 1 other failure, 2 bad input (parse/config/usage),
// 3 numeric failure (degenerate score), 4 infeasible search space.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "zennas/arch_json.hpp"
#include "zennas/budget.hpp"
#include "zennas/config.hpp"
#include "zennas/proxies.hpp"
#include "zennas/report.hpp"
#include "zennas/search.hpp"

namespace fs = std::filesystem;
using namespace zennas;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitInfeasible = 4;

struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string config;
  std::string precision = "f64";
  std::string out_dir;
  std::string format = "csv";
  int jobs = 1;
  bool resume = false;
};

std::string human(double v) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(3);
  if (std::abs(v) >= 1e9) o << v / 1e9 << "G";
  else if (std::abs(v) >= 1e6) o << v / 1e6 << "M";
  else if (std::abs(v) >= 1e3) o << v / 1e3 << "K";
  else o << v;
  return o.str();
}

std::optional<SearchConfig> load_config(const Globals& g) {
  if (g.config.empty()) return std::nullopt;
  return load_search_config(g.config);
}

ScoreConfig base_score_config(const Globals& g) {
  ScoreConfig c;
  if (auto sc = load_config(g)) c = sc->score;
  if (g.seed_set) c.seed = g.seed;
  c.precision = g.precision == "f32" ? Precision::f32 : Precision::f64;
  return c;
}

SearchSpace space_by_name(const std::string& n) {
  if (n == "cifar_resnet") return SearchSpace::cifar_resnet();
  if (n == "imagenet_resnet") return SearchSpace::imagenet_resnet();
  if (n == "cifar_mobile") return SearchSpace::mobile(false);
  if (n == "imagenet_mobile") return SearchSpace::mobile(true);
  throw ConfigError("unknown space preset '" + n + "'");
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << text;
}

fs::path out_path(const Globals& g, const std::string& name) {
  return fs::path(g.out_dir.empty() ? "." : g.out_dir) / name;
}

std::string arch_id(const Architecture& a, const std::string& path) {
  return a.name.empty() ? fs::path(path).stem().string() : a.name;
}

// Scores one architecture with any proxy; counters are exact and carry no error.
ScoreResult run_proxy(const Architecture& a, Proxy p, const ScoreConfig& cfg) {
  switch (p) {
    case Proxy::zen: return zen_score(a, cfg);
    case Proxy::phi: return phi_score(a, cfg);
    case Proxy::naswot: return naswot_score(a, cfg);
    case Proxy::flops: {
      ScoreResult r;
      r.value = static_cast<double>(count_flops(a));
      return r;
    }
    case Proxy::params: {
      ScoreResult r;
      r.value = static_cast<double>(count_params(a));
      return r;
    }
    case Proxy::random: {
      ScoreResult r;
      r.value = *proxy_value(a, p, cfg);
      return r;
    }
  }
  return {};
}

Proxy parse_proxy(const std::string& s) {
  auto p = proxy_from_string(s);
  if (!p) throw ConfigError("unknown proxy '" + s + "'");
  return *p;
}

// ---------------------------------------------------------------------------

struct ScoreArgs {
  std::string arch;
  std::string proxy = "zen";
  std::optional<int> repeats, batch, resolution;
  std::optional<double> alpha;
  std::string bn_mode;
  bool phi_with_bn = false;
};

int cmd_score(const Globals& g, const ScoreArgs& a) {
  const Architecture arch = load_architecture(a.arch);
  const Proxy p = parse_proxy(a.proxy);
  ScoreConfig cfg = base_score_config(g);
  if (a.repeats) cfg.repeats = *a.repeats;
  if (a.batch) cfg.batch_size = *a.batch;
  if (a.resolution) cfg.resolution = *a.resolution;
  if (a.alpha) cfg.alpha = *a.alpha;
  if (a.bn_mode == "standard") cfg.bn_mode = BnMode::standard;
  cfg.phi_with_bn = a.phi_with_bn;
  const ScoreResult r = run_proxy(arch, p, cfg);
  if (r.overflowed) {
    std::cout << "proxy=" << a.proxy << " value=inf overflowed=1\n";
  } else {
    std::cout << "proxy=" << a.proxy << " value=" << format_double(r.value)
              << " std_error=" << format_double(r.std_error);
    if (p == Proxy::flops || p == Proxy::params) std::cout << " (" << human(r.value) << ")";
    std::cout << "\n";
  }
  std::cerr << "wall_time=" << r.wall_time << "s\n";
  if (r.degenerate_rate > 0.01)
    std::cerr << "warning: " << r.degenerate_rate * 100 << "% of BN channels were degenerate\n";
  if (!g.out_dir.empty()) {
    std::ostringstream csv;
    write_score_csv(csv, {{arch_id(arch, a.arch), a.proxy, r.value, r.std_error, r.wall_time, cfg.seed}});
    write_file(out_path(g, "score.csv"), csv.str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_search(const Globals& g) {
  if (g.config.empty()) throw ConfigError("search needs --config");
  SearchConfig cfg = *load_config(g);
  if (g.seed_set) {
    cfg.seed = g.seed;
    cfg.score.seed = g.seed;
  }
  cfg.score.precision = g.precision == "f32" ? Precision::f32 : cfg.score.precision;
  if (g.jobs > 1) cfg.parallel_scorers = g.jobs;
  const fs::path dir = g.out_dir.empty() ? fs::path(".") : fs::path(g.out_dir);
  fs::create_directories(dir);
  if (cfg.checkpoint_path.empty()) cfg.checkpoint_path = (dir / "checkpoint.json").string();
  if (cfg.checkpoint_every <= 0) cfg.checkpoint_every = std::max<long>(1, cfg.iterations / 20);

  Searcher searcher(cfg);
  SearchState state = g.resume ? read_checkpoint(cfg.checkpoint_path, cfg) : searcher.initialize();
  searcher.run(state);
  Searcher::save_checkpoint(state, cfg, cfg.checkpoint_path);

  const Member& best = state.population.best();
  Architecture b = best.arch;
  if (b.name.empty()) b.name = "best";
  write_file(dir / "best.json", serialize(b));
  std::ostringstream log;
  write_log_csv(log, state.log);
  write_file(dir / "log.csv", log.str());
  Series s{"best " + to_string(cfg.proxy), {}, {}};
  for (const auto& e : state.log.entries) {
    s.x.push_back(static_cast<double>(e.iteration));
    s.y.push_back(e.best_score);
  }
  write_file(dir / "log.svg", svg_line_chart("Search progress", "iteration", "best score", {s}));

  const auto counts = count(best.arch);
  std::cout << "best_score=" << format_double(best.score) << " iteration=" << best.iteration
            << " flops=" << human(static_cast<double>(counts.flops))
            << " params=" << human(static_cast<double>(counts.params)) << " depth=" << conv_depth(best.arch)
            << "\n"
            << "accepted=" << state.counters.accepted << " rejected_by_gate=" << state.counters.rejected_by_gate
            << " mutation_exhausted=" << state.counters.mutation_exhausted
            << " rejected_score=" << state.counters.rejected_score << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

SearchSpace space_for(const Globals& g, const std::string& preset) {
  if (!preset.empty()) return space_by_name(preset);
  if (auto c = load_config(g)) return c->space;
  return SearchSpace::cifar_resnet();
}

int cmd_mutate(const Globals& g, const std::string& file, const std::string& preset, int count) {
  Architecture a = load_architecture(file);
  const SearchSpace space = space_for(g, preset);
  Rng rng(g.seed);
  for (int i = 0; i < count; ++i) a = mutate(a, space, rng);
  std::cout << serialize(a);
  return kExitOk;
}

int cmd_validate(const Globals& g, const std::string& file, const std::string& preset, int max_depth) {
  const Architecture a = load_architecture(file);
  const bool against_space = !preset.empty() || !g.config.empty();
  const ValidationReport r = against_space ? validate(a, space_for(g, preset), max_depth) : validate_structure(a);
  if (r.ok() && !against_space && max_depth > 0 && conv_depth(a) > max_depth) {
    std::cout << "invalid\nblocks: depth " << conv_depth(a) << " exceeds the layer cap " << max_depth << "\n";
    return kExitInput;
  }
  if (r.ok()) {
    std::cout << "valid depth=" << conv_depth(a) << "\n";
    return kExitOk;
  }
  std::cout << "invalid\n" << r.summary();
  return kExitInput;
}

int cmd_count(const Globals& g, const std::vector<std::string>& files, int resolution, bool no_se) {
  CountOptions opt;
  opt.include_se = !no_se;
  std::ostringstream csv;
  csv << "arch_id,flops,params,depth\n";
  for (const auto& f : files) {
    const Architecture a = load_architecture(f);
    const Counts c = count(a, resolution, opt);
    std::cout << arch_id(a, f) << " flops=" << c.flops << " (" << human(static_cast<double>(c.flops))
              << ") params=" << c.params << " (" << human(static_cast<double>(c.params))
              << ") depth=" << conv_depth(a);
    if (!no_se) {
      CountOptions plain = opt;
      plain.include_se = false;
      const Counts p = count(a, resolution, plain);
      if (p.flops != c.flops)
        std::cout << " without_se: flops=" << human(static_cast<double>(p.flops))
                  << " params=" << human(static_cast<double>(p.params));
    }
    std::cout << "\n";
    csv << csv_field(arch_id(a, f)) << ',' << c.flops << ',' << c.params << ',' << conv_depth(a) << "\n";
  }
  if (!g.out_dir.empty()) write_file(out_path(g, "count.csv"), csv.str());
  return kExitOk;
}

int cmd_bench(const Globals& g, const std::string& file, const BenchConfig& bc_in, const std::string& cost_file) {
  const Architecture a = load_architecture(file);
  BenchConfig bc = bc_in;
  bc.seed = g.seed;
  bc.precision = g.precision == "f64" ? Precision::f64 : Precision::f32;
  const BenchResult r = bench_latency(a, bc);
  std::cout << "median_ms=" << r.median_ms << " cv=" << r.coefficient_of_variation() << " runs=" << bc.runs
            << " batch=" << bc.batch_size << "\n";
  if (!cost_file.empty())
    std::cout << "estimated_ms=" << estimate_latency(a, CostModel::load(cost_file)) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_fig2(const Globals& g, const std::string& family, bool with_bn, std::vector<int> sweep, int repeats) {
  const Fig2Family kind = family == "Q" ? Fig2Family::Q : Fig2Family::P;
  if (family != "P" && family != "Q") throw ConfigError("family must be P or Q");
  if (sweep.empty()) {
    if (kind == Fig2Family::P) for (int d = 5; d <= 60; d += 5) sweep.push_back(d);
    else for (int w = 2; w <= 60; w += 2) sweep.push_back(w);
  }
  ScoreConfig cfg = base_score_config(g);
  cfg.repeats = repeats;
  if (cfg.resolution <= 0) cfg.resolution = 32;
  const auto rows = fig2_families(kind, with_bn, sweep, cfg);
  std::ostringstream csv;
  csv << (kind == Fig2Family::P ? "depth" : "width") << ",phi,phi_std_error,phi_overflowed,zen,zen_std_error\n";
  Series phi{std::string("Phi ") + (with_bn ? "with BN" : "without BN"), {}, {}};
  Series zen{"Zen-Score", {}, {}};
  for (const auto& r : rows) {
    csv << r.x << ',' << format_double(r.phi.value) << ',' << format_double(r.phi.std_error) << ','
        << (r.phi.overflowed ? 1 : 0) << ',' << format_double(r.zen.value) << ',' << format_double(r.zen.std_error)
        << "\n";
    phi.x.push_back(r.x);
    phi.y.push_back(r.phi.value);
    zen.x.push_back(r.x);
    zen.y.push_back(r.zen.value);
  }
  std::cout << csv.str();
  const std::string stem = "fig2_" + family + (with_bn ? "_bn" : "_nobn");
  const std::string xl = kind == Fig2Family::P ? "depth" : "bottleneck width";
  write_file(out_path(g, stem + ".csv"), csv.str());
  write_file(out_path(g, stem + ".svg"), svg_line_chart("Family " + family, xl, "score", {phi, zen}));
  return kExitOk;
}

int cmd_theorem1(const Globals& g, std::vector<int> layers, int width, std::vector<int> batches, int resolution,
                 int seeds) {
  if (layers.empty()) layers = {3, 5};
  if (batches.empty()) batches = {1, 16, 64};
  std::ostringstream csv;
  csv << "layers,bhw,ratio,abs_dev\n";
  std::vector<Series> curves;
  for (int L : layers) {
    Series s{"L=" + std::to_string(L), {}, {}};
    for (int b : batches) {
      ScoreConfig cfg = base_score_config(g);
      cfg.batch_size = b;
      cfg.resolution = resolution;
      cfg.repeats = seeds;
      const auto net = VanillaNet::chain(3, std::vector<int>(static_cast<std::size_t>(L), width));
      const Theorem1Result r = theorem1_ratio(net, cfg);
      const int bhw = b * resolution * resolution;
      csv << L << ',' << bhw << ',' << format_double(r.ratio) << ',' << format_double(std::abs(r.ratio - 1)) << "\n";
      s.x.push_back(bhw);
      s.y.push_back(r.ratio);
    }
    curves.push_back(s);
  }
  std::cout << csv.str();
  write_file(out_path(g, "theorem1.csv"), csv.str());
  write_file(out_path(g, "theorem1.svg"), svg_line_chart("BN rescaling ratio", "B*H*W", "ratio", curves));
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_corpus(const Globals& g, const std::string& dir, const std::vector<std::string>& proxy_names) {
  std::vector<std::string> files;
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir);
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  std::vector<Proxy> proxies;
  for (const auto& n : proxy_names) proxies.push_back(parse_proxy(n));
  ScoreConfig cfg = base_score_config(g);

  std::vector<ScoreRow> rows;
  std::map<std::string, std::vector<double>> by_proxy;
  for (const auto& f : files) {
    const Architecture a = load_architecture(f);
    for (std::size_t k = 0; k < proxies.size(); ++k) {
      const ScoreResult r = run_proxy(a, proxies[k], cfg);
      rows.push_back({arch_id(a, f), proxy_names[k], r.value, r.std_error, r.wall_time, cfg.seed});
      by_proxy[proxy_names[k]].push_back(r.value);
    }
  }
  std::ostringstream csv;
  write_score_csv(csv, rows);
  std::cout << csv.str();
  if (!files.empty()) {
    for (std::size_t i = 0; i < proxy_names.size(); ++i)
      for (std::size_t j = i; j < proxy_names.size(); ++j) {
        const double tau = kendall_tau(by_proxy[proxy_names[i]], by_proxy[proxy_names[j]]);
        std::cout << "# kendall_tau(" << proxy_names[i] << "," << proxy_names[j] << ")=" << format_double(tau) << "\n";
      }
  }
  if (!g.out_dir.empty()) write_file(out_path(g, "corpus.csv"), csv.str());
  return kExitOk;
}

int cmd_export(const Globals& g, const std::string& file) {
  const Architecture a = load_architecture(file);
  if (g.format == "json") {
    std::cout << serialize(a);
    return kExitOk;
  }
  std::ostringstream o;
  o << "block,kernel,in,out,stride,bottleneck,expansion,layers,se\n";
  for (const auto& b : a.blocks)
    o << to_string(b.type) << ',' << b.kernel << ',' << b.in_ch << ',' << b.out_ch << ',' << b.stride << ','
      << (b.bottleneck ? std::to_string(*b.bottleneck) : "-") << ','
      << (b.expansion ? std::to_string(*b.expansion) : "-") << ',' << b.layers << ',' << (b.se ? 1 : 0) << "\n";
  if (g.format == "csv") {
    std::cout << o.str();
  } else {
    throw ConfigError("export supports --format csv or json");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zennas: training-free architecture scoring and evolutionary search"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the verb
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed")->default_val(0);
  app.add_option("--config", g.config, "Search config file (JSON, comments allowed)");
  app.add_option("--precision", g.precision, "Floating point precision")->check(CLI::IsMember({"f32", "f64"}));
  app.add_option("--out-dir", g.out_dir, "Directory for CSV/SVG/JSON outputs");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json", "svg"}));
  app.add_option("--jobs", g.jobs, "Concurrent scorers during search")->check(CLI::PositiveNumber);
  app.add_flag("--resume", g.resume, "Resume a search from its checkpoint");

  ScoreArgs sa;
  auto* score = app.add_subcommand("score", "Score one architecture");
  score->add_option("arch", sa.arch, "Architecture JSON")->required();
  score->add_option("--proxy", sa.proxy, "zen, phi, naswot, flops, params or random");
  score->add_option("--repeats", sa.repeats, "Independent weight/input draws");
  score->add_option("--batch", sa.batch, "Batch size");
  score->add_option("--resolution", sa.resolution, "Input resolution (default: the architecture's)");
  score->add_option("--alpha", sa.alpha, "Perturbation scale");
  score->add_option("--bn-mode", sa.bn_mode, "no_mean or standard")->check(CLI::IsMember({"no_mean", "standard"}));
  score->add_flag("--phi-with-bn", sa.phi_with_bn, "Compute Phi on the BN network");

  auto* search = app.add_subcommand("search", "Run the evolutionary search described by --config");

  std::string mfile, mspace;
  int mcount = 1;
  auto* mut = app.add_subcommand("mutate", "Print a mutated architecture");
  mut->add_option("arch", mfile)->required();
  mut->add_option("--space", mspace, "Space preset (default: --config space, else cifar_resnet)");
  mut->add_option("--count", mcount, "Successive mutations")->check(CLI::PositiveNumber);

  std::string vfile, vspace;
  int vdepth = 0;
  auto* val = app.add_subcommand("validate", "Check an architecture");
  val->add_option("arch", vfile)->required();
  val->add_option("--space", vspace, "Also check against a space preset");
  val->add_option("--max-depth", vdepth, "Layer cap L");

  std::vector<std::string> cfiles;
  int cres = 0;
  bool cnose = false;
  auto* cnt = app.add_subcommand("count", "FLOPs (MACs), params and depth");
  cnt->add_option("arch", cfiles)->required();
  cnt->add_option("--resolution", cres, "Override input resolution");
  cnt->add_flag("--no-se", cnose, "Leave SE modules out of the counts");

  std::string bfile, bcost;
  BenchConfig bc;
  auto* bench = app.add_subcommand("bench", "Host wall-clock forward latency (serial)");
  bench->add_option("arch", bfile)->required();
  bench->add_option("--batch", bc.batch_size)->default_val(64);
  bench->add_option("--runs", bc.runs)->default_val(30);
  bench->add_option("--warmup", bc.warmup)->default_val(2);
  bench->add_option("--resolution", bc.resolution);
  bench->add_option("--cost-model", bcost, "Also print the cost model's estimate");

  std::string ffamily = "P";
  bool fbn = false;
  std::vector<int> fsweep;
  int frepeats = 4;
  auto* fig2 = app.add_subcommand("fig2", "Depth (P) or width (Q) sweep of Phi and Zen");
  fig2->add_option("--family", ffamily)->check(CLI::IsMember({"P", "Q"}));
  fig2->add_flag("--with-bn", fbn, "Phi on the BN network");
  fig2->add_option("--sweep", fsweep, "Depths or widths");
  fig2->add_option("--repeats", frepeats)->default_val(4);

  std::vector<int> tlayers, tbatches;
  int twidth = 32, tres = 32, tseeds = 20;
  auto* thm = app.add_subcommand("theorem1", "BN-rescaling ratio versus B*H*W");
  thm->add_option("--layers", tlayers, "Depths (default 3 5)");
  thm->add_option("--width", twidth)->default_val(32);
  thm->add_option("--batches", tbatches, "Batch sizes (default 1 16 64)");
  thm->add_option("--resolution", tres)->default_val(32);
  thm->add_option("--seeds", tseeds)->default_val(20);

  std::string cdir;
  std::vector<std::string> cproxies{"zen"};
  auto* corpus = app.add_subcommand("corpus", "Score every architecture in a directory");
  corpus->add_option("dir", cdir)->required();
  corpus->add_option("--proxy", cproxies, "Proxies to compute");

  std::string efile;
  auto* exp = app.add_subcommand("export", "Print an architecture as a table (csv) or canonical JSON");
  exp->add_option("arch", efile)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*score) return cmd_score(g, sa);
    if (*search) return cmd_search(g);
    if (*mut) return cmd_mutate(g, mfile, mspace, mcount);
    if (*val) return cmd_validate(g, vfile, vspace, vdepth);
    if (*cnt) return cmd_count(g, cfiles, cres, cnose);
    if (*bench) return cmd_bench(g, bfile, bc, bcost);
    if (*fig2) return cmd_fig2(g, ffamily, fbn, fsweep, frepeats);
    if (*thm) return cmd_theorem1(g, tlayers, twidth, tbatches, tres, tseeds);
    if (*corpus) return cmd_corpus(g, cdir, cproxies);
    if (*exp) return cmd_export(g, efile);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DegenerateScore& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const SpaceInfeasible& e) {
    std::cerr << "error: infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const MutationExhausted& e) {
    std::cerr << "error: infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
