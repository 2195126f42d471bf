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

// Inference-budget accounting.
//
// FLOPs are multiply-accumulates: k*k*(C_in/groups)*C_out*H_out*W_out per
// convolution, shortcut projections included, BN and ReLU free. A 3x3/2
// max-pool is free. When num_classes > 0 the GAP + fully connected classifier
// is counted (C_last * num_classes MACs, weights plus bias).
// Params are conv weights plus two BN affine values per conv output channel.
// SE modules use a reduction width max(C/4, 8) and two biased FC layers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "zennas/arch.hpp"
#include "zennas/network.hpp"

namespace zennas {

struct CountOptions {
  bool include_se = true;
  bool include_head = true;  // classifier when num_classes > 0
};

struct Counts {
  std::int64_t flops = 0;
  std::int64_t params = 0;
};

inline std::int64_t se_width(int channels) { return std::max<std::int64_t>(channels / 4, 8); }

// Per-unit accounting; `h` is the unit's input resolution and is advanced.
inline Counts count_unit(const UnitPlan& u, std::int64_t& h, const CountOptions& opt = {}) {
  Counts c;
  const std::int64_t h_in = h;
  auto add_conv = [&](const ConvSpec& s, std::int64_t hin) {
    const std::int64_t hout = (hin + s.stride - 1) / s.stride;
    const std::int64_t w = static_cast<std::int64_t>(s.kernel) * s.kernel * (s.in / s.groups) * s.out;
    c.flops += w * hout * hout;
    c.params += w + 2 * static_cast<std::int64_t>(s.out);
    return hout;
  };
  for (std::size_t i = 0; i < u.main.size(); ++i) {
    h = add_conv(u.main[i], h);
    if (u.se_channels && i == u.se_after && opt.include_se) {
      const std::int64_t ch = *u.se_channels;
      const std::int64_t r = se_width(*u.se_channels);
      c.flops += 2 * ch * r;
      c.params += 2 * ch * r + ch + r;
    }
  }
  if (u.shortcut) add_conv(*u.shortcut, h_in);
  if (u.pool_after) h = (h + 1) / 2;
  return c;
}

inline Counts count_block(const BlockDescriptor& b, std::int64_t& h, const CountOptions& opt = {}) {
  Counts c;
  for (const auto& u : expand_block(b)) {
    const Counts uc = count_unit(u, h, opt);
    c.flops += uc.flops;
    c.params += uc.params;
  }
  return c;
}

inline Counts count(const Architecture& a, int resolution = 0, const CountOptions& opt = {}) {
  std::int64_t h = resolution > 0 ? resolution : a.input_resolution;
  Counts c;
  for (const auto& b : a.blocks) {
    const Counts bc = count_block(b, h, opt);
    c.flops += bc.flops;
    c.params += bc.params;
  }
  if (opt.include_head && a.num_classes > 0 && !a.blocks.empty()) {
    const std::int64_t fc = static_cast<std::int64_t>(a.output_channels()) * a.num_classes;
    c.flops += fc;
    c.params += fc + a.num_classes;
  }
  return c;
}

inline std::int64_t count_flops(const Architecture& a, int resolution = 0, const CountOptions& opt = {}) {
  return count(a, resolution, opt).flops;
}

inline std::int64_t count_params(const Architecture& a, const CountOptions& opt = {}) {
  return count(a, 0, opt).params;
}

// ---------------------------------------------------------------------------
// Latency cost model.
//
// Text format, '#' starts a comment:
//   <type> <kernel> <c_in> <c_out> <resolution> <stride> <microseconds>
//   fallback <flops_per_ms> <overhead_ms_per_conv>
// Rows describe one unit of a block (one duplication). For a query unit the
// rows with the same (type, kernel, stride) are fitted by least squares as
//   log us = a + b log c_in + c log c_out + d log resolution
// and the fit is used when the query lies inside the rows' bounding box and
// at least four rows exist; an exact row match is always used as is.
// Anything else goes to the fallback: flops / flops_per_ms + overhead per conv.

struct CostRow {
  BlockType type = BlockType::Conv;
  int kernel = 3;
  int c_in = 0;
  int c_out = 0;
  int resolution = 0;
  int stride = 1;
  double micros = 0.0;
};

struct CostFallback {
  double flops_per_ms = 0.0;
  double overhead_ms = 0.0;
};

class CostModel {
 public:
  CostModel() = default;

  static CostModel fallback_only(double flops_per_ms, double overhead_ms) {
    CostModel m;
    m.set_fallback({flops_per_ms, overhead_ms});
    return m;
  }

  static CostModel parse(const std::string& text) {
    CostModel m;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto p = line.find('#'); p != std::string::npos) line.erase(p);
      std::istringstream ls(line);
      std::string head;
      if (!(ls >> head)) continue;
      const std::string where = "line " + std::to_string(lineno);
      if (head == "fallback") {
        CostFallback f;
        if (!(ls >> f.flops_per_ms >> f.overhead_ms) || !(f.flops_per_ms > 0.0) || f.overhead_ms < 0.0)
          throw ParseError("cost model: bad fallback row", where);
        m.set_fallback(f);
        continue;
      }
      const auto type = block_type_from_string(head);
      if (!type) throw ParseError("cost model: unknown block type '" + head + "'", where);
      CostRow r;
      r.type = *type;
      if (!(ls >> r.kernel >> r.c_in >> r.c_out >> r.resolution >> r.stride >> r.micros))
        throw ParseError("cost model: expected 6 numbers after the block type", where);
      if (r.c_in <= 0 || r.c_out <= 0 || r.resolution <= 0 || !(r.micros > 0.0))
        throw ParseError("cost model: sizes and cost must be positive", where);
      std::string extra;
      if (ls >> extra) throw ParseError("cost model: trailing field '" + extra + "'", where);
      m.add(r);
    }
    return m;
  }

  static CostModel load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open cost model " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  void add(const CostRow& r) {
    rows_.push_back(r);
    fits_.clear();
  }
  void set_fallback(CostFallback f) { fallback_ = f; }
  const std::vector<CostRow>& rows() const { return rows_; }
  const std::optional<CostFallback>& fallback() const { return fallback_; }
  bool empty() const { return rows_.empty() && !fallback_; }

  // Estimated milliseconds for the whole architecture.
  double estimate_ms(const Architecture& a, int resolution = 0) const {
    if (rows_.empty() && !fallback_) throw ConfigError("cost model has no rows and no fallback");
    std::int64_t h = resolution > 0 ? resolution : a.input_resolution;
    double ms = 0.0;
    for (const auto& b : a.blocks) {
      const auto units = expand_block(b);
      const std::size_t per_unit = b.type == BlockType::MB ? 2 : 1;
      for (std::size_t i = 0; i < units.size(); i += per_unit) {
        const int stride = i == 0 ? b.stride : 1;
        const int cin = i == 0 ? b.in_ch : b.out_ch;
        const std::int64_t h_in = h;
        Counts c;
        int convs = 0;
        for (std::size_t j = i; j < i + per_unit; ++j) {
          const Counts uc = count_unit(units[j], h);
          c.flops += uc.flops;
          convs += static_cast<int>(units[j].main.size() + (units[j].shortcut ? 1 : 0));
        }
        ms += unit_ms(b.type, b.kernel, stride, cin, b.out_ch, static_cast<int>(h_in), c.flops, convs);
      }
    }
    return ms;
  }

 private:
  struct Fit {
    Eigen::Vector4d coef = Eigen::Vector4d::Zero();
    bool usable = false;
    int lo_in = 0, hi_in = 0, lo_out = 0, hi_out = 0, lo_res = 0, hi_res = 0;
  };
  using Key = std::tuple<int, int, int>;

  const Fit& fit_for(const Key& key) const {
    auto it = fits_.find(key);
    if (it != fits_.end()) return it->second;
    Fit f;
    std::vector<const CostRow*> rs;
    for (const auto& r : rows_)
      if (Key{static_cast<int>(r.type), r.kernel, r.stride} == key) rs.push_back(&r);
    if (rs.size() >= 4) {
      Eigen::MatrixXd x(static_cast<Eigen::Index>(rs.size()), 4);
      Eigen::VectorXd y(static_cast<Eigen::Index>(rs.size()));
      f.lo_in = f.lo_out = f.lo_res = std::numeric_limits<int>::max();
      for (std::size_t i = 0; i < rs.size(); ++i) {
        const auto& r = *rs[i];
        const auto k = static_cast<Eigen::Index>(i);
        x.row(k) << 1.0, std::log(r.c_in), std::log(r.c_out), std::log(r.resolution);
        y(k) = std::log(r.micros);
        f.lo_in = std::min(f.lo_in, r.c_in);
        f.hi_in = std::max(f.hi_in, r.c_in);
        f.lo_out = std::min(f.lo_out, r.c_out);
        f.hi_out = std::max(f.hi_out, r.c_out);
        f.lo_res = std::min(f.lo_res, r.resolution);
        f.hi_res = std::max(f.hi_res, r.resolution);
      }
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
      f.usable = qr.rank() == 4;
      if (f.usable) f.coef = qr.solve(y);
    }
    return fits_.emplace(key, f).first->second;
  }

  double unit_ms(BlockType type, int kernel, int stride, int cin, int cout, int res, std::int64_t flops,
                 int convs) const {
    for (const auto& r : rows_)
      if (r.type == type && r.kernel == kernel && r.stride == stride && r.c_in == cin && r.c_out == cout &&
          r.resolution == res)
        return r.micros / 1000.0;
    const Fit& f = fit_for({static_cast<int>(type), kernel, stride});
    if (f.usable && cin >= f.lo_in && cin <= f.hi_in && cout >= f.lo_out && cout <= f.hi_out &&
        res >= f.lo_res && res <= f.hi_res) {
      const double lu = f.coef(0) + f.coef(1) * std::log(cin) + f.coef(2) * std::log(cout) +
                        f.coef(3) * std::log(res);
      return std::exp(lu) / 1000.0;
    }
    if (!fallback_)
      throw ConfigError("cost model: no row covers " + to_string(type) + " k" + std::to_string(kernel) + " " +
                        std::to_string(cin) + "->" + std::to_string(cout) + " @" + std::to_string(res) +
                        " and no fallback is configured");
    return static_cast<double>(flops) / fallback_->flops_per_ms + fallback_->overhead_ms * convs;
  }

  std::vector<CostRow> rows_;
  std::optional<CostFallback> fallback_;
  mutable std::map<Key, Fit> fits_;
};

inline double estimate_latency(const Architecture& a, const CostModel& m, int resolution = 0) {
  return m.estimate_ms(a, resolution);
}

struct Budget {
  std::optional<std::int64_t> max_flops;
  std::optional<std::int64_t> max_params;
  std::optional<double> max_latency_ms;
  int max_layers = 0;  // 0: no depth cap

  bool any() const { return max_flops || max_params || max_latency_ms || max_layers > 0; }
  void check() const {
    if (!any()) throw ConfigError("budget sets no bound");
  }
};

struct BudgetReport {
  bool ok = true;
  std::int64_t flops = 0;
  std::int64_t params = 0;
  std::optional<double> latency_ms;
  int depth = 0;
  std::vector<std::string> violations;

  explicit operator bool() const { return ok; }
};

inline BudgetReport within_budget(const Architecture& a, const Budget& budget, const CostModel* cost = nullptr) {
  BudgetReport r;
  const Counts c = count(a);
  r.flops = c.flops;
  r.params = c.params;
  r.depth = conv_depth(a);
  auto fail = [&](std::string msg) {
    r.ok = false;
    r.violations.push_back(std::move(msg));
  };
  if (budget.max_flops && r.flops > *budget.max_flops)
    fail("flops " + std::to_string(r.flops) + " > " + std::to_string(*budget.max_flops));
  if (budget.max_params && r.params > *budget.max_params)
    fail("params " + std::to_string(r.params) + " > " + std::to_string(*budget.max_params));
  if (budget.max_layers > 0 && r.depth > budget.max_layers)
    fail("depth " + std::to_string(r.depth) + " > " + std::to_string(budget.max_layers));
  if (budget.max_latency_ms) {
    if (!cost) throw ConfigError("latency bound set but no cost model given");
    r.latency_ms = cost->estimate_ms(a);
    if (*r.latency_ms > *budget.max_latency_ms)
      fail("latency " + std::to_string(*r.latency_ms) + " ms > " + std::to_string(*budget.max_latency_ms) + " ms");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Host wall-clock benchmark. Runs serially; do not call concurrently.

struct BenchConfig {
  int batch_size = 64;
  int warmup = 2;
  int runs = 30;
  int resolution = 0;
  Precision precision = Precision::f32;
  std::uint64_t seed = 0;
};

struct BenchResult {
  double median_ms = 0.0;
  std::vector<double> samples_ms;

  double coefficient_of_variation() const {
    if (samples_ms.size() < 2) return 0.0;
    double m = 0.0;
    for (double v : samples_ms) m += v;
    m /= static_cast<double>(samples_ms.size());
    double ss = 0.0;
    for (double v : samples_ms) ss += (v - m) * (v - m);
    return m > 0.0 ? std::sqrt(ss / static_cast<double>(samples_ms.size() - 1)) / m : 0.0;
  }
};

namespace detail {

template <typename T>
BenchResult bench_impl(const VanillaNet& net, const BenchConfig& cfg, int h) {
  Rng rng(cfg.seed);
  ScoringNetwork<T> model(net, rng);
  const Tensor<T> x = Tensor<T>::gaussian(
      {static_cast<std::size_t>(cfg.batch_size), static_cast<std::size_t>(net.input_channels),
       static_cast<std::size_t>(h), static_cast<std::size_t>(h)},
      rng);
  const ForwardOptions opt{Normalization::batch_norm, BnMode::standard, false};
  for (int i = 0; i < cfg.warmup; ++i) (void)model.forward(x, opt);
  BenchResult r;
  for (int i = 0; i < cfg.runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)model.forward(x, opt);
    r.samples_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::vector<double> s = r.samples_ms;
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  r.median_ms = n == 0 ? 0.0 : (n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]));
  return r;
}

}  // namespace detail

// Median wall-clock time of a forward pass (conv + BN + ReLU chain of the
// stripped network) over `runs` timed repetitions after `warmup` untimed ones.
inline BenchResult bench_latency(const VanillaNet& net, const BenchConfig& cfg) {
  if (cfg.batch_size < 1 || cfg.runs < 1 || cfg.warmup < 0) throw ConfigError("bench: bad batch/run counts");
  const int h = cfg.resolution > 0 ? cfg.resolution : 32;
  return cfg.precision == Precision::f32 ? detail::bench_impl<float>(net, cfg, h)
                                         : detail::bench_impl<double>(net, cfg, h);
}

inline BenchResult bench_latency(const Architecture& a, const BenchConfig& cfg) {
  BenchConfig c = cfg;
  if (c.resolution <= 0) c.resolution = a.input_resolution;
  return bench_latency(strip_for_scoring(a), c);
}

}  // namespace zennas
