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

// Forward-only architecture scores.
//
//   Zen(F)  = log D + sum_i log sigma_bar_i      BN net, D = E_b ||f(x_b) - f(x_b + a e_b)||
//   Phi(f)  = log D - log a                      BN-free net (or with BN for the rescaling study)
//   NASWOT  = log |det K|,  K_ab = N_A - Hamming(code_a, code_b)
//
// Each repeat r draws the weights, then x, then e from Rng(derive(seed, r)).
// The reported value is the mean over repeats and std_error the standard
// error of that mean.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/LU>

#include "zennas/arch.hpp"
#include "zennas/network.hpp"

namespace zennas {

enum class Proxy { zen, phi, naswot, flops, params, random };

inline std::string to_string(Proxy p) {
  switch (p) {
    case Proxy::zen: return "zen";
    case Proxy::phi: return "phi";
    case Proxy::naswot: return "naswot";
    case Proxy::flops: return "flops";
    case Proxy::params: return "params";
    case Proxy::random: return "random";
  }
  return "?";
}

inline std::optional<Proxy> proxy_from_string(const std::string& s) {
  for (Proxy p : {Proxy::zen, Proxy::phi, Proxy::naswot, Proxy::flops, Proxy::params, Proxy::random})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

struct ScoreConfig {
  double alpha = 0.01;
  int batch_size = 16;
  int repeats = 4;
  int resolution = 0;  // 0: the architecture's input resolution (32 for bare networks)
  BnMode bn_mode = BnMode::no_mean;
  Precision precision = Precision::f64;
  std::uint64_t seed = 0;
  bool phi_with_bn = false;   // Phi on the BN network (BN-rescaling study)
  bool phi_log_mode = true;   // f64 only: per-layer rescaling so deep BN-free nets stay finite
  bool linear = false;        // drop the ReLUs (oracle checks only)
};

struct ScoreResult {
  double value = 0.0;
  double std_error = 0.0;
  bool overflowed = false;
  double wall_time = 0.0;
  std::vector<double> per_layer_log_sigma;  // mean over repeats, one per conv (Zen only)
  std::vector<double> samples;              // per-repeat values
  double degenerate_rate = 0.0;             // fraction of BN channels clamped

  static ScoreResult overflow_marker() {
    ScoreResult r;
    r.value = std::numeric_limits<double>::infinity();
    r.overflowed = true;
    return r;
  }
};

namespace detail {

inline double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void summarize(ScoreResult& r) {
  const auto n = static_cast<double>(r.samples.size());
  if (r.samples.empty()) return;
  r.value = std::accumulate(r.samples.begin(), r.samples.end(), 0.0) / n;
  if (r.samples.size() < 2 || !std::isfinite(r.value)) {
    r.std_error = 0.0;
    return;
  }
  double ss = 0.0;
  for (double v : r.samples) ss += (v - r.value) * (v - r.value);
  r.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

inline int resolve_resolution(const ScoreConfig& cfg, int fallback) {
  const int h = cfg.resolution > 0 ? cfg.resolution : fallback;
  if (h <= 0) throw ConfigError("resolution must be positive");
  return h;
}

inline void check_config(const ScoreConfig& cfg) {
  if (!(cfg.alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.repeats < 1) throw ConfigError("repeats must be >= 1");
}

// Mean over samples of the per-sample Frobenius norm of a - b.
template <typename T>
std::optional<double> mean_sample_distance(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.overflowed() || b.overflowed()) return std::nullopt;
  const Shape s = a.shape();
  const std::size_t per = s.c * s.plane();
  double total = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* pa = a.sample(n);
    const T* pb = b.sample(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
      ss += d * d;
    }
    if (!std::isfinite(ss)) return std::nullopt;
    total += std::sqrt(ss);
  }
  return total / static_cast<double>(s.n);
}


template <typename T>
struct Inputs {
  Tensor<T> x;
  Tensor<T> perturbed;
};

template <typename T>
Inputs<T> draw_inputs(const VanillaNet& net, const ScoreConfig& cfg, int h, Rng& rng) {
  const Shape s{static_cast<std::size_t>(cfg.batch_size), static_cast<std::size_t>(net.input_channels),
                static_cast<std::size_t>(h), static_cast<std::size_t>(h)};
  Tensor<T> x = Tensor<T>::gaussian(s, rng);
  Tensor<T> e = Tensor<T>::gaussian(s, rng);
  Tensor<T> xp = axpy(x, cfg.alpha, e);
  return {std::move(x), std::move(xp)};
}

template <typename T>
ScoreResult zen_impl(const VanillaNet& net, const ScoreConfig& cfg, int h) {
  ScoreResult res;
  std::size_t degenerate = 0;
  std::size_t channels = 0;
  for (int r = 0; r < cfg.repeats; ++r) {
    Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(r)));
    ScoringNetwork<T> model(net, rng);
    auto in = draw_inputs<T>(net, cfg, h, rng);
    auto [clean, pert] = model.forward_pair(in.x, in.perturbed, {Normalization::batch_norm, cfg.bn_mode, false, !cfg.linear});
    const auto delta = mean_sample_distance(clean.out, pert.out);
    if (!delta) return ScoreResult::overflow_marker();
    if (!(*delta > 0.0)) throw DegenerateScore("Zen-Score: network output does not respond to the input");
    res.samples.push_back(std::log(*delta) + clean.sum_log_sigma_bar());
    if (res.per_layer_log_sigma.empty()) res.per_layer_log_sigma.assign(clean.bn.size(), 0.0);
    for (std::size_t i = 0; i < clean.bn.size(); ++i)
      res.per_layer_log_sigma[i] += 0.5 * std::log(clean.bn[i].mean_sigma_sq) / cfg.repeats;
    degenerate += clean.degenerate_channels();
    channels += clean.bn_channels();
  }
  res.degenerate_rate = channels ? static_cast<double>(degenerate) / static_cast<double>(channels) : 0.0;
  summarize(res);
  return res;
}

template <typename T>
ScoreResult phi_impl(const VanillaNet& net, const ScoreConfig& cfg, int h) {
  ScoreResult res;
  ForwardOptions opt;
  if (cfg.phi_with_bn) {
    opt.norm = Normalization::batch_norm;
    opt.bn_mode = cfg.bn_mode;
  } else if (std::is_same_v<T, double> && cfg.phi_log_mode) {
    opt.norm = Normalization::rescale;
  } else {
    opt.norm = Normalization::none;
  }
  opt.relu = !cfg.linear;
  for (int r = 0; r < cfg.repeats; ++r) {
    Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(r)));
    ScoringNetwork<T> model(net, rng);
    auto in = draw_inputs<T>(net, cfg, h, rng);
    auto [clean, pert] = model.forward_pair(in.x, in.perturbed, opt);
    const auto delta = mean_sample_distance(clean.out, pert.out);
    if (!delta) return ScoreResult::overflow_marker();
    if (!(*delta > 0.0)) throw DegenerateScore("Phi-score: network output does not respond to the input");
    res.samples.push_back(std::log(*delta) + clean.log_scale - std::log(cfg.alpha));
  }
  summarize(res);
  return res;
}

// log|det K| by LU with partial pivoting; nullopt when K is singular.
inline std::optional<double> log_abs_det(const Eigen::MatrixXd& k) {
  if (k.rows() == 0) return 0.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(k);
  const Eigen::MatrixXd& m = lu.matrixLU();
  const double scale = k.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) return std::nullopt;
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double u = std::abs(m(i, i));
    if (!(u > 1e-12 * scale)) return std::nullopt;
    s += std::log(u);
  }
  if (s < std::log(1e-300)) return std::nullopt;
  return s;
}

}  // namespace detail

// log|det K| for one batch, K_ab = N_A - Hamming(code_a, code_b) over every
// ReLU of the network. nullopt when K is singular.
template <typename T>
std::optional<double> naswot_log_det(const ScoringNetwork<T>& model, const Tensor<T>& x, BnMode mode) {
  const Pass<T> p = model.forward(x, {Normalization::batch_norm, mode, true, true});
  const auto b = static_cast<Eigen::Index>(x.shape().n);
  Eigen::MatrixXd k(b, b);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < b; ++j)
      k(i, j) = static_cast<double>(p.relu_units) - static_cast<double>(p.hamming[static_cast<std::size_t>(i * b + j)]);
  return detail::log_abs_det(k);
}

namespace detail {

template <typename T>
ScoreResult naswot_impl(const VanillaNet& net, const ScoreConfig& cfg, int h) {
  if (cfg.batch_size < 2) throw ConfigError("NASWOT needs a batch of at least 2 samples");
  ScoreResult res;
  for (int r = 0; r < cfg.repeats; ++r) {
    Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(r)));
    ScoringNetwork<T> model(net, rng);
    auto in = draw_inputs<T>(net, cfg, h, rng);
    const auto ld = naswot_log_det(model, in.x, cfg.bn_mode);
    res.samples.push_back(ld ? *ld : -std::numeric_limits<double>::infinity());
  }
  summarize(res);
  return res;
}

template <typename Fn>
ScoreResult timed(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  ScoreResult r = fn();
  r.wall_time = elapsed_since(t0);
  return r;
}

}  // namespace detail

inline ScoreResult zen_score(const VanillaNet& net, const ScoreConfig& cfg) {
  detail::check_config(cfg);
  const int h = detail::resolve_resolution(cfg, 32);
  return detail::timed([&] {
    return cfg.precision == Precision::f32 ? detail::zen_impl<float>(net, cfg, h)
                                           : detail::zen_impl<double>(net, cfg, h);
  });
}

inline ScoreResult phi_score(const VanillaNet& net, const ScoreConfig& cfg) {
  detail::check_config(cfg);
  const int h = detail::resolve_resolution(cfg, 32);
  return detail::timed([&] {
    return cfg.precision == Precision::f32 ? detail::phi_impl<float>(net, cfg, h)
                                           : detail::phi_impl<double>(net, cfg, h);
  });
}

inline ScoreResult naswot_score(const VanillaNet& net, const ScoreConfig& cfg) {
  detail::check_config(cfg);
  const int h = detail::resolve_resolution(cfg, 32);
  return detail::timed([&] {
    return cfg.precision == Precision::f32 ? detail::naswot_impl<float>(net, cfg, h)
                                           : detail::naswot_impl<double>(net, cfg, h);
  });
}

inline ScoreResult zen_score(const Architecture& a, const ScoreConfig& cfg) {
  ScoreConfig c = cfg;
  if (c.resolution <= 0) c.resolution = a.input_resolution;
  return zen_score(strip_for_scoring(a), c);
}

inline ScoreResult phi_score(const Architecture& a, const ScoreConfig& cfg) {
  ScoreConfig c = cfg;
  if (c.resolution <= 0) c.resolution = a.input_resolution;
  return phi_score(strip_for_scoring(a), c);
}

inline ScoreResult naswot_score(const Architecture& a, const ScoreConfig& cfg) {
  ScoreConfig c = cfg;
  if (c.resolution <= 0) c.resolution = a.input_resolution;
  return naswot_score(strip_for_scoring(a), c);
}

struct Theorem1Result {
  double ratio = 1.0;
  std::vector<double> log_numerators;    // log (prod sigma_bar^2) ||x_L||^2, per repeat
  std::vector<double> log_denominators;  // log ||x_bar_L||^2, per repeat

  // Per-repeat paired ratios.
  std::vector<double> paired() const {
    std::vector<double> v;
    for (std::size_t i = 0; i < log_numerators.size(); ++i) v.push_back(std::exp(log_numerators[i] - log_denominators[i]));
    return v;
  }
};

namespace detail {

inline double log_mean_exp(const std::vector<double>& v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s / static_cast<double>(v.size()));
}

template <typename T>
double log_sq_norm(const Tensor<T>& t) {
  double s = 0.0;
  for (T v : t.data()) s += static_cast<double>(v) * static_cast<double>(v);
  return std::log(s);
}

}  // namespace detail

// (prod_t sigma_bar_t^2) E||x_L||^2 / E||x_bar_L||^2 where x_L is the output of
// the BN network (mode no_mean) and x_bar_L that of the BN-free network with
// the same weights and input. Both expectations run over `repeats` draws.
// The BN-free side is evaluated in rescale mode, so it cannot overflow.
inline Theorem1Result theorem1_ratio(const VanillaNet& net, const ScoreConfig& cfg) {
  detail::check_config(cfg);
  const int h = detail::resolve_resolution(cfg, 32);
  Theorem1Result res;
  for (int r = 0; r < cfg.repeats; ++r) {
    Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(r)));
    ScoringNetwork<double> model(net, rng);
    const Shape s{static_cast<std::size_t>(cfg.batch_size), static_cast<std::size_t>(net.input_channels),
                  static_cast<std::size_t>(h), static_cast<std::size_t>(h)};
    const Tensor<double> x = Tensor<double>::gaussian(s, rng);
    const Pass<double> bn = model.forward(x, {Normalization::batch_norm, BnMode::no_mean, false});
    const Pass<double> plain = model.forward(x, {Normalization::rescale, BnMode::no_mean, false});
    res.log_numerators.push_back(2.0 * bn.sum_log_sigma_bar() + detail::log_sq_norm(bn.out));
    res.log_denominators.push_back(detail::log_sq_norm(plain.out) + 2.0 * plain.log_scale);
  }
  res.ratio = std::exp(detail::log_mean_exp(res.log_numerators) - detail::log_mean_exp(res.log_denominators));
  return res;
}

enum class Fig2Family { P, Q };

struct Fig2Row {
  int x = 0;  // depth (P) or bottleneck width (Q)
  ScoreResult phi;
  ScoreResult zen;
};

// P: `x` stacked 3x3 convs of width 64. Q: two 3x3 convs 3 -> x -> 32.
inline VanillaNet fig2_network(Fig2Family kind, int x, int input_channels = 3) {
  if (kind == Fig2Family::P) return VanillaNet::chain(input_channels, std::vector<int>(static_cast<std::size_t>(x), 64));
  return VanillaNet::chain(input_channels, {x, 32});
}

// Phi (with or without BN, as requested) and Zen for every point of the sweep.
inline std::vector<Fig2Row> fig2_families(Fig2Family kind, bool with_bn, const std::vector<int>& sweep,
                                          const ScoreConfig& cfg) {
  std::vector<Fig2Row> rows;
  ScoreConfig pc = cfg;
  pc.phi_with_bn = with_bn;
  for (int x : sweep) {
    const VanillaNet net = fig2_network(kind, x);
    Fig2Row row;
    row.x = x;
    row.phi = phi_score(net, pc);
    row.zen = zen_score(net, cfg);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace zennas
