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

// Randomly initialized residual-free network used by every proxy.
//
// Weights are drawn N(0,1) in layer order from the caller's Rng. A forward
// pass runs two inputs side by side so that the clean and the perturbed
// batch see the same weights and, in `rescale` mode, the same per-layer
// scale factors.

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "zennas/arch.hpp"
#include "zennas/tensor.hpp"

namespace zennas {

enum class Normalization {
  batch_norm,  // BN after every conv, statistics from each input's own batch
  none,        // literal conv + ReLU chain; may overflow
  rescale,     // conv + ReLU, each layer divided by a scalar taken from the
               // first input's output; the log of the scalars is tracked
};

struct ForwardOptions {
  Normalization norm = Normalization::batch_norm;
  BnMode bn_mode = BnMode::no_mean;
  bool hamming = false;  // accumulate pairwise Hamming distances of ReLU codes (first input)
  bool relu = true;      // false gives a linear network (test oracles only)
};

template <typename T>
struct Pass {
  Tensor<T> out;
  std::vector<BnStats> bn;      // one entry per conv, batch_norm only
  double log_scale = 0.0;       // rescale only: out = true output / exp(log_scale)
  std::vector<std::uint64_t> hamming;  // B x B, row-major
  std::size_t relu_units = 0;   // ReLU units per sample

  // Sum over layers of log(sigma_bar).
  double sum_log_sigma_bar() const {
    double s = 0.0;
    for (const auto& st : bn) s += 0.5 * std::log(st.mean_sigma_sq);
    return s;
  }
  std::size_t degenerate_channels() const {
    std::size_t d = 0;
    for (const auto& st : bn) d += st.degenerate_channels;
    return d;
  }
  std::size_t bn_channels() const {
    std::size_t c = 0;
    for (const auto& st : bn) c += st.sigma.size();
    return c;
  }
};

namespace detail {

template <typename T>
void accumulate_hamming(const Tensor<T>& pre, std::vector<std::uint64_t>& ham) {
  const Shape s = pre.shape();
  const std::size_t per = s.c * s.plane();
  const std::size_t words = (per + 63) / 64;
  std::vector<std::uint64_t> bits(s.n * words, 0);
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* x = pre.sample(n);
    std::uint64_t* b = bits.data() + n * words;
    for (std::size_t i = 0; i < per; ++i)
      if (x[i] > T(0)) b[i >> 6] |= std::uint64_t{1} << (i & 63);
  }
  for (std::size_t a = 0; a < s.n; ++a) {
    for (std::size_t b = a + 1; b < s.n; ++b) {
      std::uint64_t d = 0;
      const std::uint64_t* pa = bits.data() + a * words;
      const std::uint64_t* pb = bits.data() + b * words;
      for (std::size_t w = 0; w < words; ++w) d += static_cast<std::uint64_t>(std::popcount(pa[w] ^ pb[w]));
      ham[a * s.n + b] += d;
      ham[b * s.n + a] += d;
    }
  }
}

template <typename T>
double mean_square(const Tensor<T>& t) {
  double s = 0.0;
  for (T v : t.data()) s += static_cast<double>(v) * static_cast<double>(v);
  return t.size() ? s / static_cast<double>(t.size()) : 0.0;
}

}  // namespace detail

template <typename T>
class ScoringNetwork {
 public:
  ScoringNetwork(const VanillaNet& net, Rng& rng) : net_(net) {
    for (const auto& l : net_.layers) {
      if (l.kind != VanillaLayer::Kind::conv) continue;
      const auto& c = l.conv;
      kernels_.push_back(ConvKernel<T>::gaussian(static_cast<std::size_t>(c.out), static_cast<std::size_t>(c.in),
                                                 static_cast<std::size_t>(c.kernel),
                                                 static_cast<std::size_t>(c.stride), rng,
                                                 static_cast<std::size_t>(c.groups)));
    }
  }

  const VanillaNet& net() const { return net_; }
  const std::vector<ConvKernel<T>>& kernels() const { return kernels_; }

  Pass<T> forward(const Tensor<T>& x, const ForwardOptions& opt) const {
    return run(x, nullptr, opt).first;
  }

  std::pair<Pass<T>, Pass<T>> forward_pair(const Tensor<T>& x, const Tensor<T>& x2, const ForwardOptions& opt) const {
    auto r = run(x, &x2, opt);
    return {std::move(r.first), std::move(*r.second)};
  }

 private:
  std::pair<Pass<T>, std::optional<Pass<T>>> run(const Tensor<T>& x, const Tensor<T>* x2,
                                                  const ForwardOptions& opt) const {
    if (x.shape().c != static_cast<std::size_t>(net_.input_channels))
      throw StructuralError("input has " + std::to_string(x.shape().c) + " channels, network expects " +
                            std::to_string(net_.input_channels));
    Pass<T> a;
    std::optional<Pass<T>> b;
    a.out = x;
    if (x2) {
      b.emplace();
      b->out = *x2;
    }
    if (opt.hamming) a.hamming.assign(x.shape().n * x.shape().n, 0);

    std::size_t ki = 0;
    for (const auto& l : net_.layers) {
      if (l.kind == VanillaLayer::Kind::max_pool) {
        a.out = max_pool2d(a.out, 3, 2);
        if (b) b->out = max_pool2d(b->out, 3, 2);
        continue;
      }
      const auto& kern = kernels_[ki++];
      a.out = conv2d(a.out, kern);
      if (b) b->out = conv2d(b->out, kern);
      switch (opt.norm) {
        case Normalization::batch_norm:
          a.bn.push_back(bn_normalize_inplace(a.out, opt.bn_mode));
          if (b) b->bn.push_back(bn_normalize_inplace(b->out, opt.bn_mode));
          break;
        case Normalization::rescale: {
          const double ms = detail::mean_square(a.out);
          if (ms > 0.0 && std::isfinite(ms)) {
            const double c = std::sqrt(ms);
            scale_inplace(a.out, 1.0 / c);
            if (b) scale_inplace(b->out, 1.0 / c);
            a.log_scale += std::log(c);
          }
          if (b) b->log_scale = a.log_scale;
          break;
        }
        case Normalization::none:
          break;
      }
      if (opt.hamming) detail::accumulate_hamming(a.out, a.hamming);
      a.relu_units += a.out.shape().c * a.out.shape().plane();
      if (opt.relu) {
        relu_inplace(a.out);
        if (b) relu_inplace(b->out);
      }
    }
    if (b) b->relu_units = a.relu_units;
    return {std::move(a), std::move(b)};
  }

  VanillaNet net_;
  std::vector<ConvKernel<T>> kernels_;
};

}  // namespace zennas
