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

// Block-level architecture description, search spaces, validation, the
// residual-free scoring form, random sampling and mutation.
//
// Block semantics (one "unit" is one duplication counted by `layers`):
//   Conv  layers x [conv k]                          optional 3x3/2 max-pool after
//   Res   layers x [conv k (in->bn), conv k (bn->out)]            + shortcut
//   Btn   layers x [conv 1 (in->bn), conv k (bn->bn), conv 1 (bn->out)] + shortcut
//   MB    layers x 2 MobileBlocks; each MobileBlock is
//         [conv 1 (a->bn*e), depthwise k, conv 1 (bn*e->b)]          + shortcut
//         where the first block of a pair maps in->bn and the second bn->out.
// Only the first unit of a block carries the stride. A shortcut projection
// (1x1 conv) exists when the unit changes stride or channel count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "zennas/errors.hpp"
#include "zennas/rng.hpp"

namespace zennas {

enum class BlockType { Conv, Res, Btn, MB };

inline std::string to_string(BlockType t) {
  switch (t) {
    case BlockType::Conv: return "Conv";
    case BlockType::Res: return "Res";
    case BlockType::Btn: return "Btn";
    case BlockType::MB: return "MB";
  }
  return "?";
}

inline std::optional<BlockType> block_type_from_string(const std::string& s) {
  if (s == "Conv") return BlockType::Conv;
  if (s == "Res") return BlockType::Res;
  if (s == "Btn") return BlockType::Btn;
  if (s == "MB") return BlockType::MB;
  return std::nullopt;
}

inline bool has_bottleneck(BlockType t) { return t != BlockType::Conv; }

struct BlockDescriptor {
  BlockType type = BlockType::Conv;
  int kernel = 3;
  int in_ch = 0;
  int out_ch = 0;
  int stride = 1;
  std::optional<int> bottleneck;  // Res / Btn / MB
  std::optional<int> expansion;   // MB only
  int layers = 1;
  bool se = false;    // squeeze-and-excitation present (counted, never scored)
  bool pool = false;  // Conv only: 3x3 stride-2 max-pool after the conv (ResNet stem)

  friend bool operator==(const BlockDescriptor&, const BlockDescriptor&) = default;
};

struct Architecture {
  std::string name;
  int input_resolution = 224;
  int num_classes = 0;  // >0 adds a GAP + fully connected classifier to the counters
  std::vector<BlockDescriptor> blocks;

  int input_channels() const { return blocks.empty() ? 3 : blocks.front().in_ch; }
  int output_channels() const { return blocks.empty() ? 3 : blocks.back().out_ch; }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// One convolution of the expanded network.
struct ConvSpec {
  int in = 0;
  int out = 0;
  int kernel = 1;
  int stride = 1;
  int groups = 1;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

// One duplication unit of a block.
struct UnitPlan {
  std::vector<ConvSpec> main;         // main path, in order
  std::optional<ConvSpec> shortcut;   // projection on the residual link
  std::optional<int> se_channels;     // SE applied on this many channels, after main[se_after]
  std::size_t se_after = 0;
  bool pool_after = false;            // 3x3/2 max-pool after the unit
  bool residual = false;
};

inline std::vector<UnitPlan> expand_block(const BlockDescriptor& b) {
  std::vector<UnitPlan> units;
  auto shortcut_for = [](int in, int out, int stride) -> std::optional<ConvSpec> {
    if (stride != 1 || in != out) return ConvSpec{in, out, 1, stride, 1};
    return std::nullopt;
  };
  const int bn = b.bottleneck.value_or(b.out_ch);
  for (int i = 0; i < b.layers; ++i) {
    const int in = i == 0 ? b.in_ch : b.out_ch;
    const int s = i == 0 ? b.stride : 1;
    switch (b.type) {
      case BlockType::Conv: {
        UnitPlan u;
        u.main.push_back({in, b.out_ch, b.kernel, s, 1});
        u.pool_after = b.pool && i == b.layers - 1;
        units.push_back(u);
        break;
      }
      case BlockType::Res: {
        UnitPlan u;
        u.residual = true;
        u.main.push_back({in, bn, b.kernel, s, 1});
        u.main.push_back({bn, b.out_ch, b.kernel, 1, 1});
        u.shortcut = shortcut_for(in, b.out_ch, s);
        if (b.se) { u.se_channels = b.out_ch; u.se_after = 1; }
        units.push_back(u);
        break;
      }
      case BlockType::Btn: {
        UnitPlan u;
        u.residual = true;
        u.main.push_back({in, bn, 1, 1, 1});
        u.main.push_back({bn, bn, b.kernel, s, 1});
        u.main.push_back({bn, b.out_ch, 1, 1, 1});
        u.shortcut = shortcut_for(in, b.out_ch, s);
        if (b.se) { u.se_channels = b.out_ch; u.se_after = 2; }
        units.push_back(u);
        break;
      }
      case BlockType::MB: {
        const int hidden = bn * b.expansion.value_or(1);
        const int ins[2] = {in, bn};
        const int outs[2] = {bn, b.out_ch};
        for (int j = 0; j < 2; ++j) {
          const int sj = j == 0 ? s : 1;
          UnitPlan u;
          u.residual = true;
          u.main.push_back({ins[j], hidden, 1, 1, 1});
          u.main.push_back({hidden, hidden, b.kernel, sj, hidden});
          u.main.push_back({hidden, outs[j], 1, 1, 1});
          u.shortcut = shortcut_for(ins[j], outs[j], sj);
          if (b.se) { u.se_channels = hidden; u.se_after = 1; }
          units.push_back(u);
        }
        break;
      }
    }
  }
  return units;
}

// Number of main-path convolutions in a block (the depth the layer cap counts).
inline int block_depth(const BlockDescriptor& b) {
  switch (b.type) {
    case BlockType::Conv: return b.layers;
    case BlockType::Res: return 2 * b.layers;
    case BlockType::Btn: return 3 * b.layers;
    case BlockType::MB: return 6 * b.layers;
  }
  return 0;
}

inline int conv_depth(const Architecture& a) {
  int d = 0;
  for (const auto& b : a.blocks) d += block_depth(b);
  return d;
}

// Residual-free chain used for scoring: every conv is followed by BN and
// ReLU when scored; SE modules and shortcuts are gone.
struct VanillaLayer {
  enum class Kind { conv, max_pool };
  Kind kind = Kind::conv;
  ConvSpec conv;

  friend bool operator==(const VanillaLayer&, const VanillaLayer&) = default;
};

struct VanillaNet {
  int input_channels = 3;
  std::vector<VanillaLayer> layers;

  int output_channels() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it)
      if (it->kind == VanillaLayer::Kind::conv) return it->conv.out;
    return input_channels;
  }
  std::size_t conv_count() const {
    return static_cast<std::size_t>(std::count_if(layers.begin(), layers.end(), [](const auto& l) {
      return l.kind == VanillaLayer::Kind::conv;
    }));
  }

  // Plain chain of k x k stride-1 convolutions with the given widths.
  static VanillaNet chain(int input_channels, const std::vector<int>& widths, int kernel = 3) {
    VanillaNet n{input_channels, {}};
    int c = input_channels;
    for (int w : widths) {
      n.layers.push_back({VanillaLayer::Kind::conv, ConvSpec{c, w, kernel, 1, 1}});
      c = w;
    }
    return n;
  }
};

inline VanillaNet strip_for_scoring(const Architecture& a) {
  VanillaNet net;
  net.input_channels = a.input_channels();
  for (const auto& b : a.blocks) {
    for (const auto& u : expand_block(b)) {
      for (const auto& c : u.main) net.layers.push_back({VanillaLayer::Kind::conv, c});
      if (u.pool_after) net.layers.push_back({VanillaLayer::Kind::max_pool, ConvSpec{0, 0, 3, 2, 1}});
    }
  }
  return net;
}

struct Violation {
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  void add(std::string field, std::string message) {
    violations.push_back({std::move(field), std::move(message)});
  }
  bool mentions(const std::string& needle) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) {
      return v.message.find(needle) != std::string::npos || v.field.find(needle) != std::string::npos;
    });
  }
  std::string summary() const {
    std::string s;
    for (const auto& v : violations) s += v.field + ": " + v.message + "\n";
    return s;
  }
};

inline bool contains(const std::vector<int>& set, int v) {
  return std::find(set.begin(), set.end(), v) != set.end();
}

inline std::string block_field(std::size_t i, const char* name) {
  return "blocks[" + std::to_string(i) + "]." + name;
}

// Space-independent invariants.
inline ValidationReport validate_structure(const Architecture& a) {
  ValidationReport r;
  if (a.input_resolution <= 0) r.add("input_resolution", "must be positive");
  long long stride_product = 1;
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    const auto& b = a.blocks[i];
    if (!contains({1, 3, 5, 7}, b.kernel)) r.add(block_field(i, "kernel"), "kernel must be one of {1,3,5,7}");
    if (b.type != BlockType::Conv && !contains({3, 5, 7}, b.kernel))
      r.add(block_field(i, "kernel"), "searchable blocks use kernel in {3,5,7}");
    if (b.in_ch <= 0) r.add(block_field(i, "in"), "must be positive");
    if (b.out_ch <= 0) r.add(block_field(i, "out"), "must be positive");
    if (b.stride != 1 && b.stride != 2) r.add(block_field(i, "stride"), "must be 1 or 2");
    if (b.layers < 1) r.add(block_field(i, "layers"), "must be >= 1");
    if (has_bottleneck(b.type)) {
      if (!b.bottleneck) r.add(block_field(i, "bottleneck"), to_string(b.type) + " block needs a bottleneck width");
      else if (*b.bottleneck <= 0) r.add(block_field(i, "bottleneck"), "must be positive");
    } else if (b.bottleneck) {
      r.add(block_field(i, "bottleneck"), "Conv blocks carry no bottleneck");
    }
    if (b.type == BlockType::MB) {
      if (!b.expansion) r.add(block_field(i, "expansion"), "MB block needs an expansion ratio");
      else if (!contains({1, 2, 4, 6}, *b.expansion))
        r.add(block_field(i, "expansion"), "expansion must be one of {1,2,4,6}");
    } else if (b.expansion) {
      r.add(block_field(i, "expansion"), "only MB blocks carry an expansion ratio");
    }
    if (b.pool && b.type != BlockType::Conv) r.add(block_field(i, "pool"), "only Conv blocks may pool");
    if (b.se && b.type == BlockType::Conv) r.add(block_field(i, "se"), "Conv blocks carry no SE module");
    if (i > 0 && b.in_ch != a.blocks[i - 1].out_ch)
      r.add(block_field(i, "in"), "channel chain broken: in=" + std::to_string(b.in_ch) +
                                      " but previous out=" + std::to_string(a.blocks[i - 1].out_ch));
    stride_product *= (b.stride == 2 ? 2 : 1) * (b.pool ? 2 : 1);
  }
  if (a.input_resolution > 0 && stride_product > a.input_resolution)
    r.add("blocks", "stride collapse: total stride " + std::to_string(stride_product) +
                        " exceeds input resolution " + std::to_string(a.input_resolution));
  return r;
}

struct SearchSpace {
  std::string space_id = "I";
  std::vector<BlockType> block_types{BlockType::Res, BlockType::Btn};
  std::vector<int> kernel_set{3, 5, 7};
  int min_width = 8;
  int max_width = 2048;
  std::vector<int> width_choices;  // when non-empty, widths snap to this set
  int min_depth = 1;               // per-block `layers` range
  int max_depth = 10;
  std::vector<int> expansion_set{1, 2, 4, 6};
  double mutation_factor_min = 0.5;
  double mutation_factor_max = 2.0;
  int width_quantum = 8;

  // Template used by random_arch.
  int input_resolution = 32;
  int input_channels = 3;
  int num_classes = 0;
  int stem_width = 32;
  int stem_stride = 1;
  int head_width = 512;
  std::vector<int> stage_strides{1, 2, 2};  // one mutable block per stage
  int init_max_width = 64;                  // upper bound of initial random widths
  int init_max_depth = 2;

  std::size_t stage_count() const { return stage_strides.size(); }

  bool allows(BlockType t) const {
    return std::find(block_types.begin(), block_types.end(), t) != block_types.end();
  }

  // Rounds a width to the space's grid.
  int quantize_width(double w) const {
    if (!width_choices.empty()) {
      int best = width_choices.front();
      for (int c : width_choices)
        if (std::abs(c - w) < std::abs(best - w)) best = c;
      return best;
    }
    const int q = std::max(1, width_quantum);
    int v = static_cast<int>(std::lround(w / q)) * q;
    return std::clamp(v, min_width, max_width);
  }

  // Next width below `w`: the largest smaller choice, or about 3/4 of it.
  int shrink_width(int w) const {
    if (!width_choices.empty()) {
      int best = *std::min_element(width_choices.begin(), width_choices.end());
      for (int c : width_choices)
        if (c < w) best = std::max(best, c);
      return best;
    }
    const int q = std::max(1, width_quantum);
    return std::clamp(std::min(quantize_width(w * 0.75), w - q), min_width, max_width);
  }

  int clamp_depth(double d) const {
    int v = static_cast<int>(std::lround(d));
    return std::clamp(std::max(v, 1), std::max(1, min_depth), std::max(1, max_depth));
  }

  bool width_ok(int w) const {
    if (!width_choices.empty()) return contains(width_choices, w);
    return w >= min_width && w <= max_width;
  }

  // Search Space I at CIFAR scale: residual and bottleneck blocks, 3 stages.
  static SearchSpace cifar_resnet() { return SearchSpace{}; }

  // Search Space I at ImageNet scale: 5 stages, stride-2 stem.
  static SearchSpace imagenet_resnet() {
    SearchSpace s;
    s.input_resolution = 224;
    s.num_classes = 1000;
    s.stem_stride = 2;
    s.stage_strides = {2, 2, 2, 1, 2};
    s.head_width = 2048;
    return s;
  }

  // Search Space II: MobileNet blocks with expansion in {1,2,4,6}.
  static SearchSpace mobile(bool imagenet = true) {
    SearchSpace s = imagenet ? imagenet_resnet() : cifar_resnet();
    s.space_id = "II";
    s.block_types = {BlockType::MB};
    return s;
  }
};

inline std::size_t leading_fixed(const Architecture& a) {
  return (a.blocks.size() > 1 && a.blocks.front().type == BlockType::Conv) ? 1 : 0;
}

inline std::size_t trailing_fixed(const Architecture& a) {
  return (a.blocks.size() > 2 && a.blocks.back().type == BlockType::Conv) ? 1 : 0;
}

// Positions the mutation operator may touch: everything but a Conv stem and
// a Conv head.
inline std::vector<std::size_t> mutable_positions(const Architecture& a) {
  std::vector<std::size_t> pos;
  const std::size_t lo = leading_fixed(a);
  const std::size_t hi = a.blocks.size() - trailing_fixed(a);
  for (std::size_t i = lo; i < hi; ++i) pos.push_back(i);
  return pos;
}

// Full validation: structure, the depth cap and the space's ranges on every
// mutable block. `max_depth` <= 0 disables the depth cap.
inline ValidationReport validate(const Architecture& a, const SearchSpace& space, int max_depth) {
  ValidationReport r = validate_structure(a);
  const int depth = conv_depth(a);
  if (max_depth > 0 && depth > max_depth)
    r.add("blocks", "depth " + std::to_string(depth) + " exceeds the layer cap " + std::to_string(max_depth));
  for (std::size_t i : mutable_positions(a)) {
    const auto& b = a.blocks[i];
    if (!space.allows(b.type)) r.add(block_field(i, "block"), to_string(b.type) + " not allowed in space " + space.space_id);
    if (!contains(space.kernel_set, b.kernel)) r.add(block_field(i, "kernel"), "kernel outside the space's kernel set");
    if (!space.width_ok(b.out_ch)) r.add(block_field(i, "out"), "width outside the space's range");
    if (b.bottleneck && !space.width_ok(*b.bottleneck))
      r.add(block_field(i, "bottleneck"), "bottleneck outside the space's range");
    if (b.layers < space.min_depth || b.layers > space.max_depth)
      r.add(block_field(i, "layers"), "layers outside the space's depth range");
    if (b.expansion && !contains(space.expansion_set, *b.expansion))
      r.add(block_field(i, "expansion"), "expansion outside the space's set");
  }
  return r;
}

namespace detail {

inline void repair_chain(Architecture& a, std::size_t pos) {
  if (pos + 1 < a.blocks.size()) a.blocks[pos + 1].in_ch = a.blocks[pos].out_ch;
}

template <typename V>
const V& pick(const std::vector<V>& v, Rng& rng) {
  return v[rng.index(v.size())];
}

}  // namespace detail

inline constexpr int kMutationAttempts = 100;

// Uniformly selects one mutable block and re-draws its type, kernel, widths,
// depth and expansion. Widths and depth are scaled by factors drawn uniformly
// from the space's mutation range. The successor's input width follows the
// new output width. Retries until the result validates in `space`.
inline Architecture mutate(const Architecture& arch, const SearchSpace& space, Rng& rng) {
  const auto positions = mutable_positions(arch);
  if (positions.empty()) throw MutationExhausted("architecture has no mutable block");
  if (space.block_types.empty() || space.kernel_set.empty())
    throw MutationExhausted("search space allows no block type or kernel");

  for (int attempt = 0; attempt < kMutationAttempts; ++attempt) {
    const std::size_t pos = detail::pick(positions, rng);
    const BlockDescriptor& old = arch.blocks[pos];
    BlockDescriptor nb = old;
    nb.type = detail::pick(space.block_types, rng);
    nb.kernel = detail::pick(space.kernel_set, rng);
    const double fw = rng.uniform(space.mutation_factor_min, space.mutation_factor_max);
    const double fb = rng.uniform(space.mutation_factor_min, space.mutation_factor_max);
    const double fd = rng.uniform(space.mutation_factor_min, space.mutation_factor_max);
    nb.out_ch = space.quantize_width(old.out_ch * fw);
    if (has_bottleneck(nb.type)) {
      nb.bottleneck = space.quantize_width(old.bottleneck.value_or(old.out_ch) * fb);
    } else {
      nb.bottleneck.reset();
    }
    nb.layers = space.clamp_depth(old.layers * fd);
    if (nb.type == BlockType::MB) {
      nb.expansion = space.expansion_set.empty() ? 1 : detail::pick(space.expansion_set, rng);
    } else {
      nb.expansion.reset();
    }
    if (nb.type == BlockType::Conv) nb.se = false;
    if (nb == old) continue;

    Architecture out = arch;
    out.blocks[pos] = nb;
    detail::repair_chain(out, pos);
    if (validate(out, space, 0).ok()) return out;
  }
  throw MutationExhausted("no valid mutation after " + std::to_string(kMutationAttempts) + " attempts");
}

inline constexpr int kMaxShrinks = 50;

// Random small architecture: fixed stem, one mutable block per stage, fixed
// head. Widths are shrunk by 0.75 until `fits` accepts the network.
inline Architecture random_arch(const SearchSpace& space, Rng& rng, int max_depth,
                                const std::function<bool(const Architecture&)>& fits = {}) {
  if (space.block_types.empty() || space.kernel_set.empty() || space.stage_strides.empty())
    throw SpaceInfeasible("search space is empty");

  auto draw_width = [&](int hi) {
    if (!space.width_choices.empty()) return detail::pick(space.width_choices, rng);
    const double lo = std::log(static_cast<double>(space.min_width));
    const double top = std::log(static_cast<double>(std::max(space.min_width, std::min(hi, space.max_width))));
    return space.quantize_width(std::exp(rng.uniform(lo, top)));
  };

  Architecture a;
  a.input_resolution = space.input_resolution;
  a.num_classes = space.num_classes;
  a.blocks.push_back({BlockType::Conv, 3, space.input_channels, space.stem_width, space.stem_stride,
                      std::nullopt, std::nullopt, 1, false, false});
  int prev = space.stem_width;
  for (int stride : space.stage_strides) {
    BlockDescriptor b;
    b.type = detail::pick(space.block_types, rng);
    b.kernel = detail::pick(space.kernel_set, rng);
    b.in_ch = prev;
    b.out_ch = draw_width(space.init_max_width);
    b.stride = stride;
    if (has_bottleneck(b.type)) b.bottleneck = draw_width(space.init_max_width);
    if (b.type == BlockType::MB) b.expansion = space.expansion_set.empty() ? 1 : detail::pick(space.expansion_set, rng);
    b.layers = static_cast<int>(rng.uniform_int(std::max(1, space.min_depth),
                                                std::max(std::max(1, space.min_depth),
                                                         std::min(space.init_max_depth, space.max_depth))));
    prev = b.out_ch;
    a.blocks.push_back(b);
  }
  a.blocks.push_back({BlockType::Conv, 1, prev, space.head_width, 1, std::nullopt, std::nullopt, 1, false, false});

  // Depth cap: trim the deepest mutable block until the cap holds.
  const auto positions = mutable_positions(a);
  while (max_depth > 0 && conv_depth(a) > max_depth) {
    auto it = std::max_element(positions.begin(), positions.end(), [&](std::size_t x, std::size_t y) {
      return a.blocks[x].layers < a.blocks[y].layers;
    });
    if (a.blocks[*it].layers <= std::max(1, space.min_depth))
      throw SpaceInfeasible("stem, head and one unit per stage already exceed the layer cap");
    --a.blocks[*it].layers;
  }

  for (int shrink = 0; shrink <= kMaxShrinks; ++shrink) {
    if (validate(a, space, max_depth).ok() && (!fits || fits(a))) return a;
    if (shrink == kMaxShrinks) break;
    // Widths first; once they bottom out, fewer layers and the smallest kernel.
    bool changed = false;
    for (std::size_t i : positions) {
      auto& b = a.blocks[i];
      const BlockDescriptor before = b;
      b.out_ch = space.shrink_width(b.out_ch);
      if (b.bottleneck) b.bottleneck = space.shrink_width(*b.bottleneck);
      changed = changed || !(b == before);
      detail::repair_chain(a, i);
    }
    if (!changed) {
      const int k_min = *std::min_element(space.kernel_set.begin(), space.kernel_set.end());
      for (std::size_t i : positions) {
        auto& b = a.blocks[i];
        if (b.layers > std::max(1, space.min_depth)) --b.layers;
        b.kernel = k_min;
      }
    }
  }
  throw SpaceInfeasible("no architecture satisfies the budget after " + std::to_string(kMaxShrinks) +
                        " width shrinks");
}

// Stable 64-bit FNV-1a hash of the block list (cache key).
inline std::uint64_t arch_hash(const Architecture& a) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](long long v) {
    for (int i = 0; i < 8; ++i) {
      h ^= static_cast<std::uint64_t>(v >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(a.input_resolution);
  mix(static_cast<long long>(a.blocks.size()));
  for (const auto& b : a.blocks) {
    mix(static_cast<int>(b.type));
    mix(b.kernel);
    mix(b.in_ch);
    mix(b.out_ch);
    mix(b.stride);
    mix(b.bottleneck.value_or(-1));
    mix(b.expansion.value_or(-1));
    mix(b.layers);
    mix(b.se);
    mix(b.pool);
  }
  return h;
}

}  // namespace zennas
