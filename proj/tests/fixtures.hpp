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

#include <vector>

#include "zennas/search.hpp"

namespace fixture {

using namespace zennas;

// Conv-only space with two mutable blocks: widths {8,16,32}, kernels {3,5},
// depth 1..2, i.e. 12 settings per block and 144 architectures.
inline SearchSpace micro_space() {
  SearchSpace s;
  s.space_id = "micro";
  s.block_types = {BlockType::Conv};
  s.kernel_set = {3, 5};
  s.width_choices = {8, 16, 32};
  s.min_width = 8;
  s.max_width = 32;
  s.min_depth = 1;
  s.max_depth = 2;
  s.input_resolution = 16;
  s.stem_width = 8;
  s.head_width = 16;
  s.stage_strides = {1, 2};
  s.init_max_depth = 2;
  return s;
}

inline SearchConfig micro_config(std::uint64_t search_seed, long iterations) {
  SearchConfig c;
  c.space = micro_space();
  c.proxy = Proxy::zen;
  c.score.batch_size = 8;
  c.score.repeats = 1;
  c.score.seed = 0;  // identical scoring seed for every candidate
  c.population_size = 16;
  c.iterations = iterations;
  c.seed = search_seed;
  c.init = InitMode::single;
  return c;
}

// Every architecture of the micro space, built directly from the attribute grid.
inline std::vector<Architecture> enumerate_micro(const SearchSpace& s) {
  std::vector<Architecture> out;
  for (int w1 : s.width_choices)
    for (int k1 : s.kernel_set)
      for (int d1 = s.min_depth; d1 <= s.max_depth; ++d1)
        for (int w2 : s.width_choices)
          for (int k2 : s.kernel_set)
            for (int d2 = s.min_depth; d2 <= s.max_depth; ++d2) {
              Architecture a;
              a.input_resolution = s.input_resolution;
              a.blocks = {{BlockType::Conv, 3, s.input_channels, s.stem_width, s.stem_stride, {}, {}, 1, false, false},
                          {BlockType::Conv, k1, s.stem_width, w1, s.stage_strides[0], {}, {}, d1, false, false},
                          {BlockType::Conv, k2, w1, w2, s.stage_strides[1], {}, {}, d2, false, false},
                          {BlockType::Conv, 1, w2, s.head_width, 1, {}, {}, 1, false, false}};
              out.push_back(a);
            }
  return out;
}

}  // namespace fixture
