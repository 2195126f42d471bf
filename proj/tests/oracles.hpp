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

// Independent reference implementations used by the tests. They share no
// code with the library beyond the plain data types.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "zennas/network.hpp"
#include "zennas/tensor.hpp"

namespace oracle {

using zennas::Shape;
using zennas::Tensor;

// Six nested loops, zero padding k/2, output ceil(H/s).
inline Tensor<double> conv(const Tensor<double>& x, const zennas::ConvKernel<double>& w) {
  const Shape in = x.shape();
  const std::size_t k = w.kernel, s = w.stride, g = w.groups;
  const std::size_t cin_g = in.c / g, cout_g = w.out_channels / g;
  const long pad = static_cast<long>(k / 2);
  const Shape os{in.n, w.out_channels, (in.h + s - 1) / s, (in.w + s - 1) / s};
  Tensor<double> out(os);
  for (std::size_t n = 0; n < in.n; ++n)
    for (std::size_t o = 0; o < os.c; ++o)
      for (std::size_t i = 0; i < os.h; ++i)
        for (std::size_t j = 0; j < os.w; ++j) {
          double acc = 0.0;
          const std::size_t grp = o / cout_g;
          for (std::size_t c = 0; c < cin_g; ++c)
            for (std::size_t p = 0; p < k; ++p)
              for (std::size_t q = 0; q < k; ++q) {
                const long ih = static_cast<long>(i * s + p) - pad;
                const long iw = static_cast<long>(j * s + q) - pad;
                if (ih < 0 || iw < 0 || ih >= static_cast<long>(in.h) || iw >= static_cast<long>(in.w)) continue;
                acc += w.weights[((o * cin_g + c) * k + p) * k + q] *
                       x.at(n, grp * cin_g + c, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw));
              }
          out.at(n, o, i, j) = acc;
        }
  return out;
}

// Divides each channel by its root mean square over (B, H, W).
inline Tensor<double> bn_no_mean(const Tensor<double>& x, double* mean_sigma_sq = nullptr) {
  const Shape s = x.shape();
  Tensor<double> out(s);
  double acc = 0.0;
  for (std::size_t c = 0; c < s.c; ++c) {
    double ss = 0.0;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.h; ++i)
        for (std::size_t j = 0; j < s.w; ++j) ss += x.at(n, c, i, j) * x.at(n, c, i, j);
    const double var = ss / static_cast<double>(s.n * s.h * s.w);
    acc += var;
    const double sd = std::sqrt(var);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < s.h; ++i)
        for (std::size_t j = 0; j < s.w; ++j) out.at(n, c, i, j) = x.at(n, c, i, j) / sd;
  }
  if (mean_sigma_sq) *mean_sigma_sq = acc / static_cast<double>(s.c);
  return out;
}

// conv -> [BN] -> [ReLU] chain with the given kernels.
inline Tensor<double> forward(const std::vector<zennas::ConvKernel<double>>& ks, Tensor<double> x, bool bn,
                              bool relu = true) {
  for (const auto& k : ks) {
    x = conv(x, k);
    if (bn) x = bn_no_mean(x);
    if (relu)
      for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = std::max(0.0, x.data()[i]);
  }
  return x;
}

// Column-major dense Jacobian of f at x by central differences.
inline std::vector<std::vector<double>> jacobian(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                                                 const Tensor<double>& x, double h = 1e-6) {
  std::vector<std::vector<double>> cols;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor<double> xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    const Tensor<double> fp = f(xp), fm = f(xm);
    std::vector<double> col(fp.size());
    for (std::size_t r = 0; r < fp.size(); ++r) col[r] = (fp.data()[r] - fm.data()[r]) / (2 * h);
    cols.push_back(std::move(col));
  }
  return cols;
}

// J * v, J given column-wise.
inline std::vector<double> apply(const std::vector<std::vector<double>>& cols, const Tensor<double>& v) {
  std::vector<double> out(cols.empty() ? 0 : cols[0].size(), 0.0);
  for (std::size_t i = 0; i < cols.size(); ++i)
    for (std::size_t r = 0; r < out.size(); ++r) out[r] += cols[i][r] * v.data()[i];
  return out;
}

// Laplace expansion along the first row.
inline double cofactor_det(const std::vector<std::vector<double>>& m) {
  const std::size_t n = m.size();
  if (n == 1) return m[0][0];
  double det = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::vector<double>> minor;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<double> row;
      for (std::size_t c = 0; c < n; ++c)
        if (c != j) row.push_back(m[r][c]);
      minor.push_back(row);
    }
    det += (j % 2 ? -1.0 : 1.0) * m[0][j] * cofactor_det(minor);
  }
  return det;
}

}  // namespace oracle
