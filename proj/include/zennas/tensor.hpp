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

// Forward-only NCHW tensor kernel: convolution, the two batch-norm variants,
// ReLU, max pooling, global average pooling and the Frobenius norm.
//
// Every op is a pure function of its inputs. A tensor carries an
// `overflowed` flag: it is set when a non-finite value appears and every op
// copies it from its input to its output, so a single overflow anywhere
// upstream is visible at the end of a forward pass.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zennas/errors.hpp"
#include "zennas/rng.hpp"

namespace zennas {

enum class Precision { f32, f64 };

inline std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

struct Shape {
  std::size_t n = 0;  // batch
  std::size_t c = 0;  // channels
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) +
         "," + std::to_string(s.w) + ")";
}

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel())
      throw StructuralError("tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + to_string(shape_));
    refresh_overflow();
  }

  // Entries drawn i.i.d. from N(0, stddev^2).
  static Tensor gaussian(Shape shape, Rng& rng, double stddev = 1.0) {
    Tensor t(shape);
    for (auto& v : t.data_) v = static_cast<T>(stddev * rng.normal());
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }

  T* channel(std::size_t n, std::size_t c) { return data_.data() + (n * shape_.c + c) * shape_.plane(); }
  const T* channel(std::size_t n, std::size_t c) const {
    return data_.data() + (n * shape_.c + c) * shape_.plane();
  }
  T* sample(std::size_t n) { return channel(n, 0); }
  const T* sample(std::size_t n) const { return channel(n, 0); }

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  bool overflowed() const { return overflowed_; }
  void mark_overflowed() { overflowed_ = true; }

  // Sets the flag if any entry is non-finite. Never clears it.
  bool refresh_overflow() {
    if (!overflowed_)
      overflowed_ = std::any_of(data_.begin(), data_.end(), [](T v) { return !std::isfinite(v); });
    return overflowed_;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data().begin(),
                   [](T v) { return static_cast<U>(v); });
    out.refresh_overflow();
    if (overflowed_) out.mark_overflowed();
    return out;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
  bool overflowed_ = false;
};

// Convolution weights, laid out (C_out, C_in / groups, k, k).
template <typename T>
struct ConvKernel {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t groups = 1;
  std::vector<T> weights;

  std::size_t padding() const { return kernel / 2; }
  std::size_t fan_in() const { return in_channels / groups * kernel * kernel; }

  void check() const {
    if (kernel % 2 == 0) throw StructuralError("kernel size must be odd, got " + std::to_string(kernel));
    if (stride != 1 && stride != 2) throw StructuralError("stride must be 1 or 2");
    if (groups == 0 || in_channels % groups || out_channels % groups)
      throw StructuralError("channel counts not divisible by groups");
    if (weights.size() != out_channels * fan_in())
      throw StructuralError("kernel weight count does not match its shape");
  }

  // Weights i.i.d. N(0, 1).
  static ConvKernel gaussian(std::size_t c_out, std::size_t c_in, std::size_t k, std::size_t stride,
                             Rng& rng, std::size_t groups = 1) {
    ConvKernel kern{c_out, c_in, k, stride, groups, {}};
    kern.weights.resize(c_out * kern.fan_in());
    for (auto& v : kern.weights) v = static_cast<T>(rng.normal());
    kern.check();
    return kern;
  }
};

inline std::size_t conv_out_size(std::size_t in, std::size_t stride) { return (in + stride - 1) / stride; }

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Unfolds channels [c0, c0 + cin) of one sample into a (cin*k*k, Ho*Wo) matrix.
template <typename T>
void im2col(const T* x, std::size_t c0, std::size_t cin, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t oh0, std::size_t oh1, std::size_t wo, T* col) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t p = (oh1 - oh0) * wo;
  for (std::size_t c = 0; c < cin; ++c) {
    const T* plane = x + (c0 + c) * h * w;
    for (std::size_t kh = 0; kh < k; ++kh) {
      for (std::size_t kw = 0; kw < k; ++kw) {
        T* row = col + ((c * k + kh) * k + kw) * p;
        for (std::size_t oh = oh0; oh < oh1; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride + kh) - pad;
          T* dst = row + (oh - oh0) * wo;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = plane + ih * w;
          // Valid output columns satisfy 0 <= ow*stride + kw - pad < w.
          const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kw) - pad;
          const std::ptrdiff_t sd = static_cast<std::ptrdiff_t>(stride);
          const std::ptrdiff_t lo = off >= 0 ? 0 : (-off + sd - 1) / sd;
          const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(
              static_cast<std::ptrdiff_t>(wo), (static_cast<std::ptrdiff_t>(w) - off + sd - 1) / sd);
          std::fill(dst, dst + std::min<std::ptrdiff_t>(lo, static_cast<std::ptrdiff_t>(wo)), T(0));
          if (stride == 1) {
            if (hi > lo) std::copy(src + lo + off, src + hi + off, dst + lo);
          } else {
            for (std::ptrdiff_t ow = lo; ow < hi; ++ow) dst[ow] = src[ow * sd + off];
          }
          if (hi < static_cast<std::ptrdiff_t>(wo)) std::fill(dst + std::max(hi, lo), dst + wo, T(0));
        }
      }
    }
  }
}

}  // namespace detail

// 2-D convolution with zero same-padding (pad = k/2) and no bias.
//
// Cross-correlation semantics (no kernel flip):
//   out[n, o, i, j] = sum_{c, p, q} w[o, c, p, q] * x[n, c, i*s + p - k/2, j*s + q - k/2]
// Output spatial size is ceil(H / stride).
inline constexpr std::size_t kTileColumns = 512;

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvKernel<T>& kernel) {
  kernel.check();
  const Shape in = input.shape();
  if (in.c != kernel.in_channels)
    throw StructuralError("conv2d: input has " + std::to_string(in.c) + " channels, kernel expects " +
                          std::to_string(kernel.in_channels));
  if (in.h == 0 || in.w == 0) throw StructuralError("conv2d: empty spatial extent");

  const std::size_t k = kernel.kernel;
  const std::size_t s = kernel.stride;
  const Shape out_shape{in.n, kernel.out_channels, conv_out_size(in.h, s), conv_out_size(in.w, s)};
  Tensor<T> out(out_shape);

  const std::size_t groups = kernel.groups;
  const std::size_t cin_g = in.c / groups;
  const std::size_t cout_g = kernel.out_channels / groups;
  const std::size_t kdim = cin_g * k * k;
  const std::size_t p = out_shape.plane();
  const bool direct = (k == 1 && s == 1);

  // The column matrix is built a few output rows at a time so that it stays
  // cache resident.
  const std::size_t rows_per_tile = std::max<std::size_t>(1, kTileColumns / out_shape.w);
  std::vector<T> col(direct ? 0 : kdim * std::min(p, rows_per_tile * out_shape.w));
  using Stride = Eigen::OuterStride<>;
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t g = 0; g < groups; ++g) {
      Eigen::Map<const detail::RowMatrix<T>> w(kernel.weights.data() + g * cout_g * kdim, cout_g, kdim);
      if (direct) {
        Eigen::Map<const detail::RowMatrix<T>> cols(input.channel(n, g * cin_g), kdim, p);
        Eigen::Map<detail::RowMatrix<T>> y(out.channel(n, g * cout_g), cout_g, p);
        y.noalias() = w * cols;
        continue;
      }
      for (std::size_t r0 = 0; r0 < out_shape.h; r0 += rows_per_tile) {
        const std::size_t r1 = std::min(out_shape.h, r0 + rows_per_tile);
        const std::size_t pt = (r1 - r0) * out_shape.w;
        detail::im2col(input.sample(n), g * cin_g, cin_g, in.h, in.w, k, s, r0, r1, out_shape.w, col.data());
        Eigen::Map<const detail::RowMatrix<T>> cols(col.data(), kdim, pt);
        Eigen::Map<detail::RowMatrix<T>, 0, Stride> y(out.channel(n, g * cout_g) + r0 * out_shape.w, cout_g, pt,
                                                      Stride(static_cast<Eigen::Index>(p)));
        y.noalias() = w * cols;
      }
    }
  }
  if (input.overflowed()) out.mark_overflowed();
  out.refresh_overflow();
  return out;
}

enum class BnMode {
  standard,  // subtract the per-channel batch mean, divide by the batch std
  no_mean,   // divide by the root mean square; no mean subtraction
};

inline std::string to_string(BnMode m) { return m == BnMode::standard ? "standard" : "no_mean"; }

inline constexpr double kSigmaFloor = 1e-10;

struct BnStats {
  BnMode mode = BnMode::no_mean;
  std::vector<double> sigma;   // per-channel std statistic (after clamping)
  double mean_sigma_sq = 0.0;  // arithmetic mean of sigma^2 over channels
  std::size_t degenerate_channels = 0;

  bool degenerate() const { return degenerate_channels > 0; }
  double sigma_bar() const { return std::sqrt(mean_sigma_sq); }
};

template <typename T>
struct BnResult {
  Tensor<T> output;
  BnStats stats;
};

// Training-mode batch normalization without affine parameters, in place.
// The statistics are taken over (B, H, W) of each channel.
template <typename T>
BnStats bn_normalize_inplace(Tensor<T>& t, BnMode mode) {
  const Shape sh = t.shape();
  const std::size_t count = sh.n * sh.plane();
  if (count < 2) throw StructuralError("bn_forward: needs B*H*W >= 2");

  BnStats stats{mode, std::vector<double>(sh.c), 0.0, 0};
  const std::size_t plane = sh.plane();
  double sum_sq = 0.0;
  for (std::size_t c = 0; c < sh.c; ++c) {
    double mean = 0.0;
    if (mode == BnMode::standard) {
      for (std::size_t n = 0; n < sh.n; ++n) {
        const T* x = t.channel(n, c);
        for (std::size_t i = 0; i < plane; ++i) mean += x[i];
      }
      mean /= static_cast<double>(count);
    }
    double var = 0.0;
    for (std::size_t n = 0; n < sh.n; ++n) {
      const T* x = t.channel(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = static_cast<double>(x[i]) - mean;
        var += d * d;
      }
    }
    var /= static_cast<double>(count);
    double sigma = std::sqrt(var);
    if (!(sigma > kSigmaFloor) && std::isfinite(sigma)) {
      ++stats.degenerate_channels;
      sigma = kSigmaFloor;
    }
    stats.sigma[c] = sigma;
    sum_sq += sigma * sigma;
    const double inv = 1.0 / sigma;
    for (std::size_t n = 0; n < sh.n; ++n) {
      T* x = t.channel(n, c);
      for (std::size_t i = 0; i < plane; ++i) x[i] = static_cast<T>((x[i] - mean) * inv);
    }
  }
  stats.mean_sigma_sq = sh.c ? sum_sq / static_cast<double>(sh.c) : 0.0;
  t.refresh_overflow();
  return stats;
}

template <typename T>
BnResult<T> bn_forward(const Tensor<T>& input, BnMode mode) {
  BnResult<T> res{input, {}};
  res.stats = bn_normalize_inplace(res.output, mode);
  return res;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out = input;
  for (auto& v : out.data()) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
void relu_inplace(Tensor<T>& t) {
  for (auto& v : t.data()) v = v > T(0) ? v : T(0);
}

// Max pooling with window k, padding k/2; output ceil(H / stride).
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& input, std::size_t k = 3, std::size_t stride = 2) {
  const Shape in = input.shape();
  const Shape os{in.n, in.c, conv_out_size(in.h, stride), conv_out_size(in.w, stride)};
  Tensor<T> out(os);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t c = 0; c < in.c; ++c) {
      const T* x = input.channel(n, c);
      T* y = out.channel(n, c);
      for (std::size_t oh = 0; oh < os.h; ++oh) {
        for (std::size_t ow = 0; ow < os.w; ++ow) {
          T best = -std::numeric_limits<T>::infinity();
          for (std::size_t p = 0; p < k; ++p) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride + p) - pad;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(in.h)) continue;
            for (std::size_t q = 0; q < k; ++q) {
              const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride + q) - pad;
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(in.w)) continue;
              best = std::max(best, x[ih * in.w + iw]);
            }
          }
          y[oh * os.w + ow] = best;
        }
      }
    }
  }
  if (input.overflowed()) out.mark_overflowed();
  return out;
}

// Global average pooling to (B, C, 1, 1).
template <typename T>
Tensor<T> gap(const Tensor<T>& input) {
  const Shape in = input.shape();
  if (in.h == 0 || in.w == 0) throw StructuralError("gap: empty spatial extent");
  Tensor<T> out(Shape{in.n, in.c, 1, 1});
  const std::size_t plane = in.plane();
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t c = 0; c < in.c; ++c) {
      const T* x = input.channel(n, c);
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += x[i];
      out.at(n, c, 0, 0) = static_cast<T>(s / static_cast<double>(plane));
    }
  }
  if (input.overflowed()) out.mark_overflowed();
  return out;
}

// sqrt(sum of squares), accumulated in double. std::nullopt marks overflow.
template <typename T>
std::optional<double> frobenius_norm(std::span<const T> values) {
  double s = 0.0;
  for (T v : values) {
    if (!std::isfinite(v)) return std::nullopt;
    s += static_cast<double>(v) * static_cast<double>(v);
  }
  if (!std::isfinite(s)) return std::nullopt;
  return std::sqrt(s);
}

template <typename T>
std::optional<double> frobenius_norm(const Tensor<T>& t) {
  if (t.overflowed()) return std::nullopt;
  return frobenius_norm(t.data());
}

// x + alpha * e
template <typename T>
Tensor<T> axpy(const Tensor<T>& x, double alpha, const Tensor<T>& e) {
  if (!(x.shape() == e.shape())) throw StructuralError("axpy: shape mismatch");
  Tensor<T> out = x;
  auto o = out.data();
  auto d = e.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += static_cast<T>(alpha * d[i]);
  if (e.overflowed()) out.mark_overflowed();
  out.refresh_overflow();
  return out;
}

template <typename T>
void scale_inplace(Tensor<T>& t, double factor) {
  for (auto& v : t.data()) v = static_cast<T>(v * factor);
  t.refresh_overflow();
}

}  // namespace zennas
