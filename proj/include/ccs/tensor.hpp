// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "ccs/common.hpp"

namespace ccs {

/// Dense H x W x C array of doubles, row-major with channels innermost.
struct Tensor {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int h_, int w_, int c_, double fill = 0.0)
      : h(h_), w(w_), c(c_),
        data(static_cast<std::size_t>(h_) * w_ * c_, fill) {
    require(h_ >= 0 && w_ >= 0 && c_ >= 0, "tensor dims must be non-negative");
  }

  double& at(int y, int x, int ch) {
    return data[(static_cast<std::size_t>(y) * w + x) * c + ch];
  }
  double at(int y, int x, int ch) const {
    return data[(static_cast<std::size_t>(y) * w + x) * c + ch];
  }
  const double* row(int y, int x) const {
    return data.data() + (static_cast<std::size_t>(y) * w + x) * c;
  }
  double* row(int y, int x) {
    return data.data() + (static_cast<std::size_t>(y) * w + x) * c;
  }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const {
    return h == o.h && w == o.w && c == o.c;
  }
  bool all_finite() const;
};

enum class MaskType { None, A };

/// Convolution weights, stored (out, in, kh, kw); one bias per out channel.
struct ConvKernel {
  int out_ch = 0;
  int in_ch = 0;
  int kh = 0;
  int kw = 0;
  std::vector<double> w;  // out*in*kh*kw
  std::vector<double> b;  // out

  ConvKernel() = default;
  ConvKernel(int out, int in, int kh_, int kw_)
      : out_ch(out), in_ch(in), kh(kh_), kw(kw_),
        w(static_cast<std::size_t>(out) * in * kh_ * kw_, 0.0),
        b(static_cast<std::size_t>(out), 0.0) {
    require(out > 0 && in > 0 && kh_ > 0 && kw_ > 0,
            "kernel dims must be positive");
  }

  double& wat(int o, int i, int ky, int kx) {
    return w[((static_cast<std::size_t>(o) * in_ch + i) * kh + ky) * kw + kx];
  }
  double wat(int o, int i, int ky, int kx) const {
    return w[((static_cast<std::size_t>(o) * in_ch + i) * kh + ky) * kw + kx];
  }
  std::size_t param_count() const { return w.size() + b.size(); }
};

// Raster-type-A masking: taps at or after the kernel center are dropped.
inline bool mask_a_keeps(int ky, int kx, int kh, int kw) {
  return ky * kw + kx < (kh / 2) * kw + kw / 2;
}

/// Zero-padded "same" convolution: output spatial size = ceil(input / stride).
Tensor conv2d(const Tensor& x, const ConvKernel& k, int stride,
              MaskType mask = MaskType::None);

/// Rearranges (H, W, C*r^2) -> (r*H, r*W, C); out(r*i+di, r*j+dj, c) =
/// in(i, j, c*r^2 + di*r + dj).
Tensor pixel_shuffle(const Tensor& x, int r);

/// Exact inverse of pixel_shuffle.
Tensor pixel_unshuffle(const Tensor& x, int r);

Tensor leaky_relu(const Tensor& x, double slope);

/// Channel-wise concatenation; `a` occupies the lower channel indices.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Non-overlapping 2x2 mean pooling per channel; requires even H, W.
Tensor avg_downsample2(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& x);

}  // namespace ccs
