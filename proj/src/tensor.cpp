// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#include "ccs/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace ccs {

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

Tensor conv2d(const Tensor& x, const ConvKernel& k, int stride,
              MaskType mask) {
  require(x.c == k.in_ch, "conv2d: input channels do not match kernel");
  require(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2");
  require(x.h > 0 && x.w > 0, "conv2d: empty input");

  const int oh = ceil_div(x.h, stride);
  const int ow = ceil_div(x.w, stride);
  const int pad_h = std::max((oh - 1) * stride + k.kh - x.h, 0);
  const int pad_w = std::max((ow - 1) * stride + k.kw - x.w, 0);
  const int pad_top = pad_h / 2;
  const int pad_left = pad_w / 2;

  // Repack weights as (ky, kx, in, out) so the innermost accumulation
  // runs over contiguous output channels.
  const int co = k.out_ch;
  const int ci = k.in_ch;
  std::vector<double> wk(static_cast<std::size_t>(k.kh) * k.kw * ci * co, 0.0);
  for (int ky = 0; ky < k.kh; ++ky) {
    for (int kx = 0; kx < k.kw; ++kx) {
      if (mask == MaskType::A && !mask_a_keeps(ky, kx, k.kh, k.kw)) continue;
      for (int i = 0; i < ci; ++i) {
        double* dst =
            &wk[((static_cast<std::size_t>(ky) * k.kw + kx) * ci + i) * co];
        for (int o = 0; o < co; ++o) dst[o] = k.wat(o, i, ky, kx);
      }
    }
  }

  Tensor out(oh, ow, co);
  std::vector<double> acc(static_cast<std::size_t>(co));
  for (int oy = 0; oy < oh; ++oy) {
    const int iy0 = oy * stride - pad_top;
    for (int ox = 0; ox < ow; ++ox) {
      const int ix0 = ox * stride - pad_left;
      std::copy(k.b.begin(), k.b.end(), acc.begin());
      const int ky_lo = std::max(0, -iy0);
      const int ky_hi = std::min(k.kh, x.h - iy0);
      const int kx_lo = std::max(0, -ix0);
      const int kx_hi = std::min(k.kw, x.w - ix0);
      for (int ky = ky_lo; ky < ky_hi; ++ky) {
        for (int kx = kx_lo; kx < kx_hi; ++kx) {
          const double* xr = x.row(iy0 + ky, ix0 + kx);
          const double* wr =
              &wk[(static_cast<std::size_t>(ky) * k.kw + kx) * ci * co];
          for (int i = 0; i < ci; ++i) {
            const double xv = xr[i];
            const double* wrow = wr + static_cast<std::size_t>(i) * co;
            for (int o = 0; o < co; ++o) acc[o] += xv * wrow[o];
          }
        }
      }
      std::copy(acc.begin(), acc.end(), out.row(oy, ox));
    }
  }
  return out;
}

Tensor pixel_shuffle(const Tensor& x, int r) {
  require(r > 0, "pixel_shuffle: factor must be positive");
  require(x.c % (r * r) == 0, "pixel_shuffle: channels not divisible by r^2");
  const int oc = x.c / (r * r);
  Tensor out(x.h * r, x.w * r, oc);
  for (int i = 0; i < x.h; ++i) {
    for (int j = 0; j < x.w; ++j) {
      const double* src = x.row(i, j);
      for (int di = 0; di < r; ++di) {
        for (int dj = 0; dj < r; ++dj) {
          double* dst = out.row(i * r + di, j * r + dj);
          for (int ch = 0; ch < oc; ++ch) dst[ch] = src[ch * r * r + di * r + dj];
        }
      }
    }
  }
  return out;
}

Tensor pixel_unshuffle(const Tensor& x, int r) {
  require(r > 0, "pixel_unshuffle: factor must be positive");
  require(x.h % r == 0 && x.w % r == 0,
          "pixel_unshuffle: spatial size not divisible by r");
  Tensor out(x.h / r, x.w / r, x.c * r * r);
  for (int i = 0; i < out.h; ++i) {
    for (int j = 0; j < out.w; ++j) {
      double* dst = out.row(i, j);
      for (int di = 0; di < r; ++di) {
        for (int dj = 0; dj < r; ++dj) {
          const double* src = x.row(i * r + di, j * r + dj);
          for (int ch = 0; ch < x.c; ++ch) dst[ch * r * r + di * r + dj] = src[ch];
        }
      }
    }
  }
  return out;
}

Tensor leaky_relu(const Tensor& x, double slope) {
  require(slope > 0.0 && slope < 1.0, "leaky_relu: slope must be in (0,1)");
  Tensor out = x;
  for (double& v : out.data) {
    if (v < 0.0) v *= slope;
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (b.c == 0) return a;
  if (a.c == 0) return b;
  require(a.h == b.h && a.w == b.w, "concat_channels: spatial mismatch");
  Tensor out(a.h, a.w, a.c + b.c);
  for (int i = 0; i < a.h; ++i) {
    for (int j = 0; j < a.w; ++j) {
      double* dst = out.row(i, j);
      const double* pa = a.row(i, j);
      const double* pb = b.row(i, j);
      std::copy(pa, pa + a.c, dst);
      std::copy(pb, pb + b.c, dst + a.c);
    }
  }
  return out;
}

Tensor avg_downsample2(const Tensor& x) {
  require(x.h % 2 == 0 && x.w % 2 == 0, "avg_downsample2: odd dimensions");
  Tensor out(x.h / 2, x.w / 2, x.c);
  for (int i = 0; i < out.h; ++i) {
    for (int j = 0; j < out.w; ++j) {
      double* dst = out.row(i, j);
      const double* p00 = x.row(2 * i, 2 * j);
      const double* p01 = x.row(2 * i, 2 * j + 1);
      const double* p10 = x.row(2 * i + 1, 2 * j);
      const double* p11 = x.row(2 * i + 1, 2 * j + 1);
      for (int ch = 0; ch < x.c; ++ch) {
        dst[ch] = 0.25 * (p00[ch] + p01[ch] + p10[ch] + p11[ch]);
      }
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "add: shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "mul: shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

}  // namespace ccs
