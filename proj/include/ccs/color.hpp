// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ccs/common.hpp"

namespace ccs {

struct ImageRGB {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> data;  // interleaved R,G,B

  ImageRGB() = default;
  ImageRGB(int h_, int w_)
      : h(h_), w(w_), data(static_cast<std::size_t>(h_) * w_ * 3, 0) {}
  std::uint8_t& at(int y, int x, int ch) {
    return data[(static_cast<std::size_t>(y) * w + x) * 3 + ch];
  }
  std::uint8_t at(int y, int x, int ch) const {
    return data[(static_cast<std::size_t>(y) * w + x) * 3 + ch];
  }
};

struct Plane {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> data;

  Plane() = default;
  Plane(int h_, int w_, std::uint8_t fill = 0)
      : h(h_), w(w_), data(static_cast<std::size_t>(h_) * w_, fill) {}
  std::uint8_t& at(int y, int x) {
    return data[static_cast<std::size_t>(y) * w + x];
  }
  std::uint8_t at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * w + x];
  }
};

/// 4:2:0 image: full-resolution luma, half-resolution chroma planes.
struct ImageYUV420 {
  Plane y, u, v;

  int height() const { return y.h; }
  int width() const { return y.w; }
};

// BT.601 full-range conversion matrix, derived analytically from the luma
// weights so forward and inverse are exact mutual inverses in reals.
std::array<std::array<double, 3>, 3> rgb_to_yuv_matrix();
std::array<std::array<double, 3>, 3> yuv_to_rgb_matrix();

/// BT.601 full range; chroma planes are 2x2 means of the per-pixel chroma.
ImageYUV420 rgb_to_yuv420(const ImageRGB& img);

/// Nearest-neighbor chroma upsampling, inverse matrix, clamp to [0,255].
ImageRGB yuv420_to_rgb(const ImageYUV420& yuv);

// Binary PPM (P6, maxval 255).
ImageRGB read_ppm(const std::string& path);
void write_ppm(const std::string& path, const ImageRGB& img);

// Raw planar I420, 8-bit; dimensions supplied by the caller.
ImageYUV420 read_i420(const std::string& path, int width, int height);
void write_i420(const std::string& path, const ImageYUV420& img);

}  // namespace ccs
