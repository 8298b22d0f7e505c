// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#include "ccs/color.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ccs {

namespace {

constexpr double kKr = 0.299;
constexpr double kKg = 0.587;
constexpr double kKb = 0.114;

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
}

}  // namespace

std::array<std::array<double, 3>, 3> rgb_to_yuv_matrix() {
  // U = (B - Y) / (2 (1 - Kb)), V = (R - Y) / (2 (1 - Kr)), scaled to full
  // range with the +128 offset applied outside the matrix.
  const double su = 0.5 / (1.0 - kKb);
  const double sv = 0.5 / (1.0 - kKr);
  return {{{kKr, kKg, kKb},
           {-kKr * su, -kKg * su, (1.0 - kKb) * su},
           {(1.0 - kKr) * sv, -kKg * sv, -kKb * sv}}};
}

std::array<std::array<double, 3>, 3> yuv_to_rgb_matrix() {
  const double du = 2.0 * (1.0 - kKb);
  const double dv = 2.0 * (1.0 - kKr);
  return {{{1.0, 0.0, dv},
           {1.0, -kKb * du / kKg, -kKr * dv / kKg},
           {1.0, du, 0.0}}};
}

ImageYUV420 rgb_to_yuv420(const ImageRGB& img) {
  require(img.h > 0 && img.w > 0, "rgb_to_yuv420: empty image");
  require(img.h % 2 == 0 && img.w % 2 == 0, "rgb_to_yuv420: odd dimensions");
  const auto m = rgb_to_yuv_matrix();

  ImageYUV420 out;
  out.y = Plane(img.h, img.w);
  out.u = Plane(img.h / 2, img.w / 2);
  out.v = Plane(img.h / 2, img.w / 2);

  std::vector<double> uf(static_cast<std::size_t>(img.h) * img.w);
  std::vector<double> vf(uf.size());
  for (int i = 0; i < img.h; ++i) {
    for (int j = 0; j < img.w; ++j) {
      const double r = img.at(i, j, 0);
      const double g = img.at(i, j, 1);
      const double b = img.at(i, j, 2);
      const double yv = m[0][0] * r + m[0][1] * g + m[0][2] * b;
      uf[static_cast<std::size_t>(i) * img.w + j] =
          m[1][0] * r + m[1][1] * g + m[1][2] * b;
      vf[static_cast<std::size_t>(i) * img.w + j] =
          m[2][0] * r + m[2][1] * g + m[2][2] * b;
      out.y.at(i, j) = clamp_u8(yv);
    }
  }
  for (int i = 0; i < out.u.h; ++i) {
    for (int j = 0; j < out.u.w; ++j) {
      const std::size_t p00 = static_cast<std::size_t>(2 * i) * img.w + 2 * j;
      const std::size_t p10 = p00 + img.w;
      const double um = 0.25 * (uf[p00] + uf[p00 + 1] + uf[p10] + uf[p10 + 1]);
      const double vm = 0.25 * (vf[p00] + vf[p00 + 1] + vf[p10] + vf[p10 + 1]);
      out.u.at(i, j) = clamp_u8(um + 128.0);
      out.v.at(i, j) = clamp_u8(vm + 128.0);
    }
  }
  return out;
}

ImageRGB yuv420_to_rgb(const ImageYUV420& yuv) {
  require(yuv.y.h > 0 && yuv.y.w > 0, "yuv420_to_rgb: empty image");
  require(yuv.u.h == yuv.y.h / 2 && yuv.u.w == yuv.y.w / 2 &&
              yuv.v.h == yuv.u.h && yuv.v.w == yuv.u.w,
          "yuv420_to_rgb: inconsistent plane sizes");
  const auto m = yuv_to_rgb_matrix();
  ImageRGB out(yuv.y.h, yuv.y.w);
  for (int i = 0; i < out.h; ++i) {
    for (int j = 0; j < out.w; ++j) {
      const double yv = yuv.y.at(i, j);
      const double uv = yuv.u.at(i / 2, j / 2) - 128.0;
      const double vv = yuv.v.at(i / 2, j / 2) - 128.0;
      out.at(i, j, 0) = clamp_u8(m[0][0] * yv + m[0][1] * uv + m[0][2] * vv);
      out.at(i, j, 1) = clamp_u8(m[1][0] * yv + m[1][1] * uv + m[1][2] * vv);
      out.at(i, j, 2) = clamp_u8(m[2][0] * yv + m[2][1] * uv + m[2][2] * vv);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// PPM

namespace {

int ppm_token(std::istream& is) {
  // Skips whitespace and '#' comments, then reads one non-negative integer.
  int ch = is.get();
  while (is) {
    if (ch == '#') {
      while (is && ch != '\n') ch = is.get();
    } else if (std::isspace(ch)) {
      ch = is.get();
    } else {
      break;
    }
  }
  if (!is || !std::isdigit(ch)) throw DataError("ppm: malformed header");
  int value = 0;
  while (is && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    if (value > 1 << 30) throw DataError("ppm: header value overflow");
    ch = is.get();
  }
  if (is) is.unget();
  return value;
}

}  // namespace

ImageRGB read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("ppm: cannot open " + path);
  char m0 = 0, m1 = 0;
  is.get(m0);
  is.get(m1);
  if (m0 != 'P' || m1 != '6') throw DataError("ppm: not a P6 file: " + path);
  const int w = ppm_token(is);
  const int h = ppm_token(is);
  const int maxval = ppm_token(is);
  if (maxval != 255) throw DataError("ppm: unsupported maxval (must be 255)");
  is.get();  // single whitespace before payload
  if (w <= 0 || h <= 0) throw DataError("ppm: non-positive dimensions");
  ImageRGB img(h, w);
  is.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  if (is.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw DataError("ppm: truncated payload in " + path);
  return img;
}

void write_ppm(const std::string& path, const ImageRGB& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("ppm: cannot open for write " + path);
  os << "P6\n" << img.w << " " << img.h << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.data.data()),
           static_cast<std::streamsize>(img.data.size()));
  if (!os) throw IoError("ppm: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Raw I420

ImageYUV420 read_i420(const std::string& path, int width, int height) {
  require(width > 0 && height > 0 && width % 2 == 0 && height % 2 == 0,
          "i420: dimensions must be positive and even");
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("i420: cannot open " + path);
  is.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(is.tellg());
  is.seekg(0);
  const std::uint64_t want =
      static_cast<std::uint64_t>(width) * height * 3 / 2;
  if (file_size != want)
    throw DataError("i420: file size does not match dimensions (expected " +
                    std::to_string(want) + " bytes)");
  ImageYUV420 img;
  img.y = Plane(height, width);
  img.u = Plane(height / 2, width / 2);
  img.v = Plane(height / 2, width / 2);
  is.read(reinterpret_cast<char*>(img.y.data.data()),
          static_cast<std::streamsize>(img.y.data.size()));
  is.read(reinterpret_cast<char*>(img.u.data.data()),
          static_cast<std::streamsize>(img.u.data.size()));
  is.read(reinterpret_cast<char*>(img.v.data.data()),
          static_cast<std::streamsize>(img.v.data.size()));
  if (!is) throw DataError("i420: truncated payload in " + path);
  return img;
}

void write_i420(const std::string& path, const ImageYUV420& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("i420: cannot open for write " + path);
  os.write(reinterpret_cast<const char*>(img.y.data.data()),
           static_cast<std::streamsize>(img.y.data.size()));
  os.write(reinterpret_cast<const char*>(img.u.data.data()),
           static_cast<std::streamsize>(img.u.data.size()));
  os.write(reinterpret_cast<const char*>(img.v.data.data()),
           static_cast<std::streamsize>(img.v.data.size()));
  if (!os) throw IoError("i420: write failed for " + path);
}

}  // namespace ccs
