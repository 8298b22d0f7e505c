// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "ccs/color.hpp"

using namespace ccs;

namespace {

ImageRGB uniform_image(int h, int w, int r, int g, int b) {
  ImageRGB img(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      img.at(i, j, 0) = static_cast<std::uint8_t>(r);
      img.at(i, j, 1) = static_cast<std::uint8_t>(g);
      img.at(i, j, 2) = static_cast<std::uint8_t>(b);
    }
  return img;
}

}  // namespace

TEST_CASE("gray maps to the achromatic axis") {
  for (int g : {0, 1, 77, 128, 254, 255}) {
    ImageYUV420 yuv = rgb_to_yuv420(uniform_image(4, 4, g, g, g));
    CHECK(yuv.y.at(0, 0) == g);
    CHECK(yuv.u.at(0, 0) == 128);
    CHECK(yuv.v.at(0, 0) == 128);
    ImageRGB back = yuv420_to_rgb(yuv);
    CHECK(back.at(1, 1, 0) == g);
    CHECK(back.at(1, 1, 1) == g);
    CHECK(back.at(1, 1, 2) == g);
  }
}

TEST_CASE("pure red luma: 0.299 * 255 rounds to 76") {
  ImageYUV420 yuv = rgb_to_yuv420(uniform_image(2, 2, 255, 0, 0));
  CHECK(yuv.y.at(0, 0) == 76);
}

TEST_CASE("conversion matrices are exact inverses in reals") {
  const auto f = rgb_to_yuv_matrix();
  const auto b = yuv_to_rgb_matrix();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += b[i][k] * f[k][j];
      CHECK(acc == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
    }
}

TEST_CASE("uniform color images round trip within one code per channel") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const int r = static_cast<int>(rng() % 256);
    const int g = static_cast<int>(rng() % 256);
    const int b = static_cast<int>(rng() % 256);
    ImageRGB img = uniform_image(2, 2, r, g, b);
    ImageRGB back = yuv420_to_rgb(rgb_to_yuv420(img));
    CHECK(std::abs(back.at(0, 0, 0) - r) <= 1);
    CHECK(std::abs(back.at(0, 0, 1) - g) <= 1);
    CHECK(std::abs(back.at(0, 0, 2) - b) <= 1);
  }
}

TEST_CASE("clamping keeps extreme chroma in range") {
  ImageYUV420 yuv;
  yuv.y = Plane(2, 2, 255);
  yuv.u = Plane(1, 1, 255);
  yuv.v = Plane(1, 1, 255);
  ImageRGB rgb = yuv420_to_rgb(yuv);
  for (std::uint8_t v : rgb.data) {
    CHECK(v <= 255);
  }
  yuv.u = Plane(1, 1, 0);
  yuv.v = Plane(1, 1, 0);
  (void)yuv420_to_rgb(yuv);  // must not trap
}

TEST_CASE("smooth gradients survive the 4:2:0 trip with small error") {
  const int n = 64;
  ImageRGB img(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      img.at(i, j, 0) = static_cast<std::uint8_t>(40 + 2 * i);
      img.at(i, j, 1) = static_cast<std::uint8_t>(30 + j);
      img.at(i, j, 2) = static_cast<std::uint8_t>(200 - i - j / 2);
    }
  ImageRGB back = yuv420_to_rgb(rgb_to_yuv420(img));
  double mae[3] = {0.0, 0.0, 0.0};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < 3; ++c)
        mae[c] += std::abs(static_cast<double>(back.at(i, j, c)) -
                           img.at(i, j, c));
  for (int c = 0; c < 3; ++c) {
    CHECK(mae[c] / (n * n) <= 3.0);
  }
}

TEST_CASE("luma has four times the chroma samples") {
  ImageYUV420 yuv = rgb_to_yuv420(uniform_image(64, 48, 10, 20, 30));
  CHECK(yuv.y.data.size() == 4 * yuv.u.data.size());
  CHECK(yuv.y.data.size() == 4 * yuv.v.data.size());
}

TEST_CASE("odd dimensions rejected") {
  CHECK_THROWS_AS(rgb_to_yuv420(uniform_image(3, 4, 0, 0, 0)), DataError);
  CHECK_THROWS_AS(rgb_to_yuv420(uniform_image(4, 7, 0, 0, 0)), DataError);
}

TEST_CASE("ppm round trip is bit exact") {
  std::mt19937_64 rng(2);
  ImageRGB img(6, 10);
  for (std::uint8_t& v : img.data) v = static_cast<std::uint8_t>(rng() & 0xff);
  const std::string path = "test_color_tmp.ppm";
  write_ppm(path, img);
  ImageRGB back = read_ppm(path);
  CHECK(back.h == img.h);
  CHECK(back.w == img.w);
  CHECK(back.data == img.data);
  std::remove(path.c_str());
}

TEST_CASE("ppm with unsupported maxval or truncation rejected") {
  {
    std::ofstream os("test_color_bad.ppm", std::ios::binary);
    os << "P6\n2 2\n65535\n";
    os.write("0123456789ab", 12);
  }
  CHECK_THROWS_AS(read_ppm("test_color_bad.ppm"), DataError);
  {
    std::ofstream os("test_color_bad.ppm", std::ios::binary);
    os << "P6\n4 4\n255\n";
    os.write("0123", 4);  // far too short
  }
  CHECK_THROWS_AS(read_ppm("test_color_bad.ppm"), DataError);
  {
    std::ofstream os("test_color_bad.ppm", std::ios::binary);
    os << "P5\n2 2\n255\n0000";
  }
  CHECK_THROWS_AS(read_ppm("test_color_bad.ppm"), DataError);
  std::remove("test_color_bad.ppm");
  CHECK_THROWS_AS(read_ppm("no_such_file.ppm"), IoError);
}

TEST_CASE("ppm header comments are skipped") {
  {
    std::ofstream os("test_color_comment.ppm", std::ios::binary);
    os << "P6\n# a comment line\n2 1 # trailing\n255\n";
    os.write("abcdef", 6);
  }
  ImageRGB img = read_ppm("test_color_comment.ppm");
  CHECK(img.w == 2);
  CHECK(img.h == 1);
  std::remove("test_color_comment.ppm");
}

TEST_CASE("i420 round trip and size validation") {
  std::mt19937_64 rng(3);
  ImageYUV420 img;
  img.y = Plane(8, 6);
  img.u = Plane(4, 3);
  img.v = Plane(4, 3);
  for (auto* p : {&img.y, &img.u, &img.v})
    for (std::uint8_t& v : p->data) v = static_cast<std::uint8_t>(rng() & 0xff);
  const std::string path = "test_color_tmp.yuv";
  write_i420(path, img);
  ImageYUV420 back = read_i420(path, 6, 8);
  CHECK(back.y.data == img.y.data);
  CHECK(back.u.data == img.u.data);
  CHECK(back.v.data == img.v.data);
  // Wrong dimensions: the 1.5*H*W size check fires.
  CHECK_THROWS_AS(read_i420(path, 8, 8), DataError);
  CHECK_THROWS_AS(read_i420(path, 5, 8), DataError);
  std::remove(path.c_str());
}
