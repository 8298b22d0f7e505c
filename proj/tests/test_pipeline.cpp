// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ccs/pipeline.hpp"

using namespace ccs;

namespace {

ImageYUV420 random_image(std::mt19937_64& rng, int h, int w) {
  ImageYUV420 img;
  img.y = Plane(h, w);
  img.u = Plane(h / 2, w / 2);
  img.v = Plane(h / 2, w / 2);
  for (auto* p : {&img.y, &img.u, &img.v})
    for (std::uint8_t& v : p->data) v = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

ImageYUV420 smooth_image(std::mt19937_64& rng, int h, int w) {
  // Low-frequency content: latents stay well inside the coded support.
  ImageYUV420 img;
  img.y = Plane(h, w);
  img.u = Plane(h / 2, w / 2);
  img.v = Plane(h / 2, w / 2);
  const double fy = 2.0 * 3.14159265 * (1 + static_cast<int>(rng() % 3)) / h;
  const double fx = 2.0 * 3.14159265 * (1 + static_cast<int>(rng() % 3)) / w;
  const double phase = static_cast<double>(rng() % 628) / 100.0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      img.y.at(i, j) = static_cast<std::uint8_t>(
          128 + 100 * std::sin(fy * i + phase) * std::cos(fx * j));
  for (int i = 0; i < h / 2; ++i)
    for (int j = 0; j < w / 2; ++j) {
      img.u.at(i, j) = static_cast<std::uint8_t>(128 + 60 * std::sin(fy * i));
      img.v.at(i, j) = static_cast<std::uint8_t>(128 - 50 * std::cos(fx * j));
    }
  return img;
}

ModelConfig tiny_config(bool conditional) {
  ModelConfig cfg;
  cfg.name = conditional ? "tiny-ccs" : "tiny-nc";
  cfg.n_y = 8;
  cfg.n_uv = 4;
  cfg.conditional = conditional;
  return cfg;
}

}  // namespace

TEST_CASE("bitstream container: round trip and validation") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Bitstream bs;
    bs.conditional = (rng() % 2) != 0;
    bs.padded = (rng() % 2) != 0;
    bs.width = 128 * (1 + static_cast<int>(rng() % 4));
    bs.height = 128 * (1 + static_cast<int>(rng() % 4));
    bs.n_y = static_cast<std::uint16_t>(1 + (rng() % 256));
    bs.n_uv = static_cast<std::uint16_t>(1 + (rng() % 256));
    bs.lambda_id = static_cast<std::uint8_t>(rng() % 4);
    if (bs.padded) {
      bs.orig_width = bs.width - 2 * (1 + static_cast<int>(rng() % 8));
      bs.orig_height = bs.height - 2 * (1 + static_cast<int>(rng() % 8));
    }
    for (auto& sub : bs.substreams) {
      sub.resize(rng() % 64);
      for (std::uint8_t& b : sub) b = static_cast<std::uint8_t>(rng() & 0xff);
    }
    const auto bytes = bs.serialize();
    const Bitstream back = Bitstream::parse(bytes);
    CHECK(back.serialize() == bytes);
    CHECK(back.conditional == bs.conditional);
    CHECK(back.width == bs.width);
    CHECK(back.substreams == bs.substreams);
  }
}

TEST_CASE("bitstream container rejects malformed data") {
  Bitstream bs;
  bs.width = 128;
  bs.height = 128;
  bs.n_y = 8;
  bs.n_uv = 4;
  auto bytes = bs.serialize();

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(Bitstream::parse(bad_magic), DataError);

  auto bad_version = bytes;
  bad_version[4] = 0x7F;
  CHECK_THROWS_AS(Bitstream::parse(bad_version), DataError);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(Bitstream::parse(truncated), DataError);

  // Substream length pointing past the end of the container.
  auto inflated = bytes;
  inflated[inflated.size() - 4] = 0xFF;
  CHECK_THROWS_AS(Bitstream::parse(inflated), DataError);
}

TEST_CASE("flagship shapes at 128x128 follow the signal-size contract") {
  const ModelConfig cfg = ModelConfig::preset("ccs-y128-uv64");
  const CodecModels models = CodecModels::random(cfg, 5);
  std::mt19937_64 rng(2);
  const ImageYUV420 img = smooth_image(rng, 128, 128);
  const EncodeResult res = encode(img, models, cfg);
  CHECK(res.latents.y_y.h == 8);
  CHECK(res.latents.y_y.w == 8);
  CHECK(res.latents.y_y.c == 128);
  CHECK(res.latents.z_y.h == 2);
  CHECK(res.latents.z_y.c == 128);
  CHECK(res.latents.y_uv.h == 4);
  CHECK(res.latents.y_uv.c == 64);
  CHECK(res.latents.z_uv.h == 1);
  CHECK(res.latents.z_uv.c == 64);
  // Decoder UV consumes the concatenated latents: M_UV = 128 + 64.
  CHECK(models.uv.dec.m == 192);
  CHECK(models.uv.dec.layers[0].in_ch == 192);
  CHECK(cfg.m_uv() == 192);
}

TEST_CASE("non-conditional wiring drops the Y links") {
  const ModelConfig cfg = ModelConfig::preset("nc-y128-uv64");
  CHECK(cfg.m_uv() == 64);
  const CodecModels models = CodecModels::create(cfg);
  CHECK(models.uv.enc.in_ch == 2);
  CHECK(models.uv.dec.m == 64);
  const ModelConfig ccs = ModelConfig::preset("ccs-y128-uv64");
  const CodecModels cmodels = CodecModels::create(ccs);
  CHECK(cmodels.uv.enc.in_ch == 3);
}

TEST_CASE("lossless latent round trip, rate estimate matches payload") {
  const ModelConfig cfg = tiny_config(true);
  const CodecModels models = CodecModels::random(cfg, 7);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    const ImageYUV420 img =
        trial == 0 ? random_image(rng, 128, 128) : smooth_image(rng, 128, 128);
    const EncodeResult enc_res = encode(img, models, cfg);
    const DecodeResult dec_res = decode(enc_res.bitstream, models, cfg);
    CHECK(dec_res.latents == enc_res.latents);
    CHECK_FALSE(dec_res.uv_substream_truncated);
    CHECK(dec_res.image.height() == 128);
    for (int s = 0; s < 4; ++s) {
      const double actual = 8.0 * enc_res.bitstream.substreams[s].size();
      const double est = enc_res.estimated_bits[s];
      INFO("substream " << s << " actual " << actual << " est " << est);
      CHECK(actual <= est * 1.01 + 8.0 * 32.0);
      CHECK(actual + 1.0 >= est);
    }
  }
}

TEST_CASE("encode is deterministic and worker-count invariant") {
  const ModelConfig cfg = tiny_config(true);
  const CodecModels models = CodecModels::random(cfg, 11);
  std::mt19937_64 rng(4);
  const ImageYUV420 img = smooth_image(rng, 128, 128);
  const auto a = encode(img, models, cfg, 1);
  const auto b = encode(img, models, cfg, 1);
  const auto c = encode(img, models, cfg, 2);
  CHECK(a.bitstream.serialize() == b.bitstream.serialize());
  CHECK(a.bitstream.serialize() == c.bitstream.serialize());
  const auto d1 = decode(a.bitstream, models, cfg, 1);
  const auto d2 = decode(a.bitstream, models, cfg, 2);
  CHECK(d1.image.y.data == d2.image.y.data);
  CHECK(d1.image.u.data == d2.image.u.data);
  CHECK(d1.image.v.data == d2.image.v.data);
}

TEST_CASE("padding: odd-sized input is coded at 128 and cropped back") {
  const ModelConfig cfg = tiny_config(true);
  const CodecModels models = CodecModels::random(cfg, 13);
  std::mt19937_64 rng(5);
  ImageYUV420 img = smooth_image(rng, 128, 128);
  // Crop to 100x84 (even, not a multiple of 128).
  ImageYUV420 small;
  small.y = Plane(100, 84);
  small.u = Plane(50, 42);
  small.v = Plane(50, 42);
  for (int i = 0; i < 100; ++i)
    for (int j = 0; j < 84; ++j) small.y.at(i, j) = img.y.at(i, j);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 42; ++j) {
      small.u.at(i, j) = img.u.at(i, j);
      small.v.at(i, j) = img.v.at(i, j);
    }
  const EncodeResult res = encode(small, models, cfg);
  CHECK(res.bitstream.padded);
  CHECK(res.bitstream.width == 128);
  CHECK(res.bitstream.height == 128);
  CHECK(res.bitstream.orig_width == 84);
  CHECK(res.bitstream.orig_height == 100);
  const DecodeResult dec_res = decode(res.bitstream, models, cfg);
  CHECK(dec_res.image.height() == 100);
  CHECK(dec_res.image.width() == 84);
  CHECK(dec_res.image.u.h == 50);
}

TEST_CASE("pad_reflect mirrors without repeating the edge") {
  Plane p(2, 3);
  // rows: [1 2 3; 4 5 6]
  std::uint8_t val = 1;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) p.at(i, j) = val++;
  Plane out = pad_reflect(p, 4, 5);
  CHECK(out.at(0, 3) == 2);  // mirror of column 1
  CHECK(out.at(0, 4) == 1);
  CHECK(out.at(2, 0) == 1);  // mirror of row 0
  CHECK(out.at(3, 0) == 4);  // period wraps back
}

TEST_CASE("fuzzing UV payload never changes the decoded Y plane") {
  const ModelConfig cfg = tiny_config(true);
  const CodecModels models = CodecModels::random(cfg, 17);
  std::mt19937_64 rng(6);
  const ImageYUV420 img = smooth_image(rng, 128, 128);
  const EncodeResult enc_res = encode(img, models, cfg);
  const DecodeResult ref = decode(enc_res.bitstream, models, cfg);
  int uv_changed = 0;
  for (int trial = 0; trial < 10; ++trial) {
    Bitstream fuzzed = enc_res.bitstream;
    auto& sub = fuzzed.substreams[(trial % 2) ? kSubYUV : kSubZUV];
    if (sub.empty()) continue;
    sub[rng() % sub.size()] ^= static_cast<std::uint8_t>(1 + (rng() % 255));
    const DecodeResult out = decode(fuzzed, models, cfg);
    CHECK(out.image.y.data == ref.image.y.data);
    if (out.image.u.data != ref.image.u.data ||
        out.image.v.data != ref.image.v.data)
      ++uv_changed;
  }
  CHECK(uv_changed > 0);  // the fuzz actually bites
}

TEST_CASE("conditioning direction: y changes reach UV only when enabled") {
  std::mt19937_64 rng(7);
  const ImageYUV420 img = smooth_image(rng, 128, 128);
  ImageYUV420 img2 = img;
  // Perturb only the luma; chroma planes stay identical.
  for (int i = 40; i < 90; ++i)
    for (int j = 20; j < 100; ++j)
      img2.y.at(i, j) = static_cast<std::uint8_t>(255 - img2.y.at(i, j));

  for (bool conditional : {true, false}) {
    const ModelConfig cfg = tiny_config(conditional);
    const CodecModels models = CodecModels::random(cfg, 23);
    const EncodeResult a = encode(img, models, cfg);
    const EncodeResult b = encode(img2, models, cfg);
    CHECK(a.bitstream.substreams[kSubYY] != b.bitstream.substreams[kSubYY]);
    const DecodeResult da = decode(a.bitstream, models, cfg);
    const DecodeResult db = decode(b.bitstream, models, cfg);
    const bool uv_differs = da.image.u.data != db.image.u.data ||
                            da.image.v.data != db.image.v.data;
    if (conditional) {
      // The altered y latent feeds both Encoder UV (via DS) and Decoder UV.
      CHECK(uv_differs);
    } else {
      CHECK(b.bitstream.substreams[kSubZUV] == a.bitstream.substreams[kSubZUV]);
      CHECK(b.bitstream.substreams[kSubYUV] == a.bitstream.substreams[kSubYUV]);
      CHECK_FALSE(uv_differs);
    }
  }
}

TEST_CASE("decode validates header against the supplied preset") {
  const ModelConfig cfg = tiny_config(true);
  const CodecModels models = CodecModels::random(cfg, 29);
  std::mt19937_64 rng(8);
  const ImageYUV420 img = smooth_image(rng, 128, 128);
  const EncodeResult res = encode(img, models, cfg);

  ModelConfig other = cfg;
  other.n_y = 16;
  const CodecModels other_models = CodecModels::random(other, 29);
  CHECK_THROWS_AS(decode(res.bitstream, other_models, other), DataError);

  ModelConfig flipped = cfg;
  flipped.conditional = false;
  const CodecModels fm = CodecModels::random(flipped, 29);
  CHECK_THROWS_AS(decode(res.bitstream, fm, flipped), DataError);
}

TEST_CASE("codec models persist through a weights directory") {
  const ModelConfig cfg = tiny_config(true);
  const CodecModels models = CodecModels::random(cfg, 31);
  std::mt19937_64 rng(9);
  const ImageYUV420 img = smooth_image(rng, 128, 128);
  const auto before = encode(img, models, cfg);

  const std::string dir = "test_weights_dir";
#ifdef _WIN32
  REQUIRE(false);
#else
  REQUIRE(std::system(("mkdir -p " + dir).c_str()) == 0);
#endif
  models.save_dir(dir);
  const CodecModels loaded = CodecModels::load_dir(dir, cfg);
  const auto after = encode(img, loaded, cfg);
  // float32 storage rounds the weights, so the streams differ from the
  // in-memory model, but the loaded model must round trip its own output.
  const auto dec_res = decode(after.bitstream, loaded, cfg);
  CHECK(dec_res.latents == after.latents);
  REQUIRE(std::system(("rm -rf " + dir).c_str()) == 0);
}
