// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ccs/color.hpp"
#include "ccs/entropy.hpp"
#include "ccs/nn.hpp"

namespace ccs {

inline constexpr double kLambdaSet[4] = {0.002, 0.007, 0.015, 0.05};
constexpr int kHyperSupport = 64;   // factorized model support for z
constexpr int kPadMultiple = 128;   // coded sizes divide by 128

struct ModelConfig {
  std::string name;
  int n_y = 128;
  int n_uv = 64;
  bool conditional = true;
  int lambda_id = 0;
  bool single_codec = false;  // baseline: one RGB codec, analysis only

  /// Decoder UV first-layer channels: N_Y + N_UV when conditioned, else N_UV.
  int m_uv() const { return conditional ? n_y + n_uv : n_uv; }

  static ModelConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

/// The six networks of one component codec plus its hyper-latent prior.
struct ComponentNets {
  NetworkSpec enc, dec, henc, hdec, ctx, gather;
  Program enc_p, dec_p, henc_p, hdec_p, ctx_p, gather_p;
  ParamStore enc_w, dec_w, henc_w, hdec_w, ctx_w, gather_w;
  FactorizedModel fm;
};

struct CodecModels {
  ComponentNets y, uv;

  static CodecModels create(const ModelConfig& cfg);
  /// Deterministic seeded weights (analysis / testing mode).
  static CodecModels random(const ModelConfig& cfg, std::uint64_t seed);
  static CodecModels load_dir(const std::string& dir, const ModelConfig& cfg);
  void save_dir(const std::string& dir) const;
};

/// Quantized latents of one image: main and hyper for each component.
struct LatentBundle {
  Tensor y_y, z_y, y_uv, z_uv;

  bool operator==(const LatentBundle& o) const {
    return y_y.data == o.y_y.data && z_y.data == o.z_y.data &&
           y_uv.data == o.y_uv.data && z_uv.data == o.z_uv.data &&
           y_y.same_shape(o.y_y) && z_y.same_shape(o.z_y) &&
           y_uv.same_shape(o.y_uv) && z_uv.same_shape(o.z_uv);
  }
};

// Substream order inside the container: hyper before main per component.
enum SubstreamIndex { kSubZY = 0, kSubYY = 1, kSubZUV = 2, kSubYUV = 3 };

struct Bitstream {
  bool conditional = true;
  bool padded = false;
  std::uint32_t width = 0;   // coded (padded) dimensions
  std::uint32_t height = 0;
  std::uint16_t n_y = 0;
  std::uint16_t n_uv = 0;
  std::uint8_t lambda_id = 0;
  std::uint32_t orig_width = 0;   // meaningful iff padded
  std::uint32_t orig_height = 0;
  std::array<std::vector<std::uint8_t>, 4> substreams;

  std::vector<std::uint8_t> serialize() const;
  static Bitstream parse(const std::vector<std::uint8_t>& bytes);
};

struct EncodeResult {
  Bitstream bitstream;
  LatentBundle latents;
  std::array<double, 4> estimated_bits{};  // from the coding tables
  double bpp = 0.0;  // substream payload bits over coded pixels
};

struct DecodeResult {
  ImageYUV420 image;
  LatentBundle latents;
  // Set when a UV substream ran dry mid-decode (corrupt payload); the UV
  // latents are zeroed and the Y planes are unaffected.
  bool uv_substream_truncated = false;
};

EncodeResult encode(const ImageYUV420& image, const CodecModels& models,
                    const ModelConfig& cfg, int workers = 1);
DecodeResult decode(const Bitstream& bs, const CodecModels& models,
                    const ModelConfig& cfg, int workers = 1);

// Plane helpers shared with the trainer and tests.
Tensor plane_to_tensor(const Plane& p);           // scaled to [0,1]
Plane tensor_to_plane(const Tensor& t, int ch);   // clamp01, scale, round
Plane pad_reflect(const Plane& p, int target_h, int target_w);

}  // namespace ccs
