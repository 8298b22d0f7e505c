// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#include "ccs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <future>
#include <thread>

namespace ccs {

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig cfg;
  cfg.name = name;
  if (name == "ccs-y128-uv64") {
    cfg.n_y = 128; cfg.n_uv = 64; cfg.conditional = true;
  } else if (name == "ccs-y128-uv128") {
    cfg.n_y = 128; cfg.n_uv = 128; cfg.conditional = true;
  } else if (name == "ccs-y64-uv128") {
    cfg.n_y = 64; cfg.n_uv = 128; cfg.conditional = true;
  } else if (name == "nc-y128-uv64") {
    cfg.n_y = 128; cfg.n_uv = 64; cfg.conditional = false;
  } else if (name == "baseline-192") {
    cfg.n_y = 192; cfg.n_uv = 0; cfg.conditional = false;
    cfg.single_codec = true;
  } else {
    throw DataError("unknown preset: " + name);
  }
  return cfg;
}

std::vector<std::string> ModelConfig::preset_names() {
  return {"ccs-y128-uv64", "ccs-y128-uv128", "ccs-y64-uv128", "nc-y128-uv64",
          "baseline-192"};
}

// ---------------------------------------------------------------------------
// Model construction and persistence

namespace {

ComponentNets make_component(int n, int in_ch, int m, int out_ch) {
  ComponentNets c;
  c.enc = build_network(Role::Encoder, n, 0, 0, in_ch);
  c.dec = build_network(Role::Decoder, n, m, out_ch);
  c.henc = build_network(Role::HyperEncoder, n);
  c.hdec = build_network(Role::HyperDecoder, n);
  c.ctx = build_network(Role::Context, n);
  c.gather = build_network(Role::Gather, n);
  c.enc_p = compile(c.enc);
  c.dec_p = compile(c.dec);
  c.henc_p = compile(c.henc);
  c.hdec_p = compile(c.hdec);
  c.ctx_p = compile(c.ctx);
  c.gather_p = compile(c.gather);
  c.enc_w = zero_params(c.enc_p);
  c.dec_w = zero_params(c.dec_p);
  c.henc_w = zero_params(c.henc_p);
  c.hdec_w = zero_params(c.hdec_p);
  c.ctx_w = zero_params(c.ctx_p);
  c.gather_w = zero_params(c.gather_p);
  c.fm = FactorizedModel(n, kHyperSupport);
  return c;
}

void init_component(ComponentNets& c, std::uint64_t seed) {
  // Full variance-preserving gain: seeded random weights must produce
  // latents with real entropy for the analysis-only coding mode.
  c.enc_w = init_params(c.enc_p, stream_seed(seed, 0), 1.0);
  c.dec_w = init_params(c.dec_p, stream_seed(seed, 1), 1.0);
  c.henc_w = init_params(c.henc_p, stream_seed(seed, 2), 1.0);
  c.hdec_w = init_params(c.hdec_p, stream_seed(seed, 3), 1.0);
  c.ctx_w = init_params(c.ctx_p, stream_seed(seed, 4), 1.0);
  c.gather_w = init_params(c.gather_p, stream_seed(seed, 5), 1.0);
}

void save_component(const ComponentNets& c, const std::string& dir,
                    const std::string& tag) {
  save_params(dir + "/enc_" + tag + ".bin", c.enc, c.enc_p, c.enc_w);
  save_params(dir + "/dec_" + tag + ".bin", c.dec, c.dec_p, c.dec_w);
  save_params(dir + "/hyper_enc_" + tag + ".bin", c.henc, c.henc_p, c.henc_w);
  save_params(dir + "/hyper_dec_" + tag + ".bin", c.hdec, c.hdec_p, c.hdec_w);
  save_params(dir + "/context_" + tag + ".bin", c.ctx, c.ctx_p, c.ctx_w);
  save_params(dir + "/gather_" + tag + ".bin", c.gather, c.gather_p,
              c.gather_w);
  c.fm.save(dir + "/factorized_" + tag + ".bin");
}

void load_component(ComponentNets& c, const std::string& dir,
                    const std::string& tag) {
  c.enc_w = load_params(dir + "/enc_" + tag + ".bin", c.enc, c.enc_p);
  c.dec_w = load_params(dir + "/dec_" + tag + ".bin", c.dec, c.dec_p);
  c.henc_w =
      load_params(dir + "/hyper_enc_" + tag + ".bin", c.henc, c.henc_p);
  c.hdec_w =
      load_params(dir + "/hyper_dec_" + tag + ".bin", c.hdec, c.hdec_p);
  c.ctx_w = load_params(dir + "/context_" + tag + ".bin", c.ctx, c.ctx_p);
  c.gather_w =
      load_params(dir + "/gather_" + tag + ".bin", c.gather, c.gather_p);
  c.fm = FactorizedModel::load(dir + "/factorized_" + tag + ".bin");
  require(c.fm.channels == c.henc.out_ch,
          "load: factorized channel count does not match hyper encoder");
}

}  // namespace

CodecModels CodecModels::create(const ModelConfig& cfg) {
  require(!cfg.single_codec,
          "pipeline models: baseline preset is analysis-only");
  CodecModels m;
  m.y = make_component(cfg.n_y, 1, cfg.n_y, 1);
  m.uv = make_component(cfg.n_uv, cfg.conditional ? 3 : 2, cfg.m_uv(), 2);
  return m;
}

CodecModels CodecModels::random(const ModelConfig& cfg, std::uint64_t seed) {
  CodecModels m = create(cfg);
  init_component(m.y, stream_seed(seed, 100));
  init_component(m.uv, stream_seed(seed, 200));
  return m;
}

CodecModels CodecModels::load_dir(const std::string& dir,
                                  const ModelConfig& cfg) {
  CodecModels m = create(cfg);
  load_component(m.y, dir, "y");
  load_component(m.uv, dir, "uv");
  return m;
}

void CodecModels::save_dir(const std::string& dir) const {
  save_component(y, dir, "y");
  save_component(uv, dir, "uv");
}

// ---------------------------------------------------------------------------
// Bitstream container

namespace {

constexpr char kStreamMagic[4] = {'C', 'C', 'S', '1'};
constexpr std::uint8_t kStreamVersion = 0x01;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

struct Reader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;

  std::uint8_t u8() {
    require(pos + 1 <= buf.size(), "bitstream: truncated header");
    return buf[pos++];
  }
  std::uint16_t u16() {
    require(pos + 2 <= buf.size(), "bitstream: truncated header");
    const std::uint16_t v =
        static_cast<std::uint16_t>(buf[pos] | (buf[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    require(pos + 4 <= buf.size(), "bitstream: truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
};

}  // namespace

std::vector<std::uint8_t> Bitstream::serialize() const {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kStreamMagic, kStreamMagic + 4);
  out.push_back(kStreamVersion);
  std::uint8_t flags = 0;
  if (conditional) flags |= 0x01;
  if (padded) flags |= 0x02;
  out.push_back(flags);
  put_u32(out, width);
  put_u32(out, height);
  put_u16(out, n_y);
  put_u16(out, n_uv);
  out.push_back(lambda_id);
  if (padded) {
    put_u32(out, orig_width);
    put_u32(out, orig_height);
  }
  for (const auto& sub : substreams) {
    require(sub.size() <= 0xFFFFFFFFull, "bitstream: substream too large");
    put_u32(out, static_cast<std::uint32_t>(sub.size()));
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

Bitstream Bitstream::parse(const std::vector<std::uint8_t>& bytes) {
  Reader r{bytes};
  require(bytes.size() >= 4 &&
              std::memcmp(bytes.data(), kStreamMagic, 4) == 0,
          "bitstream: bad magic");
  r.pos = 4;
  const std::uint8_t version = r.u8();
  require(version == kStreamVersion, "bitstream: unsupported version");
  const std::uint8_t flags = r.u8();
  require((flags & ~0x03u) == 0, "bitstream: unknown flag bits");
  Bitstream bs;
  bs.conditional = (flags & 0x01) != 0;
  bs.padded = (flags & 0x02) != 0;
  bs.width = r.u32();
  bs.height = r.u32();
  bs.n_y = r.u16();
  bs.n_uv = r.u16();
  bs.lambda_id = r.u8();
  if (bs.padded) {
    bs.orig_width = r.u32();
    bs.orig_height = r.u32();
  }
  for (auto& sub : bs.substreams) {
    const std::uint32_t len = r.u32();
    require(r.pos + len <= bytes.size(),
            "bitstream: substream length beyond end of data");
    sub.assign(bytes.begin() + r.pos, bytes.begin() + r.pos + len);
    r.pos += len;
  }
  require(r.pos == bytes.size(), "bitstream: trailing bytes");
  require(bs.width > 0 && bs.height > 0 &&
              bs.width % kPadMultiple == 0 && bs.height % kPadMultiple == 0,
          "bitstream: coded dimensions must be positive multiples of 128");
  return bs;
}

// ---------------------------------------------------------------------------
// Plane helpers

Tensor plane_to_tensor(const Plane& p) {
  Tensor t(p.h, p.w, 1);
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    t.data[i] = p.data[i] / 255.0;
  }
  return t;
}

Plane tensor_to_plane(const Tensor& t, int ch) {
  Plane p(t.h, t.w);
  for (int i = 0; i < t.h; ++i) {
    for (int j = 0; j < t.w; ++j) {
      const double v = std::clamp(t.at(i, j, ch), 0.0, 1.0) * 255.0;
      p.at(i, j) = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return p;
}

namespace {

// Mirror an out-of-range index back into [0, n) without repeating the edge
// sample (period 2n - 2).
int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

Plane pad_reflect(const Plane& p, int target_h, int target_w) {
  require(target_h >= p.h && target_w >= p.w, "pad_reflect: shrinking pad");
  if (target_h == p.h && target_w == p.w) return p;
  Plane out(target_h, target_w);
  for (int i = 0; i < target_h; ++i) {
    const int si = mirror_index(i, p.h);
    for (int j = 0; j < target_w; ++j) {
      out.at(i, j) = p.at(si, mirror_index(j, p.w));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Latent entropy coding. The context and gather evaluations run through the
// same per-position routines on the encoder and decoder side, so both sides
// observe bit-identical Gaussian parameters.

namespace {

struct MaskedCtxRunner {
  int n_in, n_out, k, pad;
  std::vector<double> wk;  // (ky, kx, in, out), kept taps only
  const std::vector<double>* bias;

  explicit MaskedCtxRunner(const ConvKernel& kern)
      : n_in(kern.in_ch), n_out(kern.out_ch), k(kern.kh), pad(kern.kh / 2),
        wk(static_cast<std::size_t>(kern.kh) * kern.kw * kern.in_ch *
               kern.out_ch,
           0.0),
        bias(&kern.b) {
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        if (!mask_a_keeps(ky, kx, k, k)) continue;
        for (int i = 0; i < n_in; ++i) {
          double* dst =
              &wk[((static_cast<std::size_t>(ky) * k + kx) * n_in + i) *
                  n_out];
          for (int o = 0; o < n_out; ++o) dst[o] = kern.wat(o, i, ky, kx);
        }
      }
  }

  void run_at(const Tensor& x, int ci, int cj, double* out) const {
    std::copy(bias->begin(), bias->end(), out);
    for (int ky = 0; ky < k; ++ky) {
      const int iy = ci - pad + ky;
      if (iy < 0 || iy >= x.h) continue;
      for (int kx = 0; kx < k; ++kx) {
        if (!mask_a_keeps(ky, kx, k, k)) continue;
        const int ix = cj - pad + kx;
        if (ix < 0 || ix >= x.w) continue;
        const double* xr = x.row(iy, ix);
        const double* wr =
            &wk[(static_cast<std::size_t>(ky) * k + kx) * n_in * n_out];
        for (int i = 0; i < n_in; ++i) {
          const double xv = xr[i];
          const double* wrow = wr + static_cast<std::size_t>(i) * n_out;
          for (int o = 0; o < n_out; ++o) out[o] += xv * wrow[o];
        }
      }
    }
  }
};

struct GatherRunner {
  int n;
  std::array<const ConvKernel*, 3> k;
  std::vector<double> v0, v1, v2, v3;

  explicit GatherRunner(const ComponentNets& nets) : n(nets.gather.n) {
    internal_check(nets.gather_w.kernels.size() == 3,
                   "gather runner: expected three 1x1 convolutions");
    for (int i = 0; i < 3; ++i) k[i] = &nets.gather_w.kernels[i];
    v0.resize(4 * n);
    v1.resize(k[0]->out_ch);
    v2.resize(k[1]->out_ch);
    v3.resize(k[2]->out_ch);
  }

  static void dense(const ConvKernel& kern, const std::vector<double>& in,
                    std::vector<double>& out) {
    for (int o = 0; o < kern.out_ch; ++o) {
      const double* wr = &kern.w[static_cast<std::size_t>(o) * kern.in_ch];
      double acc = kern.b[o];
      for (int i = 0; i < kern.in_ch; ++i) acc += wr[i] * in[i];
      out[o] = acc;
    }
  }

  // hyper and context each contribute 2N channels; outputs are the K=1
  // mixture's mean and softplus-floored scale.
  void run_at(const double* hyper_vec, const double* ctx_vec, double* mu,
              double* sg) {
    std::copy(hyper_vec, hyper_vec + 2 * n, v0.begin());
    std::copy(ctx_vec, ctx_vec + 2 * n, v0.begin() + 2 * n);
    dense(*k[0], v0, v1);
    for (double& v : v1)
      if (v < 0.0) v *= 0.01;
    dense(*k[1], v1, v2);
    for (double& v : v2)
      if (v < 0.0) v *= 0.01;
    dense(*k[2], v2, v3);
    for (int c = 0; c < n; ++c) {
      mu[c] = v3[c];
      sg[c] = std::max(softplus(v3[n + c]), kSigmaFloor);
    }
  }
};

struct LevelTableCache {
  const ScaleTable& st;
  std::vector<CdfTable> tables;
  std::vector<bool> built;

  explicit LevelTableCache(const ScaleTable& st_)
      : st(st_), tables(st_.size()), built(st_.size(), false) {}

  const CdfTable& get(int level) {
    if (!built[level]) {
      tables[level] = gaussian_residual_table(st.level(level));
      built[level] = true;
    }
    return tables[level];
  }
};

double table_bits(const CdfTable& t, int value) {
  const int idx = value - t.offset;
  const double p = (t.cum[idx + 1] - t.cum[idx]) * 0x1.0p-16;
  return -std::log2(p);
}

const ScaleTable& scale_table() {
  static const ScaleTable st = ScaleTable::make();
  return st;
}

struct SubstreamOut {
  std::vector<std::uint8_t> bytes;
  double est_bits = 0.0;
};

SubstreamOut encode_hyper_latent(const Tensor& zhat,
                                 const FactorizedModel& fm) {
  std::vector<CdfTable> tables(fm.channels);
  for (int c = 0; c < fm.channels; ++c) tables[c] = fm.cdf_table(c);
  RangeEncoder enc;
  SubstreamOut out;
  for (int i = 0; i < zhat.h; ++i)
    for (int j = 0; j < zhat.w; ++j) {
      const double* row = zhat.row(i, j);
      for (int c = 0; c < zhat.c; ++c) {
        const int v = static_cast<int>(row[c]);
        enc.encode_symbol(v, tables[c]);
        out.est_bits += table_bits(tables[c], v);
      }
    }
  out.bytes = enc.finish();
  return out;
}

Tensor decode_hyper_latent(const std::vector<std::uint8_t>& bytes,
                           const FactorizedModel& fm, int h, int w) {
  std::vector<CdfTable> tables(fm.channels);
  for (int c = 0; c < fm.channels; ++c) tables[c] = fm.cdf_table(c);
  Tensor zhat(h, w, fm.channels);
  RangeDecoder dec(bytes);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double* row = zhat.row(i, j);
      for (int c = 0; c < fm.channels; ++c)
        row[c] = static_cast<double>(dec.decode_symbol(tables[c]));
    }
  return zhat;
}

int clamp_mean(double mu) {
  return static_cast<int>(
      std::clamp(std::nearbyint(mu), -255.0, 255.0));
}

SubstreamOut encode_main_latent(const Tensor& yhat, const Tensor& hyper,
                                const ComponentNets& nets) {
  internal_check(hyper.h == yhat.h && hyper.w == yhat.w &&
                     hyper.c == 2 * yhat.c,
                 "encode: hyper output does not match latent");
  MaskedCtxRunner ctx(nets.ctx_w.kernels[0]);
  GatherRunner gather(nets);
  LevelTableCache cache(scale_table());
  const int n = yhat.c;
  std::vector<double> ctxv(2 * n), mu(n), sg(n);
  RangeEncoder enc;
  SubstreamOut out;
  for (int i = 0; i < yhat.h; ++i)
    for (int j = 0; j < yhat.w; ++j) {
      ctx.run_at(yhat, i, j, ctxv.data());
      gather.run_at(hyper.row(i, j), ctxv.data(), mu.data(), sg.data());
      const double* row = yhat.row(i, j);
      for (int c = 0; c < n; ++c) {
        const int r = static_cast<int>(row[c]) - clamp_mean(mu[c]);
        const CdfTable& t = cache.get(scale_table().lookup(sg[c]));
        enc.encode_symbol(r, t);
        out.est_bits += table_bits(t, r);
      }
    }
  out.bytes = enc.finish();
  return out;
}

Tensor decode_main_latent(const std::vector<std::uint8_t>& bytes,
                          const Tensor& hyper, const ComponentNets& nets,
                          int h, int w) {
  const int n = nets.ctx.n;
  MaskedCtxRunner ctx(nets.ctx_w.kernels[0]);
  GatherRunner gather(nets);
  LevelTableCache cache(scale_table());
  Tensor yhat(h, w, n);
  std::vector<double> ctxv(2 * n), mu(n), sg(n);
  RangeDecoder dec(bytes);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      // The type-A mask never reads the current or later raster positions,
      // so the partially filled tensor is exactly what the encoder saw.
      ctx.run_at(yhat, i, j, ctxv.data());
      gather.run_at(hyper.row(i, j), ctxv.data(), mu.data(), sg.data());
      double* row = yhat.row(i, j);
      for (int c = 0; c < n; ++c) {
        const CdfTable& t = cache.get(scale_table().lookup(sg[c]));
        const int r = dec.decode_symbol(t);
        row[c] = static_cast<double>(
            std::clamp(r + clamp_mean(mu[c]), -kLatentBound, kLatentBound));
      }
    }
  return yhat;
}

struct ComponentStreams {
  Tensor yhat, zhat;
  SubstreamOut z_stream, y_stream;
};

ComponentStreams encode_component(const Tensor& input,
                                  const ComponentNets& nets) {
  ComponentStreams cs;
  const Tensor y = forward(nets.enc_p, nets.enc_w, input);
  cs.yhat = quantize_clamp(y, kLatentBound);
  const Tensor z = forward(nets.henc_p, nets.henc_w, y);
  cs.zhat = quantize_clamp(z, nets.fm.support);
  const Tensor hyper = forward(nets.hdec_p, nets.hdec_w, cs.zhat);
  cs.z_stream = encode_hyper_latent(cs.zhat, nets.fm);
  cs.y_stream = encode_main_latent(cs.yhat, hyper, nets);
  return cs;
}

struct ComponentLatents {
  Tensor yhat, zhat;
};

ComponentLatents decode_component_latents(
    const std::vector<std::uint8_t>& z_bytes,
    const std::vector<std::uint8_t>& y_bytes, const ComponentNets& nets,
    int latent_h, int latent_w) {
  ComponentLatents cl;
  const int zh = (latent_h + 3) / 4;
  const int zw = (latent_w + 3) / 4;
  cl.zhat = decode_hyper_latent(z_bytes, nets.fm, zh, zw);
  const Tensor hyper = forward(nets.hdec_p, nets.hdec_w, cl.zhat);
  cl.yhat = decode_main_latent(y_bytes, hyper, nets, latent_h, latent_w);
  return cl;
}

int pad_up(int v) {
  return (v + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
}

}  // namespace

// ---------------------------------------------------------------------------
// Encode

EncodeResult encode(const ImageYUV420& image, const CodecModels& models,
                    const ModelConfig& cfg, int workers) {
  require(!cfg.single_codec, "encode: baseline preset is analysis-only");
  require(workers == 1 || workers == 2, "encode: workers must be 1 or 2");
  require(image.height() > 0 && image.width() > 0, "encode: empty image");
  require(image.height() % 2 == 0 && image.width() % 2 == 0,
          "encode: dimensions must be even");
  require(image.u.h == image.height() / 2 && image.u.w == image.width() / 2 &&
              image.v.h == image.u.h && image.v.w == image.u.w,
          "encode: inconsistent plane sizes");

  const int orig_h = image.height();
  const int orig_w = image.width();
  const int ph = pad_up(orig_h);
  const int pw = pad_up(orig_w);
  const bool padded = ph != orig_h || pw != orig_w;

  const Tensor y_in = plane_to_tensor(pad_reflect(image.y, ph, pw));
  const Tensor u_in = plane_to_tensor(pad_reflect(image.u, ph / 2, pw / 2));
  const Tensor v_in = plane_to_tensor(pad_reflect(image.v, ph / 2, pw / 2));

  Tensor uv_in = concat_channels(u_in, v_in);
  if (cfg.conditional) {
    // The primary component is down-sampled to the chroma grid and joined
    // to UV as auxiliary encoder input.
    uv_in = concat_channels(avg_downsample2(y_in), uv_in);
  }

  ComponentStreams ys, uvs;
  if (workers == 2) {
    std::exception_ptr y_err;
    std::thread ty([&] {
      try {
        ys = encode_component(y_in, models.y);
      } catch (...) {
        y_err = std::current_exception();
      }
    });
    uvs = encode_component(uv_in, models.uv);
    ty.join();
    if (y_err) std::rethrow_exception(y_err);
  } else {
    ys = encode_component(y_in, models.y);
    uvs = encode_component(uv_in, models.uv);
  }

  EncodeResult res;
  res.latents = {ys.yhat, ys.zhat, uvs.yhat, uvs.zhat};
  Bitstream& bs = res.bitstream;
  bs.conditional = cfg.conditional;
  bs.padded = padded;
  bs.width = static_cast<std::uint32_t>(pw);
  bs.height = static_cast<std::uint32_t>(ph);
  bs.n_y = static_cast<std::uint16_t>(cfg.n_y);
  bs.n_uv = static_cast<std::uint16_t>(cfg.n_uv);
  bs.lambda_id = static_cast<std::uint8_t>(cfg.lambda_id);
  bs.orig_width = padded ? static_cast<std::uint32_t>(orig_w) : 0;
  bs.orig_height = padded ? static_cast<std::uint32_t>(orig_h) : 0;
  bs.substreams[kSubZY] = std::move(ys.z_stream.bytes);
  bs.substreams[kSubYY] = std::move(ys.y_stream.bytes);
  bs.substreams[kSubZUV] = std::move(uvs.z_stream.bytes);
  bs.substreams[kSubYUV] = std::move(uvs.y_stream.bytes);
  res.estimated_bits = {ys.z_stream.est_bits, ys.y_stream.est_bits,
                        uvs.z_stream.est_bits, uvs.y_stream.est_bits};
  std::size_t payload = 0;
  for (const auto& sub : bs.substreams) payload += sub.size();
  res.bpp = 8.0 * static_cast<double>(payload) /
            (static_cast<double>(ph) * pw);
  return res;
}

// ---------------------------------------------------------------------------
// Decode

DecodeResult decode(const Bitstream& bs, const CodecModels& models,
                    const ModelConfig& cfg, int workers) {
  require(!cfg.single_codec, "decode: baseline preset is analysis-only");
  require(workers == 1 || workers == 2, "decode: workers must be 1 or 2");
  require(bs.n_y == cfg.n_y && bs.n_uv == cfg.n_uv,
          "decode: bitstream channel counts do not match the preset");
  require(bs.conditional == cfg.conditional,
          "decode: bitstream conditional flag does not match the preset");

  const int ph = static_cast<int>(bs.height);
  const int pw = static_cast<int>(bs.width);
  const int ly_h = ph / 16, ly_w = pw / 16;
  const int luv_h = ph / 32, luv_w = pw / 32;

  DecodeResult res;

  // Y path: entropy decode, then image reconstruction. The UV path needs
  // the decoded Y latent (not the decoded Y image), so the latent is
  // published as soon as the Y scan completes.
  std::promise<Tensor> y_latent_promise;
  std::shared_future<Tensor> y_latent_future =
      y_latent_promise.get_future().share();

  Tensor y_plane_tensor;
  ComponentLatents ylat;
  auto y_task = [&] {
    try {
      ylat = decode_component_latents(bs.substreams[kSubZY],
                                      bs.substreams[kSubYY], models.y, ly_h,
                                      ly_w);
      y_latent_promise.set_value(ylat.yhat);
    } catch (...) {
      y_latent_promise.set_exception(std::current_exception());
      throw;
    }
    y_plane_tensor = forward(models.y.dec_p, models.y.dec_w, ylat.yhat);
  };

  ComponentLatents uvlat;
  Tensor uv_plane_tensor;
  auto uv_task = [&] {
    bool truncated = false;
    try {
      uvlat = decode_component_latents(bs.substreams[kSubZUV],
                                       bs.substreams[kSubYUV], models.uv,
                                       luv_h, luv_w);
    } catch (const StreamExhausted&) {
      // Corrupt UV payload: substitute empty latents so the Y planes can
      // still be reconstructed. Detection of in-stream corruption beyond
      // exhaustion is not guaranteed.
      truncated = true;
      uvlat.zhat = Tensor((luv_h + 3) / 4, (luv_w + 3) / 4, cfg.n_uv);
      uvlat.yhat = Tensor(luv_h, luv_w, cfg.n_uv);
    }
    Tensor dec_in = uvlat.yhat;
    if (cfg.conditional) {
      const Tensor& yhat_y = y_latent_future.get();
      dec_in = concat_channels(avg_downsample2(yhat_y), uvlat.yhat);
    }
    uv_plane_tensor = forward(models.uv.dec_p, models.uv.dec_w, dec_in);
    res.uv_substream_truncated = truncated;
  };

  if (workers == 2) {
    std::exception_ptr y_err, uv_err;
    std::thread ty([&] {
      try {
        y_task();
      } catch (...) {
        y_err = std::current_exception();
      }
    });
    try {
      uv_task();
    } catch (...) {
      uv_err = std::current_exception();
    }
    ty.join();
    if (y_err) std::rethrow_exception(y_err);
    if (uv_err) std::rethrow_exception(uv_err);
  } else {
    y_task();
    uv_task();
  }

  res.latents = {ylat.yhat, ylat.zhat, uvlat.yhat, uvlat.zhat};

  ImageYUV420 out;
  out.y = tensor_to_plane(y_plane_tensor, 0);
  out.u = tensor_to_plane(uv_plane_tensor, 0);
  out.v = tensor_to_plane(uv_plane_tensor, 1);
  if (bs.padded) {
    const int oh = static_cast<int>(bs.orig_height);
    const int ow = static_cast<int>(bs.orig_width);
    require(oh > 0 && ow > 0 && oh <= ph && ow <= pw && oh % 2 == 0 &&
                ow % 2 == 0,
            "decode: invalid original dimensions in header");
    ImageYUV420 cropped;
    cropped.y = Plane(oh, ow);
    cropped.u = Plane(oh / 2, ow / 2);
    cropped.v = Plane(oh / 2, ow / 2);
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) cropped.y.at(i, j) = out.y.at(i, j);
    for (int i = 0; i < oh / 2; ++i)
      for (int j = 0; j < ow / 2; ++j) {
        cropped.u.at(i, j) = out.u.at(i, j);
        cropped.v.at(i, j) = out.v.at(i, j);
      }
    out = std::move(cropped);
  }
  res.image = std::move(out);
  return res;
}

}  // namespace ccs
