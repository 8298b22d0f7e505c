// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#include "ccs/nn.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>

namespace ccs {

const char* role_name(Role role) {
  switch (role) {
    case Role::Encoder: return "encoder";
    case Role::Decoder: return "decoder";
    case Role::HyperEncoder: return "hyper_enc";
    case Role::HyperDecoder: return "hyper_dec";
    case Role::Context: return "context";
    case Role::Gather: return "gather";
    case Role::Factorized: return "factorized";
  }
  return "?";
}

int gather_width(int numerator, int n) {
  return static_cast<int>(std::llround(static_cast<double>(numerator) * n / 3.0));
}

namespace {

LayerSpec rb(int in, int out, int stride) {
  return {LayerKind::RB, in, out, 3, stride};
}
LayerSpec rbu(int in, int out) { return {LayerKind::RBU, in, out, 3, 2}; }
LayerSpec ab(int ch) { return {LayerKind::AB, ch, ch, 3, 1}; }
LayerSpec conv(int in, int out, int k, int stride) {
  return {LayerKind::Conv, in, out, k, stride};
}
LayerSpec subpel(int in, int out) {
  return {LayerKind::SubpelConv, in, out, 3, 2};
}
LayerSpec lrelu(int ch) { return {LayerKind::LeakyReLU, ch, ch, 0, 1}; }
LayerSpec masked(int in, int out) {
  return {LayerKind::MaskedConv, in, out, 5, 1};
}

}  // namespace

NetworkSpec build_network(Role role, int n, int m, int out_ch, int in_ch) {
  require(n > 0, "build_network: N must be positive");
  NetworkSpec spec;
  spec.role = role;
  spec.n = n;
  switch (role) {
    case Role::Encoder: {
      if (in_ch <= 0) in_ch = 1;
      spec.in_ch = in_ch;
      spec.out_ch = n;
      spec.layers = {rb(in_ch, n, 2), rb(n, n, 1), rb(n, n, 2), ab(n),
                     rb(n, n, 1),     rb(n, n, 2), rb(n, n, 1),
                     conv(n, n, 3, 2), ab(n)};
      break;
    }
    case Role::Decoder: {
      require(m > 0, "build_network: decoder requires M");
      require(out_ch > 0, "build_network: decoder requires output channels");
      spec.m = m;
      spec.in_ch = m;
      spec.out_ch = out_ch;
      spec.layers = {ab(m),       rb(m, n, 1), rbu(n, n), rb(n, n, 1),
                     rbu(n, n),   ab(n),       rb(n, n, 1), rbu(n, n),
                     rb(n, n, 1), subpel(n, out_ch)};
      break;
    }
    case Role::HyperEncoder: {
      spec.in_ch = n;
      spec.out_ch = n;
      spec.layers = {conv(n, n, 3, 1), lrelu(n), conv(n, n, 3, 1), lrelu(n),
                     conv(n, n, 3, 2), lrelu(n), conv(n, n, 3, 1), lrelu(n),
                     conv(n, n, 3, 2)};
      break;
    }
    case Role::HyperDecoder: {
      require(n % 2 == 0, "build_network: hyper decoder needs even N");
      const int n15 = n + n / 2;
      spec.in_ch = n;
      spec.out_ch = 2 * n;
      spec.layers = {conv(n, n, 3, 1),     lrelu(n),   subpel(n, n),
                     lrelu(n),             conv(n, n15, 3, 1), lrelu(n15),
                     subpel(n15, n15),     lrelu(n15), conv(n15, 2 * n, 3, 1)};
      break;
    }
    case Role::Context: {
      spec.in_ch = n;
      spec.out_ch = 2 * n;
      spec.layers = {masked(n, 2 * n)};
      break;
    }
    case Role::Gather: {
      const int c11 = gather_width(11, n);
      const int c10 = gather_width(10, n);
      spec.in_ch = 4 * n;
      spec.out_ch = 3 * n;
      spec.layers = {conv(4 * n, c11, 1, 1), lrelu(c11), conv(c11, c10, 1, 1),
                     lrelu(c10), conv(c10, 3 * n, 1, 1)};
      break;
    }
    case Role::Factorized:
      throw DataError("build_network: factorized is not a layer stack");
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Compilation

namespace {

struct Builder {
  Program prog;

  int new_slot() { return prog.n_slots++; }

  int emit_conv(int in_slot, int out_ch, int in_ch, int k, int stride,
                bool is_masked, const std::string& name) {
    PrimOp op;
    op.kind = OpKind::Conv;
    op.in0 = in_slot;
    op.out = new_slot();
    op.param = static_cast<int>(prog.params.size());
    op.stride = stride;
    op.masked = is_masked;
    op.name = name;
    prog.params.push_back({out_ch, in_ch, k, k, is_masked, name});
    prog.ops.push_back(op);
    return op.out;
  }

  int emit(OpKind kind, int in0, int in1, const std::string& name) {
    PrimOp op;
    op.kind = kind;
    op.in0 = in0;
    op.in1 = in1;
    op.out = new_slot();
    op.name = name;
    prog.ops.push_back(op);
    return op.out;
  }

  int emit_leaky(int in_slot, const std::string& name) {
    return emit(OpKind::Leaky, in_slot, -1, name);
  }

  int emit_shuffle(int in_slot, const std::string& name) {
    return emit(OpKind::Shuffle, in_slot, -1, name);
  }

  // conv3x3 -> leaky -> conv3x3 -> leaky, plus skip (identity when the
  // shape is preserved, strided 1x1 otherwise).
  int residual_block(int x, int in, int out, int stride,
                     const std::string& p) {
    int t = emit_conv(x, out, in, 3, stride, false, p + ".conv1");
    t = emit_leaky(t, p + ".lrelu1");
    t = emit_conv(t, out, out, 3, 1, false, p + ".conv2");
    t = emit_leaky(t, p + ".lrelu2");
    int skip = x;
    if (stride != 1 || in != out) {
      skip = emit_conv(x, out, in, 1, stride, false, p + ".skip");
    }
    return emit(OpKind::Add, t, skip, p + ".add");
  }

  // Sub-pixel up-sampling block: subpel-conv x2 -> leaky -> conv3x3,
  // skip via a second subpel-conv x2.
  int residual_block_up(int x, int in, int out, const std::string& p) {
    int t = emit_conv(x, out * 4, in, 3, 1, false, p + ".subpel");
    t = emit_shuffle(t, p + ".shuffle");
    t = emit_leaky(t, p + ".lrelu1");
    t = emit_conv(t, out, out, 3, 1, false, p + ".conv");
    t = emit_leaky(t, p + ".lrelu2");
    int skip = emit_conv(x, out * 4, in, 3, 1, false, p + ".skip_subpel");
    skip = emit_shuffle(skip, p + ".skip_shuffle");
    return emit(OpKind::Add, t, skip, p + ".add");
  }

  // Bottleneck residual unit at half width, the building brick of the
  // attention block.
  int residual_unit(int x, int ch, const std::string& p) {
    const int half = std::max(1, ch / 2);
    int t = emit_conv(x, half, ch, 1, 1, false, p + ".conv1x1_a");
    t = emit_leaky(t, p + ".lrelu1");
    t = emit_conv(t, half, half, 3, 1, false, p + ".conv3x3");
    t = emit_leaky(t, p + ".lrelu2");
    t = emit_conv(t, ch, half, 1, 1, false, p + ".conv1x1_b");
    t = emit(OpKind::Add, t, x, p + ".add");
    return emit_leaky(t, p + ".lrelu3");
  }

  // Attention: out = x + trunk(x) * sigmoid(mask(x)), trunk and mask each
  // three bottleneck units, mask finished by a 1x1 conv.
  int attention_block(int x, int ch, const std::string& p) {
    int trunk = x;
    for (int i = 0; i < 3; ++i) {
      trunk = residual_unit(trunk, ch, p + ".trunk" + std::to_string(i + 1));
    }
    int m = x;
    for (int i = 0; i < 3; ++i) {
      m = residual_unit(m, ch, p + ".mask" + std::to_string(i + 1));
    }
    m = emit_conv(m, ch, ch, 1, 1, false, p + ".mask_conv1x1");
    m = emit(OpKind::Sigmoid, m, -1, p + ".mask_sigmoid");
    int gated = emit(OpKind::Mul, trunk, m, p + ".gate");
    return emit(OpKind::Add, x, gated, p + ".add");
  }
};

}  // namespace

Program compile(const NetworkSpec& spec) {
  Builder b;
  b.prog.input_slot = b.new_slot();
  int cur = b.prog.input_slot;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& l = spec.layers[li];
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s.%02zu", role_name(spec.role), li);
    const std::string p(buf);
    switch (l.kind) {
      case LayerKind::Conv:
        cur = b.emit_conv(cur, l.out_ch, l.in_ch, l.kernel, l.stride, false,
                          p + ".conv");
        break;
      case LayerKind::MaskedConv:
        require(l.kernel == 5, "compile: masked conv kernel must be 5");
        cur = b.emit_conv(cur, l.out_ch, l.in_ch, 5, 1, true, p + ".masked");
        break;
      case LayerKind::SubpelConv: {
        require(l.stride == 2, "compile: subpel conv stride must be 2");
        cur = b.emit_conv(cur, l.out_ch * 4, l.in_ch, l.kernel, 1, false,
                          p + ".subpel");
        cur = b.emit_shuffle(cur, p + ".shuffle");
        break;
      }
      case LayerKind::LeakyReLU:
        cur = b.emit_leaky(cur, p + ".lrelu");
        break;
      case LayerKind::RB:
        cur = b.residual_block(cur, l.in_ch, l.out_ch, l.stride, p + ".rb");
        break;
      case LayerKind::RBU:
        cur = b.residual_block_up(cur, l.in_ch, l.out_ch, p + ".rbu");
        break;
      case LayerKind::AB:
        require(l.in_ch == l.out_ch, "compile: AB must preserve channels");
        cur = b.attention_block(cur, l.in_ch, p + ".ab");
        break;
    }
  }
  b.prog.output_slot = cur;
  return b.prog;
}

// ---------------------------------------------------------------------------
// Parameters

ParamStore init_params(const Program& prog, std::uint64_t seed,
                       double gain) {
  ParamStore store;
  store.seed = seed;
  store.kernels.reserve(prog.params.size());
  for (std::size_t pi = 0; pi < prog.params.size(); ++pi) {
    const KernelShape& s = prog.params[pi];
    ConvKernel k(s.out_ch, s.in_ch, s.kh, s.kw);
    std::mt19937_64 rng(stream_seed(seed, pi));
    const double bound = gain *
        std::sqrt(6.0 / (static_cast<double>(s.in_ch) * s.kh * s.kw));
    for (double& v : k.w) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = (2.0 * u - 1.0) * bound;
    }
    if (s.masked) {
      for (int o = 0; o < k.out_ch; ++o)
        for (int i = 0; i < k.in_ch; ++i)
          for (int ky = 0; ky < k.kh; ++ky)
            for (int kx = 0; kx < k.kw; ++kx)
              if (!mask_a_keeps(ky, kx, k.kh, k.kw)) k.wat(o, i, ky, kx) = 0.0;
    }
    store.kernels.push_back(std::move(k));
  }
  return store;
}

ParamStore zero_params(const Program& prog) {
  ParamStore store;
  store.kernels.reserve(prog.params.size());
  for (const KernelShape& s : prog.params) {
    store.kernels.emplace_back(s.out_ch, s.in_ch, s.kh, s.kw);
  }
  return store;
}

std::vector<Tensor> forward_cached(const Program& prog,
                                   const ParamStore& params, const Tensor& x) {
  internal_check(params.kernels.size() == prog.params.size(),
                 "forward: param store does not match program");
  std::vector<Tensor> slots(prog.n_slots);
  slots[prog.input_slot] = x;
  for (const PrimOp& op : prog.ops) {
    const Tensor& a = slots[op.in0];
    switch (op.kind) {
      case OpKind::Conv:
        slots[op.out] = conv2d(a, params.kernels[op.param], op.stride,
                               op.masked ? MaskType::A : MaskType::None);
        break;
      case OpKind::Leaky:
        slots[op.out] = leaky_relu(a, op.slope);
        break;
      case OpKind::Sigmoid:
        slots[op.out] = sigmoid(a);
        break;
      case OpKind::Shuffle:
        slots[op.out] = pixel_shuffle(a, op.shuffle_r);
        break;
      case OpKind::Add:
        slots[op.out] = add(a, slots[op.in1]);
        break;
      case OpKind::Mul:
        slots[op.out] = mul(a, slots[op.in1]);
        break;
    }
  }
  return slots;
}

Tensor forward(const Program& prog, const ParamStore& params,
               const Tensor& x) {
  auto slots = forward_cached(prog, params, x);
  return std::move(slots[prog.output_slot]);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[4] = {'C', 'C', 'S', 'W'};

void put_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f32_array(std::ostream& os, const std::vector<double>& vals) {
  for (double d : vals) {
    const float f = static_cast<float>(d);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
  }
}

void get_f32_array(std::istream& is, std::vector<double>& vals) {
  for (double& d : vals) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t u = 0;
    for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    float f;
    std::memcpy(&f, &u, 4);
    d = static_cast<double>(f);
  }
}

}  // namespace

void save_params(const std::string& path, const NetworkSpec& spec,
                 const Program& prog, const ParamStore& params) {
  internal_check(params.kernels.size() == prog.params.size(),
                 "save_params: store does not match program");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("save_params: cannot open " + path);
  os.write(kMagic, 4);
  os.put(static_cast<char>(spec.role));
  put_u16(os, static_cast<std::uint16_t>(spec.n));
  put_u16(os, static_cast<std::uint16_t>(spec.m));
  put_u64(os, params.seed);
  for (const ConvKernel& k : params.kernels) {
    put_f32_array(os, k.w);
    put_f32_array(os, k.b);
  }
  if (!os) throw IoError("save_params: write failed for " + path);
}

ParamStore load_params(const std::string& path, const NetworkSpec& spec,
                       const Program& prog) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_params: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("load_params: bad magic in " + path);
  const int role = is.get();
  const int n = get_u16(is);
  const int m = get_u16(is);
  const std::uint64_t seed = get_u64(is);
  if (role != static_cast<int>(spec.role) || n != spec.n || m != spec.m)
    throw DataError("load_params: header does not match network spec: " + path);

  ParamStore store;
  store.seed = seed;
  store.kernels.reserve(prog.params.size());
  for (const KernelShape& s : prog.params) {
    ConvKernel k(s.out_ch, s.in_ch, s.kh, s.kw);
    get_f32_array(is, k.w);
    get_f32_array(is, k.b);
    store.kernels.push_back(std::move(k));
  }
  if (!is) throw DataError("load_params: truncated file " + path);
  is.peek();
  if (!is.eof()) throw DataError("load_params: trailing bytes in " + path);
  return store;
}

}  // namespace ccs
