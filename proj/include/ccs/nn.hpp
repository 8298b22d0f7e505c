// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccs/tensor.hpp"

namespace ccs {

enum class LayerKind { Conv, SubpelConv, MaskedConv, LeakyReLU, RB, RBU, AB };

enum class Role {
  Encoder,
  Decoder,
  HyperEncoder,
  HyperDecoder,
  Context,
  Gather,
  Factorized,  // persistence tag for entropy-model knots, not a layer stack
};

const char* role_name(Role role);

/// One row of a network column: a block or a plain layer.
struct LayerSpec {
  LayerKind kind;
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 3;
  int stride = 1;
};

/// Ordered layer description of one network column for channel width N.
struct NetworkSpec {
  Role role = Role::Encoder;
  int n = 0;       // channel width N
  int m = 0;       // decoder first-layer channels (M), 0 elsewhere
  int in_ch = 0;   // channels consumed by the first layer
  int out_ch = 0;  // channels produced by the last layer
  std::vector<LayerSpec> layers;
};

/// Builds the layer stack for `role` at width `n`. `m` is consumed only by
/// the decoder (its first attention block runs over M channels), `out_ch`
/// only by the decoder's final up-sampling convolution.
NetworkSpec build_network(Role role, int n, int m = 0, int out_ch = 0,
                          int in_ch = 0);

/// Nearest-integer rule for the fractional gather widths (11/3)N, (10/3)N.
int gather_width(int numerator, int n);

// ---------------------------------------------------------------------------
// Compiled form: blocks expanded into primitive ops over value slots.

enum class OpKind { Conv, Leaky, Sigmoid, Shuffle, Add, Mul };

struct PrimOp {
  OpKind kind;
  int in0 = -1;
  int in1 = -1;   // second operand for Add/Mul
  int out = -1;
  int param = -1;  // index into ParamStore for Conv ops
  int stride = 1;
  int shuffle_r = 2;
  bool masked = false;
  double slope = 0.01;
  std::string name;
};

struct KernelShape {
  int out_ch = 0;
  int in_ch = 0;
  int kh = 0;
  int kw = 0;
  bool masked = false;
  std::string name;
};

struct Program {
  std::vector<PrimOp> ops;
  std::vector<KernelShape> params;
  int n_slots = 0;
  int input_slot = 0;
  int output_slot = 0;
};

/// Expands RB/RBU/AB blocks into primitive convolutions and activations.
Program compile(const NetworkSpec& spec);

/// Learned weights for one compiled program, one kernel per Conv op.
struct ParamStore {
  std::vector<ConvKernel> kernels;
  std::uint64_t seed = 0;

  std::size_t param_count() const {
    std::size_t total = 0;
    for (const auto& k : kernels) total += k.param_count();
    return total;
  }
};

/// Deterministic fan-in-scaled uniform init; biases and masked taps zero.
/// `gain` scales the uniform bound sqrt(gain^2 * 6 / fan_in); the default
/// keeps activation variance roughly flat through the residual stacks.
ParamStore init_params(const Program& prog, std::uint64_t seed,
                       double gain = 1.0);

/// All-zero kernels of the right shapes (placeholder until init or load).
ParamStore zero_params(const Program& prog);

/// Applies the compiled ops in order and returns the final slot.
Tensor forward(const Program& prog, const ParamStore& params, const Tensor& x);

/// Like forward but keeps every slot value (needed for reverse mode).
std::vector<Tensor> forward_cached(const Program& prog,
                                   const ParamStore& params, const Tensor& x);

// Flat binary weight file: magic "CCSW", role tag, N, M, seed, then each
// kernel's weights and bias as little-endian float32 in layer order.
void save_params(const std::string& path, const NetworkSpec& spec,
                 const Program& prog, const ParamStore& params);
ParamStore load_params(const std::string& path, const NetworkSpec& spec,
                       const Program& prog);

}  // namespace ccs
