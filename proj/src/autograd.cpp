// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#include "ccs/autograd.hpp"

#include <algorithm>

namespace ccs {

ParamGrads ParamGrads::zeros_like(const Program& prog) {
  ParamGrads g;
  g.kernels.reserve(prog.params.size());
  for (const KernelShape& s : prog.params) {
    g.kernels.emplace_back(s.out_ch, s.in_ch, s.kh, s.kw);
  }
  return g;
}

void ParamGrads::add_scaled(const ParamGrads& other, double scale) {
  internal_check(kernels.size() == other.kernels.size(),
                 "param grads: shape mismatch");
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    for (std::size_t i = 0; i < kernels[k].w.size(); ++i)
      kernels[k].w[i] += scale * other.kernels[k].w[i];
    for (std::size_t i = 0; i < kernels[k].b.size(); ++i)
      kernels[k].b[i] += scale * other.kernels[k].b[i];
  }
}

void ParamGrads::scale(double s) {
  for (auto& k : kernels) {
    for (double& v : k.w) v *= s;
    for (double& v : k.b) v *= s;
  }
}

void conv2d_backward(const Tensor& x, const ConvKernel& k, int stride,
                     MaskType mask, const Tensor& grad_out, Tensor& grad_x,
                     ConvKernel& grad_k) {
  const int oh = grad_out.h;
  const int ow = grad_out.w;
  const int pad_top = std::max((oh - 1) * stride + k.kh - x.h, 0) / 2;
  const int pad_left = std::max((ow - 1) * stride + k.kw - x.w, 0) / 2;

  if (!grad_x.same_shape(x)) grad_x = Tensor(x.h, x.w, x.c);
  for (int oy = 0; oy < oh; ++oy) {
    const int iy0 = oy * stride - pad_top;
    for (int ox = 0; ox < ow; ++ox) {
      const int ix0 = ox * stride - pad_left;
      const double* go = grad_out.row(oy, ox);
      for (int o = 0; o < k.out_ch; ++o) grad_k.b[o] += go[o];
      const int ky_lo = std::max(0, -iy0);
      const int ky_hi = std::min(k.kh, x.h - iy0);
      const int kx_lo = std::max(0, -ix0);
      const int kx_hi = std::min(k.kw, x.w - ix0);
      for (int ky = ky_lo; ky < ky_hi; ++ky) {
        for (int kx = kx_lo; kx < kx_hi; ++kx) {
          if (mask == MaskType::A && !mask_a_keeps(ky, kx, k.kh, k.kw))
            continue;
          const double* xr = x.row(iy0 + ky, ix0 + kx);
          double* gxr = grad_x.row(iy0 + ky, ix0 + kx);
          for (int i = 0; i < k.in_ch; ++i) {
            const double xv = xr[i];
            double gx_acc = 0.0;
            for (int o = 0; o < k.out_ch; ++o) {
              const double g = go[o];
              gx_acc += k.wat(o, i, ky, kx) * g;
              grad_k.wat(o, i, ky, kx) += xv * g;
            }
            gxr[i] += gx_acc;
          }
        }
      }
    }
  }
}

Tensor backward(const Program& prog, const ParamStore& params,
                const std::vector<Tensor>& slots, const Tensor& grad_out,
                ParamGrads& grads) {
  internal_check(slots.size() == static_cast<std::size_t>(prog.n_slots),
                 "backward: slot cache does not match program");
  internal_check(grads.kernels.size() == prog.params.size(),
                 "backward: grad store does not match program");
  std::vector<Tensor> gslots(prog.n_slots);
  gslots[prog.output_slot] = grad_out;

  auto accumulate = [&](int slot, Tensor&& g) {
    if (gslots[slot].size() == 0) {
      gslots[slot] = std::move(g);
    } else {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        gslots[slot].data[i] += g.data[i];
    }
  };

  for (auto it = prog.ops.rbegin(); it != prog.ops.rend(); ++it) {
    const PrimOp& op = *it;
    Tensor& g = gslots[op.out];
    if (g.size() == 0) continue;  // this branch does not reach the loss
    switch (op.kind) {
      case OpKind::Conv: {
        Tensor gx;
        conv2d_backward(slots[op.in0], params.kernels[op.param], op.stride,
                        op.masked ? MaskType::A : MaskType::None, g, gx,
                        grads.kernels[op.param]);
        accumulate(op.in0, std::move(gx));
        break;
      }
      case OpKind::Leaky: {
        Tensor gx = g;
        const Tensor& x = slots[op.in0];
        for (std::size_t i = 0; i < gx.data.size(); ++i)
          if (x.data[i] < 0.0) gx.data[i] *= op.slope;
        accumulate(op.in0, std::move(gx));
        break;
      }
      case OpKind::Sigmoid: {
        Tensor gx = g;
        const Tensor& s = slots[op.out];
        for (std::size_t i = 0; i < gx.data.size(); ++i)
          gx.data[i] *= s.data[i] * (1.0 - s.data[i]);
        accumulate(op.in0, std::move(gx));
        break;
      }
      case OpKind::Shuffle:
        accumulate(op.in0, pixel_unshuffle(g, op.shuffle_r));
        break;
      case OpKind::Add: {
        Tensor g2 = g;
        accumulate(op.in0, std::move(g2));
        accumulate(op.in1, std::move(g));
        break;
      }
      case OpKind::Mul: {
        accumulate(op.in0, mul(g, slots[op.in1]));
        accumulate(op.in1, mul(g, slots[op.in0]));
        break;
      }
    }
    // op.out's gradient is fully consumed; release the memory early.
    gslots[op.out] = Tensor();
  }
  Tensor gin = std::move(gslots[prog.input_slot]);
  if (gin.size() == 0) {
    const Tensor& x = slots[prog.input_slot];
    gin = Tensor(x.h, x.w, x.c);
  }
  return gin;
}

}  // namespace ccs
