// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ccs/nn.hpp"

namespace ccs {

/// Gradient of a loss with respect to one program's parameters, shaped
/// exactly like the ParamStore it mirrors.
struct ParamGrads {
  std::vector<ConvKernel> kernels;

  static ParamGrads zeros_like(const Program& prog);
  void add_scaled(const ParamGrads& other, double scale);
  void scale(double s);
};

/// Reverse-mode pass over a compiled program. `slots` must come from
/// forward_cached on the same inputs. Accumulates parameter gradients into
/// `grads` and returns the gradient with respect to the program input.
Tensor backward(const Program& prog, const ParamStore& params,
                const std::vector<Tensor>& slots, const Tensor& grad_out,
                ParamGrads& grads);

/// VJP of conv2d for one kernel; used by backward and available to tests.
void conv2d_backward(const Tensor& x, const ConvKernel& k, int stride,
                     MaskType mask, const Tensor& grad_out, Tensor& grad_x,
                     ConvKernel& grad_k);

}  // namespace ccs
