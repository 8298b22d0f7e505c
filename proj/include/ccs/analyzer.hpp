// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ccs/nn.hpp"
#include "ccs/pipeline.hpp"

namespace ccs {

struct LayerCost {
  std::string name;       // primitive op name, e.g. "encoder.03.ab.trunk1.conv1x1_a"
  std::string role;       // encoder / decoder / ...
  std::string component;  // y / uv / rgb
  double macs = 0.0;
  std::uint64_t params = 0;
};

struct MacReport {
  std::string config;
  int input_h = 0;
  int input_w = 0;
  std::vector<LayerCost> layers;
  double total_macs = 0.0;
  std::uint64_t total_params = 0;

  double kmac_per_px() const {
    return total_macs / (static_cast<double>(input_h) * input_w * 1000.0);
  }
  std::uint64_t param_bytes() const { return 4 * total_params; }
};

/// Per-layer multiply-accumulate counts for one compiled network given its
/// input resolution. Masked convolutions count unmasked taps only; biases,
/// activations and pooling count zero.
std::vector<LayerCost> count_network(const Program& prog,
                                     const std::string& role,
                                     const std::string& component, int in_h,
                                     int in_w, int in_c);

/// Full static accounting for a preset on an input of h x w pixels.
MacReport count_macs(const ModelConfig& cfg, int h, int w);

/// Parameter count only (resolution independent).
std::uint64_t count_params(const ModelConfig& cfg);

void write_report_csv(std::ostream& os, const MacReport& report);
void write_report_text(std::ostream& os, const MacReport& report);

}  // namespace ccs
