// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ccs/color.hpp"

namespace ccs {

constexpr double kPsnrCap = 99.0;

/// RGB PSNR in dB, MSE pooled over all three channels; identical images
/// report the 99 dB cap.
double psnr_rgb(const ImageRGB& a, const ImageRGB& b);

struct RDPoint {
  double rate_bpp = 0.0;
  double psnr_db = 0.0;
};

using RDCurve = std::vector<RDPoint>;

struct BdRateResult {
  double percent = 0.0;
  double max_fit_residual_db = 0.0;  // in quality units, against the fit
  bool fit_warning = false;          // residual above 0.5 dB
};

/// Classical Bjontegaard delta rate: cubic fit of log-rate over quality,
/// averaged horizontal gap over the overlapping quality interval.
/// Positive = `test` spends more rate than `anchor` at equal quality.
BdRateResult bd_rate(const RDCurve& anchor, const RDCurve& test);

/// CSV with header "rate_bpp,psnr_db", one point per row.
RDCurve read_rd_csv(const std::string& path);
void write_rd_csv(const std::string& path, const RDCurve& curve);

}  // namespace ccs
