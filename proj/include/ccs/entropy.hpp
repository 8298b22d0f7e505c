// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccs/range_coder.hpp"
#include "ccs/tensor.hpp"

namespace ccs {

constexpr double kSigmaFloor = 0.04;
constexpr double kProbFloor = 0x1.0p-16;
constexpr int kLatentBound = 255;      // main latents live in [-255, 255]
constexpr int kResidualBound = 510;    // latent minus rounded mean

enum class QuantMode { Round, Noise };

/// Round mode: elementwise round-half-to-even. Noise mode: adds seeded
/// uniform noise in [-0.5, 0.5).
Tensor quantize_latent(const Tensor& x, QuantMode mode, std::uint64_t seed = 0);

/// Rounds then clamps into [-bound, bound]; the integerized latents that
/// enter the entropy coder.
Tensor quantize_clamp(const Tensor& x, int bound);

double std_normal_cdf(double x);

/// P(round(y) = v) under y ~ N(mu, sigma^2), floored at 2^-16.
double gaussian_bin_likelihood(int v, double mu, double sigma);

/// Mean/scale field parameterizing the conditional Gaussian of one latent.
struct GaussianField {
  Tensor mu;
  Tensor sigma;  // >= kSigmaFloor everywhere
};

/// Splits a gather-network output (3N channels) into the K=1 mixture
/// reading: mu, softplus-floored sigma, and a weight block that softmaxes
/// to one. Only mu/sigma feed the coder.
GaussianField split_gather_output(const Tensor& g, int n);

double softplus(double x);

/// Per-channel learned pmf over [-S, S]; bin masses are the softmax of the
/// raw knot values, so the implied piecewise-linear CDF is monotone with
/// pinned endpoints.
struct FactorizedModel {
  int channels = 0;
  int support = 64;  // S
  std::vector<double> knots;  // channels * (2S+1), raw logits

  FactorizedModel() = default;
  FactorizedModel(int channels_, int support_);

  int bins() const { return 2 * support + 1; }
  std::vector<double> pmf(int channel) const;
  /// CDF(v + 0.5) - CDF(v - 0.5) for integer v, clamped to support,
  /// floored at 2^-16.
  double likelihood(int v, int channel) const;
  /// Same quantity for a real-valued argument (training path); the CDF is
  /// piecewise linear between half-integer knots.
  double likelihood_real(double v, int channel) const;
  CdfTable cdf_table(int channel) const;

  void save(const std::string& path) const;
  static FactorizedModel load(const std::string& path);
};

/// 64 log-spaced sigma levels; lookup returns the nearest level >= sigma.
struct ScaleTable {
  std::vector<double> levels;

  static ScaleTable make(int count = 64, double lo = 0.11, double hi = 256.0);
  int lookup(double sigma) const;
  double level(int idx) const { return levels[idx]; }
  int size() const { return static_cast<int>(levels.size()); }
};

/// Zero-mean Gaussian table over residuals [-510, 510] at one scale level;
/// tail mass folds into the extreme bins.
CdfTable gaussian_residual_table(double sigma);

/// -sum log2 p over the supplied per-element probabilities.
double rate_estimate(const std::vector<double>& probs);

}  // namespace ccs
