// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccs/autograd.hpp"
#include "ccs/entropy.hpp"
#include "ccs/pipeline.hpp"

namespace ccs {

/// L = lambda * 255^2 * D + R / pixels. D is MSE on [0,1]-scaled samples,
/// R is in bits.
double rd_loss(double lambda, double d, double r_bits, int pixels = 1);

struct MicroConfig {
  int n_y = 8;
  int n_uv = 8;
  int patch = 16;           // luma patch edge; chroma is generated at half
  int latent_support = 16;  // S of the micro factorized models
  int lambda_id = 2;
  int steps = 2000;
  double lr = 1e-4;
  int batch = 4;
  std::uint64_t seed = 1;
  bool conditional = true;
  bool use_context = false;  // context model inside the training graph
  double corr = 0.9;
  int dataset_size = 192;    // training patches; held-out drawn separately

  double lambda() const { return kLambdaSet[lambda_id]; }
};

/// One synthetic patch: luma at patch size, chroma at half resolution.
struct YuvPatch {
  Tensor y;  // patch x patch x 1
  Tensor u;  // patch/2 x patch/2 x 1
  Tensor v;
};

/// Smoothed-noise luma; chroma mixes an affine map of the down-sampled luma
/// with independent smoothed noise, weighted by `corr`.
std::vector<YuvPatch> synth_dataset(std::uint64_t seed, int count, double corr,
                                    int patch = 16);

/// The micro two-component model: same column layout as the full codec at
/// widths 4-8. At this scale the chroma planes are nearest-upsampled onto
/// the luma grid, so both down-sampling handoffs become identity.
struct MicroModel {
  MicroConfig cfg;
  ComponentNets y, uv;

  static MicroModel create(const MicroConfig& cfg);
  void init_random(std::uint64_t seed);
  void save_dir(const std::string& dir) const;
};

struct LossMetrics {
  double loss = 0.0;
  double d = 0.0;       // pooled MSE over all reconstructed samples
  double d_uv = 0.0;    // MSE over the chroma samples only
  double r_y = 0.0;     // bits per luma pixel, Y substreams
  double r_uv = 0.0;    // bits per luma pixel, UV substreams
};

/// Differentiable rate-distortion loss over a batch (noise-mode
/// quantization). When `hazard_hash` is given it accumulates the
/// activation-sign / floor / CDF-segment structure of the evaluation, which
/// grad_check uses to recognize finite-difference steps that cross a kink.
LossMetrics micro_loss(const MicroModel& model,
                       const std::vector<YuvPatch>& batch, double lambda,
                       std::uint64_t noise_seed,
                       std::uint64_t* hazard_hash = nullptr);

/// Loss plus exact reverse-mode gradients for every parameter, flattened in
/// the model's canonical parameter order.
LossMetrics micro_loss_grad(const MicroModel& model,
                            const std::vector<YuvPatch>& batch, double lambda,
                            std::uint64_t noise_seed,
                            std::vector<double>& grad_out);

/// Pointers to every learnable scalar, canonical order (shared by the
/// optimizer, the gradient check, and micro_loss_grad).
std::vector<double*> collect_params(MicroModel& model);

struct GradCheckResult {
  double max_rel_err = 0.0;
  int checked = 0;
  int skipped = 0;  // samples whose FD steps crossed a non-smooth point
};

/// Central finite differences against the analytic gradients on a random
/// parameter sample. Noise is held fixed across the two evaluations.
GradCheckResult grad_check(MicroModel& model,
                           const std::vector<YuvPatch>& batch, double lambda,
                           double eps, int sample_target,
                           std::uint64_t sample_seed = 7);

struct HistoryRow {
  int step = 0;
  double d = 0.0;
  double r_y = 0.0;
  double r_uv = 0.0;
  double loss = 0.0;
};

struct TrainState {
  MicroModel model;
  std::vector<double> m1, m2;  // Adam moments over the flat parameter order
  int step = 0;
  std::vector<HistoryRow> history;
};

/// Adam on the micro rate-distortion objective; deterministic for a given
/// config. Throws DataError naming the step if the loss leaves the reals.
TrainState train_micro(const MicroConfig& cfg, bool conditional);

void write_history_csv(const std::string& path,
                       const std::vector<HistoryRow>& history);

/// Held-out metrics with hard rounding (evaluation-mode quantization).
LossMetrics micro_eval(const MicroModel& model,
                       const std::vector<YuvPatch>& heldout, double lambda);

struct CompareResult {
  double rate_uv_ccs = 0.0;
  double rate_uv_nc = 0.0;
  double dist_uv_ccs = 0.0;
  double dist_uv_nc = 0.0;
  bool distortion_matched = false;  // within 5% relative, or CCS dominates
};

/// Trains the conditional and non-conditional micro models on identical
/// data and reports held-out UV rate and distortion for both.
CompareResult compare_ccs_nc(std::uint64_t seed, const MicroConfig& cfg);

}  // namespace ccs
