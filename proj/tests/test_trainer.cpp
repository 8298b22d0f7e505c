// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "ccs/trainer.hpp"

using namespace ccs;

TEST_CASE("rd_loss follows the printed objective") {
  CHECK(rd_loss(0.0, 0.0, 0.0) == 0.0);
  CHECK(rd_loss(0.002, 0.001, 1.0) == doctest::Approx(1.13005));
  // Strictly increasing in each argument.
  CHECK(rd_loss(0.002, 0.002, 1.0) > rd_loss(0.002, 0.001, 1.0));
  CHECK(rd_loss(0.002, 0.001, 1.5) > rd_loss(0.002, 0.001, 1.0));
  // The partial derivative in D is lambda * 255^2.
  const double eps = 1e-6;
  const double fd =
      (rd_loss(0.007, 0.5 + eps, 2.0) - rd_loss(0.007, 0.5 - eps, 2.0)) /
      (2.0 * eps);
  CHECK(fd == doctest::Approx(0.007 * 65025.0).epsilon(1e-9));
  CHECK_THROWS_AS(rd_loss(0.002, -1.0, 0.0), DataError);
}

TEST_CASE("synthetic dataset correlation tracks the corr knob") {
  auto correlation = [](const std::vector<YuvPatch>& ds) {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    std::size_t n = 0;
    for (const YuvPatch& p : ds) {
      const Tensor dsy = avg_downsample2(p.y);
      for (std::size_t i = 0; i < dsy.data.size(); ++i) {
        const double x = dsy.data[i];
        const double y = p.u.data[i];
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
        ++n;
      }
    }
    const double num = n * sxy - sx * sy;
    const double den =
        std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    return num / den;
  };
  const auto zero = synth_dataset(11, 1000, 0.0);
  const auto one = synth_dataset(11, 1000, 1.0);
  CHECK(std::abs(correlation(zero)) < 0.05);
  CHECK(correlation(one) > 0.95);

  const auto a = synth_dataset(42, 10, 0.5);
  const auto b = synth_dataset(42, 10, 0.5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].y.data == b[i].y.data);
    CHECK(a[i].u.data == b[i].u.data);
  }
  for (const YuvPatch& p : one) {
    for (double v : p.u.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("linear chain: analytic gradients are exact to rounding") {
  // Two stacked convolutions, no activations, quadratic loss; central
  // differences of a quadratic are exact up to floating-point noise.
  NetworkSpec s;
  s.role = Role::Encoder;
  s.n = 3;
  s.in_ch = 2;
  s.out_ch = 3;
  s.layers = {{LayerKind::Conv, 2, 4, 3, 1}, {LayerKind::Conv, 4, 3, 3, 2}};
  auto prog = compile(s);
  auto w = init_params(prog, 5);
  std::mt19937_64 rng(6);
  Tensor x(6, 6, 2);
  for (double& v : x.data) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  Tensor target(3, 3, 3, 0.2);

  auto loss_of = [&]() {
    Tensor out = forward(prog, w, x);
    double l = 0.0;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      const double d = out.data[i] - target.data[i];
      l += 0.5 * d * d;
    }
    return l;
  };

  auto slots = forward_cached(prog, w, x);
  const Tensor& out = slots[prog.output_slot];
  Tensor gout = out;
  for (std::size_t i = 0; i < gout.data.size(); ++i)
    gout.data[i] = out.data[i] - target.data[i];
  ParamGrads grads = ParamGrads::zeros_like(prog);
  backward(prog, w, slots, gout, grads);

  const double eps = 1e-4;
  double max_err = 0.0;
  for (std::size_t k = 0; k < w.kernels.size(); ++k) {
    for (std::size_t i = 0; i < w.kernels[k].w.size(); i += 7) {
      double& p = w.kernels[k].w[i];
      const double orig = p;
      p = orig + eps;
      const double fp = loss_of();
      p = orig - eps;
      const double fm = loss_of();
      p = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic = grads.kernels[k].w[i];
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      max_err = std::max(max_err, std::abs(analytic - numeric) / denom);
    }
  }
  CHECK(max_err < 1e-7);
}

namespace {

MicroConfig small_cfg() {
  MicroConfig cfg;
  cfg.n_y = 4;
  cfg.n_uv = 4;
  cfg.lambda_id = 2;
  cfg.seed = 3;
  cfg.batch = 1;
  return cfg;
}

}  // namespace

TEST_CASE("grad check: full micro graph, context disabled") {
  MicroConfig cfg = small_cfg();
  cfg.use_context = false;
  MicroModel model = MicroModel::create(cfg);
  model.init_random(stream_seed(cfg.seed, 0xC0DE));
  const auto data = synth_dataset(21, 2, 0.9);
  const GradCheckResult res =
      grad_check(model, data, cfg.lambda(), 1e-4, 220);
  INFO("checked " << res.checked << " skipped " << res.skipped
                  << " max_rel_err " << res.max_rel_err);
  CHECK(res.checked >= 200);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("grad check: context model in the graph") {
  MicroConfig cfg = small_cfg();
  cfg.use_context = true;
  MicroModel model = MicroModel::create(cfg);
  model.init_random(stream_seed(cfg.seed, 0xBEEF));
  const auto data = synth_dataset(22, 2, 0.9);
  const GradCheckResult res = grad_check(model, data, cfg.lambda(), 1e-4, 80);
  INFO("checked " << res.checked << " skipped " << res.skipped
                  << " max_rel_err " << res.max_rel_err);
  CHECK(res.checked >= 60);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("grad check negative control: mismatched noise breaks it") {
  MicroConfig cfg = small_cfg();
  MicroModel model = MicroModel::create(cfg);
  model.init_random(stream_seed(cfg.seed, 0xC0DE));
  const auto data = synth_dataset(23, 2, 0.9);
  std::vector<double> analytic;
  micro_loss_grad(model, data, cfg.lambda(), 111, analytic);
  auto params = collect_params(model);
  std::mt19937_64 rng(9);
  double max_err = 0.0;
  const double eps = 1e-4;
  for (int k = 0; k < 60; ++k) {
    const std::size_t idx = rng() % params.size();
    const double orig = *params[idx];
    *params[idx] = orig + eps;
    const double fp = micro_loss(model, data, cfg.lambda(), 222).loss;
    *params[idx] = orig - eps;
    const double fm = micro_loss(model, data, cfg.lambda(), 333).loss;
    *params[idx] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double denom =
        std::max({std::abs(analytic[idx]), std::abs(numeric), 1e-8});
    max_err = std::max(max_err, std::abs(analytic[idx] - numeric) / denom);
  }
  CHECK(max_err > 1e-2);  // different noise draws swamp the derivative
}

TEST_CASE("zero input and zero weights produce null data-path gradients") {
  MicroConfig cfg = small_cfg();
  MicroModel model = MicroModel::create(cfg);
  // Leave everything zero-initialized (biases are zero too).
  YuvPatch p;
  p.y = Tensor(16, 16, 1, 0.0);
  p.u = Tensor(8, 8, 1, 0.0);
  p.v = Tensor(8, 8, 1, 0.0);
  std::vector<double> grad;
  micro_loss_grad(model, {p}, 0.0, 17, grad);
  // With lambda 0 the distortion path is inert, and with zero weights the
  // encoder output is zero everywhere, so all conv weight gradients on the
  // reconstruction path vanish. The rate path may still push biases and
  // knots, so only check that the gradient is finite and mostly zero.
  int nonzero = 0;
  for (double g : grad) {
    REQUIRE(std::isfinite(g));
    if (g != 0.0) ++nonzero;
  }
  CHECK(nonzero < static_cast<int>(grad.size()) / 4);
}

TEST_CASE("training determinism: identical config gives identical history") {
  MicroConfig cfg = small_cfg();
  cfg.steps = 12;
  const TrainState a = train_micro(cfg, true);
  const TrainState b = train_micro(cfg, true);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].loss == b.history[i].loss);
    CHECK(a.history[i].d == b.history[i].d);
  }
}

TEST_CASE("short training run reduces the loss") {
  MicroConfig cfg = small_cfg();
  cfg.steps = 400;
  cfg.lr = 1e-3;
  cfg.batch = 2;
  const TrainState st = train_micro(cfg, true);
  REQUIRE(static_cast<int>(st.history.size()) == cfg.steps);
  auto window_mean = [&](int lo, int hi) {
    double acc = 0.0;
    for (int i = lo; i < hi; ++i) acc += st.history[i].loss;
    return acc / (hi - lo);
  };
  const double early = window_mean(0, 50);
  const double late = window_mean(cfg.steps - 50, cfg.steps);
  INFO("early " << early << " late " << late);
  CHECK(late < early);
}

TEST_CASE("non-conditional path never touches the luma") {
  MicroConfig cfg = small_cfg();
  cfg.conditional = false;
  MicroModel model = MicroModel::create(cfg);
  model.init_random(stream_seed(cfg.seed, 0xAB));
  YuvPatch poisoned;
  poisoned.y = Tensor(16, 16, 1, std::numeric_limits<double>::quiet_NaN());
  poisoned.u = Tensor(8, 8, 1, 0.4);
  poisoned.v = Tensor(8, 8, 1, 0.6);
  const LossMetrics m = micro_loss(model, {poisoned}, cfg.lambda(), 5);
  CHECK(std::isfinite(m.d_uv));
  CHECK(std::isfinite(m.r_uv));
  CHECK_FALSE(std::isfinite(m.d));  // the luma path sees the poison

  // Negative control: the conditional encoder consumes Y, so the UV path
  // is poisoned as well.
  MicroConfig ccfg = small_cfg();
  ccfg.conditional = true;
  MicroModel cmodel = MicroModel::create(ccfg);
  cmodel.init_random(stream_seed(cfg.seed, 0xAB));
  const LossMetrics mc = micro_loss(cmodel, {poisoned}, ccfg.lambda(), 5);
  CHECK_FALSE(std::isfinite(mc.d_uv));
}

TEST_CASE("history csv is written with the expected header") {
  std::vector<HistoryRow> rows = {{0, 0.1, 1.0, 0.5, 8.0},
                                  {1, 0.09, 0.9, 0.45, 7.0}};
  const std::string path = "test_trainer_hist.csv";
  write_history_csv(path, rows);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "step,D,R_Y,R_UV,L");
  int count = 0;
  while (std::getline(is, line))
    if (!line.empty()) ++count;
  CHECK(count == 2);
  std::remove(path.c_str());
}

TEST_CASE("diverging run aborts with the step index") {
  MicroConfig cfg = small_cfg();
  cfg.steps = 60;
  cfg.lr = 1e6;  // absurd on purpose
  CHECK_THROWS_AS((void)train_micro(cfg, true), DataError);
}
