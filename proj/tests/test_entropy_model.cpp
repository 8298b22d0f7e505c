// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "ccs/entropy.hpp"
#include "ccs/nn.hpp"

using namespace ccs;

TEST_CASE("quantize_latent rounds half to even") {
  Tensor x(1, 1, 4);
  x.data = {1.4, -1.5, 0.5, 2.5};
  Tensor y = quantize_latent(x, QuantMode::Round);
  CHECK(y.data[0] == 1.0);
  CHECK(y.data[1] == -2.0);
  CHECK(y.data[2] == 0.0);
  CHECK(y.data[3] == 2.0);
}

TEST_CASE("noise quantization is seeded and bounded") {
  std::mt19937_64 rng(1);
  Tensor x(4, 4, 3);
  for (double& v : x.data) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  Tensor a = quantize_latent(x, QuantMode::Noise, 99);
  Tensor b = quantize_latent(x, QuantMode::Noise, 99);
  Tensor c = quantize_latent(x, QuantMode::Noise, 100);
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);
  for (std::size_t i = 0; i < x.data.size(); ++i)
    CHECK(std::abs(a.data[i] - x.data[i]) < 0.5);
}

TEST_CASE("gaussian bin likelihood at the mean, unit sigma") {
  // Phi(0.5) - Phi(-0.5), frozen from the standard normal CDF.
  const double expect = std_normal_cdf(0.5) - std_normal_cdf(-0.5);
  CHECK(expect == doctest::Approx(0.3829249).epsilon(1e-6));
  CHECK(gaussian_bin_likelihood(0, 0.0, 1.0) == doctest::Approx(expect));
  CHECK(gaussian_bin_likelihood(3, 3.0, 1.0) == doctest::Approx(expect));
}

TEST_CASE("gaussian likelihood spreads monotonically with sigma") {
  double prev = gaussian_bin_likelihood(0, 0.0, 0.5);
  for (double sigma : {1.0, 2.0, 4.0, 16.0, 64.0}) {
    const double cur = gaussian_bin_likelihood(0, 0.0, sigma);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("gaussian likelihood normalizes over the integers") {
  double sum = 0.0;
  for (int v = -1000; v <= 1000; ++v) {
    const double hi = std_normal_cdf((v + 0.5) / 2.0);
    const double lo = std_normal_cdf((v - 0.5) / 2.0);
    sum += hi - lo;  // un-floored mass
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("split_gather_output: zero network gives mu 0, sigma softplus(0)") {
  const int n = 64;
  Tensor g(2, 2, 3 * n, 0.0);
  GaussianField f = split_gather_output(g, n);
  CHECK(f.mu.c == n);
  CHECK(f.sigma.c == n);
  const double sp0 = std::max(softplus(0.0), kSigmaFloor);
  for (double v : f.mu.data) CHECK(v == 0.0);
  for (double v : f.sigma.data) CHECK(v == doctest::Approx(sp0));
  // K=1 mixture: the weight block softmaxes to one by construction.
  CHECK(g.c == 192 * 1);  // 3N channels for N=64
}

TEST_CASE("factorized model: uniform at init, exact unit mass") {
  FactorizedModel fm(4, 16);
  const auto pmf = fm.pmf(0);
  CHECK(static_cast<int>(pmf.size()) == 33);
  for (double p : pmf) CHECK(p == doctest::Approx(1.0 / 33.0));
  double sum = 0.0;
  for (int v = -16; v <= 16; ++v) sum += fm.likelihood(v, 1);
  CHECK(sum == doctest::Approx(1.0));
  // Out-of-support values fold into the extreme buckets.
  CHECK(fm.likelihood(40, 0) == fm.likelihood(16, 0));
  for (double p : pmf) CHECK(p >= 0.0);
}

TEST_CASE("factorized real-argument likelihood matches integers") {
  FactorizedModel fm(2, 8);
  std::mt19937_64 rng(7);
  for (double& k : fm.knots) k = 0.2 * (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5);
  for (int v = -8; v <= 8; ++v) {
    CHECK(fm.likelihood_real(v, 0) == doctest::Approx(fm.likelihood(v, 0)));
  }
  // Mass over the support integrates to one (outside it, the probability
  // floor takes over by design).
  double sum = 0.0;
  for (int v = -8; v <= 8; ++v) sum += fm.likelihood_real(v, 1);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("factorized model file round trip") {
  FactorizedModel fm(3, 16);
  std::mt19937_64 rng(8);
  for (double& k : fm.knots) k = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  const std::string path = "test_fm_roundtrip.bin";
  fm.save(path);
  FactorizedModel back = FactorizedModel::load(path);
  CHECK(back.channels == 3);
  CHECK(back.support == 16);
  // float32 storage: a second save/load reproduces exactly.
  back.save(path);
  FactorizedModel again = FactorizedModel::load(path);
  CHECK(again.knots == back.knots);
  std::remove(path.c_str());
}

TEST_CASE("scale table: strictly increasing, lookup is nearest level above") {
  ScaleTable st = ScaleTable::make();
  REQUIRE(st.size() == 64);
  CHECK(st.levels.front() == doctest::Approx(0.11));
  CHECK(st.levels.back() == doctest::Approx(256.0));
  for (int i = 1; i < st.size(); ++i) CHECK(st.levels[i] > st.levels[i - 1]);
  for (double sigma : {0.01, 0.11, 0.5, 3.7, 255.0, 300.0}) {
    const int idx = st.lookup(sigma);
    CHECK(st.level(idx) >= std::min(sigma, 256.0));
    if (idx > 0) CHECK(st.level(idx - 1) < sigma);
  }
}

TEST_CASE("rate_estimate basics") {
  std::vector<double> probs(1000, 1.0 / 256.0);
  CHECK(rate_estimate(probs) == doctest::Approx(8000.0));
  std::vector<double> sure(50, 1.0);
  CHECK(rate_estimate(sure) == doctest::Approx(0.0));
  CHECK_THROWS_AS(rate_estimate({0.0}), DataError);
  CHECK_THROWS_AS(rate_estimate({1.5}), DataError);
}

TEST_CASE("rate estimate tracks real coded length on a Gaussian field") {
  std::mt19937_64 rng(9);
  const int count = 20000;
  std::vector<int> symbols(count);
  std::vector<CdfTable> tables(count);
  double est_bits = 0.0;
  const ScaleTable st = ScaleTable::make();
  std::vector<CdfTable> level_tables(st.size());
  std::vector<bool> built(st.size(), false);
  for (int i = 0; i < count; ++i) {
    const double sigma = 0.5 + 4.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    const int lvl = st.lookup(sigma);
    if (!built[lvl]) {
      level_tables[lvl] = gaussian_residual_table(st.level(lvl));
      built[lvl] = true;
    }
    const CdfTable& t = level_tables[lvl];
    // Sample a residual from the table itself.
    const std::uint32_t f = static_cast<std::uint32_t>(rng() % kFreqTotal);
    const auto it = std::upper_bound(t.cum.begin(), t.cum.end(), f);
    const int idx = static_cast<int>(it - t.cum.begin()) - 1;
    symbols[i] = idx + t.offset;
    tables[i] = t;
    est_bits -= std::log2((t.cum[idx + 1] - t.cum[idx]) / 65536.0);
  }
  auto bytes = rc_encode(symbols, tables);
  const double actual = 8.0 * static_cast<double>(bytes.size());
  CHECK(actual <= est_bits * 1.01 + 8.0 * 32.0);
  CHECK(rc_decode(bytes, tables) == symbols);
}

TEST_CASE("gaussian residual tables are valid at extreme scales") {
  for (double sigma : {0.11, 1.0, 17.0, 256.0}) {
    CdfTable t = gaussian_residual_table(sigma);
    CHECK(t.offset == -kResidualBound);
    CHECK(t.symbol_count() == 2 * kResidualBound + 1);
    CHECK(t.cum.back() == kFreqTotal);
    for (std::size_t i = 1; i < t.cum.size(); ++i) CHECK(t.cum[i] > t.cum[i - 1]);
  }
}

TEST_CASE("quantize_clamp bounds the latents") {
  Tensor x(1, 1, 3);
  x.data = {300.7, -999.0, 12.4};
  Tensor y = quantize_clamp(x, 255);
  CHECK(y.data[0] == 255.0);
  CHECK(y.data[1] == -255.0);
  CHECK(y.data[2] == 12.0);
}
