// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ccs/range_coder.hpp"

using namespace ccs;

TEST_CASE("quantize_cdf: uniform over 4 symbols divides exactly") {
  CdfTable t = quantize_cdf({0.25, 0.25, 0.25, 0.25});
  REQUIRE(t.cum.size() == 5);
  for (int i = 0; i <= 4; ++i) CHECK(t.cum[i] == 16384u * i);
}

TEST_CASE("quantize_cdf: zero bins get frequency 1") {
  CdfTable t = quantize_cdf({0.5, 0.0, 0.5});
  CHECK(t.cum[2] - t.cum[1] == 1u);
  CHECK(t.cum.back() == kFreqTotal);
}

TEST_CASE("quantize_cdf: cumulative strictly increasing for random pmfs") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 300);
    std::vector<double> pmf(n);
    double sum = 0.0;
    for (double& p : pmf) {
      p = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      if (rng() % 4 == 0) p = 0.0;  // sprinkle empty bins
      sum += p;
    }
    if (sum > 0)
      for (double& p : pmf) p /= sum;
    CdfTable t = quantize_cdf(pmf);
    for (std::size_t i = 1; i < t.cum.size(); ++i) CHECK(t.cum[i] > t.cum[i - 1]);
    CHECK(t.cum.back() == kFreqTotal);
  }
  CHECK_THROWS_AS(quantize_cdf({}), DataError);
}

TEST_CASE("empty symbol stream flushes small") {
  auto bytes = rc_encode({}, {});
  CHECK(bytes.size() <= 32);
  CHECK(rc_decode(bytes, {}).empty());
}

TEST_CASE("uniform 256-symbol stream costs about one byte per symbol") {
  std::mt19937_64 rng(2);
  std::vector<double> pmf(256, 1.0 / 256.0);
  CdfTable t = quantize_cdf(pmf);
  std::vector<int> symbols(1000);
  std::vector<CdfTable> tables(1000, t);
  for (int& s : symbols) s = static_cast<int>(rng() % 256);
  auto bytes = rc_encode(symbols, tables);
  CHECK(bytes.size() >= 980);
  CHECK(bytes.size() <= 1020);
  CHECK(rc_decode(bytes, tables) == symbols);
}

TEST_CASE("near-deterministic stream stays tiny") {
  // One dominant symbol at p ~ 1: 10^4 copies in under 40 bytes.
  std::vector<double> pmf(2);
  pmf[0] = 1.0 - 1e-9;
  pmf[1] = 1e-9;
  CdfTable t = quantize_cdf(pmf);
  std::vector<int> symbols(10000, 0);
  std::vector<CdfTable> tables(10000, t);
  auto bytes = rc_encode(symbols, tables);
  CHECK(bytes.size() <= 40);
  CHECK(rc_decode(bytes, tables) == symbols);
}

TEST_CASE("round trip over random tables and symbols") {
  std::mt19937_64 rng(3);
  // Property run: >= 1e5 symbols across mixed random tables.
  std::size_t total_symbols = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const int n_tables = 1 + static_cast<int>(rng() % 5);
    std::vector<CdfTable> dict;
    for (int k = 0; k < n_tables; ++k) {
      const int support = 2 + static_cast<int>(rng() % 600);
      std::vector<double> pmf(support);
      double sum = 0.0;
      for (double& p : pmf) {
        p = std::pow(static_cast<double>(rng() >> 11) * 0x1.0p-53, 3.0);
        sum += p;
      }
      for (double& p : pmf) p /= sum;
      dict.push_back(quantize_cdf(pmf, -(support / 2)));
    }
    const int count = 4000 + static_cast<int>(rng() % 2000);
    std::vector<int> symbols(count);
    std::vector<CdfTable> tables(count);
    for (int i = 0; i < count; ++i) {
      const CdfTable& t = dict[rng() % dict.size()];
      tables[i] = t;
      symbols[i] = t.offset + static_cast<int>(rng() % t.symbol_count());
    }
    auto bytes = rc_encode(symbols, tables);
    CHECK(rc_decode(bytes, tables) == symbols);
    total_symbols += symbols.size();
  }
  CHECK(total_symbols >= 100000);
}

TEST_CASE("compressed size tracks the quantized cross entropy") {
  std::mt19937_64 rng(4);
  const int support = 64;
  std::vector<double> pmf(support);
  double sum = 0.0;
  for (int i = 0; i < support; ++i) {
    pmf[i] = std::exp(-0.5 * (i - 32.0) * (i - 32.0) / 36.0);
    sum += pmf[i];
  }
  for (double& p : pmf) p /= sum;
  CdfTable t = quantize_cdf(pmf);
  const int count = 20000;
  std::vector<int> symbols(count);
  std::vector<CdfTable> tables(count, t);
  double expected_bits = 0.0;
  for (int& s : symbols) {
    // Sample from the quantized table itself.
    const std::uint32_t f = static_cast<std::uint32_t>(rng() % kFreqTotal);
    const auto it = std::upper_bound(t.cum.begin(), t.cum.end(), f);
    s = static_cast<int>(it - t.cum.begin()) - 1;
    expected_bits -= std::log2((t.cum[s + 1] - t.cum[s]) / 65536.0);
  }
  auto bytes = rc_encode(symbols, tables);
  const double actual_bits = 8.0 * static_cast<double>(bytes.size());
  CHECK(actual_bits <= expected_bits * 1.01 + 8.0 * 32.0);
  CHECK(actual_bits + 256.0 >= expected_bits);  // not absurdly short either
  CHECK(rc_decode(bytes, tables) == symbols);
}

TEST_CASE("decode count zero yields empty array") {
  CHECK(rc_decode({0x00, 0x01, 0x02}, {}).empty());
}

TEST_CASE("decoding past the end raises StreamExhausted") {
  CdfTable t = quantize_cdf(std::vector<double>(16, 1.0 / 16.0));
  std::vector<int> symbols(50);
  std::mt19937_64 rng(5);
  for (int& s : symbols) s = static_cast<int>(rng() % 16);
  std::vector<CdfTable> tables(50, t);
  auto bytes = rc_encode(symbols, tables);
  // Demand far more symbols than were written.
  std::vector<CdfTable> too_many(5000, t);
  CHECK_THROWS_AS(rc_decode(bytes, too_many), StreamExhausted);
}

TEST_CASE("out-of-support symbol rejected at encode") {
  CdfTable t = quantize_cdf({0.5, 0.5}, -1);  // support {-1, 0}
  RangeEncoder enc;
  CHECK_THROWS_AS(enc.encode_symbol(1, t), DataError);
  CHECK_THROWS_AS(enc.encode_symbol(-2, t), DataError);
}
