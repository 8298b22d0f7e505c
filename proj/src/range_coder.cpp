// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#include "ccs/range_coder.hpp"

#include <algorithm>
#include <cmath>

namespace ccs {

CdfTable quantize_cdf(const std::vector<double>& pmf, int offset) {
  require(!pmf.empty(), "quantize_cdf: empty pmf");
  require(pmf.size() < kFreqTotal, "quantize_cdf: too many symbols");
  double total = 0.0;
  for (double p : pmf) {
    require(p >= 0.0, "quantize_cdf: negative probability");
    total += p;
  }
  require(total <= 1.0 + 1e-9, "quantize_cdf: pmf mass exceeds 1");

  const std::size_t n = pmf.size();
  std::vector<std::int64_t> freq(n);
  std::int64_t sum = 0;
  const double scale = total > 0.0 ? kFreqTotal / total : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    freq[i] = std::max<std::int64_t>(1, std::llround(pmf[i] * scale));
    sum += freq[i];
  }

  // Settle the budget on the largest bins; they can absorb the error
  // without being driven below 1.
  std::int64_t diff = static_cast<std::int64_t>(kFreqTotal) - sum;
  while (diff != 0) {
    std::size_t target = 0;
    if (diff > 0) {
      target = static_cast<std::size_t>(
          std::max_element(freq.begin(), freq.end()) - freq.begin());
      freq[target] += diff;
      diff = 0;
    } else {
      target = static_cast<std::size_t>(
          std::max_element(freq.begin(), freq.end()) - freq.begin());
      const std::int64_t take = std::min(-diff, freq[target] - 1);
      internal_check(take > 0, "quantize_cdf: cannot settle frequency budget");
      freq[target] -= take;
      diff += take;
    }
  }

  CdfTable table;
  table.offset = offset;
  table.cum.resize(n + 1);
  table.cum[0] = 0;
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += static_cast<std::uint64_t>(freq[i]);
    table.cum[i + 1] = static_cast<std::uint32_t>(acc);
  }
  internal_check(table.cum.back() == kFreqTotal,
                 "quantize_cdf: cumulative total mismatch");
  return table;
}

// --------------------------------------------------------------------------
// Encoder

namespace {
constexpr std::uint32_t kTopValue = 1u << 24;
}

void RangeEncoder::shift_low() {
  // Emit the cached byte once a carry can no longer reach it.
  if (static_cast<std::uint32_t>(low_ >> 32) != 0 ||
      static_cast<std::uint32_t>(low_) < 0xFF000000u) {
    const std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t byte = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(byte + carry));
      byte = 0xFF;
    } while (--cache_count_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_count_;
  low_ = (low_ << 8) & 0xFFFFFFFFull;
}

void RangeEncoder::encode(std::uint32_t cum_lo, std::uint32_t cum_hi) {
  internal_check(!finished_, "range encoder already finished");
  internal_check(cum_lo < cum_hi && cum_hi <= kFreqTotal,
                 "range encoder: invalid interval");
  const std::uint32_t r = range_ >> kFreqBits;
  low_ += static_cast<std::uint64_t>(r) * cum_lo;
  range_ = r * (cum_hi - cum_lo);
  while (range_ < kTopValue) {
    shift_low();
    range_ <<= 8;
  }
}

void RangeEncoder::encode_symbol(int value, const CdfTable& table) {
  require(table.contains(value), "range encoder: symbol out of support");
  const int idx = value - table.offset;
  encode(table.cum[idx], table.cum[idx + 1]);
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  internal_check(!finished_, "range encoder already finished");
  finished_ = true;
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

// --------------------------------------------------------------------------
// Decoder

RangeDecoder::RangeDecoder(const std::uint8_t* data, std::size_t len)
    : data_(data), len_(len) {
  next_byte();  // the encoder's leading zero byte
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= len_) throw StreamExhausted();
  return data_[pos_++];
}

int RangeDecoder::decode_symbol(const CdfTable& table) {
  const std::uint32_t r = range_ >> kFreqBits;
  std::uint32_t f = static_cast<std::uint32_t>(code_ / r);
  f = std::min(f, kFreqTotal - 1);
  // cum is strictly increasing, so this finds the unique bin holding f.
  const auto it = std::upper_bound(table.cum.begin(), table.cum.end(), f);
  const int idx = static_cast<int>(it - table.cum.begin()) - 1;
  internal_check(idx >= 0 && idx < table.symbol_count(),
                 "range decoder: bin search failed");
  code_ -= static_cast<std::uint64_t>(r) * table.cum[idx];
  range_ = r * (table.cum[idx + 1] - table.cum[idx]);
  while (range_ < kTopValue) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  return idx + table.offset;
}

// --------------------------------------------------------------------------

std::vector<std::uint8_t> rc_encode(const std::vector<int>& symbols,
                                    const std::vector<CdfTable>& tables) {
  require(symbols.size() == tables.size(),
          "rc_encode: one table required per symbol");
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    enc.encode_symbol(symbols[i], tables[i]);
  }
  return enc.finish();
}

std::vector<int> rc_decode(const std::vector<std::uint8_t>& bytes,
                           const std::vector<CdfTable>& tables) {
  std::vector<int> out;
  out.reserve(tables.size());
  if (tables.empty()) return out;
  RangeDecoder dec(bytes);
  for (const CdfTable& t : tables) out.push_back(dec.decode_symbol(t));
  return out;
}

}  // namespace ccs
