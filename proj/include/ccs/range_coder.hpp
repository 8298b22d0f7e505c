// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "ccs/common.hpp"

namespace ccs {

constexpr int kFreqBits = 16;
constexpr std::uint32_t kFreqTotal = 1u << kFreqBits;

/// Quantized cumulative-frequency table over a contiguous integer support.
/// cum has one entry per symbol plus one; cum.front() = 0 and
/// cum.back() = 2^16, strictly increasing (no zero-frequency bins).
struct CdfTable {
  int offset = 0;  // integer value of symbol index 0
  std::vector<std::uint32_t> cum;

  int symbol_count() const { return static_cast<int>(cum.size()) - 1; }
  bool contains(int value) const {
    return value >= offset && value < offset + symbol_count();
  }
};

/// Scales a pmf to total mass 2^16 with every bin >= 1 (mass stolen from
/// the largest bins when rounding or the floor breaks the budget).
CdfTable quantize_cdf(const std::vector<double>& pmf, int offset = 0);

struct StreamExhausted : DataError {
  StreamExhausted() : DataError("range decoder: stream exhausted") {}
};

/// Carry-less byte-oriented range encoder, 64-bit low / 32-bit range.
class RangeEncoder {
 public:
  void encode(std::uint32_t cum_lo, std::uint32_t cum_hi);
  void encode_symbol(int value, const CdfTable& table);
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_count_ = 1;  // the first cached byte is a leading zero
  std::vector<std::uint8_t> out_;
  bool finished_ = false;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(const std::uint8_t* data, std::size_t len);
  explicit RangeDecoder(const std::vector<std::uint8_t>& data)
      : RangeDecoder(data.data(), data.size()) {}

  int decode_symbol(const CdfTable& table);

 private:
  std::uint8_t next_byte();

  const std::uint8_t* data_;
  std::size_t len_;
  std::size_t pos_ = 0;
  std::uint64_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

/// Convenience wrappers coding symbols[i] against tables[i].
std::vector<std::uint8_t> rc_encode(const std::vector<int>& symbols,
                                    const std::vector<CdfTable>& tables);
std::vector<int> rc_decode(const std::vector<std::uint8_t>& bytes,
                           const std::vector<CdfTable>& tables);

}  // namespace ccs
