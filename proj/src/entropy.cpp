// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#include "ccs/entropy.hpp"

#include "ccs/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace ccs {

Tensor quantize_latent(const Tensor& x, QuantMode mode, std::uint64_t seed) {
  Tensor out = x;
  if (mode == QuantMode::Round) {
    for (double& v : out.data) v = std::nearbyint(v);
  } else {
    std::mt19937_64 rng(seed);
    for (double& v : out.data) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
      v += u - 0.5;
    }
  }
  return out;
}

Tensor quantize_clamp(const Tensor& x, int bound) {
  Tensor out = x;
  const double b = static_cast<double>(bound);
  for (double& v : out.data) {
    v = std::clamp(std::nearbyint(v), -b, b);
  }
  return out;
}

double std_normal_cdf(double x) {
  if (x < -9.0) return 0.0;
  if (x > 9.0) return 1.0;
  return 0.5 * std::erfc(-x * M_SQRT1_2);
}

double gaussian_bin_likelihood(int v, double mu, double sigma) {
  internal_check(sigma >= kSigmaFloor, "gaussian likelihood: sigma below floor");
  const double hi = std_normal_cdf((v + 0.5 - mu) / sigma);
  const double lo = std_normal_cdf((v - 0.5 - mu) / sigma);
  return std::max(hi - lo, kProbFloor);
}

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

GaussianField split_gather_output(const Tensor& g, int n) {
  require(g.c == 3 * n, "split_gather_output: expected 3N channels");
  GaussianField field;
  field.mu = Tensor(g.h, g.w, n);
  field.sigma = Tensor(g.h, g.w, n);
  for (int i = 0; i < g.h; ++i) {
    for (int j = 0; j < g.w; ++j) {
      const double* src = g.row(i, j);
      double* mu = field.mu.row(i, j);
      double* sg = field.sigma.row(i, j);
      for (int ch = 0; ch < n; ++ch) {
        mu[ch] = src[ch];
        sg[ch] = std::max(softplus(src[n + ch]), kSigmaFloor);
      }
    }
  }
  return field;
}

// ---------------------------------------------------------------------------
// Factorized model

FactorizedModel::FactorizedModel(int channels_, int support_)
    : channels(channels_), support(support_),
      knots(static_cast<std::size_t>(channels_) * (2 * support_ + 1), 0.0) {
  require(channels_ > 0 && support_ > 0, "factorized model: bad dimensions");
}

std::vector<double> FactorizedModel::pmf(int channel) const {
  require(channel >= 0 && channel < channels, "factorized model: bad channel");
  const int nb = bins();
  const double* raw = knots.data() + static_cast<std::size_t>(channel) * nb;
  double mx = raw[0];
  for (int i = 1; i < nb; ++i) mx = std::max(mx, raw[i]);
  std::vector<double> p(nb);
  double sum = 0.0;
  for (int i = 0; i < nb; ++i) {
    p[i] = std::exp(raw[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double FactorizedModel::likelihood(int v, int channel) const {
  const int vc = std::clamp(v, -support, support);
  const auto p = pmf(channel);
  return std::max(p[vc + support], kProbFloor);
}

double FactorizedModel::likelihood_real(double v, int channel) const {
  const auto p = pmf(channel);
  // CDF is piecewise linear with knots at half-integers; the mass between
  // v - 0.5 and v + 0.5 is a unit-length slice across at most two bins.
  auto cdf = [&](double t) {
    const double pos = t + support + 0.5;  // bin coordinate
    if (pos <= 0.0) return 0.0;
    if (pos >= bins()) return 1.0;
    const int idx = std::min(static_cast<int>(pos), bins() - 1);
    double acc = 0.0;
    for (int i = 0; i < idx; ++i) acc += p[i];
    return acc + p[idx] * (pos - idx);
  };
  return std::max(cdf(v + 0.5) - cdf(v - 0.5), kProbFloor);
}

CdfTable FactorizedModel::cdf_table(int channel) const {
  return quantize_cdf(pmf(channel), -support);
}

void FactorizedModel::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("factorized save: cannot open " + path);
  os.write("CCSW", 4);
  os.put(static_cast<char>(Role::Factorized));
  const std::uint16_t le_c = static_cast<std::uint16_t>(channels);
  const std::uint16_t le_s = static_cast<std::uint16_t>(support);
  unsigned char hdr[4] = {static_cast<unsigned char>(le_c & 0xff),
                          static_cast<unsigned char>(le_c >> 8),
                          static_cast<unsigned char>(le_s & 0xff),
                          static_cast<unsigned char>(le_s >> 8)};
  os.write(reinterpret_cast<const char*>(hdr), 4);
  unsigned char seed[8] = {0};
  os.write(reinterpret_cast<const char*>(seed), 8);
  for (double d : knots) {
    const float f = static_cast<float>(d);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  if (!os) throw IoError("factorized save: write failed for " + path);
}

FactorizedModel FactorizedModel::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("factorized load: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "CCSW", 4) != 0)
    throw DataError("factorized load: bad magic in " + path);
  const int role = is.get();
  if (role != static_cast<int>(Role::Factorized))
    throw DataError("factorized load: wrong role tag in " + path);
  unsigned char hdr[4];
  is.read(reinterpret_cast<char*>(hdr), 4);
  const int channels = hdr[0] | (hdr[1] << 8);
  const int support = hdr[2] | (hdr[3] << 8);
  unsigned char seed[8];
  is.read(reinterpret_cast<char*>(seed), 8);
  FactorizedModel m(channels, support);
  for (double& d : m.knots) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t u = 0;
    for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    float f;
    std::memcpy(&f, &u, 4);
    d = static_cast<double>(f);
  }
  if (!is) throw DataError("factorized load: truncated file " + path);
  return m;
}

// ---------------------------------------------------------------------------
// Scale table and residual tables

ScaleTable ScaleTable::make(int count, double lo, double hi) {
  require(count >= 2 && lo > 0.0 && hi > lo, "scale table: bad parameters");
  ScaleTable t;
  t.levels.resize(count);
  const double step = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i) t.levels[i] = lo * std::exp(step * i);
  t.levels.back() = hi;
  return t;
}

int ScaleTable::lookup(double sigma) const {
  const auto it = std::lower_bound(levels.begin(), levels.end(), sigma);
  if (it == levels.end()) return static_cast<int>(levels.size()) - 1;
  return static_cast<int>(it - levels.begin());
}

CdfTable gaussian_residual_table(double sigma) {
  internal_check(sigma > 0.0, "residual table: sigma must be positive");
  const int bound = kResidualBound;
  std::vector<double> pmf(2 * bound + 1, 0.0);
  // Only boundaries within a few sigma of zero need the erfc; everything
  // outside is exactly 0 or 1 at double precision.
  const int reach =
      std::min(bound, static_cast<int>(std::ceil(9.0 * sigma)) + 1);
  const double lower_tail = std_normal_cdf((-reach - 0.5) / sigma);
  double prev = lower_tail;
  for (int v = -reach; v <= reach; ++v) {
    const double cur = std_normal_cdf((v + 0.5) / sigma);
    pmf[v + bound] = cur - prev;
    prev = cur;
  }
  pmf[-reach + bound] += lower_tail;
  pmf[reach + bound] += 1.0 - prev;
  return quantize_cdf(pmf, -bound);
}

double rate_estimate(const std::vector<double>& probs) {
  double bits = 0.0;
  for (double p : probs) {
    require(p > 0.0 && p <= 1.0, "rate_estimate: probability out of (0,1]");
    bits -= std::log2(p);
  }
  return bits;
}

}  // namespace ccs
