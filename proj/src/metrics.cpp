// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#include "ccs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ccs {

double psnr_rgb(const ImageRGB& a, const ImageRGB& b) {
  require(a.h == b.h && a.w == b.w, "psnr_rgb: dimension mismatch");
  require(a.h > 0 && a.w > 0, "psnr_rgb: empty image");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrCap;
  const double mse = sse / static_cast<double>(a.data.size());
  return std::min(10.0 * std::log10(255.0 * 255.0 / mse), kPsnrCap);
}

namespace {

// Least-squares cubic fit; with exactly four points this interpolates.
std::array<double, 4> cubic_fit(const std::vector<double>& x,
                                const std::vector<double>& y) {
  const std::size_t n = x.size();
  double a[4][5] = {};
  for (std::size_t k = 0; k < n; ++k) {
    double pw[7];
    pw[0] = 1.0;
    for (int p = 1; p < 7; ++p) pw[p] = pw[p - 1] * x[k];
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) a[r][c] += pw[r + c];
      a[r][4] += pw[r] * y[k];
    }
  }
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[piv], a[col]);
    require(std::abs(a[col][col]) > 1e-12, "bd_rate: degenerate fit system");
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 5; ++c) a[r][c] -= f * a[col][c];
    }
  }
  return {a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2],
          a[3][4] / a[3][3]};
}

double cubic_eval(const std::array<double, 4>& c, double x) {
  return c[0] + x * (c[1] + x * (c[2] + x * c[3]));
}

double cubic_integral(const std::array<double, 4>& c, double lo, double hi) {
  auto anti = [&](double x) {
    return x * (c[0] + x * (c[1] / 2 + x * (c[2] / 3 + x * c[3] / 4)));
  };
  return anti(hi) - anti(lo);
}

void validate_curve(const RDCurve& curve, const char* label) {
  require(curve.size() >= 4,
          std::string(label) + ": at least 4 RD points required");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    require(curve[i].rate_bpp > 0.0,
            std::string(label) + ": rates must be positive");
    if (i > 0) {
      require(curve[i].rate_bpp > curve[i - 1].rate_bpp,
              std::string(label) + ": rates must be strictly increasing");
      require(curve[i].psnr_db > curve[i - 1].psnr_db,
              std::string(label) + ": curve must be monotone in quality");
    }
  }
}

}  // namespace

BdRateResult bd_rate(const RDCurve& anchor, const RDCurve& test) {
  validate_curve(anchor, "bd_rate anchor");
  validate_curve(test, "bd_rate test");

  auto fit_curve = [](const RDCurve& c, std::array<double, 4>& coeffs,
                      double& max_residual) {
    std::vector<double> q, lr;
    for (const RDPoint& p : c) {
      q.push_back(p.psnr_db);
      lr.push_back(std::log10(p.rate_bpp));
    }
    coeffs = cubic_fit(q, lr);
    max_residual = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      max_residual =
          std::max(max_residual, std::abs(cubic_eval(coeffs, q[i]) - lr[i]));
    }
  };

  std::array<double, 4> ca, ct;
  double ra = 0.0, rt = 0.0;
  fit_curve(anchor, ca, ra);
  fit_curve(test, ct, rt);

  const double lo = std::max(anchor.front().psnr_db, test.front().psnr_db);
  const double hi = std::min(anchor.back().psnr_db, test.back().psnr_db);
  require(hi > lo, "bd_rate: no overlapping quality interval");

  const double avg_diff =
      (cubic_integral(ct, lo, hi) - cubic_integral(ca, lo, hi)) / (hi - lo);

  BdRateResult res;
  res.percent = (std::pow(10.0, avg_diff) - 1.0) * 100.0;
  res.max_fit_residual_db = std::max(ra, rt);
  res.fit_warning = res.max_fit_residual_db > 0.5;
  return res;
}

RDCurve read_rd_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("rd csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError("rd csv: empty file " + path);
  // Trim a possible trailing CR before checking the header.
  while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
    line.pop_back();
  require(line == "rate_bpp,psnr_db",
          "rd csv: expected header 'rate_bpp,psnr_db' in " + path);
  RDCurve curve;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    RDPoint p;
    char comma = 0;
    if (!(ss >> p.rate_bpp >> comma >> p.psnr_db) || comma != ',')
      throw DataError("rd csv: malformed row '" + line + "' in " + path);
    curve.push_back(p);
  }
  return curve;
}

void write_rd_csv(const std::string& path, const RDCurve& curve) {
  std::ofstream os(path);
  if (!os) throw IoError("rd csv: cannot open for write " + path);
  os << "rate_bpp,psnr_db\n";
  for (const RDPoint& p : curve) os << p.rate_bpp << "," << p.psnr_db << "\n";
  if (!os) throw IoError("rd csv: write failed for " + path);
}

}  // namespace ccs
