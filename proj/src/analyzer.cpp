// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
#include "ccs/analyzer.hpp"

#include <iomanip>
#include <ostream>

namespace ccs {

namespace {

int masked_tap_count(int kh, int kw) {
  int taps = 0;
  for (int ky = 0; ky < kh; ++ky)
    for (int kx = 0; kx < kw; ++kx)
      if (mask_a_keeps(ky, kx, kh, kw)) ++taps;
  return taps;
}

struct Shape {
  int h = 0, w = 0, c = 0;
};

}  // namespace

std::vector<LayerCost> count_network(const Program& prog,
                                     const std::string& role,
                                     const std::string& component, int in_h,
                                     int in_w, int in_c) {
  std::vector<Shape> shapes(prog.n_slots);
  shapes[prog.input_slot] = {in_h, in_w, in_c};
  std::vector<LayerCost> out;
  for (const PrimOp& op : prog.ops) {
    const Shape s = shapes[op.in0];
    internal_check(s.h > 0 && s.w > 0, "count_network: unresolved shape");
    switch (op.kind) {
      case OpKind::Conv: {
        const KernelShape& k = prog.params[op.param];
        internal_check(k.in_ch == s.c, "count_network: channel mismatch");
        const Shape os = {(s.h + op.stride - 1) / op.stride,
                          (s.w + op.stride - 1) / op.stride, k.out_ch};
        shapes[op.out] = os;
        const int taps = k.masked ? masked_tap_count(k.kh, k.kw) : k.kh * k.kw;
        LayerCost cost;
        cost.name = op.name;
        cost.role = role;
        cost.component = component;
        cost.macs = static_cast<double>(os.h) * os.w * k.out_ch * k.in_ch * taps;
        cost.params =
            static_cast<std::uint64_t>(k.out_ch) * k.in_ch * k.kh * k.kw +
            k.out_ch;
        out.push_back(std::move(cost));
        break;
      }
      case OpKind::Shuffle:
        shapes[op.out] = {s.h * op.shuffle_r, s.w * op.shuffle_r,
                          s.c / (op.shuffle_r * op.shuffle_r)};
        break;
      default:
        shapes[op.out] = s;
        break;
    }
  }
  return out;
}

namespace {

void append_component(MacReport& rep, const ModelConfig& cfg, bool is_uv,
                      int h, int w) {
  const std::string comp = cfg.single_codec ? "rgb" : (is_uv ? "uv" : "y");
  int n, in_ch, m, out_ch;
  if (cfg.single_codec) {
    n = cfg.n_y;
    in_ch = 3;
    m = n;
    out_ch = 3;
  } else if (is_uv) {
    n = cfg.n_uv;
    in_ch = cfg.conditional ? 3 : 2;
    m = cfg.m_uv();
    out_ch = 2;
  } else {
    n = cfg.n_y;
    in_ch = 1;
    m = cfg.n_y;
    out_ch = 1;
  }
  const int res = is_uv ? 2 : 1;  // UV codec runs on the half-size grid
  const int ch = h / res, cw = w / res;
  const int lh = ch / 16, lw = cw / 16;   // main latent grid
  const int zh = lh / 4, zw = lw / 4;     // hyper latent grid

  struct Entry {
    NetworkSpec spec;
    int in_h, in_w, in_c;
  };
  const std::vector<Entry> entries = {
      {build_network(Role::Encoder, n, 0, 0, in_ch), ch, cw, in_ch},
      {build_network(Role::Decoder, n, m, out_ch), lh, lw, m},
      {build_network(Role::HyperEncoder, n), lh, lw, n},
      {build_network(Role::HyperDecoder, n), zh, zw, n},
      {build_network(Role::Context, n), lh, lw, n},
      {build_network(Role::Gather, n), lh, lw, 4 * n},
  };
  for (const Entry& e : entries) {
    const Program prog = compile(e.spec);
    auto costs = count_network(prog, role_name(e.spec.role), comp, e.in_h,
                               e.in_w, e.in_c);
    for (auto& c : costs) {
      rep.total_macs += c.macs;
      rep.total_params += c.params;
      rep.layers.push_back(std::move(c));
    }
  }
}

}  // namespace

MacReport count_macs(const ModelConfig& cfg, int h, int w) {
  require(h > 0 && w > 0 && h % kPadMultiple == 0 && w % kPadMultiple == 0,
          "count_macs: input dimensions must be positive multiples of 128");
  MacReport rep;
  rep.config = cfg.name;
  rep.input_h = h;
  rep.input_w = w;
  append_component(rep, cfg, false, h, w);
  if (!cfg.single_codec) append_component(rep, cfg, true, h, w);
  return rep;
}

std::uint64_t count_params(const ModelConfig& cfg) {
  // Resolution does not affect parameter counts; any legal size works.
  const MacReport rep = count_macs(cfg, kPadMultiple, kPadMultiple);
  return rep.total_params;
}

void write_report_csv(std::ostream& os, const MacReport& report) {
  os << "layer,role,component,macs,params\n";
  for (const LayerCost& c : report.layers) {
    os << c.name << "," << c.role << "," << c.component << ","
       << static_cast<std::uint64_t>(c.macs) << "," << c.params << "\n";
  }
  os << "total,,," << static_cast<std::uint64_t>(report.total_macs) << ","
     << report.total_params << "\n";
}

void write_report_text(std::ostream& os, const MacReport& report) {
  os << "config: " << report.config << "  input: " << report.input_w << "x"
     << report.input_h << "\n";
  os << std::left << std::setw(44) << "layer" << std::right << std::setw(16)
     << "MACs" << std::setw(12) << "params" << "\n";
  for (const LayerCost& c : report.layers) {
    os << std::left << std::setw(44) << (c.component + "." + c.name)
       << std::right << std::setw(16) << static_cast<std::uint64_t>(c.macs)
       << std::setw(12) << c.params << "\n";
  }
  os << std::left << std::setw(44) << "total" << std::right << std::setw(16)
     << static_cast<std::uint64_t>(report.total_macs) << std::setw(12)
     << report.total_params << "\n";
  os << "KMAC/px: " << std::fixed << std::setprecision(1)
     << report.kmac_per_px() << "\n";
  os << "parameters: " << report.total_params << " ("
     << std::setprecision(1) << report.param_bytes() / (1024.0 * 1024.0)
     << " MB at 4 bytes each)\n";
}

}  // namespace ccs
