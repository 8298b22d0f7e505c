// Copyright 2026 the CCS codec authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: encode, decode, analyze, psnr, bdrate,
// train-micro, selftest.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "ccs/analyzer.hpp"
#include "ccs/color.hpp"
#include "ccs/metrics.hpp"
#include "ccs/pipeline.hpp"
#include "ccs/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ccs::IoError("cannot open " + path);
  std::vector<std::uint8_t> buf(
      (std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return buf;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& b) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ccs::IoError("cannot open for write " + path);
  os.write(reinterpret_cast<const char*>(b.data()),
           static_cast<std::streamsize>(b.size()));
  if (!os) throw ccs::IoError("write failed for " + path);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct CodecArgs {
  std::string input, output, preset = "ccs-y128-uv64", weights;
  int lambda_id = 0;
  int workers = 1;
  std::uint64_t seed = 1234;
  int raw_width = 0, raw_height = 0;
};

ccs::CodecModels load_models(const CodecArgs& args,
                             const ccs::ModelConfig& cfg) {
  if (!args.weights.empty()) {
    return ccs::CodecModels::load_dir(args.weights, cfg);
  }
  // Analysis-only mode: deterministic seeded weights. Decoding needs the
  // same seed on the other side.
  std::cerr << "note: no --weights directory, using seeded random weights"
            << " (seed " << args.seed << ")\n";
  return ccs::CodecModels::random(cfg, args.seed);
}

ccs::ImageYUV420 load_input_image(const CodecArgs& args) {
  if (ends_with(args.input, ".ppm")) {
    return ccs::rgb_to_yuv420(ccs::read_ppm(args.input));
  }
  if (args.raw_width <= 0 || args.raw_height <= 0) {
    throw ccs::DataError("raw I420 input needs --raw-width and --raw-height");
  }
  return ccs::read_i420(args.input, args.raw_width, args.raw_height);
}

int cmd_encode(const CodecArgs& args) {
  ccs::ModelConfig cfg = ccs::ModelConfig::preset(args.preset);
  cfg.lambda_id = args.lambda_id;
  const ccs::CodecModels models = load_models(args, cfg);
  const ccs::ImageYUV420 image = load_input_image(args);
  const ccs::EncodeResult res = ccs::encode(image, models, cfg, args.workers);
  write_file(args.output, res.bitstream.serialize());
  std::cout << "encoded " << args.input << " -> " << args.output << "\n";
  std::size_t payload = 0;
  static const char* names[4] = {"z_Y", "y_Y", "z_UV", "y_UV"};
  for (int s = 0; s < 4; ++s) {
    payload += res.bitstream.substreams[s].size();
    std::cout << "  " << names[s] << ": "
              << res.bitstream.substreams[s].size() << " bytes (estimate "
              << std::lround(res.estimated_bits[s] / 8.0) << ")\n";
  }
  std::cout << "payload " << payload << " bytes, bpp " << res.bpp << "\n";
  return kExitOk;
}

int cmd_decode(const CodecArgs& args) {
  const auto bytes = read_file(args.input);
  const ccs::Bitstream bs = ccs::Bitstream::parse(bytes);
  ccs::ModelConfig cfg = ccs::ModelConfig::preset(args.preset);
  cfg.lambda_id = bs.lambda_id;
  const ccs::CodecModels models = load_models(args, cfg);
  const ccs::DecodeResult res = ccs::decode(bs, models, cfg, args.workers);
  if (res.uv_substream_truncated) {
    std::cerr << "warning: UV substream truncated, chroma planes zeroed\n";
  }
  if (ends_with(args.output, ".ppm")) {
    ccs::write_ppm(args.output, ccs::yuv420_to_rgb(res.image));
  } else {
    ccs::write_i420(args.output, res.image);
  }
  std::cout << "decoded " << args.input << " -> " << args.output << " ("
            << res.image.width() << "x" << res.image.height() << ")\n";
  return res.uv_substream_truncated ? kExitData : kExitOk;
}

int cmd_analyze(const std::string& preset, int width, int height,
                const std::string& csv_path) {
  const ccs::ModelConfig cfg = ccs::ModelConfig::preset(preset);
  const ccs::MacReport rep = ccs::count_macs(cfg, height, width);
  ccs::write_report_text(std::cout, rep);
  if (!csv_path.empty()) {
    std::ofstream os(csv_path);
    if (!os) throw ccs::IoError("cannot open for write " + csv_path);
    ccs::write_report_csv(os, rep);
    std::cout << "per-layer CSV written to " << csv_path << "\n";
  }
  return kExitOk;
}

int cmd_psnr(const std::string& ref, const std::string& test) {
  const double db = ccs::psnr_rgb(ccs::read_ppm(ref), ccs::read_ppm(test));
  std::cout << "PSNR: " << db << " dB\n";
  return kExitOk;
}

int cmd_bdrate(const std::string& anchor, const std::string& test) {
  const ccs::BdRateResult r =
      ccs::bd_rate(ccs::read_rd_csv(anchor), ccs::read_rd_csv(test));
  if (r.fit_warning) {
    std::cerr << "warning: cubic fit residual " << r.max_fit_residual_db
              << " dB exceeds 0.5 dB, the estimate may be unreliable\n";
  }
  std::cout << "BD-rate: " << r.percent << " %\n";
  return kExitOk;
}

struct TrainArgs {
  ccs::MicroConfig cfg;
  bool conditional = true;
  std::string out_csv, checkpoint_dir;
};

int cmd_train_micro(const TrainArgs& args) {
  const ccs::TrainState st = ccs::train_micro(args.cfg, args.conditional);
  const ccs::HistoryRow& last = st.history.back();
  std::cout << "trained " << st.step << " steps: D " << last.d << ", R_Y "
            << last.r_y << ", R_UV " << last.r_uv << ", L " << last.loss
            << "\n";
  if (!args.out_csv.empty()) {
    ccs::write_history_csv(args.out_csv, st.history);
    std::cout << "loss history written to " << args.out_csv << "\n";
  }
  if (!args.checkpoint_dir.empty()) {
    st.model.save_dir(args.checkpoint_dir);
    std::cout << "checkpoints written to " << args.checkpoint_dir << "\n";
  }
  return kExitOk;
}

int cmd_selftest() {
  int failures = 0;
  auto report = [&](const char* name, bool ok) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  {
    ccs::Tensor x(16, 16, 3, 0.5);
    ccs::ConvKernel k(8, 3, 3, 3);
    const ccs::Tensor y = ccs::conv2d(x, k, 2);
    report("tensor shape contract", y.h == 8 && y.w == 8 && y.c == 8);
  }
  {
    std::mt19937_64 rng(1);
    std::vector<double> pmf(64);
    double sum = 0.0;
    for (double& p : pmf) {
      p = 1.0 + static_cast<double>(rng() % 100);
      sum += p;
    }
    for (double& p : pmf) p /= sum;
    const ccs::CdfTable t = ccs::quantize_cdf(pmf);
    std::vector<int> symbols(4096);
    std::vector<ccs::CdfTable> tables(symbols.size(), t);
    for (int& s : symbols) s = static_cast<int>(rng() % 64);
    const auto bytes = ccs::rc_encode(symbols, tables);
    report("range coder round trip",
           ccs::rc_decode(bytes, tables) == symbols);
  }
  {
    ccs::ImageRGB img(2, 2);
    for (std::uint8_t& v : img.data) v = 80;
    const ccs::ImageYUV420 yuv = ccs::rgb_to_yuv420(img);
    report("color achromatic axis",
           yuv.y.at(0, 0) == 80 && yuv.u.at(0, 0) == 128);
  }
  {
    ccs::ModelConfig cfg;
    cfg.name = "selftest";
    cfg.n_y = 8;
    cfg.n_uv = 4;
    const ccs::CodecModels models = ccs::CodecModels::random(cfg, 99);
    ccs::ImageYUV420 img;
    img.y = ccs::Plane(128, 128);
    img.u = ccs::Plane(64, 64);
    img.v = ccs::Plane(64, 64);
    std::mt19937_64 rng(2);
    for (auto* p : {&img.y, &img.u, &img.v})
      for (std::uint8_t& v : p->data)
        v = static_cast<std::uint8_t>(rng() & 0xff);
    const ccs::EncodeResult enc_res = ccs::encode(img, models, cfg);
    const ccs::DecodeResult dec_res =
        ccs::decode(enc_res.bitstream, models, cfg);
    report("pipeline latent round trip", dec_res.latents == enc_res.latents);
  }
  {
    ccs::MicroConfig cfg;
    cfg.n_y = 4;
    cfg.n_uv = 4;
    ccs::MicroModel model = ccs::MicroModel::create(cfg);
    model.init_random(ccs::stream_seed(cfg.seed, 0xC0DE));
    const auto data = ccs::synth_dataset(21, 2, 0.9);
    const ccs::GradCheckResult res =
        ccs::grad_check(model, data, cfg.lambda(), 1e-4, 200);
    std::cout << "  (checked " << res.checked << ", max rel err "
              << res.max_rel_err << ")\n";
    report("gradient check", res.checked >= 200 && res.max_rel_err < 1e-4);
  }

  std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED")
            << "\n";
  return failures == 0 ? kExitOk : kExitInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ccs: conditional color separation learned image codec"};
  app.require_subcommand(1);

  CodecArgs codec;
  auto add_codec_options = [&](CLI::App* sub, bool encoding) {
    sub->add_option("--input", codec.input, "input path")->required();
    sub->add_option("--out", codec.output, "output path")->required();
    sub->add_option("--preset", codec.preset, "model preset")
        ->check(CLI::IsMember(ccs::ModelConfig::preset_names()));
    sub->add_option("--weights", codec.weights,
                    "weights directory (omit for seeded random weights)");
    sub->add_option("--seed", codec.seed, "random-weights seed");
    sub->add_option("--workers", codec.workers, "component workers")
        ->check(CLI::Range(1, 2));
    if (encoding) {
      sub->add_option("--lambda", codec.lambda_id, "lambda index 0..3")
          ->check(CLI::Range(0, 3));
      sub->add_option("--raw-width", codec.raw_width, "width for raw I420");
      sub->add_option("--raw-height", codec.raw_height,
                      "height for raw I420");
    }
  };
  CLI::App* enc = app.add_subcommand("encode", "encode an image");
  add_codec_options(enc, true);
  CLI::App* dec = app.add_subcommand("decode", "decode a bitstream");
  add_codec_options(dec, false);

  std::string preset = "ccs-y128-uv64", csv_path;
  int width = 768, height = 512;
  CLI::App* ana =
      app.add_subcommand("analyze", "static MAC/parameter report");
  ana->add_option("--preset", preset, "model preset")
      ->check(CLI::IsMember(ccs::ModelConfig::preset_names()));
  ana->add_option("--width", width, "input width");
  ana->add_option("--height", height, "input height");
  ana->add_option("--csv", csv_path, "write per-layer CSV here");

  std::string ref_path, test_path;
  CLI::App* psnr = app.add_subcommand("psnr", "RGB PSNR between two PPMs");
  psnr->add_option("--ref", ref_path, "reference image")->required();
  psnr->add_option("--test", test_path, "test image")->required();

  std::string anchor_csv, test_csv;
  CLI::App* bdr = app.add_subcommand("bdrate", "BD-rate between RD curves");
  bdr->add_option("--anchor", anchor_csv, "anchor curve CSV")->required();
  bdr->add_option("--test", test_csv, "test curve CSV")->required();

  TrainArgs train;
  CLI::App* tm = app.add_subcommand("train-micro", "desk-scale training run");
  tm->add_option("--ny", train.cfg.n_y, "Y channel width");
  tm->add_option("--nuv", train.cfg.n_uv, "UV channel width");
  tm->add_option("--lambda", train.cfg.lambda_id, "lambda index 0..3")
      ->check(CLI::Range(0, 3));
  tm->add_option("--steps", train.cfg.steps, "optimization steps");
  tm->add_option("--lr", train.cfg.lr, "learning rate");
  tm->add_option("--batch", train.cfg.batch, "patches per step");
  tm->add_option("--seed", train.cfg.seed, "training seed");
  tm->add_option("--corr", train.cfg.corr, "synthetic cross-channel corr");
  tm->add_flag("--use-context", train.cfg.use_context,
               "enable the context model in the training graph");
  tm->add_flag("!--no-conditional", train.conditional,
               "train without Y-to-UV conditioning");
  tm->add_option("--out-csv", train.out_csv, "loss history CSV");
  tm->add_option("--checkpoint-dir", train.checkpoint_dir,
                 "write ParamStore files here");

  CLI::App* st = app.add_subcommand("selftest", "quick built-in checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (enc->parsed()) return cmd_encode(codec);
    if (dec->parsed()) return cmd_decode(codec);
    if (ana->parsed()) return cmd_analyze(preset, width, height, csv_path);
    if (psnr->parsed()) return cmd_psnr(ref_path, test_path);
    if (bdr->parsed()) return cmd_bdrate(anchor_csv, test_csv);
    if (tm->parsed()) return cmd_train_micro(train);
    if (st->parsed()) return cmd_selftest();
  } catch (const ccs::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ccs::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ccs::InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
