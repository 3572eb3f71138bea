#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "srdrm/checkpoint.hpp"
#include "srdrm/datakit.hpp"
#include "srdrm/errors.hpp"
#include "srdrm/inference.hpp"
#include "srdrm/metrics.hpp"
#include "srdrm/trainer.hpp"

namespace fs = std::filesystem;
using namespace srdrm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitContract = 1;
constexpr int kExitNumeric = 2;

std::vector<int> parse_scales(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ContractError(fmt::format("malformed scale list '{}'", text));
    }
  }
  return out;
}

struct PrepareArgs {
  std::string input, output, scales = "2,4,8";
  int jpeg_quality = kDefaultJpegQuality;
  std::uint64_t seed = 0;
};

int run_prepare(const PrepareArgs& a) {
  PrepareOptions opt;
  opt.scales = parse_scales(a.scales);
  opt.jpeg_quality = a.jpeg_quality;
  opt.seed = a.seed;
  const DatasetManifest m = prepare_lr_sets(a.input, a.output, opt);
  for (Split s : {Split::train, Split::val, Split::test}) {
    std::cout << fmt::format("{:<5} {} pairs\n", split_name(s), m.pairs(s).size());
  }
  if (!m.rejects.empty()) std::cout << fmt::format("rejected {} inputs\n", m.rejects.size());
  std::cout << fmt::format("manifest: {}\n", (m.root / kManifestFileName).string());
  return kExitOk;
}

struct TrainArgs {
  std::string config, data, out;
  std::optional<int> scale, epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::string> mode;
  bool tiny = false;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : read_train_config(a.config);
  if (a.scale) cfg.scale = *a.scale;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.mode) cfg.mode = parse_mode(*a.mode);
  if (a.tiny) cfg.tiny_profile = true;
  cfg.validate();

  const DatasetManifest manifest = read_manifest(a.data);
  validate_manifest(manifest);
  const TrainResult r = train(cfg, manifest, a.out);
  const StepRecord* last = r.log.steps.empty() ? nullptr : &r.log.steps.back();
  std::cout << fmt::format("{} steps, {} checkpoints in {}\n", r.log.steps.size(),
                           r.checkpoints.size(), a.out);
  if (last != nullptr) {
    std::cout << fmt::format("final step: total {:.6g}  l2 {:.6g}  d_loss {:.6g}\n", last->total,
                             last->l2, last->d_loss);
  }
  return kExitOk;
}

struct EvalArgs {
  std::string ckpt, data, split, report;
};

int run_eval(const EvalArgs& a) {
  const Split split = parse_split(a.split);
  const Generator<float> gen = load_generator(a.ckpt);
  const DatasetManifest manifest = read_manifest(a.data);
  const MetricReport report = eval_report(gen, manifest, split);
  write_report(report, a.report);
  std::cout << format_report(report);
  return report.mean ? kExitOk : kExitContract;
}

struct InferArgs {
  std::string ckpt, input, output;
  std::optional<std::string> roi;
};

int run_infer(const InferArgs& a) {
  std::optional<Roi> roi;
  if (a.roi) roi = parse_roi(*a.roi);
  infer_file(a.ckpt, a.input, roi, a.output);
  std::cout << fmt::format("wrote {}\n", a.output);
  return kExitOk;
}

struct BenchArgs {
  std::string ckpt, size, csv;
  std::size_t iters = 20;
  std::size_t warmup = 3;
};

int run_bench(const BenchArgs& a) {
  const auto [w, h] = parse_size(a.size);
  const Generator<float> gen = load_generator(a.ckpt);
  const BenchReport r = bench(gen, w, h, a.iters, a.warmup);
  std::cout << format_bench(r);
  if (!a.csv.empty()) {
    std::ofstream os(a.csv, std::ios::binary);
    if (!os) throw IoError(fmt::format("cannot write '{}'", a.csv));
    os << format_bench_csv(r);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Underwater single-image super-resolution toolkit"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare-data", "Build HR/LR pairs from a folder of images");
  prepare->add_option("--input", prep.input, "Directory of HR images (test/ subfolder = test split)")
      ->required();
  prepare->add_option("--output", prep.output, "Output dataset directory")->required();
  prepare->add_option("--scales", prep.scales, "Comma-separated subset of 2,4,8")
      ->capture_default_str();
  prepare->add_option("--jpeg-quality", prep.jpeg_quality, "JPEG quality of the LR source")
      ->capture_default_str();
  prepare->add_option("--seed", prep.seed, "Seed of the train/val split")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a generator (gen) or generator + PatchGAN (gan)");
  train_cmd->add_option("--config", tr.config, "key = value configuration file");
  train_cmd->add_option("--data", tr.data, "Dataset directory or manifest")->required();
  train_cmd->add_option("--scale", tr.scale, "2, 4 or 8");
  train_cmd->add_option("--mode", tr.mode, "gen or gan");
  train_cmd->add_option("--epochs", tr.epochs, "Number of epochs");
  train_cmd->add_option("--batch-size", tr.batch_size, "Batch size");
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_flag("--tiny", tr.tiny, "Desk-scale profile (16 filters, 2 residual layers)");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM/UIQM of a checkpoint on a dataset split");
  eval->add_option("--ckpt", ev.ckpt, "Checkpoint file")->required();
  eval->add_option("--data", ev.data, "Dataset directory or manifest")->required();
  eval->add_option("--split", ev.split, "train, val or test")->required();
  eval->add_option("--report", ev.report, "Text report path (a .csv is written alongside)")
      ->required();

  InferArgs inf;
  auto* infer = app.add_subcommand("infer", "Super-resolve one image or a region of it");
  infer->add_option("--ckpt", inf.ckpt, "Checkpoint file")->required();
  infer->add_option("--input", inf.input, "Input image")->required();
  infer->add_option("--roi", inf.roi, "Region X,Y,W,H (each side >= 8)");
  infer->add_option("--output", inf.output, "Output image")->required();

  BenchArgs bn;
  auto* bench_cmd = app.add_subcommand("bench", "Per-frame latency of a checkpoint");
  bench_cmd->add_option("--ckpt", bn.ckpt, "Checkpoint file")->required();
  bench_cmd->add_option("--size", bn.size, "Input extent WxH")->required();
  bench_cmd->add_option("--iters", bn.iters, "Timed iterations (>= 10)")->capture_default_str();
  bench_cmd->add_option("--warmup", bn.warmup, "Untimed warmup iterations")->capture_default_str();
  bench_cmd->add_option("--csv", bn.csv, "Also write a CSV report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitContract;
  }

  try {
    if (*prepare) return run_prepare(prep);
    if (*train_cmd) return run_train(tr);
    if (*eval) return run_eval(ev);
    if (*infer) return run_infer(inf);
    if (*bench_cmd) return run_bench(bn);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitContract;
  }
  return kExitContract;
}
