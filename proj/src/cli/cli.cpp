#include "svaesr/cli/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "svaesr/core/error.hpp"
#include "svaesr/core/png_io.hpp"
#include "svaesr/core/resize.hpp"
#include "svaesr/data/dataset.hpp"
#include "svaesr/eval/evaluate.hpp"
#include "svaesr/train/trainer.hpp"

namespace fs = std::filesystem;

namespace svaesr::cli {

namespace {

struct TrainArgs {
  std::string config, data, ref, resume, out = "run", val;
  std::uint64_t stop_at = 0;
};

struct EvalArgs {
  std::string ckpt, method, data, report, noise_scale = "8bit";
  std::vector<double> scales;
  double noise = 0.0;
  bool y_psnr = false, rgb_psnr = false;
  std::optional<std::uint64_t> seed;
};

struct SrArgs {
  std::string ckpt, in, out;
  double scale = 0.0;
  std::optional<std::uint64_t> seed;
};

struct MakeLrArgs {
  std::string in, out;
  double scale = 0.0;
};

struct ResidualArgs {
  std::string a, b, out;
  double gain = 1.0;
};

struct ManifestArgs {
  std::string dir, out, name, role = "eval";
};

std::vector<ImageTensor> reference_pool(const data::DatasetManifest& train, const std::string& ref_path) {
  std::vector<std::string> paths = train.reference_paths;
  if (!ref_path.empty()) {
    const auto ref = data::read_manifest(ref_path);
    paths.insert(paths.end(), ref.image_paths.begin(), ref.image_paths.end());
    paths.insert(paths.end(), ref.reference_paths.begin(), ref.reference_paths.end());
  }
  return data::load_images(paths);
}

int do_train(const TrainArgs& a, std::ostream& out) {
  const auto cfg = train::load_config(a.config);
  const auto manifest = data::read_manifest(a.data);
  auto images = data::load_images(manifest.image_paths);
  auto refs = reference_pool(manifest, a.ref);
  std::vector<ImageTensor> val;
  if (!a.val.empty()) val = data::load_images(data::read_manifest(a.val).image_paths);
  train::FitOptions opt;
  opt.out_dir = a.out;
  if (!a.resume.empty()) opt.resume = a.resume;
  opt.stop_at = a.stop_at;
  opt.log = [&out](const std::string& line) { out << line << std::endl; };
  const auto state = train::fit(cfg, std::move(images), std::move(refs), val, opt);
  out << "checkpoint " << (fs::path(a.out) / "last.ckpt").string() << " iter " << state.iteration
      << "\n";
  return kExitOk;
}

int do_eval(const EvalArgs& a, std::ostream& out) {
  SVAESR_REQUIRE(a.ckpt.empty() != a.method.empty(), "eval: give exactly one of --ckpt or --method");
  SVAESR_REQUIRE(a.method.empty() || a.method == "bicubic", "eval: the only built-in method is bicubic");
  SVAESR_REQUIRE(!(a.y_psnr && a.rgb_psnr), "eval: --y-psnr and --rgb-psnr are exclusive");
  SVAESR_REQUIRE(a.noise_scale == "8bit" || a.noise_scale == "unit", "eval: --noise-scale is 8bit or unit");

  std::unique_ptr<eval::Upscaler> method;
  if (a.ckpt.empty())
    method = std::make_unique<eval::BicubicUpscaler>();
  else
    method = eval::ModelUpscaler::from_checkpoint(a.ckpt, a.seed);
  const auto manifest = data::read_manifest(a.data);

  eval::EvalOptions opt;
  opt.scales = a.scales;
  opt.noise_tau = a.noise;
  opt.noise_scale = a.noise_scale == "unit" ? data::NoiseScale::kUnit : data::NoiseScale::k8bit;
  opt.noise_seed = a.seed.value_or(0);
  if (a.y_psnr) opt.convention = eval::PsnrConvention::kY;
  if (a.rgb_psnr) opt.convention = eval::PsnrConvention::kRgb;
  const auto report = eval::evaluate(*method, manifest, opt);
  out << eval::format_summary(report);
  if (!a.report.empty()) {
    std::ofstream f(a.report);
    if (!f) throw IoError("cannot write report '" + a.report + "'");
    f << eval::serialize_report(report);
  }
  return kExitOk;
}

int do_sr(const SrArgs& a, std::ostream& out) {
  SVAESR_REQUIRE(a.scale > 0.0, "sr: --scale must be positive");
  const auto up = eval::ModelUpscaler::from_checkpoint(a.ckpt, a.seed);
  const ImageTensor lr = to_rgb(load_image(a.in));
  const int h = static_cast<int>(std::lround(lr.height() * a.scale));
  const int w = static_cast<int>(std::lround(lr.width() * a.scale));
  SVAESR_REQUIRE(h >= 1 && w >= 1, "sr: output would be empty");
  const ImageTensor sr = up->upscale(lr, h, w, 0);
  save_image(sr, a.out);
  out << a.out << " " << sr.width() << "x" << sr.height() << "\n";
  return kExitOk;
}

int do_make_lr(const MakeLrArgs& a, std::ostream& out) {
  SVAESR_REQUIRE(a.scale > 0.0, "make-lr: --scale must be positive");
  const auto manifest = data::manifest_from_directory(a.in, "input", data::Role::kEval);
  fs::create_directories(a.out);
  for (const auto& p : manifest.image_paths) {
    const auto pair = data::make_eval_pair(load_image(p), a.scale);
    const std::string dst = (fs::path(a.out) / fs::path(p).filename()).string();
    save_image(pair.lr, dst);
    out << dst << " " << pair.lr.width() << "x" << pair.lr.height() << "\n";
  }
  return kExitOk;
}

int do_residual(const ResidualArgs& a, std::ostream& out) {
  const auto img = eval::residual_image(load_image(a.a), load_image(a.b), a.gain);
  save_image(img, a.out);
  out << a.out << " " << img.width() << "x" << img.height() << "\n";
  return kExitOk;
}

int do_manifest(const ManifestArgs& a, std::ostream& out) {
  const std::string name = a.name.empty() ? fs::path(a.dir).filename().string() : a.name;
  const auto m = data::manifest_from_directory(a.dir, name, data::parse_role(a.role));
  data::write_manifest(m, a.out);
  out << a.out << " " << m.image_paths.size() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous super-resolution with a conditional soft-introspective VAE", "svaesr"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", ta.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  train->add_option("--data", ta.data, "Training image manifest")->required();
  train->add_option("--ref", ta.ref, "Reference image manifest");
  train->add_option("--resume", ta.resume, "Checkpoint to continue from");
  train->add_option("--out", ta.out, "Output directory")->capture_default_str();
  train->add_option("--val", ta.val, "Validation image manifest");
  train->add_option("--stop-at", ta.stop_at, "Stop after this iteration");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Multi-scale PSNR evaluation");
  ev->add_option("--ckpt", ea.ckpt, "Model checkpoint");
  ev->add_option("--method", ea.method, "Built-in method instead of a checkpoint (bicubic)");
  ev->add_option("--data", ea.data, "Image manifest")->required();
  ev->add_option("--scales", ea.scales, "Comma-separated scales")->required()->delimiter(',');
  ev->add_option("--noise", ea.noise, "Gaussian noise level added to the LR input");
  ev->add_option("--noise-scale", ea.noise_scale, "8bit (tau/255) or unit")->capture_default_str();
  ev->add_flag("--y-psnr", ea.y_psnr, "Luma PSNR with a ceil(scale) border crop");
  ev->add_flag("--rgb-psnr", ea.rgb_psnr, "RGB PSNR without crop");
  ev->add_option("--seed", ea.seed, "Sample z from the prior (and seed the noise)");
  ev->add_option("--report", ea.report, "Write line-delimited records to this file");

  SrArgs sa;
  auto* sr = app.add_subcommand("sr", "Super-resolve one image");
  sr->add_option("--ckpt", sa.ckpt, "Model checkpoint")->required();
  sr->add_option("--in", sa.in, "Input PNG")->required();
  sr->add_option("--scale", sa.scale, "Upsampling factor")->required();
  sr->add_option("--out", sa.out, "Output PNG")->required();
  sr->add_option("--seed", sa.seed, "Sample z from the prior instead of using z = 0");

  MakeLrArgs ma;
  auto* mk = app.add_subcommand("make-lr", "Bicubic-downsample every PNG in a directory");
  mk->add_option("--in", ma.in, "Input directory")->required();
  mk->add_option("--scale", ma.scale, "Downsampling factor")->required();
  mk->add_option("--out", ma.out, "Output directory")->required();

  ResidualArgs ra;
  auto* rs = app.add_subcommand("residual", "Residual image 0.5 + gain * (a - b)");
  rs->add_option("--a", ra.a, "SR image")->required();
  rs->add_option("--b", ra.b, "HR image")->required();
  rs->add_option("--gain", ra.gain, "Residual gain")->required();
  rs->add_option("--out", ra.out, "Output PNG")->required();

  ManifestArgs fa;
  auto* mf = app.add_subcommand("manifest", "Write a manifest listing a directory's PNGs");
  mf->add_option("--dir", fa.dir, "Image directory")->required();
  mf->add_option("--out", fa.out, "Manifest path")->required();
  mf->add_option("--name", fa.name, "Dataset name (default: directory name)");
  mf->add_option("--role", fa.role, "train or eval")->capture_default_str();

  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return do_train(ta, out);
    if (*ev) return do_eval(ea, out);
    if (*sr) return do_sr(sa, out);
    if (*mk) return do_make_lr(ma, out);
    if (*rs) return do_residual(ra, out);
    if (*mf) return do_manifest(fa, out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace svaesr::cli
