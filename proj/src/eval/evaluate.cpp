#include "svaesr/eval/evaluate.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <sstream>

#include "svaesr/core/error.hpp"
#include "svaesr/core/metrics.hpp"
#include "svaesr/core/png_io.hpp"
#include "svaesr/core/resize.hpp"

namespace svaesr::eval {

namespace {

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_num(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError("report: bad number '" + s + "'");
  return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string convention_name(PsnrConvention c) { return c == PsnrConvention::kY ? "y" : "rgb"; }

PsnrConvention parse_convention(const std::string& name) {
  if (name == "y") return PsnrConvention::kY;
  if (name == "rgb") return PsnrConvention::kRgb;
  throw FormatError("unknown PSNR convention '" + name + "'");
}

PsnrConvention default_convention(const std::string& dataset) {
  std::string lower = dataset;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return lower.rfind("div2k", 0) == 0 ? PsnrConvention::kRgb : PsnrConvention::kY;
}

double convention_psnr(const ImageTensor& sr, const ImageTensor& hr, double scale, PsnrConvention c) {
  if (c == PsnrConvention::kRgb) return psnr(to_rgb(sr), to_rgb(hr), 0);
  const int border = static_cast<int>(std::ceil(scale - 1e-9));
  return psnr(rgb_to_y(to_rgb(sr)), rgb_to_y(to_rgb(hr)), border);
}

ImageTensor BicubicUpscaler::upscale(const ImageTensor& lr, int out_h, int out_w,
                                     std::uint64_t) const {
  return bicubic_resize_to(lr, out_h, out_w);
}

ModelUpscaler::ModelUpscaler(const train::TrainConfig& cfg, std::vector<float> generator,
                             std::string id, std::optional<std::uint64_t> seed)
    : model_(std::make_unique<model::SvaeModel>(cfg.model)),
      generator_(std::move(generator)),
      id_(std::move(id)),
      seed_(seed) {
  if (generator_.size() != model_->generator_layout().total())
    throw FormatError("model parameters do not match the configuration");
}

std::unique_ptr<ModelUpscaler> ModelUpscaler::from_checkpoint(const std::string& path,
                                                              std::optional<std::uint64_t> seed) {
  auto state = train::load_checkpoint(path);
  return std::make_unique<ModelUpscaler>(state.config, std::move(state.generator), path, seed);
}

ImageTensor ModelUpscaler::upscale(const ImageTensor& lr, int out_h, int out_w,
                                   std::uint64_t image_seed) const {
  const int dz = model_->config().decoder.latent_dim;
  std::vector<float> z(dz, 0.0f);
  if (seed_) {
    Rng rng(derive_seed(*seed_, image_seed));
    const auto draw = model::sample_prior(dz, rng);
    z.assign(draw.begin(), draw.end());
  }
  return model::super_resolve_to(model_->extractor(), model_->decoder(), generator_, to_rgb(lr),
                                 out_h, out_w, z);
}

EvalReport evaluate_images(const Upscaler& method, const std::string& dataset,
                           const std::vector<ImageTensor>& images, const EvalOptions& options) {
  std::vector<std::string> names(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) names[i] = std::to_string(i);
  EvalReport report;
  report.dataset = dataset;
  report.model_id = method.id();
  report.convention = options.convention.value_or(default_convention(dataset));
  report.noise_tau = options.noise_tau;
  SVAESR_REQUIRE(!options.scales.empty(), "evaluate: no scales given");
  for (double s : options.scales)
    SVAESR_REQUIRE(std::isfinite(s) && s > 0.0, "evaluate: scales must be positive");
  SVAESR_REQUIRE(options.noise_tau >= 0.0, "evaluate: noise must be non-negative");

  const std::size_t ns = options.scales.size();
  report.images.resize(images.size() * ns);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(images.size()); ++i) {
    const ImageTensor hr_full = to_rgb(images[i]);
    for (std::size_t k = 0; k < ns; ++k) {
      const double scale = options.scales[k];
      const auto start = std::chrono::steady_clock::now();
      const auto pair = data::make_eval_pair(hr_full, scale);
      ImageTensor lr = options.quantize_lr ? quantize_8bit(pair.lr) : pair.lr;
      if (options.noise_tau > 0.0) {
        Rng rng(derive_seed(options.noise_seed, {static_cast<std::uint64_t>(i), k, 1}));
        lr = data::add_gaussian_noise(lr, options.noise_tau, rng, options.noise_scale);
        if (options.quantize_lr) lr = quantize_8bit(lr);
      }
      const std::uint64_t image_seed = derive_seed(static_cast<std::uint64_t>(i), k);
      const ImageTensor sr = method.upscale(lr, pair.hr.height(), pair.hr.width(), image_seed);
      SVAESR_REQUIRE(sr.same_shape(pair.hr), "evaluate: method returned the wrong size");
      ImageResult& r = report.images[i * ns + k];
      r.image = names[i];
      r.scale = scale;
      r.psnr = convention_psnr(sr, pair.hr, scale, report.convention);
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  }
  for (std::size_t k = 0; k < ns; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < images.size(); ++i) sum += report.images[i * ns + k].psnr;
    report.scales.push_back({options.scales[k], images.empty() ? 0.0 : sum / images.size()});
  }
  return report;
}

EvalReport evaluate(const Upscaler& method, const data::DatasetManifest& manifest,
                    const EvalOptions& options) {
  SVAESR_REQUIRE(!manifest.image_paths.empty(), "evaluate: manifest lists no images");
  std::vector<ImageTensor> images;
  images.reserve(manifest.image_paths.size());
  for (const auto& p : manifest.image_paths) images.push_back(load_image(p));
  EvalReport report = evaluate_images(method, manifest.name, images, options);
  const std::size_t ns = options.scales.size();
  for (std::size_t i = 0; i < report.images.size(); ++i)
    report.images[i].image = manifest.image_paths[i / ns];
  return report;
}

ImageTensor residual_image(const ImageTensor& sr, const ImageTensor& hr, double gain) {
  SVAESR_REQUIRE(sr.same_shape(hr), "residual_image: shape mismatch");
  SVAESR_REQUIRE(std::isfinite(gain) && gain > 0.0, "residual_image: gain must be positive");
  const ImageTensor a = to_unit(sr), b = to_unit(hr);
  ImageTensor out(a.channels(), a.height(), a.width(), ValueRange::kUnit);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = static_cast<float>(0.5 + gain * (static_cast<double>(a.data()[i]) - b.data()[i]));
  out.clamp_to_range();
  return out;
}

std::string format_scale(double scale) {
  std::ostringstream s;
  s << scale;
  return s.str();
}

std::string format_summary(const EvalReport& report) {
  std::ostringstream out;
  for (const auto& s : report.scales) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", s.mean_psnr);
    out << report.dataset << " x" << format_scale(s.scale) << " " << buf << "\n";
  }
  return out.str();
}

std::string serialize_report(const EvalReport& r) {
  std::ostringstream out;
  out << "report\t" << r.dataset << "\t" << r.model_id << "\t" << convention_name(r.convention) << "\t"
      << num(r.noise_tau) << "\n";
  for (const auto& s : r.scales) out << "scale\t" << num(s.scale) << "\t" << num(s.mean_psnr) << "\n";
  for (const auto& i : r.images)
    out << "image\t" << i.image << "\t" << num(i.scale) << "\t" << num(i.psnr) << "\t" << num(i.seconds)
        << "\n";
  return out.str();
}

EvalReport parse_report(const std::string& text) {
  EvalReport r;
  bool header = false;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f[0] == "report" && f.size() == 5) {
      r.dataset = f[1];
      r.model_id = f[2];
      r.convention = parse_convention(f[3]);
      r.noise_tau = parse_num(f[4]);
      header = true;
    } else if (f[0] == "scale" && f.size() == 3) {
      r.scales.push_back({parse_num(f[1]), parse_num(f[2])});
    } else if (f[0] == "image" && f.size() == 5) {
      r.images.push_back({f[1], parse_num(f[2]), parse_num(f[3]), parse_num(f[4])});
    } else {
      throw FormatError("report: unrecognized line '" + line + "'");
    }
  }
  if (!header) throw FormatError("report: missing header line");
  return r;
}

bool EvalReport::operator==(const EvalReport& o) const {
  if (dataset != o.dataset || model_id != o.model_id || convention != o.convention ||
      noise_tau != o.noise_tau || scales.size() != o.scales.size() || images.size() != o.images.size())
    return false;
  for (std::size_t i = 0; i < scales.size(); ++i)
    if (scales[i].scale != o.scales[i].scale || scales[i].mean_psnr != o.scales[i].mean_psnr) return false;
  for (std::size_t i = 0; i < images.size(); ++i)
    if (images[i].image != o.images[i].image || images[i].scale != o.images[i].scale ||
        images[i].psnr != o.images[i].psnr || images[i].seconds != o.images[i].seconds)
      return false;
  return true;
}

}  // namespace svaesr::eval
