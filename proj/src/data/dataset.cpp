#include "svaesr/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "svaesr/core/error.hpp"
#include "svaesr/core/png_io.hpp"
#include "svaesr/core/resize.hpp"

namespace fs = std::filesystem;

namespace svaesr::data {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path.string() : (base / path).lexically_normal().string();
}

void check_png(const std::string& manifest, const std::string& path) {
  if (!fs::exists(path))
    throw IoError("manifest '" + manifest + "' lists missing file '" + path + "'");
  if (!has_png_signature(path))
    throw FormatError("manifest '" + manifest + "' lists non-PNG file '" + path + "'");
}

ImageTensor flip_transpose(const ImageTensor& img, bool hflip, bool vflip, bool transpose) {
  const int h = img.height(), w = img.width();
  const int oh = transpose ? w : h, ow = transpose ? h : w;
  ImageTensor out(img.channels(), oh, ow, img.range());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        int sy = transpose ? x : y, sx = transpose ? y : x;
        if (vflip) sy = h - 1 - sy;
        if (hflip) sx = w - 1 - sx;
        out.at(c, y, x) = img.at(c, sy, sx);
      }
  return out;
}

}  // namespace

std::string role_name(Role role) { return role == Role::kTrain ? "train" : "eval"; }

Role parse_role(const std::string& text) {
  if (text == "train") return Role::kTrain;
  if (text == "eval") return Role::kEval;
  throw FormatError("unknown manifest role '" + text + "' (expected train or eval)");
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  const fs::path base = fs::path(path).parent_path();
  DatasetManifest m;
  bool have_role = false;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("name=", 0) == 0) {
      m.name = trim(line.substr(5));
    } else if (line.rfind("role=", 0) == 0) {
      m.role = parse_role(trim(line.substr(5)));
      have_role = true;
    } else if (line.rfind("ref=", 0) == 0) {
      m.reference_paths.push_back(resolve(base, trim(line.substr(4))));
    } else {
      m.image_paths.push_back(resolve(base, line));
    }
  }
  if (m.name.empty()) throw FormatError("manifest '" + path + "' has no name= header");
  if (!have_role) throw FormatError("manifest '" + path + "' has no role= header");
  for (const auto& p : m.image_paths) check_png(path, p);
  for (const auto& p : m.reference_paths) check_png(path, p);
  return m;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  out << "name=" << manifest.name << "\nrole=" << role_name(manifest.role) << "\n";
  for (const auto& p : manifest.reference_paths) out << "ref=" << p << "\n";
  for (const auto& p : manifest.image_paths) out << p << "\n";
  if (!out) throw IoError("failed writing manifest '" + path + "'");
}

DatasetManifest manifest_from_directory(const std::string& dir, const std::string& name, Role role) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir + "' is not a directory");
  DatasetManifest m;
  m.name = name;
  m.role = role;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") m.image_paths.push_back(fs::absolute(entry.path()).lexically_normal().string());
  }
  std::sort(m.image_paths.begin(), m.image_paths.end());
  return m;
}

std::vector<ImageTensor> load_images(const std::vector<std::string>& paths) {
  std::vector<ImageTensor> images;
  for (const auto& p : paths) {
    try {
      images.push_back(to_rgb(load_image(p)));
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping image: " << e.what() << "\n";
    }
  }
  return images;
}

void SamplerConfig::validate() const {
  SVAESR_REQUIRE(patch >= 1 && queries >= 1 && ref_patch >= 1, "sampler: sizes must be positive");
  SVAESR_REQUIRE(std::isfinite(scale_min) && std::isfinite(scale_max) && scale_min >= 1.0 &&
                     scale_max >= scale_min,
                 "sampler: scale range must satisfy 1 <= min <= max");
}

std::optional<TrainSample> sample_training_pair(const ImageTensor& hr,
                                                const std::vector<ImageTensor>& references,
                                                const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  constexpr int kScaleDraws = 8;
  double scale = 0.0;
  int side = 0;
  bool fits = false;
  for (int attempt = 0; attempt < kScaleDraws && !fits; ++attempt) {
    scale = cfg.scale_min + (cfg.scale_max - cfg.scale_min) * uniform01(rng);
    side = static_cast<int>(std::lround(cfg.patch * scale));
    fits = side <= hr.height() && side <= hr.width();
  }
  if (!fits) return std::nullopt;

  TrainSample s;
  s.scale = scale;
  s.hr_size = side;
  const int top = static_cast<int>(uniform_index(rng, hr.height() - side + 1));
  const int left = static_cast<int>(uniform_index(rng, hr.width() - side + 1));
  ImageTensor patch = crop(to_rgb(hr), top, left, side, side);
  if (cfg.augment) {
    const auto bits = uniform_index(rng, 8);
    patch = flip_transpose(patch, bits & 1, bits & 2, bits & 4);
  }
  s.lr_patch = bicubic_resize_to(patch, cfg.patch, cfg.patch);

  const CoordGrid grid = make_coord_grid(side, side);
  const std::size_t q = std::min<std::size_t>(cfg.queries, grid.size());
  const auto idx = draw_distinct(grid.size(), q, rng);
  const ImageTensor signed_patch = to_signed(patch);
  s.rgb_targets.resize(q * 3);
  for (std::size_t i = 0; i < q; ++i) {
    const int p = idx[i];
    s.coords.push_back(grid.coords[p], grid.cells[p]);
    for (int c = 0; c < 3; ++c) s.rgb_targets[i * 3 + c] = signed_patch.plane(c)[p];
  }

  if (references.empty()) {
    s.reference = patch;
  } else {
    const ImageTensor& ref = references[uniform_index(rng, references.size())];
    const int rh = std::min(cfg.ref_patch, ref.height()), rw = std::min(cfg.ref_patch, ref.width());
    const int rt = static_cast<int>(uniform_index(rng, ref.height() - rh + 1));
    const int rl = static_cast<int>(uniform_index(rng, ref.width() - rw + 1));
    s.reference = crop(to_rgb(ref), rt, rl, rh, rw);
  }
  return s;
}

ImageTensor add_gaussian_noise(const ImageTensor& img, double tau, Rng& rng, NoiseScale scale) {
  SVAESR_REQUIRE(std::isfinite(tau) && tau >= 0.0, "add_gaussian_noise: tau must be non-negative");
  SVAESR_REQUIRE(img.range() == ValueRange::kUnit, "add_gaussian_noise: expects a unit-range image");
  ImageTensor out = img;
  if (tau == 0.0) return out;
  const double sigma = scale == NoiseScale::k8bit ? tau / 255.0 : tau;
  for (float& v : out.data()) v = static_cast<float>(v + sigma * standard_normal(rng));
  out.clamp_to_range();
  return out;
}

EvalPair make_eval_pair(const ImageTensor& hr, double scale) {
  SVAESR_REQUIRE(std::isfinite(scale) && scale > 0.0, "make_eval_pair: scale must be positive");
  // The small slack keeps exact multiples (e.g. 720 / 3) from flooring down.
  const int lr_h = static_cast<int>(std::floor(hr.height() / scale + 1e-9));
  const int lr_w = static_cast<int>(std::floor(hr.width() / scale + 1e-9));
  SVAESR_REQUIRE(lr_h >= 1 && lr_w >= 1, "make_eval_pair: image too small for this scale");
  const int hr_h = static_cast<int>(std::lround(lr_h * scale));
  const int hr_w = static_cast<int>(std::lround(lr_w * scale));
  SVAESR_REQUIRE(hr_h <= hr.height() && hr_w <= hr.width(), "make_eval_pair: degenerate crop");
  EvalPair pair;
  pair.hr = crop(hr, 0, 0, hr_h, hr_w);
  pair.lr = (lr_h == hr_h && lr_w == hr_w) ? pair.hr : bicubic_resize_to(pair.hr, lr_h, lr_w);
  return pair;
}

BatchStream::BatchStream(std::vector<ImageTensor> images, std::vector<ImageTensor> references,
                         SamplerConfig cfg, int batch_size, std::uint64_t seed)
    : images_(std::move(images)),
      references_(std::move(references)),
      cfg_(cfg),
      batch_size_(batch_size),
      seed_(seed) {
  cfg_.validate();
  SVAESR_REQUIRE(!images_.empty(), "batch stream: no training images");
  SVAESR_REQUIRE(batch_size >= 1, "batch stream: batch size must be positive");
}

std::size_t BatchStream::image_at(std::uint64_t epoch, std::uint64_t position) const {
  if (cached_epoch_ != epoch) {
    order_.resize(images_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    Rng rng(derive_seed(seed_, {1, epoch}));
    for (std::size_t i = order_.size(); i > 1; --i)
      std::swap(order_[i - 1], order_[uniform_index(rng, i)]);
    cached_epoch_ = epoch;
  }
  return order_[position];
}

std::vector<TrainSample> BatchStream::next() {
  std::vector<TrainSample> batch;
  std::uint64_t consecutive_skips = 0;
  while (static_cast<int>(batch.size()) < batch_size_) {
    const std::size_t need = batch_size_ - batch.size();
    std::vector<std::size_t> picks(need);
    std::vector<std::uint64_t> streams(need);
    for (std::size_t i = 0; i < need; ++i) {
      picks[i] = image_at(state_.epoch, state_.position);
      streams[i] = state_.counter++;
      if (++state_.position == images_.size()) {
        state_.position = 0;
        ++state_.epoch;
      }
    }
    std::vector<std::optional<TrainSample>> made(need);
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(need); ++i) {
      Rng rng(derive_seed(seed_, {2, streams[i]}));
      made[i] = sample_training_pair(images_[picks[i]], references_, cfg_, rng);
    }
    for (std::size_t i = 0; i < need; ++i) {
      if (made[i]) {
        batch.push_back(std::move(*made[i]));
        consecutive_skips = 0;
      } else {
        std::cerr << "warning: image " << picks[i] << " too small for the drawn scales, skipped\n";
        if (++consecutive_skips > 2 * images_.size() + 16)
          throw ArgumentError("batch stream: no training image is large enough for the patch size");
      }
    }
  }
  return batch;
}

}  // namespace svaesr::data
