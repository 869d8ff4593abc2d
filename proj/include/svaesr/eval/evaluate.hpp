#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "svaesr/data/dataset.hpp"
#include "svaesr/model/svae.hpp"
#include "svaesr/train/trainer.hpp"

namespace svaesr::eval {

/// Y: BT.601 luma with a border crop of ceil(scale); RGB: all channels, no crop.
enum class PsnrConvention { kY, kRgb };

std::string convention_name(PsnrConvention c);
PsnrConvention parse_convention(const std::string& name);

/// RGB for DIV2K (name prefix, any case), Y for everything else.
PsnrConvention default_convention(const std::string& dataset);

double convention_psnr(const ImageTensor& sr, const ImageTensor& hr, double scale, PsnrConvention c);

/// Anything that maps an LR image to an image of a requested size.
class Upscaler {
 public:
  virtual ~Upscaler() = default;
  virtual std::string id() const = 0;
  /// image_seed identifies the (image, scale) pair for methods that sample.
  virtual ImageTensor upscale(const ImageTensor& lr, int out_h, int out_w,
                              std::uint64_t image_seed) const = 0;
};

class BicubicUpscaler : public Upscaler {
 public:
  std::string id() const override { return "bicubic"; }
  ImageTensor upscale(const ImageTensor& lr, int out_h, int out_w, std::uint64_t) const override;
};

/// Trained model; z is the zero vector unless a seed is given, in which case
/// each image draws its own prior sample from (seed, image_seed).
class ModelUpscaler : public Upscaler {
 public:
  ModelUpscaler(const train::TrainConfig& cfg, std::vector<float> generator, std::string id,
                std::optional<std::uint64_t> seed = std::nullopt);
  static std::unique_ptr<ModelUpscaler> from_checkpoint(const std::string& path,
                                                        std::optional<std::uint64_t> seed);

  std::string id() const override { return id_; }
  ImageTensor upscale(const ImageTensor& lr, int out_h, int out_w,
                      std::uint64_t image_seed) const override;
  const model::SvaeModel& model() const { return *model_; }

 private:
  std::unique_ptr<model::SvaeModel> model_;
  std::vector<float> generator_;
  std::string id_;
  std::optional<std::uint64_t> seed_;
};

struct EvalOptions {
  std::vector<double> scales;
  double noise_tau = 0.0;
  data::NoiseScale noise_scale = data::NoiseScale::k8bit;
  std::uint64_t noise_seed = 0;
  std::optional<PsnrConvention> convention;  // default_convention() when unset
  bool quantize_lr = true;  // round the synthesized LR to 8 bits, as a saved LR PNG would be
};

struct ImageResult {
  std::string image;
  double scale = 0.0;
  double psnr = 0.0;
  double seconds = 0.0;
};

struct ScaleResult {
  double scale = 0.0;
  double mean_psnr = 0.0;
};

struct EvalReport {
  std::string dataset;
  std::string model_id;
  PsnrConvention convention = PsnrConvention::kY;
  double noise_tau = 0.0;
  std::vector<ScaleResult> scales;
  std::vector<ImageResult> images;  // image-major, scales in option order

  bool operator==(const EvalReport& o) const;
};

/// Runs make_eval_pair -> [8-bit LR] -> [noise] -> upscale -> PSNR for every
/// image and scale. Images are processed in parallel; the report keeps
/// manifest order.
EvalReport evaluate(const Upscaler& method, const data::DatasetManifest& manifest,
                    const EvalOptions& options);

/// Same on in-memory images named by index.
EvalReport evaluate_images(const Upscaler& method, const std::string& dataset,
                           const std::vector<ImageTensor>& images, const EvalOptions& options);

/// 0.5 + gain * (sr - hr), clamped to [0, 1].
ImageTensor residual_image(const ImageTensor& sr, const ImageTensor& hr, double gain);

/// Human-readable lines: "<dataset> x<scale> <mean psnr, 2 decimals>".
std::string format_summary(const EvalReport& report);

/// Line-delimited records that parse back to an identical report.
std::string serialize_report(const EvalReport& report);
EvalReport parse_report(const std::string& text);

/// Compact decimal form of a scale ("2", "6.3").
std::string format_scale(double scale);

}  // namespace svaesr::eval
