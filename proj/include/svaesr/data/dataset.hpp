#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "svaesr/core/coord_grid.hpp"
#include "svaesr/core/image.hpp"
#include "svaesr/core/rng.hpp"

namespace svaesr::data {

enum class Role { kTrain, kEval };

/// Line-oriented image list:
///
///   name=DIV2K
///   role=eval
///   ref=optional/reference.png     (any number)
///   images/0801.png                (one path per line)
///
/// Blank lines and lines starting with '#' are ignored. Relative paths are
/// resolved against the manifest's directory.
struct DatasetManifest {
  std::string name;
  Role role = Role::kEval;
  std::vector<std::string> image_paths;
  std::vector<std::string> reference_paths;
};

/// Parses and validates a manifest; every path must exist and carry a PNG signature.
DatasetManifest read_manifest(const std::string& path);
void write_manifest(const DatasetManifest& manifest, const std::string& path);

/// Every *.png directly inside dir, sorted by file name.
DatasetManifest manifest_from_directory(const std::string& dir, const std::string& name, Role role);

std::string role_name(Role role);
Role parse_role(const std::string& text);

/// Loads every image, skipping (and reporting on stderr) unreadable ones.
std::vector<ImageTensor> load_images(const std::vector<std::string>& paths);

struct SamplerConfig {
  int patch = 48;        // LR patch side
  int queries = 2304;    // HR coordinate-RGB pairs per sample
  int ref_patch = 48;    // reference crop side
  double scale_min = 1.0;
  double scale_max = 4.0;
  bool augment = false;  // random flips and transposes of the HR crop

  void validate() const;
};

struct TrainSample {
  ImageTensor lr_patch;  // unit range, patch x patch
  double scale = 1.0;
  int hr_size = 0;               // side of the HR crop
  CoordGrid coords;              // sampled HR pixel centers, normalized to the crop
  std::vector<float> rgb_targets;  // coords.size() x 3, signed range
  ImageTensor reference;         // unit range
};

/// Random-scale LR/HR training pair. Returns nothing when the image cannot
/// hold a crop after eight scale draws.
std::optional<TrainSample> sample_training_pair(const ImageTensor& hr,
                                                const std::vector<ImageTensor>& references,
                                                const SamplerConfig& cfg, Rng& rng);

/// How the noise level is read: tau / 255 (8-bit levels) or tau as is.
enum class NoiseScale { k8bit, kUnit };

/// Adds i.i.d. N(0, sigma^2) to every value and clamps to range.
ImageTensor add_gaussian_noise(const ImageTensor& img, double tau, Rng& rng,
                               NoiseScale scale = NoiseScale::k8bit);

struct EvalPair {
  ImageTensor lr;
  ImageTensor hr;  // cropped so that round(lr size * scale) reproduces it exactly
};

/// The LR side is floor(H / scale); HR is cropped (top-left) to round(h_lr * scale).
/// For integral scales this is the usual divisibility crop.
EvalPair make_eval_pair(const ImageTensor& hr, double scale);

/// Infinite shuffled stream of training batches. Each epoch visits the images
/// in a fresh permutation derived from (seed, epoch); each sample draws from
/// its own stream derived from (seed, sample counter), so samples can be built
/// concurrently without changing the result.
class BatchStream {
 public:
  struct State {
    std::uint64_t epoch = 0;
    std::uint64_t position = 0;  // next slot in the current permutation
    std::uint64_t counter = 0;   // samples drawn so far
  };

  BatchStream(std::vector<ImageTensor> images, std::vector<ImageTensor> references,
              SamplerConfig cfg, int batch_size, std::uint64_t seed);

  std::vector<TrainSample> next();

  const State& state() const { return state_; }
  void restore(const State& state) { state_ = state; }
  std::size_t images() const { return images_.size(); }

  /// Index of the image visited at the given epoch slot.
  std::size_t image_at(std::uint64_t epoch, std::uint64_t position) const;

 private:
  std::vector<ImageTensor> images_;
  std::vector<ImageTensor> references_;
  SamplerConfig cfg_;
  int batch_size_;
  std::uint64_t seed_;
  State state_;
  mutable std::uint64_t cached_epoch_ = ~0ULL;
  mutable std::vector<std::size_t> order_;
};

}  // namespace svaesr::data
