#pragma once

#include <span>
#include <vector>

#include "svaesr/core/image.hpp"
#include "svaesr/nn/layers.hpp"

namespace svaesr::model {

/// Latent code grid produced by the feature extractor. Codes are stored
/// pixel-major (HWC); `base` keeps the signed-range LR pixels (HW x 3) for the
/// decoder's interpolation skip.
template <typename T>
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> codes;
  std::vector<T> base;

  T code(int c, int y, int x) const {
    return codes[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t positions() const { return static_cast<std::size_t>(height) * width; }
};

struct ExtractorConfig {
  int features = 64;
  int blocks = 8;
};

/// EDSR-style residual stack without upsampling: head conv, `blocks` x
/// (conv, ReLU, conv, skip), tail conv, global skip from the head.
class FeatureExtractor {
 public:
  template <typename T>
  struct Cache {
    std::vector<T> input;
    nn::Matrix<T> head_col, tail_col;
    std::vector<nn::Matrix<T>> col1, col2;
    std::vector<std::vector<T>> hidden;  // post-ReLU activation of each block
  };

  FeatureExtractor() = default;
  FeatureExtractor(const ExtractorConfig& cfg, nn::ParamLayout& layout);

  const ExtractorConfig& config() const { return cfg_; }

  /// lr must be RGB; unit-range input is mapped to signed range first.
  template <typename T>
  FeatureMap<T> forward(std::span<const T> p, const ImageTensor& lr, Cache<T>* cache) const;

  /// Accumulates parameter gradients given dL/dcodes (HWC).
  template <typename T>
  void backward(std::span<const T> p, const Cache<T>& cache, int h, int w,
                std::span<const T> dcodes, T* grads) const;

 private:
  ExtractorConfig cfg_;
  nn::Conv3x3 head_, tail_;
  std::vector<nn::Conv3x3> conv1_, conv2_;
};

/// Convenience wrapper: features of an LR image without a cache.
template <typename T>
FeatureMap<T> extract_features(const FeatureExtractor& g, std::span<const T> params,
                               const ImageTensor& lr) {
  return g.forward<T>(params, lr, nullptr);
}

}  // namespace svaesr::model
