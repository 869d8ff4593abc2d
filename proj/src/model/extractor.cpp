#include "svaesr/model/extractor.hpp"

#include <string>

#include "svaesr/core/error.hpp"

namespace svaesr::model {

FeatureExtractor::FeatureExtractor(const ExtractorConfig& cfg, nn::ParamLayout& layout) : cfg_(cfg) {
  SVAESR_REQUIRE(cfg.features >= 1 && cfg.blocks >= 0, "extractor: invalid width or depth");
  head_ = nn::Conv3x3(layout, "extractor.head", 3, cfg.features);
  for (int b = 0; b < cfg.blocks; ++b) {
    const std::string name = "extractor.block" + std::to_string(b);
    conv1_.emplace_back(layout, name + ".conv1", cfg.features, cfg.features);
    conv2_.emplace_back(layout, name + ".conv2", cfg.features, cfg.features, nn::Init::kSmall);
  }
  tail_ = nn::Conv3x3(layout, "extractor.tail", cfg.features, cfg.features, nn::Init::kSmall);
}

template <typename T>
FeatureMap<T> FeatureExtractor::forward(std::span<const T> p, const ImageTensor& lr,
                                        Cache<T>* cache) const {
  SVAESR_REQUIRE(lr.channels() == 3, "extractor: LR input must be RGB");
  const ImageTensor signed_lr = to_signed(lr);
  const int h = lr.height(), w = lr.width(), f = cfg_.features;
  const std::size_t hw = static_cast<std::size_t>(h) * w;

  FeatureMap<T> out;
  out.channels = f;
  out.height = h;
  out.width = w;
  out.base.resize(hw * 3);
  for (std::size_t i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c) out.base[i * 3 + c] = static_cast<T>(signed_lr.plane(c)[i]);

  Cache<T> local;
  Cache<T>& cc = cache ? *cache : local;
  cc.input = out.base;
  cc.col1.resize(cfg_.blocks);
  cc.col2.resize(cfg_.blocks);
  cc.hidden.resize(cfg_.blocks);

  std::vector<T> head_out(hw * f), x(hw * f), branch(hw * f);
  head_.forward(p, cc.input.data(), h, w, head_out.data(), cc.head_col);
  x = head_out;
  for (int b = 0; b < cfg_.blocks; ++b) {
    auto& hidden = cc.hidden[b];
    hidden.resize(hw * f);
    conv1_[b].forward(p, x.data(), h, w, hidden.data(), cc.col1[b]);
    nn::relu_inplace(std::span<T>(hidden));
    conv2_[b].forward(p, hidden.data(), h, w, branch.data(), cc.col2[b]);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += branch[i];
  }
  out.codes.resize(hw * f);
  tail_.forward(p, x.data(), h, w, out.codes.data(), cc.tail_col);
  for (std::size_t i = 0; i < out.codes.size(); ++i) out.codes[i] += head_out[i];
  return out;
}

template <typename T>
void FeatureExtractor::backward(std::span<const T> p, const Cache<T>& cache, int h, int w,
                                std::span<const T> dcodes, T* grads) const {
  const std::size_t n = static_cast<std::size_t>(h) * w * cfg_.features;
  SVAESR_REQUIRE(dcodes.size() == n, "extractor: gradient shape mismatch");
  std::vector<T> dx(n), dhidden(n), dbranch(n);
  tail_.backward(p, cache.tail_col, dcodes.data(), h, w, grads, dx.data());
  for (int b = cfg_.blocks - 1; b >= 0; --b) {
    conv2_[b].backward(p, cache.col2[b], dx.data(), h, w, grads, dhidden.data());
    nn::relu_backward_inplace(std::span<const T>(cache.hidden[b]), std::span<T>(dhidden));
    conv1_[b].backward(p, cache.col1[b], dhidden.data(), h, w, grads, dbranch.data());
    for (std::size_t i = 0; i < n; ++i) dx[i] += dbranch[i];
  }
  // Global skip: the head output feeds both the body and the final sum.
  for (std::size_t i = 0; i < n; ++i) dx[i] += dcodes[i];
  head_.backward(p, cache.head_col, dx.data(), h, w, grads, static_cast<T*>(nullptr));
}

template FeatureMap<float> FeatureExtractor::forward<float>(std::span<const float>,
                                                            const ImageTensor&, Cache<float>*) const;
template FeatureMap<double> FeatureExtractor::forward<double>(std::span<const double>,
                                                              const ImageTensor&,
                                                              Cache<double>*) const;
template void FeatureExtractor::backward<float>(std::span<const float>, const Cache<float>&, int, int,
                                                std::span<const float>, float*) const;
template void FeatureExtractor::backward<double>(std::span<const double>, const Cache<double>&, int,
                                                 int, std::span<const double>, double*) const;

}  // namespace svaesr::model
