#pragma once

#include <cstdint>
#include <vector>

#include "svaesr/model/encoder.hpp"
#include "svaesr/model/extractor.hpp"
#include "svaesr/model/liif_decoder.hpp"

namespace svaesr::model {

struct ModelConfig {
  ExtractorConfig extractor;
  DecoderConfig decoder;
  EncoderConfig encoder;

  /// Checks each part and that the parts agree on shared sizes.
  void validate() const;
};

/// The three networks and their parameter layouts. The generator group (G and
/// the LIIF decoder) and the encoder group are kept apart so each can be
/// optimized and frozen independently.
class SvaeModel {
 public:
  explicit SvaeModel(const ModelConfig& cfg);
  SvaeModel(const SvaeModel&) = delete;
  SvaeModel& operator=(const SvaeModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  const nn::ParamLayout& generator_layout() const { return gen_layout_; }
  const nn::ParamLayout& encoder_layout() const { return enc_layout_; }
  const FeatureExtractor& extractor() const { return extractor_; }
  const LiifDecoder& decoder() const { return decoder_; }
  const ConditionalEncoder& encoder() const { return encoder_; }

  std::vector<float> init_generator(std::uint64_t seed) const;
  std::vector<float> init_encoder(std::uint64_t seed) const;

 private:
  ModelConfig cfg_;
  nn::ParamLayout gen_layout_;
  nn::ParamLayout enc_layout_;
  FeatureExtractor extractor_;
  LiifDecoder decoder_;
  ConditionalEncoder encoder_;
};

}  // namespace svaesr::model
