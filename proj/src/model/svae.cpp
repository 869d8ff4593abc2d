#include "svaesr/model/svae.hpp"

#include "svaesr/core/error.hpp"
#include "svaesr/core/rng.hpp"

namespace svaesr::model {

void ModelConfig::validate() const {
  SVAESR_REQUIRE(extractor.features >= 1 && extractor.blocks >= 0,
                 "model: invalid extractor configuration");
  decoder.validate();
  encoder.validate();
  SVAESR_REQUIRE(decoder.features == extractor.features,
                 "model: decoder features must match extractor features");
  SVAESR_REQUIRE(decoder.latent_dim == encoder.latent_dim,
                 "model: decoder and encoder latent sizes differ");
}

SvaeModel::SvaeModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  extractor_ = FeatureExtractor(cfg.extractor, gen_layout_);
  decoder_ = LiifDecoder(cfg.decoder, gen_layout_);
  encoder_ = ConditionalEncoder(cfg.encoder, enc_layout_);
}

std::vector<float> SvaeModel::init_generator(std::uint64_t seed) const {
  return gen_layout_.initialize(derive_seed(seed, {0x67656eULL}));
}

std::vector<float> SvaeModel::init_encoder(std::uint64_t seed) const {
  return enc_layout_.initialize(derive_seed(seed, {0x656e63ULL}));
}

}  // namespace svaesr::model
