#pragma once

// Objectives shared by the gradient checks: a weighted sum of decoder outputs
// and the per-sample training losses with all randomness frozen.

#include <memory>
#include <vector>

#include "support.hpp"
#include "svaesr/core/coord_grid.hpp"
#include "svaesr/model/liif_decoder.hpp"
#include "svaesr/train/trainer.hpp"

namespace testing {

// sum_i w_i * query_rgb_i, optionally with a latent-driven HF signal.
inline double decoder_objective(const svaesr::model::SvaeModel& m, const std::vector<double>& p,
                                const svaesr::ImageTensor& lr, const svaesr::CoordGrid& grid,
                                const std::vector<double>& w, const std::vector<double>* z) {
  using namespace svaesr;
  const std::span<const double> ps(p);
  const auto feat = m.extractor().forward<double>(ps, lr, nullptr);
  nn::Matrix<double> hf;
  if (z) {
    hf.resize(static_cast<int>(grid.size()), m.decoder().config().hf_dim);
    std::vector<double> one(hf.cols);
    m.decoder().project_latent<double>(ps, z->data(), one.data());
    for (int r = 0; r < hf.rows; ++r) std::copy(one.begin(), one.end(), hf.row(r));
  }
  const auto rgb = model::query_rgb<double>(m.decoder(), ps, feat, grid, z ? &hf : nullptr);
  double s = 0.0;
  for (std::size_t i = 0; i < rgb.data.size(); ++i) s += w[i] * rgb.data[i];
  return s;
}

inline std::vector<double> decoder_gradient(const svaesr::model::SvaeModel& m, const std::vector<double>& p,
                                            const svaesr::ImageTensor& lr, const svaesr::CoordGrid& grid,
                                            const std::vector<double>& w, const std::vector<double>* z) {
  using namespace svaesr;
  using model::LiifDecoder;
  const std::span<const double> ps(p);
  std::vector<double> grads(p.size(), 0.0);
  model::FeatureExtractor::Cache<double> gcache;
  const auto feat = m.extractor().forward<double>(ps, lr, &gcache);
  LiifDecoder::Prepared<double> prep;
  m.decoder().prepare<double>(ps, feat, prep, true);
  const int hf_dim = m.decoder().config().hf_dim;
  std::vector<double> hf(hf_dim, 0.0);
  if (z) m.decoder().project_latent<double>(ps, z->data(), hf.data());
  std::vector<double> out(grid.size() * 3);
  LiifDecoder::QueryCache<double> cache;
  m.decoder().query<double>(ps, prep, grid, 0, grid.size(), z ? hf.data() : nullptr, 0, out.data(),
                            &cache);
  nn::Matrix<double> dproj(static_cast<int>(feat.positions()), m.decoder().config().mlp_width);
  std::vector<double> dhf(hf_dim, 0.0);
  m.decoder().query_backward<double>(ps, prep, cache, w.data(), grads.data(), &dproj, dhf.data());
  if (z) {
    std::vector<double> dz(z->size());
    m.decoder().project_latent_backward<double>(ps, z->data(), dhf.data(), grads.data(), dz.data());
  }
  std::vector<double> dcodes;
  m.decoder().prepare_backward<double>(ps, prep, dproj, grads.data(), &dcodes);
  m.extractor().backward<double>(ps, gcache, lr.height(), lr.width(), dcodes, grads.data());
  return grads;
}

// Random parameters perturbed off their initial values so biases are non-zero.
inline std::vector<double> perturbed(const std::vector<float>& init, std::uint64_t seed) {
  std::vector<double> p(init.begin(), init.end());
  const auto n = random_vector(p.size(), seed, 0.05);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] += n[i];
  return p;
}

/// One training sample with frozen noise; evaluates either phase's loss.
struct LossFixture {
  svaesr::train::TrainConfig cfg;
  std::unique_ptr<svaesr::model::SvaeModel> model;
  svaesr::data::TrainSample sample;
  svaesr::train::SampleNoise noise;
  std::vector<double> gen, enc;

  LossFixture(const svaesr::train::TrainConfig& config, const svaesr::ImageTensor& hr,
              const std::vector<svaesr::ImageTensor>& refs, std::uint64_t seed)
      : cfg(config) {
    using namespace svaesr;
    model = std::make_unique<model::SvaeModel>(cfg.model);
    Rng rng(seed);
    sample = *data::sample_training_pair(hr, refs, cfg.sampler, rng);
    Rng nrng(seed + 1);
    noise = train::draw_sample_noise(sample, cfg.model, cfg.fakes_per_real, 0, nrng);
    gen = perturbed(model->init_generator(seed + 2), seed + 3);
    enc = perturbed(model->init_encoder(seed + 4), seed + 5);
  }

  double encoder_loss_at(const std::vector<double>& e) const {
    svaesr::train::SampleContext<double> ctx;
    svaesr::train::build_context<double>(*model, gen, sample, noise, ctx);
    return svaesr::train::encoder_sample<double>(*model, cfg, {gen, e}, ctx, noise, 1.0, nullptr).loss;
  }

  double decoder_loss_at(const std::vector<double>& g) const {
    svaesr::train::SampleContext<double> ctx;
    svaesr::train::build_context<double>(*model, g, sample, noise, ctx);
    return svaesr::train::decoder_sample<double>(*model, cfg, {g, enc}, ctx, noise, 1.0, nullptr).loss;
  }

  std::vector<double> encoder_grad() const {
    svaesr::train::SampleContext<double> ctx;
    svaesr::train::build_context<double>(*model, gen, sample, noise, ctx);
    std::vector<double> g(enc.size(), 0.0);
    svaesr::train::encoder_sample<double>(*model, cfg, {gen, enc}, ctx, noise, 1.0, g.data());
    return g;
  }

  std::vector<double> decoder_grad() const {
    svaesr::train::SampleContext<double> ctx;
    svaesr::train::build_context<double>(*model, gen, sample, noise, ctx);
    std::vector<double> g(gen.size(), 0.0);
    svaesr::train::decoder_sample<double>(*model, cfg, {gen, enc}, ctx, noise, 1.0, g.data());
    return g;
  }

  // The encoder phase stops gradients at the generated sample. Finite
  // differences would see the fake move with the encoder, so each posterior
  // fake is pinned to its latent under the base parameters (a prior draw of
  // exactly that z). The loss value is unchanged.
  void freeze_fake_latents() {
    using namespace svaesr;
    train::SampleContext<double> ctx;
    train::build_context<double>(*model, gen, sample, noise, ctx);
    model::ElboPass<double> real;
    model::elbo_forward<double>(*model, {gen, enc}, ctx.prep, sample.coords, ctx.target.data(),
                                noise.y_tokens, ctx.ref_tokens, noise.encoder_phase.real_eps,
                                cfg.objective, real);
    for (auto& fake : noise.encoder_phase.fakes) {
      if (fake.from_prior) continue;
      const auto z = model::reparameterize(real.dist, std::span<const double>(fake.z_eps));
      fake.z_eps.assign(z.begin(), z.end());
      fake.from_prior = true;
    }
  }
};

}  // namespace testing
