#include "svaesr/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "svaesr/core/error.hpp"
#include "svaesr/core/metrics.hpp"

namespace svaesr::train {

using model::ElboGrads;
using model::ElboPass;
using model::LatentDistribution;
using model::LiifDecoder;
using model::ParamViews;

namespace {

double l2_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

[[noreturn]] void abort_non_finite(const char* phase, std::uint64_t iter, std::size_t index,
                                   const TrainState& state) {
  std::ostringstream msg;
  msg << "non-finite " << phase << " loss at iteration " << iter << ", batch index " << index
      << "; |generator| = " << l2_norm(state.generator) << ", |encoder| = " << l2_norm(state.encoder);
  throw std::runtime_error(msg.str());
}

template <typename T>
std::vector<T> fake_latent(const FakeNoise& f, const LatentDistribution<T>& real) {
  if (f.from_prior) return std::vector<T>(f.z_eps.begin(), f.z_eps.end());
  return model::reparameterize(real, std::span<const double>(f.z_eps));
}

// Sums per-sample gradient buffers in sample order.
std::vector<float> reduce(const std::vector<std::vector<float>>& parts, std::size_t size) {
  std::vector<float> out(size, 0.0f);
  for (const auto& p : parts)
    for (std::size_t i = 0; i < size; ++i) out[i] += p[i];
  return out;
}

}  // namespace

TrainState init_state(const model::SvaeModel& model, const TrainConfig& cfg) {
  TrainState s;
  s.config = cfg;
  s.generator = model.init_generator(cfg.seed);
  s.encoder = model.init_encoder(cfg.seed);
  s.generator_opt = Adam(s.generator.size(), cfg.lr_rate);
  s.encoder_opt = Adam(s.encoder.size(), cfg.lr_rate);
  return s;
}

SampleNoise draw_sample_noise(const data::TrainSample& sample, const model::ModelConfig& cfg,
                              int fakes, std::uint64_t first_source, Rng& rng) {
  SampleNoise n;
  const int tokens = cfg.encoder.tokens;
  const std::size_t points = sample.coords.size();
  n.y_tokens = draw_distinct(points, std::min<std::size_t>(tokens, points), rng);
  const std::size_t ref_pixels = sample.reference.pixels();
  n.r_tokens = draw_distinct(ref_pixels, std::min<std::size_t>(tokens, ref_pixels), rng);
  const int dz = cfg.encoder.latent_dim;
  for (PhaseNoise* phase : {&n.encoder_phase, &n.decoder_phase}) {
    phase->real_eps = model::standard_normal_vector(dz, rng);
    for (int k = 0; k < fakes; ++k) {
      FakeNoise f;
      f.from_prior = (first_source + k) % 2 == 1;
      f.z_eps = model::standard_normal_vector(dz, rng);
      f.elbo_eps = model::standard_normal_vector(dz, rng);
      phase->fakes.push_back(std::move(f));
    }
  }
  return n;
}

template <typename T>
void build_context(const model::SvaeModel& model, std::span<const T> generator,
                   const data::TrainSample& sample, const SampleNoise& noise, SampleContext<T>& ctx) {
  ctx.sample = &sample;
  ctx.feat = model.extractor().forward<T>(generator, sample.lr_patch, &ctx.extractor_cache);
  model.decoder().prepare<T>(generator, ctx.feat, ctx.prep, true);
  ctx.target.assign(sample.rgb_targets.begin(), sample.rgb_targets.end());
  const CoordGrid ref_grid = make_coord_grid(sample.reference.height(), sample.reference.width());
  const auto ref_rgb = model::pixel_rows<T>(sample.reference);
  model::make_tokens<T>(ref_rgb.data(), ref_grid.coords, noise.r_tokens,
                        model.encoder().config().posenc, ctx.ref_tokens);
}

template <typename T>
SampleStats encoder_sample(const model::SvaeModel& model, const TrainConfig& cfg,
                           ParamViews<T> params, const SampleContext<T>& ctx,
                           const SampleNoise& noise, T weight, T* enc_grads) {
  const auto& obj = cfg.objective;
  const auto& decoder = model.decoder();
  const CoordGrid& grid = ctx.sample->coords;
  const std::size_t q = grid.size();
  const PhaseNoise& pn = noise.encoder_phase;

  ElboPass<T> real;
  model::elbo_forward<T>(model, params, ctx.prep, grid, ctx.target.data(), noise.y_tokens,
                         ctx.ref_tokens, pn.real_eps, obj, real);

  std::vector<ElboPass<T>> fakes(pn.fakes.size());
  std::vector<double> fake_elbos(pn.fakes.size());
  for (std::size_t k = 0; k < pn.fakes.size(); ++k) {
    // The fake is a constant here: no gradient reaches the generator.
    const auto z = fake_latent(pn.fakes[k], real.dist);
    std::vector<T> hf(decoder.config().hf_dim);
    decoder.project_latent<T>(params.generator, z.data(), hf.data());
    std::vector<T> fake(q * 3);
    decoder.query<T>(params.generator, ctx.prep, grid, 0, q, hf.data(), 0, fake.data(),
                     static_cast<typename LiifDecoder::QueryCache<T>*>(nullptr));
    model::elbo_forward<T>(model, params, ctx.prep, grid, fake.data(), noise.y_tokens,
                           ctx.ref_tokens, pn.fakes[k].elbo_eps, obj, fakes[k]);
    fake_elbos[k] = static_cast<double>(fakes[k].elbo);
  }

  SampleStats st;
  st.real_elbo = static_cast<double>(real.elbo);
  for (double f : fake_elbos) st.fake_elbo += f / static_cast<double>(fake_elbos.size());
  st.loss = model::encoder_loss(st.real_elbo, fake_elbos, obj, &st.exp_clamps);
  st.kl = static_cast<double>(real.kl);
  if (!enc_grads) return st;

  ElboGrads<T> g;
  g.encoder = enc_grads;
  model::elbo_backward<T>(model, params, ctx.prep, real, -weight, obj, g);
  const auto dfake = model::encoder_loss_fake_grad(fake_elbos, obj);
  for (std::size_t k = 0; k < fakes.size(); ++k)
    model::elbo_backward<T>(model, params, ctx.prep, fakes[k], weight * static_cast<T>(dfake[k]),
                            obj, g);
  return st;
}

template <typename T>
SampleStats decoder_sample(const model::SvaeModel& model, const TrainConfig& cfg,
                           ParamViews<T> params, const SampleContext<T>& ctx,
                           const SampleNoise& noise, T weight, T* gen_grads) {
  const auto& obj = cfg.objective;
  const auto& decoder = model.decoder();
  const CoordGrid& grid = ctx.sample->coords;
  const std::size_t q = grid.size();
  const int hf_dim = decoder.config().hf_dim;
  const PhaseNoise& pn = noise.decoder_phase;
  const std::size_t kf = pn.fakes.size();

  ElboPass<T> real;
  model::elbo_forward<T>(model, params, ctx.prep, grid, ctx.target.data(), noise.y_tokens,
                         ctx.ref_tokens, pn.real_eps, obj, real);

  std::vector<std::vector<T>> zs(kf), fakes(kf);
  std::vector<typename LiifDecoder::QueryCache<T>> caches(kf);
  std::vector<ElboPass<T>> passes(kf);
  std::vector<double> fake_elbos(kf);
  for (std::size_t k = 0; k < kf; ++k) {
    zs[k] = fake_latent(pn.fakes[k], real.dist);
    std::vector<T> hf(hf_dim);
    decoder.project_latent<T>(params.generator, zs[k].data(), hf.data());
    fakes[k].resize(q * 3);
    decoder.query<T>(params.generator, ctx.prep, grid, 0, q, hf.data(), 0, fakes[k].data(),
                     &caches[k]);
    model::elbo_forward<T>(model, params, ctx.prep, grid, fakes[k].data(), noise.y_tokens,
                           ctx.ref_tokens, pn.fakes[k].elbo_eps, obj, passes[k]);
    fake_elbos[k] = static_cast<double>(passes[k].elbo);
  }

  SampleStats st;
  st.real_elbo = static_cast<double>(real.elbo);
  for (double f : fake_elbos) st.fake_elbo += f / static_cast<double>(kf);
  st.loss = model::decoder_loss(st.real_elbo, fake_elbos, obj);
  const auto total = model::total_loss_values<T>(real.pred.data(), ctx.target.data(), q * 3,
                                                 real.dist, obj);
  st.l1 = total.l1;
  st.kl = static_cast<double>(real.kl);
  st.total = total.loss;
  if (cfg.add_total_loss) st.loss += total.loss;
  if (!gen_grads) return st;

  nn::Matrix<T> dproj(static_cast<int>(ctx.feat.positions()), decoder.config().mlp_width);
  std::vector<T> extra;
  ElboGrads<T> g;
  g.generator = gen_grads;
  g.dprojection = &dproj;
  if (cfg.add_total_loss) {
    const T unit = weight * static_cast<T>(1.0 + obj.lambda_rec) / static_cast<T>(q * 3);
    extra.resize(q * 3);
    for (std::size_t i = 0; i < q * 3; ++i) {
      const T d = real.pred[i] - ctx.target[i];
      extra[i] = d > T(0) ? unit : (d < T(0) ? -unit : T(0));
    }
    g.extra_dpred = extra.data();
  }
  model::elbo_backward<T>(model, params, ctx.prep, real, -weight, obj, g);
  g.extra_dpred = nullptr;

  const T dfake_elbo = -weight * static_cast<T>(obj.gamma) / static_cast<T>(kf);
  for (std::size_t k = 0; k < kf; ++k) {
    std::vector<T> dfake(q * 3, T(0));
    g.dtarget = dfake.data();
    model::elbo_backward<T>(model, params, ctx.prep, passes[k], dfake_elbo, obj, g);
    std::vector<T> dhf(hf_dim, T(0));
    decoder.query_backward<T>(params.generator, ctx.prep, caches[k], dfake.data(), gen_grads, &dproj,
                              dhf.data());
    decoder.project_latent_backward<T>(params.generator, zs[k].data(), dhf.data(), gen_grads,
                                       static_cast<T*>(nullptr));
  }

  std::vector<T> dcodes;
  decoder.prepare_backward<T>(params.generator, ctx.prep, dproj, gen_grads, &dcodes);
  model.extractor().backward<T>(params.generator, ctx.extractor_cache, ctx.feat.height,
                                ctx.feat.width, dcodes, gen_grads);
  return st;
}

std::vector<MetricRecord> StepMetrics::records(std::uint64_t iter) const {
  return {{iter, "real_elbo", real_elbo}, {iter, "fake_elbo", fake_elbo},
          {iter, "enc_loss", enc_loss},   {iter, "dec_loss", dec_loss},
          {iter, "l1", l1},               {iter, "kl", kl},
          {iter, "total", total},         {iter, "exp_clamps", static_cast<double>(exp_clamps)}};
}

StepContext make_step_context(const model::SvaeModel& model, const TrainState& state,
                              const std::vector<data::TrainSample>& batch) {
  const TrainConfig& cfg = state.config;
  StepContext ctx;
  ctx.batch = &batch;
  ctx.iteration = state.iteration;
  ctx.noise.resize(batch.size());
  ctx.samples.resize(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Rng rng(derive_seed(cfg.seed, {3, state.iteration, b}));
    ctx.noise[b] = draw_sample_noise(batch[b], cfg.model, cfg.fakes_per_real, state.iteration + b, rng);
    ctx.samples[b] = std::make_unique<SampleContext<float>>();
  }
  const std::span<const float> gen(state.generator);
#pragma omp parallel for schedule(dynamic)
  for (long b = 0; b < static_cast<long>(batch.size()); ++b)
    build_context<float>(model, gen, batch[b], ctx.noise[b], *ctx.samples[b]);
  return ctx;
}

StepMetrics encoder_phase(const model::SvaeModel& model, const StepContext& ctx, TrainState& state) {
  const TrainConfig& cfg = state.config;
  const std::size_t n = ctx.samples.size();
  const float weight = 1.0f / static_cast<float>(n);
  const ParamViews<float> params{state.generator, state.encoder};
  std::vector<std::vector<float>> grads(n);
  std::vector<SampleStats> stats(n);
#pragma omp parallel for schedule(dynamic)
  for (long b = 0; b < static_cast<long>(n); ++b) {
    grads[b].assign(state.encoder.size(), 0.0f);
    stats[b] = encoder_sample<float>(model, cfg, params, *ctx.samples[b], ctx.noise[b], weight,
                                     grads[b].data());
  }
  StepMetrics m;
  for (std::size_t b = 0; b < n; ++b) {
    if (!std::isfinite(stats[b].loss)) abort_non_finite("encoder", ctx.iteration, b, state);
    m.real_elbo += stats[b].real_elbo / n;
    m.fake_elbo += stats[b].fake_elbo / n;
    m.enc_loss += stats[b].loss / n;
    m.exp_clamps += stats[b].exp_clamps;
  }
  const auto g = reduce(grads, state.encoder.size());
  std::vector<float> before;
  if (cfg.check_phase_isolation) before = state.generator;
  state.encoder_opt.step(state.encoder, g);
  if (cfg.check_phase_isolation && before != state.generator)
    throw std::logic_error("encoder phase modified generator parameters");
  return m;
}

StepMetrics decoder_phase(const model::SvaeModel& model, const StepContext& ctx, TrainState& state) {
  const TrainConfig& cfg = state.config;
  const std::size_t n = ctx.samples.size();
  const float weight = 1.0f / static_cast<float>(n);
  const ParamViews<float> params{state.generator, state.encoder};
  std::vector<std::vector<float>> grads(n);
  std::vector<SampleStats> stats(n);
#pragma omp parallel for schedule(dynamic)
  for (long b = 0; b < static_cast<long>(n); ++b) {
    grads[b].assign(state.generator.size(), 0.0f);
    stats[b] = decoder_sample<float>(model, cfg, params, *ctx.samples[b], ctx.noise[b], weight,
                                     grads[b].data());
  }
  StepMetrics m;
  for (std::size_t b = 0; b < n; ++b) {
    if (!std::isfinite(stats[b].loss)) abort_non_finite("decoder", ctx.iteration, b, state);
    m.dec_loss += stats[b].loss / n;
    m.l1 += stats[b].l1 / n;
    m.kl += stats[b].kl / n;
    m.total += stats[b].total / n;
  }
  const auto g = reduce(grads, state.generator.size());
  std::vector<float> before;
  if (cfg.check_phase_isolation) before = state.encoder;
  state.generator_opt.step(state.generator, g);
  if (cfg.check_phase_isolation && before != state.encoder)
    throw std::logic_error("decoder phase modified encoder parameters");
  return m;
}

StepMetrics train_step(const model::SvaeModel& model, const std::vector<data::TrainSample>& batch,
                       TrainState& state) {
  SVAESR_REQUIRE(!batch.empty(), "train_step: empty batch");
  const StepContext ctx = make_step_context(model, state, batch);
  StepMetrics m = encoder_phase(model, ctx, state);
  const StepMetrics d = decoder_phase(model, ctx, state);
  m.dec_loss = d.dec_loss;
  m.l1 = d.l1;
  m.kl = d.kl;
  m.total = d.total;
  ++state.iteration;
  return m;
}

double validation_psnr(const model::SvaeModel& model, std::span<const float> generator,
                       const std::vector<ImageTensor>& images, const std::vector<double>& scales) {
  SVAESR_REQUIRE(!images.empty() && !scales.empty(), "validation: nothing to evaluate");
  const std::vector<float> z(model.config().decoder.latent_dim, 0.0f);
  double sum = 0.0;
  for (const auto& img : images)
    for (double s : scales) {
      const auto pair = data::make_eval_pair(to_rgb(img), s);
      const auto sr = model::super_resolve_to(model.extractor(), model.decoder(), generator,
                                              quantize_8bit(pair.lr), pair.hr.height(),
                                              pair.hr.width(), z);
      sum += psnr(sr, pair.hr);
    }
  return sum / static_cast<double>(images.size() * scales.size());
}

namespace {

// Config fields that may change when a run is resumed.
TrainConfig resumable_view(TrainConfig c) {
  c.total_iters = 1;
  c.checkpoint_every = 1;
  c.val_scales.clear();
  c.check_phase_isolation = false;
  return c;
}

}  // namespace

TrainState fit(const TrainConfig& cfg, std::vector<ImageTensor> train_images,
               std::vector<ImageTensor> references, const std::vector<ImageTensor>& val_images,
               const FitOptions& options) {
  cfg.validate();
  const model::SvaeModel model(cfg.model);
  namespace fs = std::filesystem;
  const fs::path out_dir = options.out_dir.empty() ? fs::path(".") : fs::path(options.out_dir);
  fs::create_directories(out_dir);
  const std::string metrics_path = (out_dir / "metrics.log").string();
  const auto log = [&](const std::string& line) {
    if (options.log) options.log(line);
  };

  TrainState state;
  if (options.resume) {
    state = load_checkpoint(*options.resume);
    if (config_to_json(resumable_view(state.config)) != config_to_json(resumable_view(cfg)))
      throw ArgumentError("resume: checkpoint was trained with a different configuration");
    state.config = cfg;
    truncate_metrics(metrics_path, state.iteration);
    log("resumed at iteration " + std::to_string(state.iteration));
  } else {
    state = init_state(model, cfg);
    fs::remove(metrics_path);
  }

  data::BatchStream stream(std::move(train_images), std::move(references), cfg.sampler,
                           cfg.batch_size, derive_seed(cfg.seed, {0x64617461ULL}));
  stream.restore(state.stream);
  MetricsLog metrics(metrics_path);

  const std::uint64_t end =
      options.stop_at ? std::min(options.stop_at, cfg.total_iters) : cfg.total_iters;
  while (state.iteration < end) {
    const auto batch = stream.next();
    state.stream = stream.state();
    const StepMetrics m = train_step(model, batch, state);
    for (const auto& r : m.records(state.iteration)) metrics.append(r);
    if (m.exp_clamps > 0)
      log("warning: soft-exponential clamp hit " + std::to_string(m.exp_clamps) +
          " times at iteration " + std::to_string(state.iteration));

    const bool checkpoint =
        state.iteration % cfg.checkpoint_every == 0 || state.iteration == cfg.total_iters;
    if (checkpoint) {
      if (!val_images.empty()) {
        const double v = validation_psnr(model, state.generator, val_images, cfg.val_scales);
        metrics.append({state.iteration, "val_psnr", v});
        if (v > state.best_val_psnr) {
          state.best_val_psnr = v;
          save_checkpoint(state, (out_dir / "best.ckpt").string());
        }
      }
      char name[32];
      std::snprintf(name, sizeof(name), "iter_%08llu.ckpt",
                    static_cast<unsigned long long>(state.iteration));
      save_checkpoint(state, (out_dir / name).string());
      save_checkpoint(state, (out_dir / "last.ckpt").string());
      metrics.flush();
    }
    if (state.iteration % 100 == 0 || checkpoint) {
      std::ostringstream line;
      line << "iter " << state.iteration << " enc_loss " << m.enc_loss << " dec_loss " << m.dec_loss
           << " l1 " << m.l1 << " kl " << m.kl;
      if (checkpoint && state.best_val_psnr > -1e300) line << " best_val " << state.best_val_psnr;
      log(line.str());
    }
  }
  metrics.flush();
  return state;
}

#define SVAESR_INSTANTIATE_TRAINER(T)                                                            \
  template void build_context<T>(const model::SvaeModel&, std::span<const T>,                    \
                                 const data::TrainSample&, const SampleNoise&, SampleContext<T>&); \
  template SampleStats encoder_sample<T>(const model::SvaeModel&, const TrainConfig&,            \
                                         ParamViews<T>, const SampleContext<T>&,                 \
                                         const SampleNoise&, T, T*);                             \
  template SampleStats decoder_sample<T>(const model::SvaeModel&, const TrainConfig&,            \
                                         ParamViews<T>, const SampleContext<T>&,                 \
                                         const SampleNoise&, T, T*);

SVAESR_INSTANTIATE_TRAINER(float)
SVAESR_INSTANTIATE_TRAINER(double)

}  // namespace svaesr::train
