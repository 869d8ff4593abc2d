#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "svaesr/data/dataset.hpp"
#include "svaesr/model/elbo.hpp"
#include "svaesr/train/adam.hpp"
#include "svaesr/train/config.hpp"
#include "svaesr/train/metrics_log.hpp"

namespace svaesr::train {

/// Everything needed to continue a run bit-exactly. All randomness is derived
/// from (seed, iteration, sample counter), so the stream state and the seed in
/// the config are the complete generator state.
struct TrainState {
  TrainConfig config;
  std::vector<float> generator;  // extractor + decoder
  std::vector<float> encoder;
  Adam generator_opt;
  Adam encoder_opt;
  std::uint64_t iteration = 0;
  data::BatchStream::State stream;
  double best_val_psnr = -std::numeric_limits<double>::infinity();
};

TrainState init_state(const model::SvaeModel& model, const TrainConfig& cfg);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: magic "SVAESR01", format version, config JSON, counters,
/// float32 parameters and optimizer moments (little-endian host layout).
void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// One training sample as the phases see it.

/// A generated sample: z is drawn from the prior, or from the posterior of the
/// real image with z_eps as reparameterization noise; elbo_eps is the noise of
/// the ELBO evaluated on it.
struct FakeNoise {
  bool from_prior = false;
  std::vector<double> z_eps;
  std::vector<double> elbo_eps;
};

struct PhaseNoise {
  std::vector<double> real_eps;
  std::vector<FakeNoise> fakes;
};

struct SampleNoise {
  std::vector<int> y_tokens;  // indices into the sample's query points
  std::vector<int> r_tokens;  // indices into the reference crop's pixels
  PhaseNoise encoder_phase;
  PhaseNoise decoder_phase;
};

/// Fake sources alternate between posterior and prior with (first_source + k) parity.
SampleNoise draw_sample_noise(const data::TrainSample& sample, const model::ModelConfig& cfg,
                              int fakes, std::uint64_t first_source, Rng& rng);

/// Generator-side forward state of one sample; shared by both phases because
/// the encoder phase never changes generator parameters.
template <typename T>
struct SampleContext {
  SampleContext() = default;
  SampleContext(const SampleContext&) = delete;
  SampleContext& operator=(const SampleContext&) = delete;

  const data::TrainSample* sample = nullptr;
  model::FeatureMap<T> feat;
  typename model::FeatureExtractor::Cache<T> extractor_cache;
  typename model::LiifDecoder::Prepared<T> prep;
  std::vector<T> target;  // signed RGB at the query points
  nn::Matrix<T> ref_tokens;
};

template <typename T>
void build_context(const model::SvaeModel& model, std::span<const T> generator,
                   const data::TrainSample& sample, const SampleNoise& noise, SampleContext<T>& ctx);

struct SampleStats {
  double real_elbo = 0.0;
  double fake_elbo = 0.0;  // mean over fakes
  double loss = 0.0;
  double l1 = 0.0;
  double kl = 0.0;
  double total = 0.0;
  int exp_clamps = 0;
};

/// Encoder-phase loss of one sample. Accumulates weight * dLoss/dEncoderParams
/// into enc_grads when non-null. Fakes are generated without gradient.
template <typename T>
SampleStats encoder_sample(const model::SvaeModel& model, const TrainConfig& cfg,
                           model::ParamViews<T> params, const SampleContext<T>& ctx,
                           const SampleNoise& noise, T weight, T* enc_grads);

/// Decoder-phase loss of one sample (plus the composite loss when configured).
/// Accumulates weight * dLoss/dGeneratorParams into gen_grads when non-null,
/// including the path through the generated sample.
template <typename T>
SampleStats decoder_sample(const model::SvaeModel& model, const TrainConfig& cfg,
                           model::ParamViews<T> params, const SampleContext<T>& ctx,
                           const SampleNoise& noise, T weight, T* gen_grads);

// ---------------------------------------------------------------------------
// Batch level.

struct StepMetrics {
  double real_elbo = 0.0;
  double fake_elbo = 0.0;
  double enc_loss = 0.0;
  double dec_loss = 0.0;
  double l1 = 0.0;
  double kl = 0.0;
  double total = 0.0;
  int exp_clamps = 0;

  std::vector<MetricRecord> records(std::uint64_t iter) const;
};

/// Per-step fixed inputs: the batch, its noise and the generator forward state.
struct StepContext {
  const std::vector<data::TrainSample>* batch = nullptr;
  std::uint64_t iteration = 0;
  std::vector<SampleNoise> noise;
  std::vector<std::unique_ptr<SampleContext<float>>> samples;
};

StepContext make_step_context(const model::SvaeModel& model, const TrainState& state,
                              const std::vector<data::TrainSample>& batch);

/// Mean encoder-phase loss over the batch, then one encoder Adam step.
StepMetrics encoder_phase(const model::SvaeModel& model, const StepContext& ctx, TrainState& state);

/// Mean decoder-phase loss over the batch, then one generator Adam step.
StepMetrics decoder_phase(const model::SvaeModel& model, const StepContext& ctx, TrainState& state);

/// Both phases; increments the iteration counter.
StepMetrics train_step(const model::SvaeModel& model, const std::vector<data::TrainSample>& batch,
                       TrainState& state);

// ---------------------------------------------------------------------------

struct FitOptions {
  std::string out_dir;                 // receives last.ckpt, best.ckpt, metrics.log
  std::optional<std::string> resume;   // checkpoint to continue from
  std::uint64_t stop_at = 0;           // stop early after this iteration (0: run to the end)
  std::function<void(const std::string&)> log;  // progress lines
};

/// Mean PSNR of ×s reconstructions (z = 0) over the images and scales.
double validation_psnr(const model::SvaeModel& model, std::span<const float> generator,
                       const std::vector<ImageTensor>& images, const std::vector<double>& scales);

TrainState fit(const TrainConfig& cfg, std::vector<ImageTensor> train_images,
               std::vector<ImageTensor> references, const std::vector<ImageTensor>& val_images,
               const FitOptions& options);

}  // namespace svaesr::train
