#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "svaesr/data/dataset.hpp"
#include "svaesr/model/objectives.hpp"
#include "svaesr/model/svae.hpp"

namespace svaesr::train {

enum class Preset { kToy, kPaper };

/// Full run configuration. Serialized as nested JSON; the positional encoding
/// and the latent size are shared by decoder and encoder and live at the top
/// level. Unknown keys are rejected.
struct TrainConfig {
  Preset preset = Preset::kToy;
  model::ModelConfig model;
  model::ObjectiveConfig objective;
  data::SamplerConfig sampler;
  double lr_rate = 1e-4;
  int batch_size = 32;
  std::uint64_t total_iters = 100000;
  std::uint64_t checkpoint_every = 5000;
  std::uint64_t seed = 0;
  int fakes_per_real = 1;
  bool add_total_loss = false;         // add the composite pixel/KL loss to the decoder phase
  bool check_phase_isolation = false;  // bitwise check that each phase only moves its own group
  std::vector<double> val_scales{2.0, 4.0};

  void validate() const;
};

TrainConfig preset_config(Preset preset);
std::string preset_name(Preset preset);
Preset parse_preset(const std::string& name);

/// Parses JSON text: the preset named by "preset" (default toy) overridden by
/// every other key present.
TrainConfig config_from_json(const std::string& text);
std::string config_to_json(const TrainConfig& cfg);
TrainConfig load_config(const std::string& path);

}  // namespace svaesr::train
