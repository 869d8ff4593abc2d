#include "svaesr/train/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "svaesr/core/error.hpp"

using nlohmann::json;

namespace svaesr::train {

namespace {

// Reads obj[key] into out when present; records the key as known.
template <typename V>
void read(const json& obj, const char* key, V& out, std::set<std::string>& known) {
  known.insert(key);
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<V>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!known.count(key))
      throw FormatError("config: unknown key '" + where + key + "'");
}

const json& section(const json& obj, const char* key, std::set<std::string>& known) {
  known.insert(key);
  static const json kEmpty = json::object();
  if (!obj.contains(key)) return kEmpty;
  if (!obj.at(key).is_object()) throw FormatError(std::string("config: '") + key + "' must be an object");
  return obj.at(key);
}

}  // namespace

std::string preset_name(Preset preset) { return preset == Preset::kToy ? "toy" : "paper"; }

Preset parse_preset(const std::string& name) {
  if (name == "toy") return Preset::kToy;
  if (name == "paper") return Preset::kPaper;
  throw FormatError("config: unknown preset '" + name + "' (expected toy or paper)");
}

TrainConfig preset_config(Preset preset) {
  TrainConfig c;
  c.preset = preset;
  auto& m = c.model;
  if (preset == Preset::kPaper) {
    m.extractor = {64, 8};
    m.decoder.features = 64;
    m.decoder.posenc = {10, 2, false};
    m.decoder.mlp_width = 256;
    m.decoder.mlp_depth = 5;
    m.decoder.hf_dim = 64;
    m.decoder.latent_dim = 64;
    m.encoder.width = 128;
    m.encoder.heads = 4;
    m.encoder.self_blocks = 2;
    m.encoder.cross_blocks = 1;
    m.encoder.latent_dim = 64;
    m.encoder.tokens = 2304;
    m.encoder.posenc = {10, 2, false};
    c.sampler = {48, 2304, 48, 1.0, 4.0, false};
    c.lr_rate = 1e-4;
    c.batch_size = 32;
    c.total_iters = 100000;
    c.checkpoint_every = 5000;
  } else {
    m.extractor = {16, 2};
    m.decoder.features = 16;
    m.decoder.posenc = {6, 2, false};
    m.decoder.mlp_width = 64;
    m.decoder.mlp_depth = 3;
    m.decoder.hf_dim = 16;
    m.decoder.latent_dim = 16;
    m.encoder.width = 32;
    m.encoder.heads = 4;
    m.encoder.self_blocks = 1;
    m.encoder.cross_blocks = 1;
    m.encoder.latent_dim = 16;
    m.encoder.tokens = 64;
    m.encoder.posenc = {6, 2, false};
    c.sampler = {24, 256, 24, 1.0, 4.0, false};
    c.lr_rate = 5e-4;
    c.batch_size = 8;
    c.total_iters = 2000;
    c.checkpoint_every = 500;
  }
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  objective.validate();
  sampler.validate();
  SVAESR_REQUIRE(std::isfinite(lr_rate) && lr_rate > 0.0, "config: lr_rate must be positive");
  SVAESR_REQUIRE(batch_size >= 1, "config: batch_size must be positive");
  SVAESR_REQUIRE(total_iters >= 1, "config: total_iters must be positive");
  SVAESR_REQUIRE(checkpoint_every >= 1, "config: checkpoint_every must be positive");
  SVAESR_REQUIRE(fakes_per_real >= 1, "config: fakes_per_real must be positive");
  for (double s : val_scales) SVAESR_REQUIRE(s > 0.0, "config: val_scales must be positive");
}

TrainConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("config: top level must be an object");

  std::set<std::string> known;
  std::string preset = "toy";
  read(j, "preset", preset, known);
  TrainConfig c = preset_config(parse_preset(preset));
  auto& m = c.model;

  read(j, "seed", c.seed, known);
  read(j, "lr_rate", c.lr_rate, known);
  read(j, "batch_size", c.batch_size, known);
  read(j, "total_iters", c.total_iters, known);
  read(j, "checkpoint_every", c.checkpoint_every, known);
  read(j, "fakes_per_real", c.fakes_per_real, known);
  read(j, "add_total_loss", c.add_total_loss, known);
  read(j, "check_phase_isolation", c.check_phase_isolation, known);
  read(j, "val_scales", c.val_scales, known);
  int latent = m.encoder.latent_dim;
  read(j, "latent_dim", latent, known);
  m.encoder.latent_dim = m.decoder.latent_dim = latent;

  {
    std::set<std::string> k;
    const json& s = section(j, "objective", known);
    read(s, "alpha", c.objective.alpha, k);
    read(s, "gamma", c.objective.gamma, k);
    read(s, "lambda_rec", c.objective.lambda_rec, k);
    read(s, "beta_kl", c.objective.beta_kl, k);
    read(s, "recon_scale", c.objective.recon_scale, k);
    reject_unknown(s, k, "objective.");
  }
  {
    std::set<std::string> k;
    const json& s = section(j, "posenc", known);
    read(s, "degree", m.decoder.posenc.degree, k);
    read(s, "ablation", m.decoder.posenc.ablation, k);
    reject_unknown(s, k, "posenc.");
    m.encoder.posenc = m.decoder.posenc;
  }
  {
    std::set<std::string> k;
    const json& s = section(j, "sampler", known);
    read(s, "patch", c.sampler.patch, k);
    read(s, "queries", c.sampler.queries, k);
    read(s, "ref_patch", c.sampler.ref_patch, k);
    read(s, "scale_min", c.sampler.scale_min, k);
    read(s, "scale_max", c.sampler.scale_max, k);
    read(s, "augment", c.sampler.augment, k);
    reject_unknown(s, k, "sampler.");
  }
  {
    std::set<std::string> k;
    const json& s = section(j, "extractor", known);
    read(s, "features", m.extractor.features, k);
    read(s, "blocks", m.extractor.blocks, k);
    reject_unknown(s, k, "extractor.");
    m.decoder.features = m.extractor.features;
  }
  {
    std::set<std::string> k;
    const json& s = section(j, "decoder", known);
    read(s, "mlp_width", m.decoder.mlp_width, k);
    read(s, "mlp_depth", m.decoder.mlp_depth, k);
    read(s, "hf_dim", m.decoder.hf_dim, k);
    read(s, "unfold", m.decoder.unfold, k);
    read(s, "local_ensemble", m.decoder.local_ensemble, k);
    read(s, "cell_decode", m.decoder.cell_decode, k);
    read(s, "base_skip", m.decoder.base_skip, k);
    reject_unknown(s, k, "decoder.");
  }
  {
    std::set<std::string> k;
    const json& s = section(j, "encoder", known);
    read(s, "width", m.encoder.width, k);
    read(s, "heads", m.encoder.heads, k);
    read(s, "self_blocks", m.encoder.self_blocks, k);
    read(s, "cross_blocks", m.encoder.cross_blocks, k);
    read(s, "ffn_mult", m.encoder.ffn_mult, k);
    read(s, "tokens", m.encoder.tokens, k);
    reject_unknown(s, k, "encoder.");
  }
  reject_unknown(j, known, "");
  try {
    c.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(e.what());
  }
  return c;
}

std::string config_to_json(const TrainConfig& c) {
  const auto& m = c.model;
  json j;
  j["preset"] = preset_name(c.preset);
  j["seed"] = c.seed;
  j["lr_rate"] = c.lr_rate;
  j["batch_size"] = c.batch_size;
  j["total_iters"] = c.total_iters;
  j["checkpoint_every"] = c.checkpoint_every;
  j["fakes_per_real"] = c.fakes_per_real;
  j["add_total_loss"] = c.add_total_loss;
  j["check_phase_isolation"] = c.check_phase_isolation;
  j["val_scales"] = c.val_scales;
  j["latent_dim"] = m.encoder.latent_dim;
  j["objective"] = {{"alpha", c.objective.alpha},
                    {"gamma", c.objective.gamma},
                    {"lambda_rec", c.objective.lambda_rec},
                    {"beta_kl", c.objective.beta_kl},
                    {"recon_scale", c.objective.recon_scale}};
  j["posenc"] = {{"degree", m.decoder.posenc.degree}, {"ablation", m.decoder.posenc.ablation}};
  j["sampler"] = {{"patch", c.sampler.patch},         {"queries", c.sampler.queries},
                  {"ref_patch", c.sampler.ref_patch}, {"scale_min", c.sampler.scale_min},
                  {"scale_max", c.sampler.scale_max}, {"augment", c.sampler.augment}};
  j["extractor"] = {{"features", m.extractor.features}, {"blocks", m.extractor.blocks}};
  j["decoder"] = {{"mlp_width", m.decoder.mlp_width},
                  {"mlp_depth", m.decoder.mlp_depth},
                  {"hf_dim", m.decoder.hf_dim},
                  {"unfold", m.decoder.unfold},
                  {"local_ensemble", m.decoder.local_ensemble},
                  {"cell_decode", m.decoder.cell_decode},
                  {"base_skip", m.decoder.base_skip}};
  j["encoder"] = {{"width", m.encoder.width},           {"heads", m.encoder.heads},
                  {"self_blocks", m.encoder.self_blocks}, {"cross_blocks", m.encoder.cross_blocks},
                  {"ffn_mult", m.encoder.ffn_mult},     {"tokens", m.encoder.tokens}};
  return j.dump(2);
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return config_from_json(text.str());
}

}  // namespace svaesr::train
