#include "svaesr/nn/params.hpp"

#include <cmath>

#include "svaesr/core/error.hpp"
#include "svaesr/core/rng.hpp"

namespace svaesr::nn {

const Segment& ParamLayout::add(std::string name, int rows, int cols, Init init, int fan_in) {
  SVAESR_REQUIRE(rows >= 1 && cols >= 1, "parameter '" + name + "' has an empty shape");
  Segment seg{std::move(name), total_, rows, cols};
  total_ += seg.size();
  segments_.push_back(std::move(seg));
  rules_.push_back({init, fan_in > 0 ? fan_in : rows});
  return segments_.back();
}

const Segment* ParamLayout::find(const std::string& name) const {
  for (const auto& s : segments_)
    if (s.name == name) return &s;
  return nullptr;
}

std::vector<float> ParamLayout::initialize(std::uint64_t seed) const {
  std::vector<float> values(total_, 0.0f);
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& seg = segments_[i];
    const InitRule& rule = rules_[i];
    Rng rng(derive_seed(seed, i));
    double stddev = 0.0;
    switch (rule.init) {
      case Init::kZero: continue;
      case Init::kHe: stddev = std::sqrt(2.0 / rule.fan_in); break;
      case Init::kXavier: stddev = std::sqrt(1.0 / rule.fan_in); break;
      case Init::kSmall: stddev = 0.1 * std::sqrt(1.0 / rule.fan_in); break;
    }
    for (std::size_t k = 0; k < seg.size(); ++k)
      values[seg.offset + k] = static_cast<float>(stddev * standard_normal(rng));
  }
  return values;
}

}  // namespace svaesr::nn
