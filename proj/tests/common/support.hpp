#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "svaesr/core/image.hpp"
#include "svaesr/core/rng.hpp"
#include "svaesr/model/svae.hpp"
#include "svaesr/nn/params.hpp"

namespace testing {

inline svaesr::model::ModelConfig tiny_model() {
  svaesr::model::ModelConfig cfg;
  cfg.extractor = {4, 1};
  cfg.decoder.features = 4;
  cfg.decoder.posenc = {2, 2, false};
  cfg.decoder.mlp_width = 8;
  cfg.decoder.mlp_depth = 3;
  cfg.decoder.hf_dim = 3;
  cfg.decoder.latent_dim = 3;
  cfg.encoder.width = 8;
  cfg.encoder.heads = 2;
  cfg.encoder.self_blocks = 1;
  cfg.encoder.cross_blocks = 1;
  cfg.encoder.latent_dim = 3;
  cfg.encoder.tokens = 6;
  cfg.encoder.posenc = {2, 2, false};
  return cfg;
}

inline svaesr::ImageTensor random_image(int c, int h, int w, std::uint64_t seed) {
  svaesr::ImageTensor img(c, h, w);
  svaesr::Rng rng(seed);
  for (float& v : img.data()) v = static_cast<float>(svaesr::uniform01(rng));
  return img;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  svaesr::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = scale * svaesr::standard_normal(rng);
  return v;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
  int checked = 0;
};

/// Central differences on a deterministic subset of every segment of layout.
inline GradCheckResult grad_check(const svaesr::nn::ParamLayout& layout, std::vector<double>& params,
                                  const std::vector<double>& analytic,
                                  const std::function<double(const std::vector<double>&)>& f,
                                  int per_segment = 6, double step = 1e-6) {
  GradCheckResult out;
  svaesr::Rng rng(1234);
  for (const auto& seg : layout.segments()) {
    const int picks = std::min<int>(per_segment, static_cast<int>(seg.size()));
    for (int k = 0; k < picks; ++k) {
      const std::size_t i = seg.offset + svaesr::uniform_index(rng, seg.size());
      const double saved = params[i];
      params[i] = saved + step;
      const double fp = f(params);
      params[i] = saved - step;
      const double fm = f(params);
      params[i] = saved;
      const double fd = (fp - fm) / (2 * step);
      const double a = analytic[i];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = seg.name + "[" + std::to_string(i - seg.offset) + "] analytic=" +
                    std::to_string(a) + " numeric=" + std::to_string(fd);
      }
    }
  }
  return out;
}

}  // namespace testing
