#include "svaesr/train/adam.hpp"

#include <cmath>

#include "svaesr/core/error.hpp"

namespace svaesr::train {

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : m(size, 0.0f), v(size, 0.0f), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::span<float> params, std::span<const float> grads) {
  SVAESR_REQUIRE(params.size() == m.size() && grads.size() == m.size(), "adam: size mismatch");
  ++t;
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const float c1 = static_cast<float>(1.0 - std::pow(beta1_, static_cast<double>(t)));
  const float c2 = static_cast<float>(1.0 - std::pow(beta2_, static_cast<double>(t)));
  const float lr = static_cast<float>(lr_), eps = static_cast<float>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = b1 * m[i] + (1.0f - b1) * grads[i];
    v[i] = b2 * v[i] + (1.0f - b2) * grads[i] * grads[i];
    params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

}  // namespace svaesr::train
