#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace svaesr::train {

/// Adam without weight decay, constant learning rate.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(std::span<float> params, std::span<const float> grads);

  std::uint64_t t = 0;
  std::vector<float> m;
  std::vector<float> v;

  double lr() const { return lr_; }

 private:
  double lr_ = 1e-4;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
};

}  // namespace svaesr::train
