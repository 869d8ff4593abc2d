#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace svaesr::nn {

/// A named rows x cols slice of a flat parameter vector.
struct Segment {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

enum class Init { kZero, kHe, kXavier, kSmall };

/// Registry of every trainable tensor of one parameter group. Parameters live
/// in a single contiguous vector so that optimizers, checkpoints, gradient
/// accumulation and finite-difference checks all work on flat spans.
class ParamLayout {
 public:
  /// Registers a tensor; fan_in drives the initializer scale.
  const Segment& add(std::string name, int rows, int cols, Init init, int fan_in = 0);

  std::size_t total() const { return total_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const Segment* find(const std::string& name) const;

  /// Deterministic initialization from a seed.
  std::vector<float> initialize(std::uint64_t seed) const;

 private:
  struct InitRule {
    Init init;
    int fan_in;
  };
  std::vector<Segment> segments_;
  std::vector<InitRule> rules_;
  std::size_t total_ = 0;
};

template <typename T, typename U>
std::vector<T> convert(std::span<const U> values) {
  return std::vector<T>(values.begin(), values.end());
}

}  // namespace svaesr::nn
