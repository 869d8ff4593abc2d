#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "svaesr/core/coord_grid.hpp"
#include "svaesr/core/image.hpp"
#include "svaesr/core/rng.hpp"
#include "svaesr/nn/layers.hpp"
#include "svaesr/posenc/posenc.hpp"

namespace svaesr::model {

constexpr double kLogVarMin = -30.0;
constexpr double kLogVarMax = 20.0;

/// Diagonal Gaussian over the latent space.
template <typename T>
struct LatentDistribution {
  std::vector<T> mean;
  std::vector<T> log_var;

  LatentDistribution() = default;
  /// log_var is clamped to [kLogVarMin, kLogVarMax].
  LatentDistribution(std::vector<T> m, std::vector<T> lv);

  int dim() const { return static_cast<int>(mean.size()); }
  static LatentDistribution prior(int dim) {
    return LatentDistribution(std::vector<T>(dim, T(0)), std::vector<T>(dim, T(0)));
  }
};

struct EncoderConfig {
  int width = 128;
  int heads = 4;
  int self_blocks = 2;
  int cross_blocks = 1;
  int ffn_mult = 2;
  int latent_dim = 64;
  int tokens = 2304;  // per image, for both the image under test and the reference
  posenc::PosEncConfig posenc{10, 2, false};

  void validate() const;
  int token_dim() const { return 3 + posenc.code_length(); }
};

/// Uniform draw of n distinct indices from [0, available) (partial Fisher-Yates).
std::vector<int> sample_indices(std::size_t available, int n, Rng& rng);

/// Token rows [signed RGB | posenc(coord)] for the selected points. rgb is
/// N x 3 signed, coords has N entries.
template <typename T>
void make_tokens(const T* rgb, std::span<const std::array<double, 2>> coords,
                 std::span<const int> indices, const posenc::PosEncConfig& pe, nn::Matrix<T>& out);

/// Tokenizes n uniformly drawn pixels of img, which must match grid's pixel count.
nn::Matrix<double> to_pixel_sampler(const ImageTensor& img, const CoordGrid& grid, int n, Rng& rng,
                                    const posenc::PosEncConfig& pe);

/// Signed RGB rows (pixels x 3) of an image in grid order.
template <typename T>
std::vector<T> pixel_rows(const ImageTensor& img);

/// Self-attention over the tokens under test, cross-attention against the
/// reference tokens, mean pooling and a Gaussian head. No positional index is
/// used, so the output is invariant to the order of either token set.
class ConditionalEncoder {
 public:
  template <typename T>
  struct Block {
    nn::Matrix<T> input, attn, mid, ffn;
    typename nn::Attention::Cache<T> attn_cache;
    typename nn::FeedForward::Cache<T> ffn_cache;
  };
  template <typename T>
  struct Cache {
    nn::Matrix<T> y_tokens, r_tokens;
    nn::Matrix<T> r_embed;
    std::vector<Block<T>> blocks;
    nn::Matrix<T> out;  // final token states
    std::vector<T> pooled;
    std::vector<T> raw_log_var;
  };

  ConditionalEncoder() = default;
  ConditionalEncoder(const EncoderConfig& cfg, nn::ParamLayout& layout);

  const EncoderConfig& config() const { return cfg_; }

  template <typename T>
  LatentDistribution<T> forward(std::span<const T> p, const nn::Matrix<T>& y_tokens,
                                const nn::Matrix<T>& r_tokens, Cache<T>* cache) const;

  /// Accumulates parameter grads when non-null and overwrites dy_tokens when non-null.
  /// Gradients w.r.t. log_var are dropped where the clamp was active.
  template <typename T>
  void backward(std::span<const T> p, const Cache<T>& cache, std::span<const T> dmean,
                std::span<const T> dlog_var, T* grads, nn::Matrix<T>* dy_tokens) const;

 private:
  EncoderConfig cfg_;
  nn::Linear embed_y_, embed_r_;
  std::vector<nn::Attention> attn_;
  std::vector<nn::FeedForward> ffn_;
  nn::Linear head_;
};

template <typename T>
LatentDistribution<T> encode_posterior(const ConditionalEncoder& e, std::span<const T> params,
                                       const nn::Matrix<T>& y_tokens,
                                       const nn::Matrix<T>& r_tokens) {
  return e.forward<T>(params, y_tokens, r_tokens, nullptr);
}

/// z = mean + exp(log_var / 2) * eps.
template <typename T>
std::vector<T> reparameterize(const LatentDistribution<T>& dist, std::span<const double> eps);

template <typename T>
std::vector<T> reparameterize(const LatentDistribution<T>& dist, Rng& rng);

std::vector<double> standard_normal_vector(int dim, Rng& rng);

std::vector<double> sample_prior(int dim, Rng& rng);

}  // namespace svaesr::model
