#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "svaesr/core/coord_grid.hpp"
#include "svaesr/core/image.hpp"
#include "svaesr/model/extractor.hpp"
#include "svaesr/nn/layers.hpp"
#include "svaesr/posenc/posenc.hpp"

namespace svaesr::model {

struct DecoderConfig {
  int features = 64;  // channels of the FeatureMap it consumes
  posenc::PosEncConfig posenc{10, 2, false};
  int mlp_width = 256;
  int mlp_depth = 5;  // hidden layers; the first one is the low-frequency stage
  int hf_dim = 64;
  int latent_dim = 64;
  bool unfold = true;
  bool local_ensemble = true;
  bool cell_decode = true;
  bool base_skip = true;  // add the bilinear LR sample to the MLP output

  void validate() const;
};

/// Local implicit image function.
///
/// For a query coordinate the decoder visits the four latent codes nearest to
/// the query's half-pixel-shifted neighbours (local ensemble), each optionally
/// unfolded with its 3x3 neighbourhood. The render MLP sees, per code:
///
///   stage 1: [unfolded code | relative coordinate | LFC(rel / 2) | cell size]
///   stage 2: [stage-1 activation | HFC(rel / 2) | hf signal] -> ... -> RGB
///
/// The relative coordinate is measured in units of half a latent cell, so it
/// lies in [-2, 2] and is halved before the positional encoding. The four
/// predictions are blended with the area of the diagonally opposite
/// rectangle. Output is signed-range RGB.
///
/// The first stage-1 product over the unfolded code depends only on the code,
/// so prepare() evaluates it once per latent position.
class LiifDecoder {
 public:
  template <typename T>
  struct Prepared {
    const FeatureMap<T>* feat = nullptr;
    nn::Matrix<T> unfolded;    // positions x code_dim, kept only for backward
    nn::Matrix<T> projection;  // positions x mlp_width
  };

  template <typename T>
  struct QueryCache {
    int queries = 0;
    int shifts = 0;
    std::vector<int> code;   // latent position per row (row = query * shifts + shift)
    std::vector<T> weight;   // ensemble weight per row
    nn::Matrix<T> rest;      // stage-1 inputs besides the code
    nn::Matrix<T> stage2_in;
    std::vector<nn::Matrix<T>> acts;  // post-ReLU activations, acts[0] is stage 1
    nn::Matrix<T> pred;               // per-row RGB before blending
    int hf_stride = 0;
  };

  LiifDecoder() = default;
  LiifDecoder(const DecoderConfig& cfg, nn::ParamLayout& layout);

  const DecoderConfig& config() const { return cfg_; }
  int code_dim() const { return cfg_.unfold ? 9 * cfg_.features : cfg_.features; }
  int rest_dim() const;
  int shifts() const { return cfg_.local_ensemble ? 4 : 1; }

  template <typename T>
  void prepare(std::span<const T> p, const FeatureMap<T>& feat, Prepared<T>& out,
               bool keep_for_backward) const;

  /// Accumulates grads and overwrites dcodes (HWC) when non-null.
  template <typename T>
  void prepare_backward(std::span<const T> p, const Prepared<T>& prep,
                        const nn::Matrix<T>& dprojection, T* grads, std::vector<T>* dcodes) const;

  /// Queries [begin, begin + count) of grid. hf points at per-query signals
  /// with stride hf_stride (0 broadcasts one vector; null means zero signal).
  /// Writes count x 3 signed RGB into out.
  template <typename T>
  void query(std::span<const T> p, const Prepared<T>& prep, const CoordGrid& grid,
             std::size_t begin, std::size_t count, const T* hf, int hf_stride, T* out,
             QueryCache<T>* cache) const;

  /// dout is count x 3. dprojection (positions x width) and dhf accumulate;
  /// dhf has the same stride convention as the forward hf.
  template <typename T>
  void query_backward(std::span<const T> p, const Prepared<T>& prep, const QueryCache<T>& cache,
                      const T* dout, T* grads, nn::Matrix<T>* dprojection, T* dhf) const;

  /// hf = W z + b: the learned expansion of a latent vector into the HF signal.
  template <typename T>
  void project_latent(std::span<const T> p, const T* z, T* hf) const;

  template <typename T>
  void project_latent_backward(std::span<const T> p, const T* z, const T* dhf, T* grads,
                               T* dz) const;

  /// Ensemble neighbours and weights of one query; exposed for tests.
  struct Neighbour {
    int row = 0;
    int col = 0;
    double rel[2] = {0.0, 0.0};
    double weight = 0.0;
  };
  std::vector<Neighbour> neighbours(int h, int w, std::array<double, 2> coord) const;

 private:
  DecoderConfig cfg_;
  std::size_t code_w_ = 0;  // stage-1 weights applied to the unfolded code
  nn::Linear stage1_rest_;
  std::vector<nn::Linear> hidden_;  // stage 2 onwards
  nn::Linear out_;
  nn::Linear latent_proj_;
};

/// RGB (N x 3, signed) at every grid point.
template <typename T>
nn::Matrix<T> query_rgb(const LiifDecoder& decoder, std::span<const T> params,
                        const FeatureMap<T>& feat, const CoordGrid& grid, const nn::Matrix<T>* hf);

/// Renders round(H*scale) x round(W*scale) pixels in chunks of at most `chunk`
/// queries. Without z the HF signal is zero. Returns a unit-range image
/// clamped to [0, 1]; the result does not depend on chunk size.
ImageTensor super_resolve(const FeatureExtractor& extractor, const LiifDecoder& decoder,
                          std::span<const float> params, const ImageTensor& lr, double scale,
                          const std::optional<std::vector<float>>& z, int chunk = 4096);

/// Same, for an explicit output size.
ImageTensor super_resolve_to(const FeatureExtractor& extractor, const LiifDecoder& decoder,
                             std::span<const float> params, const ImageTensor& lr, int out_h,
                             int out_w, const std::optional<std::vector<float>>& z,
                             int chunk = 4096);

}  // namespace svaesr::model
