#pragma once

#include <span>
#include <vector>

#include "svaesr/core/coord_grid.hpp"
#include "svaesr/core/image.hpp"
#include "svaesr/core/rng.hpp"
#include "svaesr/model/objectives.hpp"
#include "svaesr/model/svae.hpp"

namespace svaesr::model {

template <typename T>
struct ParamViews {
  std::span<const T> generator;
  std::span<const T> encoder;
};

/// Everything one single-sample ELBO evaluation needs for its backward pass.
/// The image under test is a set of points: grid coordinates with signed RGB
/// targets (grid.size() x 3). It is tokenized at token_indices and
/// reconstructed at every grid point.
template <typename T>
struct ElboPass {
  std::vector<T> target;
  std::vector<int> token_indices;
  typename ConditionalEncoder::Cache<T> enc;
  LatentDistribution<T> dist;
  std::vector<double> eps;
  std::vector<T> z;
  std::vector<T> hf;
  typename LiifDecoder::QueryCache<T> query;
  std::vector<T> pred;
  T recon = T(0);
  T kl = T(0);
  T elbo = T(0);
};

template <typename T>
void elbo_forward(const SvaeModel& model, ParamViews<T> params,
                  const typename LiifDecoder::Prepared<T>& prep, const CoordGrid& grid,
                  const T* target, std::span<const int> token_indices,
                  const nn::Matrix<T>& ref_tokens, std::span<const double> eps,
                  const ObjectiveConfig& cfg, ElboPass<T>& out);

/// Destinations of elbo_backward; null members are skipped. Everything accumulates.
template <typename T>
struct ElboGrads {
  T* generator = nullptr;                // decoder-side weights except the code projection
  nn::Matrix<T>* dprojection = nullptr;  // feeds LiifDecoder::prepare_backward
  T* encoder = nullptr;
  T* dtarget = nullptr;  // grid.size() x 3: reconstruction target and token RGB
  const T* extra_dpred = nullptr;  // extra loss gradient w.r.t. the reconstruction
};

/// Backpropagates delbo = dLoss/dELBO.
template <typename T>
void elbo_backward(const SvaeModel& model, ParamViews<T> params,
                   const typename LiifDecoder::Prepared<T>& prep, const ElboPass<T>& pass,
                   T delbo, const ObjectiveConfig& cfg, const ElboGrads<T>& grads);

struct ElboValue {
  double elbo = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

/// Image-level ELBO of target given a reference image, with the decoder
/// conditioned on lr_context. Draws (in order) the target token indices, the
/// reference token indices and the reparameterization noise from rng.
template <typename T>
ElboValue elbo(const SvaeModel& model, ParamViews<T> params, const ImageTensor& target,
               const ImageTensor& ref, const ImageTensor& lr_context, Rng& rng,
               const ObjectiveConfig& cfg);

}  // namespace svaesr::model
