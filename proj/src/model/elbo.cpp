#include "svaesr/model/elbo.hpp"

#include <algorithm>
#include <cmath>

#include "svaesr/core/error.hpp"

namespace svaesr::model {

template <typename T>
void elbo_forward(const SvaeModel& model, ParamViews<T> params,
                  const typename LiifDecoder::Prepared<T>& prep, const CoordGrid& grid,
                  const T* target, std::span<const int> token_indices,
                  const nn::Matrix<T>& ref_tokens, std::span<const double> eps,
                  const ObjectiveConfig& cfg, ElboPass<T>& out) {
  const auto& decoder = model.decoder();
  const auto& encoder = model.encoder();
  const std::size_t n = grid.size();
  SVAESR_REQUIRE(n > 0, "elbo: empty point set");
  out.target.assign(target, target + n * 3);
  out.token_indices.assign(token_indices.begin(), token_indices.end());

  nn::Matrix<T> y_tokens;
  make_tokens<T>(out.target.data(), grid.coords, token_indices, encoder.config().posenc, y_tokens);
  out.dist = encoder.forward<T>(params.encoder, y_tokens, ref_tokens, &out.enc);
  out.eps.assign(eps.begin(), eps.end());
  out.z = reparameterize(out.dist, eps);

  const int hf_dim = decoder.config().hf_dim;
  out.hf.assign(hf_dim, T(0));
  decoder.project_latent<T>(params.generator, out.z.data(), out.hf.data());
  out.pred.resize(n * 3);
  decoder.query<T>(params.generator, prep, grid, 0, n, out.hf.data(), 0, out.pred.data(),
                   &out.query);

  T sum = T(0);
  for (std::size_t i = 0; i < n * 3; ++i) sum += std::abs(out.pred[i] - out.target[i]);
  out.recon = sum / static_cast<T>(n * 3);
  out.kl = kl_divergence(out.dist);
  out.elbo = -static_cast<T>(cfg.recon_scale) * out.recon - out.kl;
}

template <typename T>
void elbo_backward(const SvaeModel& model, ParamViews<T> params,
                   const typename LiifDecoder::Prepared<T>& prep, const ElboPass<T>& pass,
                   T delbo, const ObjectiveConfig& cfg, const ElboGrads<T>& grads) {
  const auto& decoder = model.decoder();
  const auto& encoder = model.encoder();
  const std::size_t values = pass.pred.size();
  const int dz = pass.dist.dim();

  // elbo = -recon_scale * mean|pred - target| - kl
  const T unit = -delbo * static_cast<T>(cfg.recon_scale) / static_cast<T>(values);
  std::vector<T> dpred(values);
  for (std::size_t i = 0; i < values; ++i) {
    const T diff = pass.pred[i] - pass.target[i];
    const T sign = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
    dpred[i] = unit * sign;
    if (grads.dtarget) grads.dtarget[i] -= dpred[i];
    if (grads.extra_dpred) dpred[i] += grads.extra_dpred[i];
  }

  std::vector<T> dhf(decoder.config().hf_dim, T(0));
  decoder.query_backward<T>(params.generator, prep, pass.query, dpred.data(), grads.generator,
                            grads.dprojection, dhf.data());
  std::vector<T> dzv(dz, T(0));
  decoder.project_latent_backward<T>(params.generator, pass.z.data(), dhf.data(), grads.generator,
                                     dzv.data());

  if (!grads.encoder && !grads.dtarget) return;
  std::vector<T> dmean(dz), dlv(dz);
  for (int i = 0; i < dz; ++i) {
    dmean[i] = dzv[i];
    dlv[i] = dzv[i] * static_cast<T>(pass.eps[i]) * T(0.5) * std::exp(pass.dist.log_var[i] * T(0.5));
  }
  kl_gradient<T>(pass.dist, -delbo, dmean, dlv);
  nn::Matrix<T> dtokens;
  encoder.backward<T>(params.encoder, pass.enc, dmean, dlv, grads.encoder,
                      grads.dtarget ? &dtokens : nullptr);
  if (grads.dtarget) {
    for (std::size_t t = 0; t < pass.token_indices.size(); ++t) {
      T* dst = grads.dtarget + static_cast<std::ptrdiff_t>(pass.token_indices[t]) * 3;
      const T* src = dtokens.row(static_cast<int>(t));
      for (int c = 0; c < 3; ++c) dst[c] += src[c];
    }
  }
}

template <typename T>
ElboValue elbo(const SvaeModel& model, ParamViews<T> params, const ImageTensor& target,
               const ImageTensor& ref, const ImageTensor& lr_context, Rng& rng,
               const ObjectiveConfig& cfg) {
  const auto& ecfg = model.encoder().config();
  const CoordGrid grid = make_coord_grid(target.height(), target.width());
  const auto rgb = pixel_rows<T>(target);
  const auto idx = sample_indices(grid.size(), std::min<int>(ecfg.tokens, static_cast<int>(grid.size())), rng);

  const CoordGrid ref_grid = make_coord_grid(ref.height(), ref.width());
  const auto ref_rgb = pixel_rows<T>(ref);
  const auto ref_idx =
      sample_indices(ref_grid.size(), std::min<int>(ecfg.tokens, static_cast<int>(ref_grid.size())), rng);
  nn::Matrix<T> ref_tokens;
  make_tokens<T>(ref_rgb.data(), ref_grid.coords, ref_idx, ecfg.posenc, ref_tokens);
  const auto eps = standard_normal_vector(ecfg.latent_dim, rng);

  const auto feat = model.extractor().forward<T>(params.generator, lr_context, nullptr);
  typename LiifDecoder::Prepared<T> prep;
  model.decoder().prepare<T>(params.generator, feat, prep, false);
  ElboPass<T> pass;
  elbo_forward<T>(model, params, prep, grid, rgb.data(), idx, ref_tokens, eps, cfg, pass);
  return {static_cast<double>(pass.elbo), static_cast<double>(pass.recon),
          static_cast<double>(pass.kl)};
}

#define SVAESR_INSTANTIATE_ELBO(T)                                                               \
  template void elbo_forward<T>(const SvaeModel&, ParamViews<T>,                                 \
                                const typename LiifDecoder::Prepared<T>&, const CoordGrid&,      \
                                const T*, std::span<const int>, const nn::Matrix<T>&,            \
                                std::span<const double>, const ObjectiveConfig&, ElboPass<T>&);  \
  template void elbo_backward<T>(const SvaeModel&, ParamViews<T>,                                \
                                 const typename LiifDecoder::Prepared<T>&, const ElboPass<T>&,   \
                                 T, const ObjectiveConfig&, const ElboGrads<T>&);                \
  template ElboValue elbo<T>(const SvaeModel&, ParamViews<T>, const ImageTensor&,                \
                             const ImageTensor&, const ImageTensor&, Rng&, const ObjectiveConfig&);

SVAESR_INSTANTIATE_ELBO(float)
SVAESR_INSTANTIATE_ELBO(double)

}  // namespace svaesr::model
