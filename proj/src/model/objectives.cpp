#include "svaesr/model/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "svaesr/core/error.hpp"

namespace svaesr::model {

void ObjectiveConfig::validate() const {
  SVAESR_REQUIRE(std::isfinite(alpha) && alpha > 0.0, "objective: alpha must be positive");
  SVAESR_REQUIRE(std::isfinite(gamma) && gamma >= 0.0, "objective: gamma must be non-negative");
  SVAESR_REQUIRE(std::isfinite(lambda_rec) && lambda_rec >= 0.0,
                 "objective: lambda_rec must be non-negative");
  SVAESR_REQUIRE(std::isfinite(beta_kl) && beta_kl >= 0.0, "objective: beta_kl must be non-negative");
  SVAESR_REQUIRE(std::isfinite(recon_scale) && recon_scale > 0.0,
                 "objective: recon_scale must be positive");
}

template <typename T>
T kl_divergence(const LatentDistribution<T>& dist) {
  T sum = T(0);
  for (int i = 0; i < dist.dim(); ++i) {
    const T m = dist.mean[i], lv = dist.log_var[i];
    // expm1 keeps the small-log_var case accurate: e^lv - 1 - lv ~ lv^2 / 2.
    sum += m * m + (std::expm1(lv) - lv);
  }
  return T(0.5) * sum;
}

template <typename T>
void kl_gradient(const LatentDistribution<T>& dist, T scale, std::span<T> dmean,
                 std::span<T> dlog_var) {
  for (int i = 0; i < dist.dim(); ++i) {
    dmean[i] += scale * dist.mean[i];
    dlog_var[i] += scale * T(0.5) * std::expm1(dist.log_var[i]);
  }
}

double encoder_loss(double real_elbo, std::span<const double> fake_elbos,
                    const ObjectiveConfig& cfg, int* clamp_hits) {
  SVAESR_REQUIRE(!fake_elbos.empty(), "encoder_loss: needs at least one fake ELBO");
  double fake = 0.0;
  for (double f : fake_elbos) {
    const double arg = cfg.alpha * f;
    if (arg > kSoftExpClamp && clamp_hits) ++*clamp_hits;
    fake += std::exp(std::min(arg, kSoftExpClamp)) / cfg.alpha;
  }
  return -real_elbo + fake / static_cast<double>(fake_elbos.size());
}

std::vector<double> encoder_loss_fake_grad(std::span<const double> fake_elbos,
                                           const ObjectiveConfig& cfg) {
  std::vector<double> g(fake_elbos.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double arg = cfg.alpha * fake_elbos[i];
    g[i] = arg > kSoftExpClamp ? 0.0 : std::exp(arg) / static_cast<double>(g.size());
  }
  return g;
}

double decoder_loss(double real_elbo, std::span<const double> fake_elbos,
                    const ObjectiveConfig& cfg) {
  SVAESR_REQUIRE(!fake_elbos.empty(), "decoder_loss: needs at least one fake ELBO");
  double sum = 0.0;
  for (double f : fake_elbos) sum += f;
  return -real_elbo - cfg.gamma * sum / static_cast<double>(fake_elbos.size());
}

template <typename T>
TotalLoss total_loss_values(const T* sr, const T* hr, std::size_t n,
                            const LatentDistribution<T>& dist, const ObjectiveConfig& cfg) {
  SVAESR_REQUIRE(n > 0, "total_loss: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::abs(static_cast<double>(sr[i]) - hr[i]);
  TotalLoss out;
  out.l1 = sum / static_cast<double>(n);
  out.rec = cfg.lambda_rec * out.l1;
  out.kl = cfg.beta_kl * static_cast<double>(kl_divergence(dist));
  out.loss = out.l1 + out.rec + out.kl;
  return out;
}

TotalLoss total_loss(const ImageTensor& sr, const ImageTensor& hr,
                     const LatentDistribution<double>& dist, const ObjectiveConfig& cfg) {
  SVAESR_REQUIRE(sr.same_shape(hr), "total_loss: shape mismatch");
  SVAESR_REQUIRE(sr.range() == hr.range(), "total_loss: value range mismatch");
  const std::vector<double> a(sr.data().begin(), sr.data().end());
  const std::vector<double> b(hr.data().begin(), hr.data().end());
  return total_loss_values(a.data(), b.data(), a.size(), dist, cfg);
}

#define SVAESR_INSTANTIATE_OBJECTIVES(T)                                                        \
  template T kl_divergence<T>(const LatentDistribution<T>&);                                    \
  template void kl_gradient<T>(const LatentDistribution<T>&, T, std::span<T>, std::span<T>);    \
  template TotalLoss total_loss_values<T>(const T*, const T*, std::size_t,                      \
                                          const LatentDistribution<T>&, const ObjectiveConfig&);

SVAESR_INSTANTIATE_OBJECTIVES(float)
SVAESR_INSTANTIATE_OBJECTIVES(double)

}  // namespace svaesr::model
