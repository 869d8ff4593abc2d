#pragma once

#include <span>
#include <vector>

#include "svaesr/core/image.hpp"
#include "svaesr/model/encoder.hpp"

// All losses are in minimization form. The encoder wants a high ELBO on real
// images and a low one on generated images; the decoder wants both high.
namespace svaesr::model {

struct ObjectiveConfig {
  double alpha = 2.0;        // soft-exponential temperature
  double gamma = 0.5;        // decoder weight on fake ELBOs
  double lambda_rec = 1.0;   // weight of the second L1 term of the composite loss
  double beta_kl = 0.01;     // KL weight of the composite loss
  double recon_scale = 1.0;  // ELBO reconstruction weight (per-value mean L1)

  void validate() const;
};

constexpr double kSoftExpClamp = 20.0;

/// 0.5 * sum(mean^2 + exp(log_var) - 1 - log_var).
template <typename T>
T kl_divergence(const LatentDistribution<T>& dist);

/// Adds scale * dKL/dmean and scale * dKL/dlog_var.
template <typename T>
void kl_gradient(const LatentDistribution<T>& dist, T scale, std::span<T> dmean,
                 std::span<T> dlog_var);

/// -real + mean_i (1/alpha) exp(alpha * fake_i), with the exponent clamped at
/// kSoftExpClamp. clamp_hits, when given, counts clamped exponents.
double encoder_loss(double real_elbo, std::span<const double> fake_elbos,
                    const ObjectiveConfig& cfg, int* clamp_hits = nullptr);

/// d encoder_loss / d fake_i (zero where the clamp is active). d/d real is -1.
std::vector<double> encoder_loss_fake_grad(std::span<const double> fake_elbos,
                                           const ObjectiveConfig& cfg);

/// -real - gamma * mean(fakes).
double decoder_loss(double real_elbo, std::span<const double> fake_elbos,
                    const ObjectiveConfig& cfg);

struct TotalLoss {
  double loss = 0.0;
  double l1 = 0.0;   // first pixel term
  double rec = 0.0;  // lambda_rec * L1
  double kl = 0.0;   // beta_kl * KL
};

/// mean|sr - hr| + lambda_rec * mean|sr - hr| + beta_kl * KL. The formula
/// repeats the L1 term, so it collapses to (1 + lambda_rec) * L1.
TotalLoss total_loss(const ImageTensor& sr, const ImageTensor& hr,
                     const LatentDistribution<double>& dist, const ObjectiveConfig& cfg);

/// Same on raw value arrays (n entries each).
template <typename T>
TotalLoss total_loss_values(const T* sr, const T* hr, std::size_t n,
                            const LatentDistribution<T>& dist, const ObjectiveConfig& cfg);

}  // namespace svaesr::model
