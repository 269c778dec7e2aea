#pragma once

#include <vector>

#include "gmce/model.hpp"
#include "gmce/tensor.hpp"

namespace gmce {

struct LossWeights {
  double lambda_lkd = 0.1;
  double lambda_adv = 0.05;

  void validate() const;  // both >= 0
};

/// The per-class log-likelihood penalty is a plain sum over the batch as
/// written; `mean` divides by N so the loss terms stay on a comparable
/// scale across batch sizes (the training loop default).
enum class LikelihoodMode { sum, mean };

namespace losses {

// All losses are recorded on the tape with analytic backward passes;
// densities are computed in log space (log-sum-exp for the posterior) so
// distant latents cannot underflow.

/// log N(z; mu, diag(exp(log_var))) of a single latent vector -> scalar.
TensorPtr log_gauss_diag(Graph* g, const TensorPtr& z, const TensorPtr& mu,
                         const TensorPtr& log_var);

/// Posterior p(c | z) of the two-component head, uniform priors -> scalar.
TensorPtr gm_posterior(Graph* g, const TensorPtr& z, const GaussianMixtureHead& gm, int c);

/// -(1/N) sum_i log p(y_i | z_i): cross-entropy over mixture posteriors.
TensorPtr classification_loss(Graph* g, const TensorPtr& z_batch, const std::vector<int>& labels,
                              const GaussianMixtureHead& gm);

/// -sum_i log N(z_i; mu_{y_i}, Sigma_{y_i}); `mean` mode divides by N.
TensorPtr likelihood_loss(Graph* g, const TensorPtr& z_batch, const std::vector<int>& labels,
                          const GaussianMixtureHead& gm,
                          LikelihoodMode mode = LikelihoodMode::sum);

/// classification_loss + lambda_lkd * likelihood_loss.
TensorPtr gm_loss(Graph* g, const TensorPtr& z_batch, const std::vector<int>& labels,
                  const GaussianMixtureHead& gm, double lambda_lkd,
                  LikelihoodMode mode = LikelihoodMode::sum);

/// Mean binary cross-entropy with per-class weights; predictions clamped
/// to [1e-7, 1-1e-7] before the log (the loss is undefined at 0/1).
TensorPtr bce_loss(Graph* g, const TensorPtr& pred, const std::vector<int>& labels,
                   double w0 = 1.0, double w1 = 1.0);

/// BCE of the adversary's predictions on z_u against the relabeled labels.
TensorPtr adversarial_loss(Graph* g, const TensorPtr& z_u, const std::vector<int>& labels,
                           const AdversarialClassifier& adv);

/// (1/N) sum_i ||x_i - x'_i||^2.
TensorPtr reconstruction_loss(Graph* g, const TensorPtr& x, const TensorPtr& x_prime);

struct TotalLossParts {
  TensorPtr total;  // rec + lambda_lkd * lkd - lambda_adv * adv
  TensorPtr rec;
  TensorPtr lkd;
  TensorPtr adv;
};

/// Full autoencoder objective; the minus sign on the adversarial term
/// drives encoder_u to destroy label information.
TotalLossParts total_autoencoder_loss(Graph* g, const TensorPtr& x, const TensorPtr& x_prime,
                                      const TensorPtr& z, const TensorPtr& z_u,
                                      const std::vector<int>& labels,
                                      const GaussianMixtureHead& gm,
                                      const AdversarialClassifier& adv,
                                      const LossWeights& weights,
                                      LikelihoodMode mode = LikelihoodMode::mean);

}  // namespace losses
}  // namespace gmce
