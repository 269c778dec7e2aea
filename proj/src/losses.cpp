#include "gmce/losses.hpp"

#include <algorithm>
#include <cmath>

namespace gmce {

void LossWeights::validate() const {
  if (lambda_lkd < 0.0 || lambda_adv < 0.0) {
    throw ContractError("loss weights must be nonnegative");
  }
}

namespace losses {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112353;
constexpr double kBceClamp = 1e-7;

void check_labels(const std::vector<int>& labels, std::size_t rows, const char* what) {
  if (rows == 0 || labels.empty()) throw ContractError(std::string(what) + ": empty batch");
  if (labels.size() != rows) {
    throw DimensionError(std::string(what) + ": label count does not match batch rows");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw ContractError(std::string(what) + ": labels must be 0/1");
  }
}

void check_gm(const GaussianMixtureHead& gm, std::size_t d, const char* what) {
  if (gm.dim() != d || gm.log_var_0->size() != d || gm.mean_1->size() != d ||
      gm.log_var_1->size() != d) {
    throw DimensionError(std::string(what) + ": latent width does not match mixture head");
  }
}

// Per-sample class log density log N(z_i; mu_c, diag(exp(lv_c))).
double row_log_density(const double* z, const double* mu, const double* lv, std::size_t d) {
  double acc = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = z[j] - mu[j];
    acc += kLog2Pi + lv[j] + diff * diff * std::exp(-lv[j]);
  }
  return -0.5 * acc;
}

// Accumulate w * d(log density)/d{z, mu, lv} for one sample into the grad
// buffers (which must exist).
void accumulate_log_density_grad(double w, const double* z, const double* mu, const double* lv,
                                 std::size_t d, double* gz, double* gmu, double* glv) {
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = z[j] - mu[j];
    const double prec = std::exp(-lv[j]);
    if (gz) gz[j] += w * (-diff * prec);
    gmu[j] += w * (diff * prec);
    glv[j] += w * (-0.5 * (1.0 - diff * diff * prec));
  }
}

void check_scalar_finite(const TensorPtr& t, const char* what) {
  if (!std::isfinite(t->data[0])) {
    throw NumericError(std::string("non-finite value produced by ") + what);
  }
}

}  // namespace

TensorPtr log_gauss_diag(Graph* g, const TensorPtr& z, const TensorPtr& mu,
                         const TensorPtr& log_var) {
  const std::size_t d = z->size();
  if (mu->size() != d || log_var->size() != d) {
    throw DimensionError("log_gauss_diag: widths differ");
  }
  auto out = Tensor::scalar(row_log_density(z->data.data(), mu->data.data(),
                                            log_var->data.data(), d));
  check_scalar_finite(out, "log_gauss_diag");
  if (g) {
    g->record(out, [z, mu, log_var, out, d] {
      z->ensure_grad();
      mu->ensure_grad();
      log_var->ensure_grad();
      accumulate_log_density_grad(out->grad[0], z->data.data(), mu->data.data(),
                                  log_var->data.data(), d, z->grad.data(), mu->grad.data(),
                                  log_var->grad.data());
    });
  }
  return out;
}

TensorPtr gm_posterior(Graph* g, const TensorPtr& z, const GaussianMixtureHead& gm, int c) {
  if (c != 0 && c != 1) throw ContractError("gm_posterior: class must be 0 or 1");
  const std::size_t d = z->size();
  check_gm(gm, d, "gm_posterior");

  const double* zp = z->data.data();
  const double a0 = row_log_density(zp, gm.mean_0->data.data(), gm.log_var_0->data.data(), d);
  const double a1 = row_log_density(zp, gm.mean_1->data.data(), gm.log_var_1->data.data(), d);
  // uniform priors cancel: log p(c|z) = a_c - LSE(a0, a1)
  const double m = std::max(a0, a1);
  const double lse = m + std::log(std::exp(a0 - m) + std::exp(a1 - m));
  const double pc = std::exp((c == 0 ? a0 : a1) - lse);

  auto out = Tensor::scalar(pc);
  check_scalar_finite(out, "gm_posterior");
  if (g) {
    auto mu0 = gm.mean_0, lv0 = gm.log_var_0, mu1 = gm.mean_1, lv1 = gm.log_var_1;
    g->record(out, [z, mu0, lv0, mu1, lv1, out, d, c, pc] {
      z->ensure_grad();
      mu0->ensure_grad();
      lv0->ensure_grad();
      mu1->ensure_grad();
      lv1->ensure_grad();
      // dp/da_c = p(1-p), dp/da_other = -p(1-p)
      const double w_own = out->grad[0] * pc * (1.0 - pc);
      const double w0 = c == 0 ? w_own : -w_own;
      const double w1 = c == 1 ? w_own : -w_own;
      accumulate_log_density_grad(w0, z->data.data(), mu0->data.data(), lv0->data.data(), d,
                                  z->grad.data(), mu0->grad.data(), lv0->grad.data());
      accumulate_log_density_grad(w1, z->data.data(), mu1->data.data(), lv1->data.data(), d,
                                  z->grad.data(), mu1->grad.data(), lv1->grad.data());
    });
  }
  return out;
}

TensorPtr classification_loss(Graph* g, const TensorPtr& z_batch, const std::vector<int>& labels,
                              const GaussianMixtureHead& gm) {
  const std::size_t n = z_batch->rows(), d = z_batch->cols();
  check_labels(labels, n, "classification_loss");
  check_gm(gm, d, "classification_loss");

  // posteriors kept for the backward pass
  std::vector<double> p1(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* zp = z_batch->data.data() + i * d;
    const double a0 = row_log_density(zp, gm.mean_0->data.data(), gm.log_var_0->data.data(), d);
    const double a1 = row_log_density(zp, gm.mean_1->data.data(), gm.log_var_1->data.data(), d);
    const double m = std::max(a0, a1);
    const double lse = m + std::log(std::exp(a0 - m) + std::exp(a1 - m));
    p1[i] = std::exp(a1 - lse);
    loss -= (labels[i] == 0 ? a0 : a1) - lse;
  }
  loss /= static_cast<double>(n);

  auto out = Tensor::scalar(loss);
  check_scalar_finite(out, "classification_loss");
  if (g) {
    auto mu0 = gm.mean_0, lv0 = gm.log_var_0, mu1 = gm.mean_1, lv1 = gm.log_var_1;
    g->record(out, [z_batch, labels, mu0, lv0, mu1, lv1, out, n, d, p1] {
      z_batch->ensure_grad();
      mu0->ensure_grad();
      lv0->ensure_grad();
      mu1->ensure_grad();
      lv1->ensure_grad();
      const double go = out->grad[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double* zp = z_batch->data.data() + i * d;
        double* gz = z_batch->grad.data() + i * d;
        // dL/da_c = -(1/N) (1{c==y} - p_c)
        const double y1 = labels[i] == 1 ? 1.0 : 0.0;
        const double w1 = -go * (y1 - p1[i]);
        const double w0 = -go * ((1.0 - y1) - (1.0 - p1[i]));
        accumulate_log_density_grad(w0, zp, mu0->data.data(), lv0->data.data(), d, gz,
                                    mu0->grad.data(), lv0->grad.data());
        accumulate_log_density_grad(w1, zp, mu1->data.data(), lv1->data.data(), d, gz,
                                    mu1->grad.data(), lv1->grad.data());
      }
    });
  }
  return out;
}

TensorPtr likelihood_loss(Graph* g, const TensorPtr& z_batch, const std::vector<int>& labels,
                          const GaussianMixtureHead& gm, LikelihoodMode mode) {
  const std::size_t n = z_batch->rows(), d = z_batch->cols();
  check_labels(labels, n, "likelihood_loss");
  check_gm(gm, d, "likelihood_loss");

  const double scale = mode == LikelihoodMode::mean ? 1.0 / static_cast<double>(n) : 1.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* zp = z_batch->data.data() + i * d;
    const auto& mu = gm.mean(labels[i]);
    const auto& lv = gm.log_var(labels[i]);
    loss -= row_log_density(zp, mu->data.data(), lv->data.data(), d);
  }
  loss *= scale;

  auto out = Tensor::scalar(loss);
  check_scalar_finite(out, "likelihood_loss");
  if (g) {
    auto mu0 = gm.mean_0, lv0 = gm.log_var_0, mu1 = gm.mean_1, lv1 = gm.log_var_1;
    g->record(out, [z_batch, labels, mu0, lv0, mu1, lv1, out, n, d, scale] {
      z_batch->ensure_grad();
      mu0->ensure_grad();
      lv0->ensure_grad();
      mu1->ensure_grad();
      lv1->ensure_grad();
      const double w = -out->grad[0] * scale;
      for (std::size_t i = 0; i < n; ++i) {
        const double* zp = z_batch->data.data() + i * d;
        double* gz = z_batch->grad.data() + i * d;
        const bool one = labels[i] == 1;
        accumulate_log_density_grad(w, zp, (one ? mu1 : mu0)->data.data(),
                                    (one ? lv1 : lv0)->data.data(), d, gz,
                                    (one ? mu1 : mu0)->grad.data(),
                                    (one ? lv1 : lv0)->grad.data());
      }
    });
  }
  return out;
}

TensorPtr gm_loss(Graph* g, const TensorPtr& z_batch, const std::vector<int>& labels,
                  const GaussianMixtureHead& gm, double lambda_lkd, LikelihoodMode mode) {
  if (lambda_lkd < 0.0) throw ContractError("gm_loss: lambda_lkd must be >= 0");
  auto cls = classification_loss(g, z_batch, labels, gm);
  auto lkd = likelihood_loss(g, z_batch, labels, gm, mode);
  return ops::add(g, cls, ops::scale(g, lkd, lambda_lkd));
}

TensorPtr bce_loss(Graph* g, const TensorPtr& pred, const std::vector<int>& labels, double w0,
                   double w1) {
  const std::size_t n = pred->size();
  if (pred->cols() != 1 && pred->shape.size() == 2) {
    throw DimensionError("bce_loss: predictions must be a single column");
  }
  check_labels(labels, n, "bce_loss");

  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(pred->data[i], kBceClamp, 1.0 - kBceClamp);
    const double w = labels[i] == 1 ? w1 : w0;
    loss -= w * (labels[i] == 1 ? std::log(p) : std::log(1.0 - p));
  }
  loss /= static_cast<double>(n);

  auto out = Tensor::scalar(loss);
  check_scalar_finite(out, "bce_loss");
  if (g) {
    g->record(out, [pred, labels, out, n, w0, w1] {
      pred->ensure_grad();
      const double go = out->grad[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double raw = pred->data[i];
        if (raw < kBceClamp || raw > 1.0 - kBceClamp) continue;  // clamp region: flat
        const double w = labels[i] == 1 ? w1 : w0;
        pred->grad[i] += go * w * (labels[i] == 1 ? -1.0 / raw : 1.0 / (1.0 - raw));
      }
    });
  }
  return out;
}

TensorPtr adversarial_loss(Graph* g, const TensorPtr& z_u, const std::vector<int>& labels,
                           const AdversarialClassifier& adv) {
  return bce_loss(g, adv.forward(g, z_u), labels);
}

TensorPtr reconstruction_loss(Graph* g, const TensorPtr& x, const TensorPtr& x_prime) {
  if (x->shape != x_prime->shape) throw DimensionError("reconstruction_loss: shape mismatch");
  const double n = static_cast<double>(x->rows());
  auto diff = ops::sub(g, x, x_prime);
  return ops::scale(g, ops::sum(g, ops::square(g, diff)), 1.0 / n);
}

TotalLossParts total_autoencoder_loss(Graph* g, const TensorPtr& x, const TensorPtr& x_prime,
                                      const TensorPtr& z, const TensorPtr& z_u,
                                      const std::vector<int>& labels,
                                      const GaussianMixtureHead& gm,
                                      const AdversarialClassifier& adv,
                                      const LossWeights& weights, LikelihoodMode mode) {
  weights.validate();
  TotalLossParts parts;
  parts.rec = reconstruction_loss(g, x, x_prime);
  parts.lkd = likelihood_loss(g, z, labels, gm, mode);
  parts.adv = adversarial_loss(g, z_u, labels, adv);
  parts.total = ops::add(
      g, parts.rec,
      ops::add(g, ops::scale(g, parts.lkd, weights.lambda_lkd),
               ops::scale(g, parts.adv, -weights.lambda_adv)));
  return parts;
}

}  // namespace losses
}  // namespace gmce
