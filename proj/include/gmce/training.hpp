#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gmce/data.hpp"
#include "gmce/losses.hpp"
#include "gmce/model.hpp"

namespace gmce {

struct TrainingConfig {
  int epochs = 100;
  std::size_t batch_size = 100;
  double lr_adversary = 1e-3;
  double lr_gm = 1e-3;
  double lr_autoencoder = 1e-3;
  LossWeights weights;
  LikelihoodMode likelihood_mode = LikelihoodMode::mean;
  std::uint64_t seed = 0;
  /// Inner iterations per epoch; 0 derives max(1, N / batch_size).
  std::size_t inner_iterations = 0;
  std::vector<std::size_t> adversary_hidden = {16, 8};
  /// Gate for wall-clock telemetry; off writes 0 so outputs are
  /// byte-reproducible.
  bool measure_time = true;

  void validate() const;
};

/// Labels replaced by the frozen classifier's thresholded predictions:
/// y_i = 1 iff f(x_i) >= 0.5 (boundary assigned to the target class).
/// The original labels are discarded.
Dataset relabel(const Dataset& ds, const FrozenClassifier& f);

/// One adversary update: descend BCE(adv(z_u), y) in the adversary's
/// parameters only. z_u is computed outside the tape, so no gradient
/// reaches the encoders.
double train_step_adversary(const TensorPtr& x, const std::vector<int>& y,
                            const DisentangledAutoencoder& model, AdversarialClassifier& adv,
                            AdamState& opt);

/// One label-relevant-branch update: descend L_cls + lambda_lkd * L_lkd in
/// the encoder and the mixture head. The adversarial term has no
/// dependence on these parameters in the data flow, so it is routed to
/// encoder_u via the autoencoder step instead.
double train_step_gm(const TensorPtr& x, const std::vector<int>& y,
                     DisentangledAutoencoder& model, AdamState& opt, const LossWeights& w,
                     LikelihoodMode mode, double* out_cls = nullptr, double* out_lkd = nullptr);

struct AeStepLosses {
  double total = 0.0;
  double rec = 0.0;
  double lkd = 0.0;
  double adv = 0.0;
};

/// One autoencoder update: descend L_rec + lambda_lkd * L_lkd -
/// lambda_adv * L_adv in encoder, encoder_u and decoder. The adversary and
/// the mixture means/variances receive gradients but are not stepped here.
AeStepLosses train_step_autoencoder(const TensorPtr& x, const std::vector<int>& y,
                                    DisentangledAutoencoder& model,
                                    const AdversarialClassifier& adv, AdamState& opt,
                                    const LossWeights& w, LikelihoodMode mode);

struct EpochTelemetry {
  int epoch = 0;
  double rec = 0.0;
  double cls = 0.0;
  double lkd = 0.0;
  double adv = 0.0;
  double gm = 0.0;
  double total = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  DisentangledAutoencoder model;
  AdversarialClassifier adversary;
  std::vector<EpochTelemetry> telemetry;
};

/// The full alternating loop over the relabeled dataset: per inner
/// iteration one adversary step and one GM step on a batch, then an
/// autoencoder step on a freshly sampled batch. Deterministic per seed.
/// NaN/Inf in any loss aborts with the offending step named.
TrainResult train(const Dataset& relabeled, const AutoencoderConfig& ae_cfg,
                  const TrainingConfig& cfg);

void write_telemetry_csv(const std::string& path, const std::vector<EpochTelemetry>& rows);

}  // namespace gmce
