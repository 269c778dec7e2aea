#include "gmce/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace gmce {

void TrainingConfig::validate() const {
  if (epochs < 0) throw ContractError("training config: epochs must be >= 0");
  if (batch_size == 0) throw ContractError("training config: batch size must be >= 1");
  weights.validate();
}

Dataset relabel(const Dataset& ds, const FrozenClassifier& f) {
  if (!f.frozen) throw ContractError("relabel: classifier is not frozen");
  Dataset out;
  out.x = ds.x;
  const auto scores = f.scores(ds);
  out.labels.reserve(scores.size());
  for (double s : scores) out.labels.push_back(s >= 0.5 ? 1 : 0);
  return out;
}

double train_step_adversary(const TensorPtr& x, const std::vector<int>& y,
                            const DisentangledAutoencoder& model, AdversarialClassifier& adv,
                            AdamState& opt) {
  auto z_u = model.encoder_u.forward(nullptr, x);  // constant: no path back to pi
  Graph g;
  auto loss = losses::adversarial_loss(&g, z_u, y, adv);
  zero_grads(opt.params());
  g.backward(loss);
  opt.step();
  return loss->item();
}

double train_step_gm(const TensorPtr& x, const std::vector<int>& y,
                     DisentangledAutoencoder& model, AdamState& opt, const LossWeights& w,
                     LikelihoodMode mode, double* out_cls, double* out_lkd) {
  Graph g;
  auto z = model.encoder.forward(&g, x);
  auto cls = losses::classification_loss(&g, z, y, model.gm);
  auto lkd = losses::likelihood_loss(&g, z, y, model.gm, mode);
  auto loss = ops::add(&g, cls, ops::scale(&g, lkd, w.lambda_lkd));
  zero_grads(opt.params());
  g.backward(loss);
  opt.step();
  if (out_cls) *out_cls = cls->item();
  if (out_lkd) *out_lkd = lkd->item();
  return loss->item();
}

AeStepLosses train_step_autoencoder(const TensorPtr& x, const std::vector<int>& y,
                                    DisentangledAutoencoder& model,
                                    const AdversarialClassifier& adv, AdamState& opt,
                                    const LossWeights& w, LikelihoodMode mode) {
  Graph g;
  auto [z, z_u] = model.encode(&g, x);
  auto x_prime = model.decode(&g, z, z_u);
  auto parts = losses::total_autoencoder_loss(&g, x, x_prime, z, z_u, y, model.gm, adv, w, mode);
  zero_grads(opt.params());
  g.backward(parts.total);
  opt.step();
  return {parts.total->item(), parts.rec->item(), parts.lkd->item(), parts.adv->item()};
}

namespace {

std::vector<std::size_t> sample_batch(Rng& rng, std::size_t n, std::size_t batch_size,
                                      const Dataset& ds, std::vector<int>& y_out) {
  const std::size_t b = std::min(batch_size, n);
  std::vector<std::size_t> idx(b);
  y_out.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    idx[i] = rng.index(n);
    y_out[i] = ds.labels[idx[i]];
  }
  return idx;
}

}  // namespace

TrainResult train(const Dataset& relabeled, const AutoencoderConfig& ae_cfg,
                  const TrainingConfig& cfg) {
  cfg.validate();
  if (relabeled.size() == 0) throw DataError("train: empty dataset");
  if (relabeled.width() != ae_cfg.input_width) {
    throw DimensionError("train: dataset width does not match autoencoder input width");
  }
  bool has0 = false, has1 = false;
  for (int y : relabeled.labels) (y == 0 ? has0 : has1) = true;
  if (!has0 || !has1) throw DataError("train: relabeled dataset contains a single class");

  TrainResult r;
  r.model = DisentangledAutoencoder(ae_cfg, Rng::derive(cfg.seed, 401));
  r.adversary =
      AdversarialClassifier(ae_cfg.d_u, cfg.adversary_hidden, Rng::derive(cfg.seed, 402));

  auto gm_params = r.model.encoder.parameters();
  for (auto& p : r.model.gm.parameters()) gm_params.push_back(p);
  auto ae_params = r.model.encoder.parameters();
  for (auto& p : r.model.encoder_u.parameters()) ae_params.push_back(p);
  for (auto& p : r.model.decoder.parameters()) ae_params.push_back(p);

  AdamState opt_adv(AdamConfig{.lr = cfg.lr_adversary}, r.adversary.parameters());
  AdamState opt_gm(AdamConfig{.lr = cfg.lr_gm}, gm_params);
  AdamState opt_ae(AdamConfig{.lr = cfg.lr_autoencoder}, ae_params);

  Rng batch_rng(Rng::derive(cfg.seed, 403));
  const std::size_t n = relabeled.size();
  const std::size_t inner = cfg.inner_iterations > 0
                                ? cfg.inner_iterations
                                : std::max<std::size_t>(1, n / cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochTelemetry row;
    row.epoch = epoch;
    const char* stage = "adversary step";
    try {
      for (std::size_t it = 0; it < inner; ++it) {
        std::vector<int> y;
        auto idx = sample_batch(batch_rng, n, cfg.batch_size, relabeled, y);
        auto x = relabeled.batch(idx);

        stage = "adversary step";
        row.adv += train_step_adversary(x, y, r.model, r.adversary, opt_adv);

        stage = "gm step";
        double cls = 0.0, lkd = 0.0;
        row.gm += train_step_gm(x, y, r.model, opt_gm, cfg.weights, cfg.likelihood_mode, &cls,
                                &lkd);
        row.cls += cls;
        row.lkd += lkd;

        stage = "autoencoder step";
        std::vector<int> y2;
        auto idx2 = sample_batch(batch_rng, n, cfg.batch_size, relabeled, y2);
        auto ae = train_step_autoencoder(relabeled.batch(idx2), y2, r.model, r.adversary,
                                         opt_ae, cfg.weights, cfg.likelihood_mode);
        row.rec += ae.rec;
        row.total += ae.total;
      }
    } catch (const NumericError& e) {
      throw NumericError("training aborted in " + std::string(stage) + ", epoch " +
                         std::to_string(epoch) + ": " + e.what());
    }
    const double k = static_cast<double>(inner);
    row.adv /= k;
    row.gm /= k;
    row.cls /= k;
    row.lkd /= k;
    row.rec /= k;
    row.total /= k;
    if (cfg.measure_time) {
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    r.telemetry.push_back(row);
  }
  return r;
}

void write_telemetry_csv(const std::string& path, const std::vector<EpochTelemetry>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open telemetry file for writing: " + path);
  out << "epoch,rec,cls,lkd,adv,gm,total,seconds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f\n", r.epoch, r.rec,
                  r.cls, r.lkd, r.adv, r.gm, r.total, r.seconds);
    out << buf;
  }
}

}  // namespace gmce
