#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gmce/data.hpp"
#include "gmce/tensor.hpp"

namespace gmce {

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct LayerSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation act = Activation::none;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;

  /// widths = {in, h1, ..., out}; hidden layers get `hidden`, the last
  /// layer gets `last`.
  static NetworkSpec chain(const std::vector<std::size_t>& widths, Activation hidden,
                           Activation last);

  std::size_t input_width() const;
  std::size_t output_width() const;
  void validate() const;  // consecutive layers must chain

  std::string serialize() const;  // "in-out:act,in-out:act,..."
  static NetworkSpec deserialize(const std::string& text);
};

/// Dense feed-forward network. Weights init N(0, 1/sqrt(fan_in)), biases
/// zero, deterministic per seed.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const NetworkSpec& spec, std::uint64_t seed);

  TensorPtr forward(Graph* g, const TensorPtr& x) const;
  std::vector<TensorPtr> parameters() const;
  const NetworkSpec& spec() const { return spec_; }

 private:
  NetworkSpec spec_;
  std::vector<TensorPtr> weights_;
  std::vector<TensorPtr> biases_;
};

/// Two-component Gaussian mixture over the label-relevant latent space:
/// per-class mean and diagonal covariance exp(log_var), class priors fixed
/// uniform at (0.5, 0.5). The log parameterization keeps variances
/// positive under arbitrary optimizer steps.
struct GaussianMixtureHead {
  TensorPtr mean_0, mean_1;        // (d_z)
  TensorPtr log_var_0, log_var_1;  // (d_z)

  /// means ~ N(0,1), log_var = 0 (unit variance).
  static GaussianMixtureHead init(std::size_t d_z, std::uint64_t seed);

  std::size_t dim() const { return mean_0 ? mean_0->size() : 0; }
  const TensorPtr& mean(int c) const { return c == 0 ? mean_0 : mean_1; }
  const TensorPtr& log_var(int c) const { return c == 0 ? log_var_0 : log_var_1; }
  std::vector<TensorPtr> parameters() const;

  /// Squared Mahalanobis distance of z to the class-c component.
  double mahalanobis2(std::span<const double> z, int c) const;
};

struct DecoderConfig {
  std::vector<std::size_t> trunk_widths;         // {d_z+d_u, h1, ...}
  std::size_t continuous_width = 0;              // tanh head
  std::vector<std::size_t> categorical_blocks;   // per-block softmax head

  std::size_t output_width() const;
};

/// Decoder with a shared trunk and two heads: a tanh head for the
/// continuous block and a linear+blockwise-softmax head emitting
/// per-category scores. Output columns follow the schema block layout:
/// all continuous columns first, then the one-hot blocks.
class Decoder {
 public:
  Decoder() = default;
  Decoder(DecoderConfig cfg, std::uint64_t seed);

  TensorPtr forward(Graph* g, const TensorPtr& z_full) const;
  std::vector<TensorPtr> parameters() const;
  const DecoderConfig& config() const { return cfg_; }
  std::size_t input_width() const { return cfg_.trunk_widths.front(); }

 private:
  DecoderConfig cfg_;
  Mlp trunk_;
  TensorPtr cont_w_, cont_b_;
  TensorPtr cat_w_, cat_b_;
};

struct AutoencoderConfig {
  std::size_t input_width = 0;
  std::size_t d_z = 3;
  std::size_t d_u = 6;
  std::vector<std::size_t> encoder_hidden = {12, 24, 12, 6};  // shared by both encoders
  std::vector<std::size_t> decoder_hidden = {6, 12, 24};      // trunk after the latent input
  std::size_t continuous_width = 0;
  std::vector<std::size_t> categorical_blocks;

  static AutoencoderConfig tabular_defaults(const TabularSchema& schema);
  static AutoencoderConfig mnist_defaults();
  void validate() const;
};

/// The autoencoder of the two-branch architecture: encoder x -> z (label
/// relevant, GM-shaped), encoder_u x -> z_u (label irrelevant), decoder
/// concat(z, z_u) -> x'.
struct DisentangledAutoencoder {
  Mlp encoder;
  Mlp encoder_u;
  Decoder decoder;
  GaussianMixtureHead gm;

  DisentangledAutoencoder() = default;
  DisentangledAutoencoder(const AutoencoderConfig& cfg, std::uint64_t seed);

  const AutoencoderConfig& config() const { return cfg_; }
  std::size_t d_z() const { return cfg_.d_z; }
  std::size_t d_u() const { return cfg_.d_u; }
  std::size_t input_width() const { return cfg_.input_width; }

  std::pair<TensorPtr, TensorPtr> encode(Graph* g, const TensorPtr& x) const;
  TensorPtr decode(Graph* g, const TensorPtr& z, const TensorPtr& z_u) const;
  TensorPtr decode_full(Graph* g, const TensorPtr& z_full) const;  // z_full = concat(z, z_u)

  /// Round trip x -> decode(encode(x)); shared by training telemetry and
  /// the in-sample reconstruction metric.
  TensorPtr reconstruct(Graph* g, const TensorPtr& x) const;

  std::vector<TensorPtr> all_parameters() const;

 private:
  AutoencoderConfig cfg_;
};

/// Auxiliary network predicting the relabeled class from z_u; the
/// autoencoder is trained to make it fail.
struct AdversarialClassifier {
  Mlp net;  // ends in sigmoid, output strictly in (0,1)

  AdversarialClassifier() = default;
  AdversarialClassifier(std::size_t d_u, const std::vector<std::size_t>& hidden,
                        std::uint64_t seed);

  TensorPtr forward(Graph* g, const TensorPtr& z_u) const { return net.forward(g, z_u); }
  std::vector<TensorPtr> parameters() const { return net.parameters(); }

  /// Fraction of rows where (score >= 0.5) matches the label.
  double accuracy(const TensorPtr& z_u, const std::vector<int>& labels) const;
};

/// The pre-trained classifier being explained. Parameters are never updated
/// after pretraining; gradients may still flow through it (the latent
/// gradient-descent baseline needs that).
struct FrozenClassifier {
  Mlp net;  // ends in sigmoid
  bool frozen = false;

  TensorPtr forward(Graph* g, const TensorPtr& x) const { return net.forward(g, x); }
  double score_row(const std::vector<double>& x) const;
  std::vector<double> scores(const Dataset& ds) const;
  std::vector<TensorPtr> parameters() const { return net.parameters(); }
  std::uint64_t parameter_hash() const;
};

/// Weighted-BCE pretraining on binary labels; returns the frozen net.
/// Throws DataError on a single-class dataset.
FrozenClassifier pretrain_classifier(const Dataset& train, const NetworkSpec& spec, int epochs,
                                     std::pair<double, double> weights, std::uint64_t seed,
                                     AdamConfig adam = {}, std::size_t batch_size = 100);

// ---------------------------------------------------------------------------
// Model archive: versioned binary container. 8-byte magic, u32 format
// version, length-prefixed key=value metadata block, then length-prefixed
// little-endian float64 parameter blocks in declared order. Round trips are
// bit-exact.
// ---------------------------------------------------------------------------

using MetaEntries = std::vector<std::pair<std::string, std::string>>;

void save_classifier_archive(const std::string& path, const FrozenClassifier& classifier,
                             const TabularSchema& schema, const MetaEntries& extra = {});

struct LoadedClassifier {
  FrozenClassifier classifier;
  TabularSchema schema;
  MetaEntries meta;
};
LoadedClassifier load_classifier_archive(const std::string& path);

void save_model_archive(const std::string& path, const DisentangledAutoencoder& model,
                        const AdversarialClassifier& adversary, const TabularSchema& schema,
                        const MetaEntries& extra = {});

struct LoadedModel {
  DisentangledAutoencoder model;
  AdversarialClassifier adversary;
  TabularSchema schema;
  MetaEntries meta;
};
LoadedModel load_model_archive(const std::string& path);

}  // namespace gmce
