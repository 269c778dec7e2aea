#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gmce/data.hpp"
#include "gmce/generation.hpp"
#include "gmce/model.hpp"
#include "gmce/training.hpp"

namespace gmce {

/// Sample statistics (n-1 denominator); sd = 0 for fewer than two values.
struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};
MeanSd mean_sd(const std::vector<double>& xs);  // ContractError on empty

namespace metrics {

/// Wall-clock seconds over successful queries; absent when none succeeded.
std::optional<MeanSd> time_seconds(const std::vector<CounterfactualResult>& results);

/// 100 * successes / queries (failures count against it).
double validity_percent(const std::vector<CounterfactualResult>& results);

/// L2 distance in preprocessed space.
double proximity(std::span<const double> x_q, std::span<const double> x_cf);

/// L1 norm of the change vector in preprocessed space.
double sparsity(std::span<const double> x_q, std::span<const double> x_cf);

/// Autoencoder round-trip error ||x - decode(encode(x))||^2: the
/// in-distribution proxy. Smaller means closer to the training manifold.
double reconstruction(const std::vector<double>& x_cf, const DisentangledAutoencoder& model);

}  // namespace metrics

/// Top-2 principal components by power iteration with deflation.
struct PcaResult {
  std::vector<std::array<double, 2>> coordinates;  // centered projections
  std::array<double, 2> explained_variance_fraction = {0.0, 0.0};
  std::array<std::vector<double>, 2> components;
};
PcaResult pca_project(const std::vector<std::vector<double>>& embeddings, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Repetition protocol: split 80/20, pretrain the classifier, relabel, train
// the autoencoder, generate CEs for all base-class test queries, compute
// metrics; repeat with fresh splits and aggregate mean +- SD across
// repetitions.
// ---------------------------------------------------------------------------

struct MethodMetrics {
  std::string method;
  std::size_t queries = 0;
  std::size_t successes = 0;
  double validity = 0.0;
  std::optional<MeanSd> time;
  std::optional<MeanSd> reconstruction;
  std::optional<MeanSd> sparsity;
  std::optional<MeanSd> proximity;
};

/// One per-query line of the breakdown file.
struct QueryRecord {
  int repetition = 0;
  std::string method;
  std::size_t query_index = 0;
  bool success = false;
  double alpha = 0.0;
  double score = 0.0;
  double seconds = 0.0;
  double proximity = 0.0;
  double sparsity = 0.0;
  double reconstruction = 0.0;
};

struct RepetitionOutcome {
  int repetition = 0;
  bool ok = false;
  std::string error;
  std::vector<MethodMetrics> per_method;
};

struct AggregateRow {
  std::string method;
  double validity = 0.0;  // mean of repetition validities
  std::optional<MeanSd> time;            // across repetition means
  std::optional<MeanSd> reconstruction;  // across repetition means
  std::optional<MeanSd> sparsity;
  std::optional<MeanSd> proximity;
};

struct PcaExport {
  std::vector<std::array<double, 2>> coordinates;
  std::vector<int> labels;
  std::array<double, 2> explained_variance_fraction = {0.0, 0.0};
};

struct MetricReport {
  std::vector<AggregateRow> rows;
  std::vector<RepetitionOutcome> repetitions;
  std::vector<QueryRecord> breakdown;
  std::optional<PcaExport> pca;  // label-relevant embeddings of the last ok repetition
  bool all_repetitions_ok = true;
};

struct RepetitionData {
  Dataset train;
  Dataset test;
  TabularSchema schema;
};
using DataProvider = std::function<RepetitionData(int repetition)>;

struct ModelDims {
  std::size_t d_z = 3;
  std::size_t d_u = 6;
  std::vector<std::size_t> encoder_hidden = {12, 24, 12, 6};
  std::vector<std::size_t> decoder_hidden = {6, 12, 24};
};

struct ProtocolConfig {
  int repetitions = 5;
  std::uint64_t base_seed = 0;
  std::size_t query_limit = 0;  // 0 = all base-class test queries
  std::vector<std::string> methods = {"interp", "gdl"};

  std::vector<std::size_t> classifier_hidden = {10, 4};
  int classifier_epochs = 45;
  double classifier_lr = 3e-3;

  ModelDims dims;
  TrainingConfig training;
  GenerationConfig generation;
  GdlConfig gdl;

  void validate() const;
};

/// A repetition that throws is marked failed and excluded from the
/// aggregate; all_repetitions_ok turns false (the CLI maps that to a
/// nonzero exit).
MetricReport run_protocol(const DataProvider& provider, const ProtocolConfig& cfg);

/// AutoencoderConfig for a schema with the given latent dims.
AutoencoderConfig autoencoder_config_for(const TabularSchema& schema, const ModelDims& dims);

// Report files. `with_timing` = false writes "na" in time columns so the
// outputs are byte-reproducible across runs.
void write_report_csv(const std::string& path, const MetricReport& report, bool with_timing);
std::string format_report_text(const MetricReport& report, bool with_timing);
void write_breakdown_csv(const std::string& path, const MetricReport& report, bool with_timing);
void write_pca_csv(const std::string& path, const PcaExport& pca);

}  // namespace gmce
