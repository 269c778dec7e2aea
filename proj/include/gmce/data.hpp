#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gmce/tensor.hpp"

namespace gmce {

enum class ColumnKind { continuous, categorical };

/// One feature of a tabular schema. Continuous features carry fitted
/// min/max (min-max normalization to [0,1]); categorical features carry
/// the vocabulary in first-appearance order (one-hot width).
struct FeatureSpec {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  double min = 0.0;
  double max = 0.0;
  std::vector<std::string> vocabulary;

  std::size_t width() const {
    return kind == ColumnKind::continuous ? 1 : vocabulary.size();
  }
};

struct TabularSchema {
  std::vector<FeatureSpec> features;
  std::string label_column;
  std::vector<std::string> label_values;  // raw label -> class 0/1, first-appearance order

  std::size_t input_width() const;

  /// Preprocessed layout: all continuous features first (declaration
  /// order), then the one-hot blocks (declaration order). `feature` points
  /// back into `features`.
  struct Block {
    std::size_t offset;
    std::size_t width;
    ColumnKind kind;
    std::size_t feature;
  };
  std::vector<Block> blocks() const;
  std::size_t continuous_count() const;
};

/// Raw CSV contents: header + string cells.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // DataError if absent
};

RawTable read_csv_text(const std::string& text);
RawTable read_csv(const std::string& path);

/// Preprocessed samples (continuous block in [0,1], one-hot blocks) with
/// binary labels. Immutable after construction; share freely.
struct Dataset {
  std::vector<std::vector<double>> x;
  std::vector<int> labels;  // 0/1; empty when the source had no label column

  std::size_t size() const { return x.size(); }
  std::size_t width() const { return x.empty() ? 0 : x.front().size(); }

  TensorPtr batch(const std::vector<std::size_t>& indices) const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

struct ColumnDecl {
  std::string name;
  ColumnKind kind;
};

/// Fit min/max and vocabularies over `table` (optionally restricted to
/// `row_subset`, e.g. the training split). Constant continuous columns and
/// unparseable numeric cells are rejected.
TabularSchema fit_schema(const RawTable& table, const std::vector<ColumnDecl>& kinds,
                         const std::string& label_column,
                         const std::vector<std::size_t>* row_subset = nullptr);

/// Column-kind declarations plus label column from a `[schema]`/`[columns]`
/// sections file.
struct SchemaDecl {
  std::vector<ColumnDecl> columns;
  std::string label_column;
};
SchemaDecl read_schema_decl(const std::string& path);

struct ClipStats {
  std::size_t clipped = 0;  // out-of-range continuous cells clipped to [0,1]
};

std::vector<double> preprocess_row(const std::vector<std::string>& row, const RawTable& table,
                                   const TabularSchema& schema, ClipStats* stats = nullptr);
Dataset preprocess_table(const RawTable& table, const TabularSchema& schema,
                         ClipStats* stats = nullptr);

/// Invert preprocessing for reporting: continuous values are clipped to
/// [0,1] and de-normalized, categorical blocks are resolved by argmax.
std::vector<std::string> depreprocess_row(const std::vector<double>& v,
                                          const TabularSchema& schema);

/// Differentiable inverse used inside gradient-based generation: stays in
/// preprocessed space but sharpens every categorical block with a
/// temperature softmax (softmax of scores/t). Plain-vector variant; the
/// tape variant lives in the generation module.
std::vector<double> sharpen_categorical_blocks(const std::vector<double>& v,
                                               const TabularSchema& schema, double t);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  int repetition = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Deterministic shuffled split; distinct repetition indices give distinct
/// shuffles from one base seed.
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);

/// Numeric table prior to schema fitting (synthetic generator output).
struct NumericTable {
  std::vector<std::string> column_names;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;

  RawTable to_raw_table(const std::string& label_column) const;
};

/// Two 2-D Gaussian classes at the given means plus label-independent
/// nuisance dimensions ~ N(0,1).
NumericTable synthetic_two_gaussians(std::size_t n_per_class, const std::array<double, 2>& mean0,
                                     const std::array<double, 2>& mean1, double stddev,
                                     std::size_t nuisance_dims, std::uint64_t seed);

/// MNIST-style IDX pair filtered to digits {1,7}: digit 1 -> label 0
/// (base), digit 7 -> label 1 (target). Pixels scaled to [0,1]; the
/// returned schema fixes min=0 max=255 per pixel.
struct MnistData {
  Dataset dataset;
  TabularSchema schema;
};
MnistData load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                         std::size_t limit = 0);

/// Inverse-frequency class weights w_c = N / (2 * N_c).
std::pair<double, double> class_weights(const std::vector<int>& labels);

}  // namespace gmce
