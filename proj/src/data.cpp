#include "gmce/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "gmce/kvfile.hpp"

namespace gmce {

namespace {

double parse_number(const std::string& cell, const std::string& column) {
  const char* s = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0' || !std::isfinite(v)) {
    throw DataError("column '" + column + "': unparseable numeric cell '" + cell + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::size_t TabularSchema::input_width() const {
  std::size_t w = 0;
  for (const auto& f : features) w += f.width();
  return w;
}

std::vector<TabularSchema::Block> TabularSchema::blocks() const {
  std::vector<Block> out;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].kind != ColumnKind::continuous) continue;
    out.push_back({offset, 1, ColumnKind::continuous, i});
    offset += 1;
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].kind != ColumnKind::categorical) continue;
    out.push_back({offset, features[i].vocabulary.size(), ColumnKind::categorical, i});
    offset += features[i].vocabulary.size();
  }
  return out;
}

std::size_t TabularSchema::continuous_count() const {
  std::size_t n = 0;
  for (const auto& f : features) {
    if (f.kind == ColumnKind::continuous) ++n;
  }
  return n;
}

std::size_t RawTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw DataError("column '" + name + "' not found in table header");
}

RawTable read_csv_text(const std::string& text) {
  // RFC-4180-style: quoted fields may contain commas, quotes ("") and
  // newlines; records end at an unquoted newline.
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    any = true;
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        break;
      case '\r':
        break;
      case '\n':
        record.push_back(std::move(field));
        field.clear();
        records.push_back(std::move(record));
        record.clear();
        break;
      default:
        field += c;
    }
  }
  if (quoted) throw DataError("csv: unterminated quoted field");
  if (!field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  if (!any || records.empty()) throw DataError("csv: missing header row");

  RawTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() == 1 && records[r][0].empty()) continue;  // trailing blank line
    if (records[r].size() != table.header.size()) {
      throw DataError("csv: row " + std::to_string(r + 1) + " has " +
                      std::to_string(records[r].size()) + " cells, header has " +
                      std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

RawTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open csv file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return read_csv_text(buf.str());
}

TensorPtr Dataset::batch(const std::vector<std::size_t>& indices) const {
  auto t = Tensor::zeros({indices.size(), width()});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& src = x[indices[r]];
    std::copy(src.begin(), src.end(), t->data.begin() + static_cast<long>(r * width()));
  }
  return t;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.x.reserve(indices.size());
  for (std::size_t i : indices) {
    out.x.push_back(x[i]);
    if (!labels.empty()) out.labels.push_back(labels[i]);
  }
  return out;
}

TabularSchema fit_schema(const RawTable& table, const std::vector<ColumnDecl>& kinds,
                         const std::string& label_column,
                         const std::vector<std::size_t>* row_subset) {
  TabularSchema schema;
  schema.label_column = label_column;

  std::vector<std::size_t> all;
  if (!row_subset) {
    all.resize(table.rows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    row_subset = &all;
  }
  if (row_subset->empty()) throw DataError("fit_schema: no rows to fit on");

  for (const auto& decl : kinds) {
    const std::size_t col = table.column(decl.name);
    FeatureSpec f;
    f.name = decl.name;
    f.kind = decl.kind;
    if (decl.kind == ColumnKind::continuous) {
      double lo = 0.0, hi = 0.0;
      bool first = true;
      for (std::size_t r : *row_subset) {
        const double v = parse_number(table.rows[r][col], decl.name);
        if (first) {
          lo = hi = v;
          first = false;
        } else {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      if (!(lo < hi)) {
        throw DataError("column '" + decl.name + "' is constant; cannot min-max normalize");
      }
      f.min = lo;
      f.max = hi;
    } else {
      for (std::size_t r : *row_subset) {
        const std::string& cell = table.rows[r][col];
        if (std::find(f.vocabulary.begin(), f.vocabulary.end(), cell) == f.vocabulary.end()) {
          f.vocabulary.push_back(cell);
        }
      }
      if (f.vocabulary.empty()) throw DataError("column '" + decl.name + "': empty vocabulary");
    }
    schema.features.push_back(std::move(f));
  }

  if (!label_column.empty()) {
    const std::size_t col = table.column(label_column);
    for (std::size_t r : *row_subset) {
      const std::string& cell = table.rows[r][col];
      if (std::find(schema.label_values.begin(), schema.label_values.end(), cell) ==
          schema.label_values.end()) {
        schema.label_values.push_back(cell);
      }
    }
    // literal 0/1 labels keep their meaning regardless of appearance order
    if (schema.label_values.size() == 2 && schema.label_values[0] == "1" &&
        schema.label_values[1] == "0") {
      std::swap(schema.label_values[0], schema.label_values[1]);
    }
    if (schema.label_values.size() != 2) {
      throw DataError("label column '" + label_column + "' must have exactly 2 distinct values, found " +
                      std::to_string(schema.label_values.size()));
    }
  }
  return schema;
}

SchemaDecl read_schema_decl(const std::string& path) {
  SchemaDecl decl;
  for (const auto& e : parse_kv_file(path)) {
    if (e.section == "schema") {
      if (e.key == "label") {
        decl.label_column = e.value;
      } else {
        throw ConfigError("schema file: unknown key '" + e.key + "' in [schema]");
      }
    } else if (e.section == "columns") {
      ColumnKind kind;
      if (e.value == "continuous") {
        kind = ColumnKind::continuous;
      } else if (e.value == "categorical") {
        kind = ColumnKind::categorical;
      } else {
        throw ConfigError("schema file: column '" + e.key + "' has unknown kind '" + e.value +
                          "' (want continuous|categorical)");
      }
      decl.columns.push_back({e.key, kind});
    } else {
      throw ConfigError("schema file: unknown section '" + e.section + "'");
    }
  }
  if (decl.columns.empty()) throw ConfigError("schema file: no [columns] declared");
  return decl;
}

std::vector<double> preprocess_row(const std::vector<std::string>& row, const RawTable& table,
                                   const TabularSchema& schema, ClipStats* stats) {
  std::vector<double> out(schema.input_width(), 0.0);
  for (const auto& b : schema.blocks()) {
    const auto& f = schema.features[b.feature];
    const std::string& cell = row[table.column(f.name)];
    if (b.kind == ColumnKind::continuous) {
      const double raw = parse_number(cell, f.name);
      double v = (raw - f.min) / (f.max - f.min);
      if (v < 0.0 || v > 1.0) {
        v = std::clamp(v, 0.0, 1.0);
        if (stats) ++stats->clipped;
      }
      out[b.offset] = v;
    } else {
      const auto it = std::find(f.vocabulary.begin(), f.vocabulary.end(), cell);
      if (it == f.vocabulary.end()) {
        throw DataError("column '" + f.name + "': unseen category '" + cell + "'");
      }
      out[b.offset + static_cast<std::size_t>(it - f.vocabulary.begin())] = 1.0;
    }
  }
  return out;
}

Dataset preprocess_table(const RawTable& table, const TabularSchema& schema, ClipStats* stats) {
  Dataset ds;
  ds.x.reserve(table.rows.size());
  const bool with_labels = !schema.label_column.empty();
  std::size_t label_col = 0;
  if (with_labels) label_col = table.column(schema.label_column);
  for (const auto& row : table.rows) {
    ds.x.push_back(preprocess_row(row, table, schema, stats));
    if (with_labels) {
      const std::string& cell = row[label_col];
      const auto it =
          std::find(schema.label_values.begin(), schema.label_values.end(), cell);
      if (it == schema.label_values.end()) {
        throw DataError("label column: unseen label value '" + cell + "'");
      }
      ds.labels.push_back(static_cast<int>(it - schema.label_values.begin()));
    }
  }
  return ds;
}

std::vector<std::string> depreprocess_row(const std::vector<double>& v,
                                          const TabularSchema& schema) {
  if (v.size() != schema.input_width()) {
    throw DimensionError("depreprocess_row: vector width does not match schema");
  }
  std::vector<std::string> out(schema.features.size());
  for (const auto& b : schema.blocks()) {
    const auto& f = schema.features[b.feature];
    if (b.kind == ColumnKind::continuous) {
      const double clipped = std::clamp(v[b.offset], 0.0, 1.0);
      out[b.feature] = format_double(f.min + clipped * (f.max - f.min));
    } else {
      std::size_t best = 0;
      for (std::size_t j = 1; j < b.width; ++j) {
        if (v[b.offset + j] > v[b.offset + best]) best = j;
      }
      out[b.feature] = f.vocabulary[best];
    }
  }
  return out;
}

std::vector<double> sharpen_categorical_blocks(const std::vector<double>& v,
                                               const TabularSchema& schema, double t) {
  if (v.size() != schema.input_width()) {
    throw DimensionError("sharpen_categorical_blocks: vector width does not match schema");
  }
  if (!(t > 0.0)) throw ContractError("sharpen_categorical_blocks: temperature must be > 0");
  std::vector<double> out = v;
  for (const auto& b : schema.blocks()) {
    if (b.kind != ColumnKind::categorical) continue;
    double mx = out[b.offset];
    for (std::size_t j = 1; j < b.width; ++j) mx = std::max(mx, out[b.offset + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < b.width; ++j) {
      out[b.offset + j] = std::exp((out[b.offset + j] - mx) / t);
      z += out[b.offset + j];
    }
    for (std::size_t j = 0; j < b.width; ++j) out[b.offset + j] /= z;
  }
  return out;
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  if (n == 0) throw DataError("split: empty dataset");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(Rng::derive(spec.seed, 0x5714ULL + static_cast<std::uint64_t>(spec.repetition)));
  for (std::size_t i = n; i > 1; --i) {  // Fisher-Yates
    std::swap(order[i - 1], order[rng.index(i)]);
  }
  const auto n_train = static_cast<std::size_t>(spec.train_fraction * static_cast<double>(n));
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
  out.test.assign(order.begin() + static_cast<long>(n_train), order.end());
  return out;
}

RawTable NumericTable::to_raw_table(const std::string& label_column) const {
  RawTable t;
  t.header = column_names;
  const bool with_labels = !label_column.empty() && !labels.empty();
  if (with_labels) t.header.push_back(label_column);
  t.rows.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<std::string> row;
    row.reserve(t.header.size());
    for (double v : rows[r]) row.push_back(format_double(v));
    if (with_labels) row.push_back(std::to_string(labels[r]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

NumericTable synthetic_two_gaussians(std::size_t n_per_class, const std::array<double, 2>& mean0,
                                     const std::array<double, 2>& mean1, double stddev,
                                     std::size_t nuisance_dims, std::uint64_t seed) {
  if (!(stddev > 0.0)) throw ContractError("synthetic_two_gaussians: stddev must be > 0");
  NumericTable t;
  t.column_names = {"x1", "x2"};
  for (std::size_t j = 0; j < nuisance_dims; ++j) {
    t.column_names.push_back("n" + std::to_string(j + 1));
  }
  Rng rng(seed);
  for (int cls = 0; cls < 2; ++cls) {
    const auto& mean = cls == 0 ? mean0 : mean1;
    for (std::size_t i = 0; i < n_per_class; ++i) {
      std::vector<double> row;
      row.reserve(2 + nuisance_dims);
      row.push_back(mean[0] + stddev * rng.normal());
      row.push_back(mean[1] + stddev * rng.normal());
      for (std::size_t j = 0; j < nuisance_dims; ++j) row.push_back(rng.normal());
      t.rows.push_back(std::move(row));
      t.labels.push_back(cls);
    }
  }
  return t;
}

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("idx file truncated: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace

MnistData load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                         std::size_t limit) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw DataError("cannot open idx images file: " + images_path);
  std::ifstream lbl(labels_path, std::ios::binary);
  if (!lbl) throw DataError("cannot open idx labels file: " + labels_path);

  if (read_be_u32(img, images_path) != 0x00000803u) {
    throw DataError("bad idx magic in images file (want 0x00000803): " + images_path);
  }
  if (read_be_u32(lbl, labels_path) != 0x00000801u) {
    throw DataError("bad idx magic in labels file (want 0x00000801): " + labels_path);
  }
  const std::uint32_t n_img = read_be_u32(img, images_path);
  const std::uint32_t rows = read_be_u32(img, images_path);
  const std::uint32_t cols = read_be_u32(img, images_path);
  const std::uint32_t n_lbl = read_be_u32(lbl, labels_path);
  if (n_img != n_lbl) {
    throw DataError("idx image/label counts differ: " + std::to_string(n_img) + " vs " +
                    std::to_string(n_lbl));
  }
  if (rows != 28 || cols != 28) {
    throw DataError("idx dimension header mismatch: expected 28x28 images, got " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> buf(pixels);
  MnistData out;
  for (std::uint32_t i = 0; i < n_img; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<long>(pixels));
    if (!img) throw DataError("idx file truncated: " + images_path);
    char lc;
    lbl.read(&lc, 1);
    if (!lbl) throw DataError("idx file truncated: " + labels_path);
    const int digit = static_cast<unsigned char>(lc);
    if (digit != 1 && digit != 7) continue;
    if (limit > 0 && out.dataset.size() >= limit) continue;
    std::vector<double> v(pixels);
    for (std::size_t p = 0; p < pixels; ++p) v[p] = static_cast<double>(buf[p]) / 255.0;
    out.dataset.x.push_back(std::move(v));
    out.dataset.labels.push_back(digit == 7 ? 1 : 0);
  }
  if (out.dataset.size() == 0) throw DataError("idx files contain no digit-1/7 samples");

  out.schema.label_column = "digit";
  out.schema.label_values = {"1", "7"};
  out.schema.features.reserve(pixels);
  for (std::size_t p = 0; p < pixels; ++p) {
    FeatureSpec f;
    f.name = "px" + std::to_string(p);
    f.kind = ColumnKind::continuous;
    f.min = 0.0;
    f.max = 255.0;
    out.schema.features.push_back(std::move(f));
  }
  return out;
}

std::pair<double, double> class_weights(const std::vector<int>& labels) {
  std::size_t n0 = 0, n1 = 0;
  for (int y : labels) (y == 0 ? n0 : n1)++;
  if (n0 == 0 || n1 == 0) throw DataError("class_weights: dataset contains a single class");
  const double n = static_cast<double>(labels.size());
  return {n / (2.0 * static_cast<double>(n0)), n / (2.0 * static_cast<double>(n1))};
}

}  // namespace gmce
