#include "gmce/model.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gmce/losses.hpp"

static_assert(std::endian::native == std::endian::little,
              "archive I/O assumes a little-endian host");

namespace gmce {

Activation activation_from_string(const std::string& s) {
  if (s == "none") return Activation::none;
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "none";
}

NetworkSpec NetworkSpec::chain(const std::vector<std::size_t>& widths, Activation hidden,
                               Activation last) {
  NetworkSpec spec;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    spec.layers.push_back(
        {widths[i], widths[i + 1], i + 2 == widths.size() ? last : hidden});
  }
  spec.validate();
  return spec;
}

std::size_t NetworkSpec::input_width() const {
  if (layers.empty()) throw ContractError("empty network spec");
  return layers.front().in;
}

std::size_t NetworkSpec::output_width() const {
  if (layers.empty()) throw ContractError("empty network spec");
  return layers.back().out;
}

void NetworkSpec::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in == 0 || layers[i].out == 0) {
      throw DimensionError("network spec: zero layer width");
    }
    if (i > 0 && layers[i - 1].out != layers[i].in) {
      throw DimensionError("network spec: consecutive layers do not chain");
    }
  }
}

std::string NetworkSpec::serialize() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) out << ',';
    out << layers[i].in << '-' << layers[i].out << ':' << to_string(layers[i].act);
  }
  return out.str();
}

NetworkSpec NetworkSpec::deserialize(const std::string& text) {
  NetworkSpec spec;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::size_t dash = item.find('-');
    const std::size_t colon = item.find(':');
    if (dash == std::string::npos || colon == std::string::npos || colon < dash) {
      throw ArchiveError("bad network spec fragment '" + item + "'");
    }
    LayerSpec l;
    l.in = std::stoul(item.substr(0, dash));
    l.out = std::stoul(item.substr(dash + 1, colon - dash - 1));
    l.act = activation_from_string(item.substr(colon + 1));
    spec.layers.push_back(l);
  }
  spec.validate();
  return spec;
}

Mlp::Mlp(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    const double scale = 1.0 / std::sqrt(static_cast<double>(l.in));
    weights_.push_back(seeded_normal_init({l.in, l.out}, Rng::derive(seed, 101 + i), scale));
    biases_.push_back(Tensor::zeros({l.out}));
  }
}

TensorPtr Mlp::forward(Graph* g, const TensorPtr& x) const {
  if (!spec_.layers.empty() && x->cols() != spec_.input_width()) {
    throw DimensionError("mlp forward: input width " + std::to_string(x->cols()) +
                         " does not match spec width " + std::to_string(spec_.input_width()));
  }
  TensorPtr h = x;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    h = ops::dense(g, h, weights_[i], biases_[i], spec_.layers[i].act);
  }
  return h;
}

std::vector<TensorPtr> Mlp::parameters() const {
  std::vector<TensorPtr> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back(weights_[i]);
    out.push_back(biases_[i]);
  }
  return out;
}

GaussianMixtureHead GaussianMixtureHead::init(std::size_t d_z, std::uint64_t seed) {
  GaussianMixtureHead gm;
  gm.mean_0 = seeded_normal_init({d_z}, Rng::derive(seed, 211), 1.0);
  gm.mean_1 = seeded_normal_init({d_z}, Rng::derive(seed, 212), 1.0);
  gm.log_var_0 = Tensor::zeros({d_z});
  gm.log_var_1 = Tensor::zeros({d_z});
  return gm;
}

std::vector<TensorPtr> GaussianMixtureHead::parameters() const {
  return {mean_0, log_var_0, mean_1, log_var_1};
}

double GaussianMixtureHead::mahalanobis2(std::span<const double> z, int c) const {
  if (z.size() != dim()) throw DimensionError("mahalanobis2: width mismatch");
  const auto& mu = mean(c);
  const auto& lv = log_var(c);
  double acc = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    const double diff = z[j] - mu->data[j];
    acc += diff * diff * std::exp(-lv->data[j]);
  }
  return acc;
}

std::size_t DecoderConfig::output_width() const {
  std::size_t w = continuous_width;
  for (std::size_t b : categorical_blocks) w += b;
  return w;
}

Decoder::Decoder(DecoderConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  if (cfg_.trunk_widths.empty()) throw ContractError("decoder: empty trunk widths");
  if (cfg_.output_width() == 0) throw ContractError("decoder: zero output width");
  if (cfg_.trunk_widths.size() > 1) {
    trunk_ = Mlp(NetworkSpec::chain(cfg_.trunk_widths, Activation::leaky_relu,
                                    Activation::leaky_relu),
                 Rng::derive(seed, 1));
  }
  const std::size_t hw = cfg_.trunk_widths.back();
  if (cfg_.continuous_width > 0) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(hw));
    cont_w_ = seeded_normal_init({hw, cfg_.continuous_width}, Rng::derive(seed, 2), scale);
    cont_b_ = Tensor::zeros({cfg_.continuous_width});
  }
  if (!cfg_.categorical_blocks.empty()) {
    std::size_t cat_total = 0;
    for (std::size_t b : cfg_.categorical_blocks) cat_total += b;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hw));
    cat_w_ = seeded_normal_init({hw, cat_total}, Rng::derive(seed, 3), scale);
    cat_b_ = Tensor::zeros({cat_total});
  }
}

TensorPtr Decoder::forward(Graph* g, const TensorPtr& z_full) const {
  if (z_full->cols() != input_width()) {
    throw DimensionError("decoder forward: latent width mismatch");
  }
  TensorPtr h = cfg_.trunk_widths.size() > 1 ? trunk_.forward(g, z_full) : z_full;
  TensorPtr cont, cat;
  if (cont_w_) {
    cont = ops::dense(g, h, cont_w_, cont_b_, Activation::tanh);
  }
  if (cat_w_) {
    auto logits = ops::dense(g, h, cat_w_, cat_b_, Activation::none);
    std::size_t off = 0;
    for (std::size_t w : cfg_.categorical_blocks) {
      auto block = ops::softmax_t(g, ops::slice_cols(g, logits, off, w), 1.0);
      cat = cat ? ops::concat_cols(g, cat, block) : block;
      off += w;
    }
  }
  if (cont && cat) return ops::concat_cols(g, cont, cat);
  return cont ? cont : cat;
}

std::vector<TensorPtr> Decoder::parameters() const {
  std::vector<TensorPtr> out = trunk_.parameters();
  if (cont_w_) {
    out.push_back(cont_w_);
    out.push_back(cont_b_);
  }
  if (cat_w_) {
    out.push_back(cat_w_);
    out.push_back(cat_b_);
  }
  return out;
}

AutoencoderConfig AutoencoderConfig::tabular_defaults(const TabularSchema& schema) {
  AutoencoderConfig cfg;
  cfg.input_width = schema.input_width();
  cfg.continuous_width = schema.continuous_count();
  for (const auto& b : schema.blocks()) {
    if (b.kind == ColumnKind::categorical) cfg.categorical_blocks.push_back(b.width);
  }
  cfg.validate();
  return cfg;
}

AutoencoderConfig AutoencoderConfig::mnist_defaults() {
  AutoencoderConfig cfg;
  cfg.input_width = 784;
  cfg.d_z = 15;
  cfg.d_u = 25;
  cfg.encoder_hidden = {128, 64};
  cfg.decoder_hidden = {64, 128};
  cfg.continuous_width = 784;
  cfg.validate();
  return cfg;
}

void AutoencoderConfig::validate() const {
  if (input_width == 0 || d_z == 0 || d_u == 0) {
    throw ContractError("autoencoder config: zero widths");
  }
  std::size_t cat = 0;
  for (std::size_t b : categorical_blocks) cat += b;
  if (continuous_width + cat != input_width) {
    throw DimensionError("autoencoder config: block widths do not sum to input width");
  }
}

DisentangledAutoencoder::DisentangledAutoencoder(const AutoencoderConfig& cfg, std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  std::vector<std::size_t> enc = {cfg_.input_width};
  enc.insert(enc.end(), cfg_.encoder_hidden.begin(), cfg_.encoder_hidden.end());
  auto enc_z = enc;
  enc_z.push_back(cfg_.d_z);
  auto enc_u = enc;
  enc_u.push_back(cfg_.d_u);
  encoder = Mlp(NetworkSpec::chain(enc_z, Activation::leaky_relu, Activation::none),
                Rng::derive(seed, 11));
  encoder_u = Mlp(NetworkSpec::chain(enc_u, Activation::leaky_relu, Activation::none),
                  Rng::derive(seed, 12));

  DecoderConfig dec;
  dec.trunk_widths = {cfg_.d_z + cfg_.d_u};
  dec.trunk_widths.insert(dec.trunk_widths.end(), cfg_.decoder_hidden.begin(),
                          cfg_.decoder_hidden.end());
  dec.continuous_width = cfg_.continuous_width;
  dec.categorical_blocks = cfg_.categorical_blocks;
  decoder = Decoder(dec, Rng::derive(seed, 13));

  gm = GaussianMixtureHead::init(cfg_.d_z, Rng::derive(seed, 14));
}

std::pair<TensorPtr, TensorPtr> DisentangledAutoencoder::encode(Graph* g,
                                                                const TensorPtr& x) const {
  return {encoder.forward(g, x), encoder_u.forward(g, x)};
}

TensorPtr DisentangledAutoencoder::decode(Graph* g, const TensorPtr& z,
                                          const TensorPtr& z_u) const {
  if (z->cols() != cfg_.d_z || z_u->cols() != cfg_.d_u) {
    throw DimensionError("decode: latent widths do not match d_z/d_u");
  }
  return decoder.forward(g, ops::concat_cols(g, z, z_u));
}

TensorPtr DisentangledAutoencoder::decode_full(Graph* g, const TensorPtr& z_full) const {
  return decoder.forward(g, z_full);
}

TensorPtr DisentangledAutoencoder::reconstruct(Graph* g, const TensorPtr& x) const {
  auto [z, z_u] = encode(g, x);
  return decode(g, z, z_u);
}

std::vector<TensorPtr> DisentangledAutoencoder::all_parameters() const {
  std::vector<TensorPtr> out = encoder.parameters();
  for (auto& p : encoder_u.parameters()) out.push_back(p);
  for (auto& p : decoder.parameters()) out.push_back(p);
  for (auto& p : gm.parameters()) out.push_back(p);
  return out;
}

AdversarialClassifier::AdversarialClassifier(std::size_t d_u,
                                             const std::vector<std::size_t>& hidden,
                                             std::uint64_t seed) {
  std::vector<std::size_t> widths = {d_u};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  net = Mlp(NetworkSpec::chain(widths, Activation::leaky_relu, Activation::sigmoid),
            Rng::derive(seed, 21));
}

double AdversarialClassifier::accuracy(const TensorPtr& z_u,
                                       const std::vector<int>& labels) const {
  auto pred = net.forward(nullptr, z_u);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    hits += (pred->data[i] >= 0.5 ? 1 : 0) == labels[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double FrozenClassifier::score_row(const std::vector<double>& x) const {
  auto t = Tensor::from({1, x.size()}, std::vector<double>(x));
  return net.forward(nullptr, t)->data[0];
}

std::vector<double> FrozenClassifier::scores(const Dataset& ds) const {
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto pred = net.forward(nullptr, ds.batch(idx));
  return pred->data;
}

std::uint64_t FrozenClassifier::parameter_hash() const {
  auto params = net.parameters();
  return hash_params(params);
}

FrozenClassifier pretrain_classifier(const Dataset& train, const NetworkSpec& spec, int epochs,
                                     std::pair<double, double> weights, std::uint64_t seed,
                                     AdamConfig adam, std::size_t batch_size) {
  if (train.size() == 0) throw DataError("pretrain_classifier: empty dataset");
  bool has0 = false, has1 = false;
  for (int y : train.labels) (y == 0 ? has0 : has1) = true;
  if (!has0 || !has1) {
    throw DataError("pretrain_classifier: dataset contains a single class");
  }

  FrozenClassifier clf;
  clf.net = Mlp(spec, Rng::derive(seed, 301));
  auto params = clf.net.parameters();
  AdamState opt(adam, params);
  Rng batch_rng(Rng::derive(seed, 302));
  const std::size_t n = train.size();
  const std::size_t steps = std::max<std::size_t>(1, n / batch_size);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<std::size_t> idx(std::min(batch_size, n));
      std::vector<int> y(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = batch_rng.index(n);
        y[i] = train.labels[idx[i]];
      }
      Graph g;
      auto pred = clf.net.forward(&g, train.batch(idx));
      auto loss = losses::bce_loss(&g, pred, y, weights.first, weights.second);
      zero_grads(params);
      g.backward(loss);
      opt.step();
    }
  }
  clf.frozen = true;
  return clf;
}

// ---------------------------------------------------------------------------
// Archive container
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'G', 'M', 'C', 'E', 'A', 'R', 'C', 'V'};
constexpr std::uint32_t kFormatVersion = 1;

std::string escape_meta(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out += c;
    }
  }
  return out;
}

std::string unescape_meta(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      out += s[i + 1] == 'n' ? '\n' : s[i + 1];
      ++i;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::string hexfloat(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

class ArchiveWriter {
 public:
  explicit ArchiveWriter(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw ArchiveError("cannot open archive for writing: " + path);
  }

  void meta(const std::string& key, const std::string& value) {
    meta_ << escape_meta(key) << '=' << escape_meta(value) << '\n';
  }
  void meta(const std::string& key, std::size_t v) { meta(key, std::to_string(v)); }
  void meta_double(const std::string& key, double v) { meta(key, hexfloat(v)); }

  void finish(std::span<const TensorPtr> blocks) {
    out_.write(kMagic, sizeof(kMagic));
    write_u32(kFormatVersion);
    const std::string meta = meta_.str();
    write_u64(meta.size());
    out_.write(meta.data(), static_cast<long>(meta.size()));
    for (const auto& t : blocks) {
      write_u64(t->data.size());
      out_.write(reinterpret_cast<const char*>(t->data.data()),
                 static_cast<long>(t->data.size() * sizeof(double)));
    }
    out_.flush();
    if (!out_) throw ArchiveError("write failed: " + path_);
  }

 private:
  void write_u32(std::uint32_t v) { out_.write(reinterpret_cast<const char*>(&v), 4); }
  void write_u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), 8); }

  std::ofstream out_;
  std::string path_;
  std::ostringstream meta_;
};

class ArchiveReader {
 public:
  explicit ArchiveReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw ArchiveError("cannot open archive: " + path);
    char magic[8];
    in_.read(magic, sizeof(magic));
    if (!in_ || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
      throw ArchiveError("corrupt archive (bad magic): " + path);
    }
    const std::uint32_t version = read_u32();
    if (version != kFormatVersion) {
      throw ArchiveError("unsupported archive format version " + std::to_string(version) +
                         " (this build reads version " + std::to_string(kFormatVersion) +
                         "): " + path);
    }
    const std::uint64_t meta_len = read_u64();
    std::string meta(meta_len, '\0');
    in_.read(meta.data(), static_cast<long>(meta_len));
    if (!in_) throw ArchiveError("truncated archive metadata: " + path);
    std::istringstream lines(meta);
    std::string line;
    while (std::getline(lines, line)) {
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) throw ArchiveError("corrupt metadata line: " + path);
      entries_.emplace_back(unescape_meta(line.substr(0, eq)),
                            unescape_meta(line.substr(eq + 1)));
    }
  }

  const MetaEntries& entries() const { return entries_; }

  bool has(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return true;
    }
    return false;
  }

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return v;
    }
    throw ArchiveError("archive missing metadata key '" + key + "': " + path_);
  }

  std::size_t get_size(const std::string& key) const {
    return static_cast<std::size_t>(std::stoull(get(key)));
  }

  double get_double(const std::string& key) const {
    const std::string& s = get(key);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
      throw ArchiveError("archive metadata key '" + key + "' is not a number");
    }
    return v;
  }

  /// Read the next parameter block into the tensor (shape already set).
  void read_block(Tensor& t) {
    const std::uint64_t count = read_u64();
    if (count != t.data.size()) {
      throw ArchiveError("parameter block size mismatch (" + std::to_string(count) + " vs " +
                         std::to_string(t.data.size()) + "): " + path_);
    }
    in_.read(reinterpret_cast<char*>(t.data.data()),
             static_cast<long>(count * sizeof(double)));
    if (!in_) throw ArchiveError("truncated parameter block: " + path_);
  }

  void read_blocks(std::span<const TensorPtr> tensors) {
    for (const auto& t : tensors) read_block(*t);
  }

 private:
  std::uint32_t read_u32() {
    std::uint32_t v = 0;
    in_.read(reinterpret_cast<char*>(&v), 4);
    if (!in_) throw ArchiveError("truncated archive header: " + path_);
    return v;
  }
  std::uint64_t read_u64() {
    std::uint64_t v = 0;
    in_.read(reinterpret_cast<char*>(&v), 8);
    if (!in_) throw ArchiveError("truncated archive: " + path_);
    return v;
  }

  std::ifstream in_;
  std::string path_;
  MetaEntries entries_;
};

void write_schema_meta(ArchiveWriter& w, const TabularSchema& schema) {
  w.meta("schema.label", schema.label_column);
  for (std::size_t i = 0; i < schema.label_values.size(); ++i) {
    w.meta("schema.label_value." + std::to_string(i), schema.label_values[i]);
  }
  w.meta("schema.nfeatures", schema.features.size());
  for (std::size_t i = 0; i < schema.features.size(); ++i) {
    const auto& f = schema.features[i];
    const std::string p = "schema.feature." + std::to_string(i) + ".";
    w.meta(p + "name", f.name);
    w.meta(p + "kind", f.kind == ColumnKind::continuous ? "continuous" : "categorical");
    if (f.kind == ColumnKind::continuous) {
      w.meta_double(p + "min", f.min);
      w.meta_double(p + "max", f.max);
    } else {
      w.meta(p + "nvocab", f.vocabulary.size());
      for (std::size_t j = 0; j < f.vocabulary.size(); ++j) {
        w.meta(p + "vocab." + std::to_string(j), f.vocabulary[j]);
      }
    }
  }
}

TabularSchema read_schema_meta(const ArchiveReader& r) {
  TabularSchema schema;
  schema.label_column = r.get("schema.label");
  for (std::size_t i = 0; r.has("schema.label_value." + std::to_string(i)); ++i) {
    schema.label_values.push_back(r.get("schema.label_value." + std::to_string(i)));
  }
  const std::size_t n = r.get_size("schema.nfeatures");
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "schema.feature." + std::to_string(i) + ".";
    FeatureSpec f;
    f.name = r.get(p + "name");
    const std::string kind = r.get(p + "kind");
    if (kind == "continuous") {
      f.kind = ColumnKind::continuous;
      f.min = r.get_double(p + "min");
      f.max = r.get_double(p + "max");
    } else {
      f.kind = ColumnKind::categorical;
      const std::size_t nv = r.get_size(p + "nvocab");
      for (std::size_t j = 0; j < nv; ++j) {
        f.vocabulary.push_back(r.get(p + "vocab." + std::to_string(j)));
      }
    }
    schema.features.push_back(std::move(f));
  }
  return schema;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ',';
    out << v[i];
  }
  return out.str();
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(std::stoul(item));
  }
  return out;
}

}  // namespace

void save_classifier_archive(const std::string& path, const FrozenClassifier& classifier,
                             const TabularSchema& schema, const MetaEntries& extra) {
  ArchiveWriter w(path);
  w.meta("kind", "classifier");
  w.meta("net.spec", classifier.net.spec().serialize());
  write_schema_meta(w, schema);
  for (const auto& [k, v] : extra) w.meta(k, v);
  auto params = classifier.net.parameters();
  w.finish(params);
}

LoadedClassifier load_classifier_archive(const std::string& path) {
  ArchiveReader r(path);
  if (r.get("kind") != "classifier") {
    throw ArchiveError("archive is not a classifier archive: " + path);
  }
  LoadedClassifier out;
  out.classifier.net = Mlp(NetworkSpec::deserialize(r.get("net.spec")), 0);
  out.classifier.frozen = true;
  out.schema = read_schema_meta(r);
  out.meta = r.entries();
  auto params = out.classifier.net.parameters();
  r.read_blocks(params);
  return out;
}

void save_model_archive(const std::string& path, const DisentangledAutoencoder& model,
                        const AdversarialClassifier& adversary, const TabularSchema& schema,
                        const MetaEntries& extra) {
  const auto& cfg = model.config();
  ArchiveWriter w(path);
  w.meta("kind", "autoencoder");
  w.meta("ae.input_width", cfg.input_width);
  w.meta("ae.d_z", cfg.d_z);
  w.meta("ae.d_u", cfg.d_u);
  w.meta("ae.encoder_hidden", join_sizes(cfg.encoder_hidden));
  w.meta("ae.decoder_hidden", join_sizes(cfg.decoder_hidden));
  w.meta("ae.continuous_width", cfg.continuous_width);
  w.meta("ae.categorical_blocks", join_sizes(cfg.categorical_blocks));
  w.meta("adv.spec", adversary.net.spec().serialize());
  write_schema_meta(w, schema);
  for (const auto& [k, v] : extra) w.meta(k, v);

  std::vector<TensorPtr> blocks = model.all_parameters();
  for (auto& p : adversary.parameters()) blocks.push_back(p);
  w.finish(blocks);
}

LoadedModel load_model_archive(const std::string& path) {
  ArchiveReader r(path);
  if (r.get("kind") != "autoencoder") {
    throw ArchiveError("archive is not an autoencoder archive: " + path);
  }
  AutoencoderConfig cfg;
  cfg.input_width = r.get_size("ae.input_width");
  cfg.d_z = r.get_size("ae.d_z");
  cfg.d_u = r.get_size("ae.d_u");
  cfg.encoder_hidden = split_sizes(r.get("ae.encoder_hidden"));
  cfg.decoder_hidden = split_sizes(r.get("ae.decoder_hidden"));
  cfg.continuous_width = r.get_size("ae.continuous_width");
  cfg.categorical_blocks = split_sizes(r.get("ae.categorical_blocks"));

  LoadedModel out;
  out.model = DisentangledAutoencoder(cfg, 0);
  const auto adv_spec = NetworkSpec::deserialize(r.get("adv.spec"));
  out.adversary.net = Mlp(adv_spec, 0);
  out.schema = read_schema_meta(r);
  out.meta = r.entries();

  std::vector<TensorPtr> blocks = out.model.all_parameters();
  for (auto& p : out.adversary.parameters()) blocks.push_back(p);
  r.read_blocks(blocks);
  return out;
}

}  // namespace gmce
