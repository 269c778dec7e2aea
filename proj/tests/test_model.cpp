#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gmce/model.hpp"

using namespace gmce;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("gmce_model_" + name)).string();
}

Dataset separable_2d(std::size_t n_per_class, std::uint64_t seed) {
  auto table = synthetic_two_gaussians(n_per_class, {-2.0, 0.0}, {2.0, 0.0}, 0.5, 0, seed);
  Dataset ds;
  // already near [0,1] scale after min-max; do it by hand to avoid schema ceremony
  double lo0 = 1e300, hi0 = -1e300, lo1 = 1e300, hi1 = -1e300;
  for (const auto& r : table.rows) {
    lo0 = std::min(lo0, r[0]);
    hi0 = std::max(hi0, r[0]);
    lo1 = std::min(lo1, r[1]);
    hi1 = std::max(hi1, r[1]);
  }
  for (const auto& r : table.rows) {
    ds.x.push_back({(r[0] - lo0) / (hi0 - lo0), (r[1] - lo1) / (hi1 - lo1)});
  }
  ds.labels = table.labels;
  return ds;
}

TabularSchema mixed_schema() {
  auto table = read_csv_text(
      "a,b,c,y\n"
      "0,u,10,0\n"
      "5,v,30,1\n"
      "2.5,w,20,0\n");
  return fit_schema(table, {{"a", ColumnKind::continuous},
                            {"b", ColumnKind::categorical},
                            {"c", ColumnKind::continuous}},
                    "y");
}

}  // namespace

TEST_CASE("network spec") {
  auto spec = NetworkSpec::chain({5, 12, 3}, Activation::leaky_relu, Activation::none);
  CHECK(spec.input_width() == 5);
  CHECK(spec.output_width() == 3);
  CHECK(spec.layers[0].act == Activation::leaky_relu);
  CHECK(spec.layers[1].act == Activation::none);

  auto round = NetworkSpec::deserialize(spec.serialize());
  CHECK(round.serialize() == spec.serialize());

  NetworkSpec broken;
  broken.layers = {{5, 12, Activation::relu}, {13, 3, Activation::none}};
  CHECK_THROWS_AS(broken.validate(), DimensionError);
}

TEST_CASE("mlp determinism and shapes") {
  auto spec = NetworkSpec::chain({4, 8, 2}, Activation::relu, Activation::none);
  Mlp a(spec, 9);
  Mlp b(spec, 9);
  auto pa = a.parameters();
  auto pb = b.parameters();
  CHECK(hash_params(pa) == hash_params(pb));

  Mlp c(spec, 10);
  auto pc = c.parameters();
  CHECK(hash_params(pa) != hash_params(pc));

  auto x = Tensor::zeros({3, 4});
  CHECK(a.forward(nullptr, x)->shape == std::vector<std::size_t>{3, 2});
  CHECK_THROWS_AS(a.forward(nullptr, Tensor::zeros({3, 5})), DimensionError);
}

TEST_CASE("autoencoder encode decode contracts") {
  AutoencoderConfig cfg;
  cfg.input_width = 5;
  cfg.continuous_width = 5;
  cfg.validate();
  DisentangledAutoencoder model(cfg, 77);

  auto x = seeded_normal_init({1, 5}, 3, 0.3);
  auto [z, z_u] = model.encode(nullptr, x);
  CHECK(z->shape == std::vector<std::size_t>{1, 3});
  CHECK(z_u->shape == std::vector<std::size_t>{1, 6});

  // determinism of the forward pass
  auto [z2, z_u2] = model.encode(nullptr, x);
  CHECK(z->data == z2->data);
  CHECK(z_u->data == z_u2->data);

  auto xp = model.decode(nullptr, z, z_u);
  CHECK(xp->shape == std::vector<std::size_t>{1, 5});

  // different latents decode to different outputs
  auto other = model.decode(nullptr, seeded_normal_init({1, 3}, 5, 1.0),
                            seeded_normal_init({1, 6}, 6, 1.0));
  CHECK(other->data != xp->data);

  CHECK_THROWS_AS(model.decode(nullptr, z_u, z), DimensionError);

  // decode_full equals decode on the concatenated latent
  auto full = ops::concat_cols(nullptr, z, z_u);
  CHECK(model.decode_full(nullptr, full)->data == xp->data);
}

TEST_CASE("decoder emits valid categorical scores") {
  auto schema = mixed_schema();
  auto cfg = AutoencoderConfig::tabular_defaults(schema);
  CHECK(cfg.input_width == 5);  // 2 continuous + 3 one-hot
  CHECK(cfg.continuous_width == 2);
  CHECK(cfg.categorical_blocks == std::vector<std::size_t>{3});

  DisentangledAutoencoder model(cfg, 12);
  auto x = seeded_normal_init({4, 5}, 8, 0.5);
  auto xp = model.reconstruct(nullptr, x);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(std::fabs(xp->at(r, 0)) < 1.0);  // tanh range
    CHECK(std::fabs(xp->at(r, 1)) < 1.0);
    const double s = xp->at(r, 2) + xp->at(r, 3) + xp->at(r, 4);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));  // softmax block
  }
}

TEST_CASE("gm head variances stay positive under optimizer steps") {
  auto gm = GaussianMixtureHead::init(3, 5);
  AdamState opt(AdamConfig{.lr = 0.5}, gm.parameters());
  Rng rng(2);
  for (int step = 0; step < 50; ++step) {
    for (auto& p : gm.parameters()) {
      p->ensure_grad();
      for (double& gv : p->grad) gv = rng.normal();
    }
    opt.step();
  }
  for (int c = 0; c < 2; ++c) {
    for (double lv : gm.log_var(c)->data) {
      CHECK(std::exp(lv) > 0.0);
      CHECK(std::isfinite(std::exp(lv)));
    }
  }
}

TEST_CASE("pretrain classifier reaches oracle accuracy on separable data") {
  auto train_ds = separable_2d(400, 21);
  auto test_ds = separable_2d(100, 22);

  auto spec = NetworkSpec::chain({2, 10, 4, 1}, Activation::relu, Activation::sigmoid);
  auto clf = pretrain_classifier(train_ds, spec, 30, {1.0, 1.0}, 33, AdamConfig{.lr = 3e-3});
  CHECK(clf.frozen);

  auto scores = clf.scores(test_ds);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    hits += (scores[i] >= 0.5 ? 1 : 0) == test_ds.labels[i];
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(scores.size()) >= 0.98);

  // zero epochs: small-init sigmoid head stays near 0.5
  auto raw = pretrain_classifier(train_ds, spec, 0, {1.0, 1.0}, 33);
  for (double s : raw.scores(test_ds)) CHECK(std::fabs(s - 0.5) < 0.25);

  Dataset single;
  single.x = {{0.1, 0.2}, {0.3, 0.4}};
  single.labels = {1, 1};
  CHECK_THROWS_AS(pretrain_classifier(single, spec, 1, {1.0, 1.0}, 1), DataError);
}

TEST_CASE("classifier archive round trip") {
  auto ds = separable_2d(50, 3);
  auto spec = NetworkSpec::chain({2, 6, 1}, Activation::relu, Activation::sigmoid);
  auto clf = pretrain_classifier(ds, spec, 3, {1.0, 1.0}, 4);

  auto schema = mixed_schema();
  const auto path = tmp_path("clf.gmce");
  save_classifier_archive(path, clf, schema, {{"config.note", "unit"}});

  auto loaded = load_classifier_archive(path);
  CHECK(loaded.classifier.frozen);
  CHECK(loaded.classifier.parameter_hash() == clf.parameter_hash());
  CHECK(loaded.schema.features.size() == schema.features.size());
  CHECK(loaded.schema.features[1].vocabulary == schema.features[1].vocabulary);
  CHECK(loaded.schema.features[0].min == schema.features[0].min);  // bit exact

  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x = {rng.uniform(), rng.uniform()};
    CHECK(loaded.classifier.score_row(x) == clf.score_row(x));
  }
}

TEST_CASE("model archive round trip is bit exact") {
  auto schema = mixed_schema();
  auto cfg = AutoencoderConfig::tabular_defaults(schema);
  DisentangledAutoencoder model(cfg, 91);
  AdversarialClassifier adv(cfg.d_u, {16, 8}, 92);

  const auto path = tmp_path("model.gmce");
  save_model_archive(path, model, adv, schema, {{"config.lambda_lkd", "0.5"}});
  auto loaded = load_model_archive(path);

  auto p1 = model.all_parameters();
  auto p2 = loaded.model.all_parameters();
  CHECK(hash_params(p1) == hash_params(p2));
  auto a1 = adv.parameters();
  auto a2 = loaded.adversary.parameters();
  CHECK(hash_params(a1) == hash_params(a2));

  Rng rng(17);
  for (int i = 0; i < 100; ++i) {
    auto x = Tensor::zeros({1, cfg.input_width});
    for (double& v : x->data) v = rng.uniform();
    auto [z_a, zu_a] = model.encode(nullptr, x);
    auto [z_b, zu_b] = loaded.model.encode(nullptr, x);
    CHECK(z_a->data == z_b->data);
    CHECK(zu_a->data == zu_b->data);
    CHECK(model.decode(nullptr, z_a, zu_a)->data ==
          loaded.model.decode(nullptr, z_b, zu_b)->data);
  }

  // metadata echo survives
  bool found = false;
  for (const auto& [k, v] : loaded.meta) {
    if (k == "config.lambda_lkd" && v == "0.5") found = true;
  }
  CHECK(found);
}

TEST_CASE("archive rejects corruption and unknown versions") {
  const auto garbage = tmp_path("garbage.gmce");
  {
    std::ofstream f(garbage, std::ios::binary);
    f << "definitely not an archive";
  }
  CHECK_THROWS_AS(load_model_archive(garbage), ArchiveError);

  // right magic, future version
  const auto future = tmp_path("future.gmce");
  {
    std::ofstream f(future, std::ios::binary);
    f.write("GMCEARCV", 8);
    const std::uint32_t version = 999;
    f.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint64_t meta_len = 0;
    f.write(reinterpret_cast<const char*>(&meta_len), 8);
  }
  CHECK_THROWS_WITH_AS(load_model_archive(future),
                       doctest::Contains("unsupported archive format version"), ArchiveError);

  CHECK_THROWS_AS(load_model_archive(tmp_path("does_not_exist.gmce")), ArchiveError);
}
